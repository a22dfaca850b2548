//! Pole and amplitude extraction from outcome-frequency signals.

mod dft;
mod epfit;
mod pencil;
mod varpro;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use dft::{dft_spectrum, DftSpectrum};
pub use epfit::{ep_model_fit, EpFit, EpModelKind, ModelFit};
pub use pencil::{ls_amplitudes, matrix_pencil, ModelOrder, PencilConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedPole {
    pub pole: Complex64,
    pub amplitude: Complex64,
}

impl EstimatedPole {
    pub fn phase(&self) -> f64 {
        self.pole.arg()
    }

    pub fn phase_deg(&self) -> f64 {
        self.pole.arg().to_degrees()
    }

    pub fn magnitude(&self) -> f64 {
        self.pole.norm()
    }
}

#[derive(Debug, Clone, Default)]
pub struct EstimatedSpectrum {
    pub poles: Vec<EstimatedPole>,
    /// RMS reconstruction error.
    pub residual: f64,
    /// Poles dropped for lying outside the admissible disk.
    pub discarded: Vec<Complex64>,
}

/// One row of the spectrum JSON/CSV formats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub arg_deg: f64,
    pub amp_re: f64,
    pub amp_im: f64,
}

impl EstimatedSpectrum {
    pub fn values(&self) -> Vec<Complex64> {
        self.poles.iter().map(|p| p.pole).collect()
    }

    /// Records sorted by phase (degrees) and then modulus.
    pub fn records(&self) -> Vec<SpectrumRecord> {
        let mut r: Vec<SpectrumRecord> = self
            .poles
            .iter()
            .map(|p| SpectrumRecord {
                re: p.pole.re,
                im: p.pole.im,
                abs: p.pole.norm(),
                arg_deg: p.pole.arg().to_degrees(),
                amp_re: p.amplitude.re,
                amp_im: p.amplitude.im,
            })
            .collect();
        r.sort_by(|a, b| a.arg_deg.total_cmp(&b.arg_deg).then(a.abs.total_cmp(&b.abs)));
        r
    }

    pub fn from_records(records: &[SpectrumRecord]) -> Self {
        EstimatedSpectrum {
            poles: records
                .iter()
                .map(|r| EstimatedPole { pole: Complex64::new(r.re, r.im), amplitude: Complex64::new(r.amp_re, r.amp_im) })
                .collect(),
            residual: f64::NAN,
            discarded: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.records())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<SpectrumRecord> = serde_json::from_str(text)?;
        Ok(Self::from_records(&records))
    }

    /// Model value at sample index k (cycle m = k + 1).
    pub fn evaluate(&self, k: usize) -> f64 {
        self.poles.iter().map(|p| (p.amplitude * p.pole.powu(k as u32)).re).sum()
    }
}
