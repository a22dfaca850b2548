use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct DftSpectrum {
    /// Normalized frequency k/N in cycles per sample, 0..=0.5.
    pub frequencies: Vec<f64>,
    /// |DFT| / N at those frequencies.
    pub magnitudes: Vec<f64>,
    /// Local maxima of the zero-padded, mean-removed spectrum, strongest
    /// first.
    pub peaks: Vec<f64>,
}

const PAD: usize = 8;
const PEAK_FRACTION: f64 = 0.05;

fn magnitudes(x: &[f64], size: usize) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    buf[..size / 2 + 1].iter().map(|z| z.norm() / x.len() as f64).collect()
}

/// Magnitude spectrum of a real signal. Peaks are located on a grid refined
/// by zero padding to at least 8N points.
pub fn dft_spectrum(signal: &[f64]) -> Result<DftSpectrum> {
    let n = signal.len();
    if n < 2 {
        return Err(Error::SignalTooShort { got: n, need: 2 });
    }
    let size = (PAD * n).next_power_of_two();
    let half = size / 2 + 1;
    let mean = signal.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let ac = magnitudes(&centered, size);
    let top = ac.iter().cloned().fold(0.0, f64::max);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    if top > 0.0 {
        for i in 0..half {
            let left = if i > 0 { ac[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < half { ac[i + 1] } else { f64::NEG_INFINITY };
            if ac[i] >= PEAK_FRACTION * top && ac[i] > left && ac[i] >= right {
                peaks.push((i as f64 / size as f64, ac[i]));
            }
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(DftSpectrum {
        frequencies: (0..n / 2 + 1).map(|i| i as f64 / n as f64).collect(),
        magnitudes: magnitudes(signal, n),
        peaks: peaks.into_iter().map(|p| p.0).collect(),
    })
}
