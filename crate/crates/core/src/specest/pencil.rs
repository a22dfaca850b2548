use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::varpro::{self, Component};
use super::{EstimatedPole, EstimatedSpectrum};
use crate::channel::pair_conjugates;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ModelOrder {
    Fixed { order: usize },
    /// Keep singular values above `threshold` times the largest.
    SingularValueRatio { threshold: f64 },
    /// Keep singular values above the spectral norm expected from binomial
    /// noise with `samples` trajectories, times `factor`.
    NoiseFloor { samples: u64, factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilConfig {
    /// Hankel column count minus one; defaults to N/3.
    pub pencil: Option<usize>,
    pub order: ModelOrder,
    /// Poles beyond this modulus are dropped.
    pub max_modulus: f64,
    /// Polish poles by nonlinear least squares after the pencil step.
    pub refine: bool,
}

impl Default for PencilConfig {
    fn default() -> Self {
        PencilConfig {
            pencil: None,
            order: ModelOrder::SingularValueRatio { threshold: 1e-8 },
            max_modulus: 1.05,
            refine: false,
        }
    }
}

impl PencilConfig {
    pub fn fixed(order: usize) -> Self {
        PencilConfig { order: ModelOrder::Fixed { order }, ..Default::default() }
    }
}

const MIN_SAMPLES: usize = 4;

pub fn matrix_pencil(signal: &[f64], cfg: &PencilConfig) -> Result<EstimatedSpectrum> {
    let n = signal.len();
    if n < MIN_SAMPLES {
        return Err(Error::SignalTooShort { got: n, need: MIN_SAMPLES });
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    let l = cfg.pencil.unwrap_or(n / 3);
    if l < 1 || l + 1 >= n {
        return Err(Error::InvalidParameter(format!("pencil parameter {l} must lie in 1..={}", n - 2)));
    }
    let rows = n - l;
    let y = CMat::from_fn(rows, l + 1, |i, j| Complex64::new(signal[i + j], 0.0));
    let svd = linalg::svd(&y)?;
    let s0 = svd.s[0];
    if s0 == 0.0 {
        return Err(Error::ModelOrder { order: 0, reason: "signal is identically zero".into() });
    }
    let max_order = l.min(rows);
    let order = match cfg.order {
        ModelOrder::Fixed { order } => {
            if order == 0 || order > max_order {
                return Err(Error::ModelOrder { order, reason: format!("must lie in 1..={max_order}") });
            }
            if svd.s[order - 1] <= 1e-13 * s0 {
                return Err(Error::ModelOrder {
                    order,
                    reason: format!("exceeds the numerical rank of the data matrix (s_{order} / s_1 = {:.2e})", svd.s[order - 1] / s0),
                });
            }
            order
        }
        ModelOrder::SingularValueRatio { threshold } => svd.s.iter().filter(|&&s| s > threshold * s0).count(),
        ModelOrder::NoiseFloor { samples, factor } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("noise floor needs samples >= 1".into()));
            }
            let mean = signal.iter().sum::<f64>() / n as f64;
            let sigma = (mean.clamp(0.0, 1.0) * (1.0 - mean.clamp(0.0, 1.0)) / samples as f64).sqrt();
            let floor = factor * sigma * ((rows as f64).sqrt() + ((l + 1) as f64).sqrt());
            svd.s.iter().filter(|&&s| s > floor).count()
        }
    }
    .min(max_order);
    if order == 0 {
        return Err(Error::ModelOrder { order, reason: "no singular value above the threshold".into() });
    }

    // Rows of the Hankel matrix lie in the span of (lambda^j)_j, which is
    // spanned by the conjugated leading right singular vectors.
    let w = CMat::from_fn(l + 1, order, |i, j| svd.v[(i, j)].conj());
    let up = w.rows(0, l).into_owned();
    let down = w.rows(1, l).into_owned();
    let pencil = linalg::lstsq(&up, &down)?;
    let raw = linalg::eig_general(&pencil)?.values;

    let (kept, discarded): (Vec<Complex64>, Vec<Complex64>) =
        raw.into_iter().partition(|z| z.norm() <= cfg.max_modulus);
    for z in &discarded {
        log::info!("discarding pole {z} with modulus {:.4} > {}", z.norm(), cfg.max_modulus);
    }
    if kept.is_empty() {
        return Err(Error::ModelOrder { order, reason: "every pole lies outside the admissible disk".into() });
    }
    let mut poles = symmetrize(&kept);
    if cfg.refine {
        poles = refine(signal, &poles, cfg.max_modulus)?;
    }
    let (amps, residual) = ls_amplitudes(signal, &poles)?;
    Ok(EstimatedSpectrum {
        poles: poles.into_iter().zip(amps).map(|(pole, amplitude)| EstimatedPole { pole, amplitude }).collect(),
        residual,
        discarded,
    })
}

/// Makes a pole set closed under conjugation and free of duplicates.
fn symmetrize(poles: &[Complex64]) -> Vec<Complex64> {
    let tol = 1e-6;
    let rep = pair_conjugates(poles, tol);
    let mut out = Vec::new();
    for &i in &rep.reals {
        out.push(Complex64::new(poles[i].re, 0.0));
    }
    for &(a, b) in &rep.pairs {
        let z = (poles[a] + poles[b].conj()) * 0.5;
        let z = if z.im < 0.0 { z.conj() } else { z };
        out.push(z);
        out.push(z.conj());
    }
    for &i in &rep.unmatched {
        out.push(poles[i]);
        out.push(poles[i].conj());
    }
    let mut dedup: Vec<Complex64> = Vec::new();
    for z in out {
        if dedup.iter().all(|w| (w - z).norm() > 1e-10) {
            dedup.push(z);
        }
    }
    dedup
}

fn to_components(poles: &[Complex64]) -> Vec<Component> {
    poles
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|&z| if z.im == 0.0 { Component::Real(z.re) } else { Component::Pair(z) })
        .collect()
}

fn refine(signal: &[f64], poles: &[Complex64], max_modulus: f64) -> Result<Vec<Complex64>> {
    let comps = to_components(poles);
    let fit = varpro::fit(signal, &comps, max_modulus, 100)?;
    let mut out = Vec::new();
    for c in fit.components {
        match c {
            Component::Real(x) => out.push(Complex64::new(x, 0.0)),
            Component::Pair(z) => {
                out.push(z);
                out.push(z.conj());
            }
            _ => {}
        }
    }
    Ok(symmetrize(&out))
}

/// Least-squares amplitudes for y_k = sum_j c_j lambda_j^k (k = 0..N-1).
/// Conjugate poles get conjugate amplitudes and real poles real ones.
/// Returns the amplitudes and the RMS reconstruction error.
pub fn ls_amplitudes(signal: &[f64], poles: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let n = signal.len();
    if poles.is_empty() {
        return Err(Error::Empty("pole list"));
    }
    if n < poles.len() {
        return Err(Error::SignalTooShort { got: n, need: poles.len() });
    }
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            if (poles[i] - poles[j]).norm() <= 1e-10 {
                return Err(Error::InvalidParameter(format!("poles {} and {} coincide", poles[i], poles[j])));
            }
        }
    }
    let mut v = CMat::zeros(n, poles.len());
    for (j, &z) in poles.iter().enumerate() {
        let mut acc = Complex64::new(1.0, 0.0);
        for k in 0..n {
            v[(k, j)] = acc;
            acc *= z;
        }
    }
    let svd = linalg::svd(&v)?;
    let cond = svd.condition_number();
    if cond > 1e12 {
        return Err(Error::IllConditioned(format!("Vandermonde condition number {cond:.3e}")));
    }
    let y = CMat::from_fn(n, 1, |k, _| Complex64::new(signal[k], 0.0));
    let c = linalg::lstsq(&v, &y)?;
    let mut amps: Vec<Complex64> = c.column(0).iter().cloned().collect();
    let rep = pair_conjugates(poles, 1e-12);
    for &i in &rep.reals {
        amps[i] = Complex64::new(amps[i].re, 0.0);
    }
    for &(a, b) in &rep.pairs {
        let m = (amps[a] + amps[b].conj()) * 0.5;
        amps[a] = m;
        amps[b] = m.conj();
    }
    let model = &v * CMat::from_column_slice(amps.len(), 1, &amps);
    let rss: f64 = (0..n).map(|k| (model[(k, 0)].re - signal[k]).powi(2)).sum();
    Ok((amps, (rss / n as f64).sqrt()))
}
