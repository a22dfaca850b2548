use num_complex::Complex64;
use serde::Serialize;

use super::HamiltonianSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Transition frequencies closer than this (rad/s) count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PredictedEigenvalue {
    /// Indices into the ascending eigenvalues of B.
    pub i: usize,
    pub j: usize,
    /// beta_ij = b_i - b_j in rad/s.
    pub beta: f64,
    /// v_ij = exp(-i beta_ij tau_B).
    pub unperturbed: Complex64,
    /// <<ij| C_A^2 |ij>>.
    pub curvature: f64,
    pub value: Complex64,
}

#[derive(Debug, Clone)]
pub struct PerturbativeSpectrum {
    pub off_diagonal: Vec<PredictedEigenvalue>,
    /// Laplacian of the fixed-point block, in B's eigenbasis.
    pub laplacian: CMat,
    /// Ascending; the first is zero up to rounding.
    pub laplacian_eigenvalues: Vec<f64>,
    /// 1 - tau_A^2 l_i.
    pub fixed: Vec<f64>,
}

impl PerturbativeSpectrum {
    pub fn values(&self) -> Vec<Complex64> {
        self.fixed
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .chain(self.off_diagonal.iter().map(|p| p.value))
            .collect()
    }

    /// Largest |exact - predicted| after pairing each exact eigenvalue with
    /// its closest prediction (global greedy on distance).
    pub fn max_error(&self, exact: &[Complex64]) -> f64 {
        let pred = self.values();
        let pairs = greedy_match(exact, &pred);
        pairs.iter().map(|&(a, b)| (exact[a] - pred[b]).norm()).fold(0.0, f64::max)
    }
}

/// Matches two lists of complex numbers by repeatedly taking the closest
/// remaining pair. Returns index pairs (into `a`, into `b`).
pub(crate) fn greedy_match(a: &[Complex64], b: &[Complex64]) -> Vec<(usize, usize)> {
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            all.push(((x - y).norm(), i, j));
        }
    }
    all.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut ua = vec![false; a.len()];
    let mut ub = vec![false; b.len()];
    let mut out = Vec::new();
    for (_, i, j) in all {
        if !ua[i] && !ub[j] {
            ua[i] = true;
            ub[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

pub fn perturbative_spectrum(
    a: &HamiltonianSpec,
    b: &HamiltonianSpec,
    tau_a: f64,
    tau_b: f64,
) -> Result<PerturbativeSpectrum> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("A is {}-dimensional, B is {}", a.dim(), b.dim())));
    }
    let d = b.dim();
    let eb = b.eigen()?;
    let bvals = &eb.values;

    let mut betas = vec![(0.0, usize::MAX, usize::MAX)];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                betas.push((bvals[i] - bvals[j], i, j));
            }
        }
    }
    let mut clashes = Vec::new();
    for x in 0..betas.len() {
        for y in x + 1..betas.len() {
            if (betas[x].0 - betas[y].0).abs() <= DEGENERACY_TOL {
                clashes.push(format!("{} ~ {}", label(betas[x]), label(betas[y])));
            }
        }
    }
    if !clashes.is_empty() {
        return Err(Error::Degenerate(clashes.join(", ")));
    }

    let w = &eb.vectors;
    let ab = w.adjoint() * a.matrix() * w;
    let a2 = &ab * &ab;
    let mut off_diagonal = Vec::new();
    for &(beta, i, j) in betas.iter().skip(1) {
        let curvature = a2[(i, i)].re + a2[(j, j)].re - 2.0 * ab[(i, i)].re * ab[(j, j)].re;
        let unperturbed = Complex64::from_polar(1.0, -beta * tau_b);
        let value = unperturbed * (1.0 - 0.5 * tau_a * tau_a * curvature);
        off_diagonal.push(PredictedEigenvalue { i, j, beta, unperturbed, curvature, value });
    }

    let laplacian = CMat::from_fn(d, d, |i, j| {
        let diag = if i == j { a2[(i, i)].re } else { 0.0 };
        Complex64::new(diag - ab[(i, j)].norm_sqr(), 0.0)
    });
    let laplacian_eigenvalues = linalg::eig_hermitian(&laplacian)?.values;
    let fixed = laplacian_eigenvalues.iter().map(|l| 1.0 - tau_a * tau_a * l).collect();
    Ok(PerturbativeSpectrum { off_diagonal, laplacian, laplacian_eigenvalues, fixed })
}

fn label((beta, i, j): (f64, usize, usize)) -> String {
    if i == usize::MAX {
        "fixed block (beta = 0)".to_string()
    } else {
        format!("beta_{i}{j} = {beta:.6e}")
    }
}

/// Closed-form spectrum of the probe-target channel with mu = g tau_A and
/// nu = w tau_B.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Example1Spectrum {
    /// [1, cos mu, lambda_+, lambda_-].
    pub values: [Complex64; 4],
    /// tan^4(mu/2) - sin^2(nu); zero on the exceptional line.
    pub discriminant: f64,
}

impl Example1Spectrum {
    pub fn gap(&self) -> f64 {
        (self.values[2] - self.values[3]).norm()
    }
}

pub fn example1_analytic(mu: f64, nu: f64) -> Example1Spectrum {
    let c2 = (mu / 2.0).cos().powi(2);
    let t4 = (mu / 2.0).tan().powi(4);
    let disc = t4 - nu.sin().powi(2);
    let root = Complex64::new(disc, 0.0).sqrt();
    let base = Complex64::new(nu.cos(), 0.0);
    Example1Spectrum {
        values: [
            Complex64::new(1.0, 0.0),
            Complex64::new(mu.cos(), 0.0),
            (base + root) * c2,
            (base - root) * c2,
        ],
        discriminant: disc,
    }
}

/// Coupling angle mu on the exceptional line for a given nu in [0, pi/2]:
/// tan^2(mu/2) = |sin nu|.
pub fn example1_ep_mu(nu: f64) -> f64 {
    2.0 * nu.sin().abs().sqrt().atan()
}
