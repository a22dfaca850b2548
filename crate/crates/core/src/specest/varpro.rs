//! Separable nonlinear least squares for real signals built from real
//! exponentials, damped oscillations and second-order Jordan terms. The
//! linear amplitudes are projected out (variable projection) and the poles
//! are refined by Levenberg-Marquardt with the Kaufman Jacobian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Component {
    /// Column of ones (a pole fixed at 1).
    Constant,
    Real(f64),
    /// Oscillating pair lambda, conj(lambda); stores the member with im > 0.
    Pair(Complex64),
    /// lambda^k and k lambda^(k-1).
    Jordan(f64),
}

impl Component {
    fn n_params(&self) -> usize {
        match self {
            Component::Constant => 0,
            Component::Real(_) | Component::Jordan(_) => 1,
            Component::Pair(_) => 2,
        }
    }

    fn n_cols(&self) -> usize {
        match self {
            Component::Constant | Component::Real(_) => 1,
            Component::Pair(_) | Component::Jordan(_) => 2,
        }
    }

    fn modulus(&self) -> f64 {
        match self {
            Component::Constant => 1.0,
            Component::Real(x) | Component::Jordan(x) => x.abs(),
            Component::Pair(z) => z.norm(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SeparableFit {
    pub components: Vec<Component>,
    /// Linear coefficients, `n_cols` per component in order.
    pub coeffs: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SeparableFit {
    /// Nonlinear plus linear parameter count.
    pub fn n_params(&self) -> usize {
        self.components.iter().map(|c| c.n_params() + c.n_cols()).sum()
    }
}

fn params(cs: &[Component]) -> Vec<f64> {
    let mut p = Vec::new();
    for c in cs {
        match *c {
            Component::Constant => {}
            Component::Real(x) | Component::Jordan(x) => p.push(x),
            Component::Pair(z) => {
                p.push(z.re);
                p.push(z.im);
            }
        }
    }
    p
}

fn with_params(cs: &[Component], p: &[f64]) -> Vec<Component> {
    let mut i = 0;
    cs.iter()
        .map(|c| match c {
            Component::Constant => Component::Constant,
            Component::Real(_) => {
                i += 1;
                Component::Real(p[i - 1])
            }
            Component::Jordan(_) => {
                i += 1;
                Component::Jordan(p[i - 1])
            }
            Component::Pair(_) => {
                i += 2;
                Component::Pair(Complex64::new(p[i - 2], p[i - 1]))
            }
        })
        .collect()
}

/// z^k for k = 0..=n.
fn powers(z: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=n {
        out.push(acc);
        acc *= z;
    }
    out
}

/// Basis matrix and, per nonlinear parameter, its derivative matrix.
fn basis(cs: &[Component], n: usize, with_derivs: bool) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let ncols: usize = cs.iter().map(|c| c.n_cols()).sum();
    let mut b = DMatrix::zeros(n, ncols);
    let mut ds = Vec::new();
    let mut col = 0;
    for c in cs {
        match *c {
            Component::Constant => {
                b.column_mut(col).fill(1.0);
            }
            Component::Real(x) => {
                let pw = powers(Complex64::new(x, 0.0), n);
                let mut d = DMatrix::zeros(n, ncols);
                for k in 0..n {
                    b[(k, col)] = pw[k].re;
                    if k > 0 {
                        d[(k, col)] = k as f64 * pw[k - 1].re;
                    }
                }
                if with_derivs {
                    ds.push(d);
                }
            }
            Component::Pair(z) => {
                let pw = powers(z, n);
                let mut dx = DMatrix::zeros(n, ncols);
                let mut dy = DMatrix::zeros(n, ncols);
                for k in 0..n {
                    b[(k, col)] = pw[k].re;
                    b[(k, col + 1)] = pw[k].im;
                    if k > 0 {
                        let g = pw[k - 1] * k as f64;
                        dx[(k, col)] = g.re;
                        dx[(k, col + 1)] = g.im;
                        dy[(k, col)] = -g.im;
                        dy[(k, col + 1)] = g.re;
                    }
                }
                if with_derivs {
                    ds.push(dx);
                    ds.push(dy);
                }
            }
            Component::Jordan(x) => {
                let pw = powers(Complex64::new(x, 0.0), n);
                let mut d = DMatrix::zeros(n, ncols);
                for k in 0..n {
                    let kf = k as f64;
                    b[(k, col)] = pw[k].re;
                    if k > 0 {
                        b[(k, col + 1)] = kf * pw[k - 1].re;
                        d[(k, col)] = kf * pw[k - 1].re;
                    }
                    if k > 1 {
                        d[(k, col + 1)] = kf * (kf - 1.0) * pw[k - 2].re;
                    }
                }
                if with_derivs {
                    ds.push(d);
                }
            }
        }
        col += c.n_cols();
    }
    (b, ds)
}

struct Projection {
    q: DMatrix<f64>,
    coeffs: DVector<f64>,
    residual: DVector<f64>,
}

fn project(b: &DMatrix<f64>, y: &DVector<f64>) -> Result<Projection> {
    // Real input stays real through the Jacobi sweep.
    let svd = linalg::svd(&b.map(|x| Complex64::new(x, 0.0)))?;
    let smax = svd.s[0];
    let keep: Vec<usize> = (0..svd.s.len()).filter(|&i| svd.s[i] > 1e-13 * smax).collect();
    let q = DMatrix::from_fn(b.nrows(), keep.len(), |r, c| svd.u[(r, keep[c])].re);
    let uty = q.transpose() * y;
    let mut coeffs = DVector::zeros(b.ncols());
    for (c, &i) in keep.iter().enumerate() {
        let s = svd.s[i];
        for j in 0..b.ncols() {
            coeffs[j] += svd.v[(j, i)].re * uty[c] / s;
        }
    }
    let residual = y - b * &coeffs;
    Ok(Projection { q, coeffs, residual })
}

/// Refines the nonlinear parameters of `init` against `y` (indexed k = 0..).
/// Poles are kept inside |lambda| <= `max_modulus`.
pub(crate) fn fit(y: &[f64], init: &[Component], max_modulus: f64, max_iter: usize) -> Result<SeparableFit> {
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let ncols: usize = init.iter().map(|c| c.n_cols()).sum();
    if ncols > n {
        return Err(Error::SignalTooShort { got: n, need: ncols });
    }
    let mut comps = init.to_vec();
    let mut theta = params(&comps);
    let (b, _) = basis(&comps, n, false);
    let mut proj = project(&b, &yv)?;
    let mut rss = proj.residual.norm_squared();
    let mut mu = 1e-3;
    let mut converged = theta.is_empty();
    let mut iterations = 0;
    let scale = yv.norm_squared().max(f64::MIN_POSITIVE);

    while !converged && iterations < max_iter {
        iterations += 1;
        let (b, ds) = basis(&comps, n, true);
        proj = project(&b, &yv)?;
        rss = proj.residual.norm_squared();
        let np = theta.len();
        let mut jac = DMatrix::zeros(n, np);
        for (t, d) in ds.iter().enumerate() {
            let v = d * &proj.coeffs;
            let pv = &v - &proj.q * (proj.q.transpose() * &v);
            jac.set_column(t, &(-pv));
        }
        let diag: Vec<f64> = (0..np).map(|i| jac.column(i).norm_squared().max(1e-12)).collect();
        let mut improved = false;
        for _ in 0..30 {
            // Damped step as the least-squares solution of [J; sqrt(mu D)] s = [-r; 0],
            // solved by QR so the conditioning of J is not squared.
            let mut aug = DMatrix::zeros(n + np, np);
            aug.view_mut((0, 0), (n, np)).copy_from(&jac);
            for i in 0..np {
                aug[(n + i, i)] = (mu * diag[i]).sqrt();
            }
            let mut rhs = DVector::zeros(n + np);
            rhs.rows_mut(0, n).copy_from(&(-&proj.residual));
            let qr = aug.qr();
            let step = match qr.r().solve_upper_triangular(&(qr.q().transpose() * &rhs)) {
                Some(s) if s.iter().all(|x| x.is_finite()) => s,
                _ => {
                    mu *= 4.0;
                    continue;
                }
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            let tc = with_params(&comps, &trial);
            if tc.iter().any(|c| !(c.modulus() <= max_modulus)) {
                mu *= 4.0;
                continue;
            }
            let (tb, _) = basis(&tc, n, false);
            let tp = match project(&tb, &yv) {
                Ok(p) => p,
                Err(_) => {
                    mu *= 4.0;
                    continue;
                }
            };
            let trss = tp.residual.norm_squared();
            if trss < rss {
                let gain = (rss - trss) / rss.max(f64::MIN_POSITIVE);
                let small_step = step.norm() <= 1e-15 * (1.0 + theta.iter().map(|x| x.abs()).fold(0.0, f64::max));
                theta = trial;
                comps = tc;
                proj = tp;
                rss = trss;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                if gain < 1e-12 || small_step || rss <= 1e-32 * scale {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
            if mu > 1e16 {
                break;
            }
        }
        if !improved {
            // No downhill step exists at this resolution: a stationary point.
            converged = true;
        }
    }
    Ok(SeparableFit { components: comps, coeffs: proj.coeffs.iter().cloned().collect(), rss, iterations, converged })
}

impl SeparableFit {
    /// Complex amplitudes in the convention signal_k = sum c lambda^k (pairs
    /// expanded to both members) plus Jordan amplitudes separately.
    pub(crate) fn modes(&self) -> Vec<(Complex64, Complex64, u8)> {
        let mut out = Vec::new();
        let mut col = 0;
        for c in &self.components {
            match *c {
                Component::Constant => out.push((Complex64::new(1.0, 0.0), Complex64::new(self.coeffs[col], 0.0), 0)),
                Component::Real(x) => out.push((Complex64::new(x, 0.0), Complex64::new(self.coeffs[col], 0.0), 0)),
                Component::Pair(z) => {
                    // a Re z^k + b Im z^k = 2 Re(c z^k) with c = (a - i b) / 2
                    let c = Complex64::new(self.coeffs[col], -self.coeffs[col + 1]) * 0.5;
                    out.push((z, c, 0));
                    out.push((z.conj(), c.conj(), 0));
                }
                Component::Jordan(x) => {
                    let z = Complex64::new(x, 0.0);
                    out.push((z, Complex64::new(self.coeffs[col], 0.0), 0));
                    out.push((z, Complex64::new(self.coeffs[col + 1], 0.0), 1));
                }
            }
            col += c.n_cols();
        }
        out
    }
}
