//! Dense complex linear algebra on top of nalgebra: general and Hermitian
//! eigendecomposition, SVD, unitary propagators and least squares.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Absolute floor applied to all relative tolerances.
pub const ABS_FLOOR: f64 = 1e-14;
/// Eigenpairs whose conditioning drops below this are flagged near-defective.
pub const NEAR_DEFECTIVE: f64 = 1e-6;

const CLUSTER_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues with right and left eigenvectors (as columns) and the
/// per-pair conditioning |l^dag r| / (|l| |r|).
#[derive(Debug, Clone)]
pub struct EigPair {
    pub values: Vec<Complex64>,
    pub right: CMat,
    pub left: CMat,
    pub conditioning: Vec<f64>,
}

impl EigPair {
    pub fn min_conditioning(&self) -> f64 {
        self.conditioning.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_near_defective(&self) -> bool {
        self.min_conditioning() < NEAR_DEFECTIVE
    }
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Thin SVD with singular values in descending order: m = u diag(s) v^dag.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// Number of nonzero singular values.
    pub fn rank(&self) -> usize {
        self.s.iter().filter(|&&x| x > 0.0).count()
    }

    pub fn condition_number(&self) -> f64 {
        match (self.s.first(), self.s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }
}

fn scale_of(m: &CMat) -> f64 {
    m.norm().max(ABS_FLOOR)
}

pub fn check_finite(m: &CMat, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

/// Relative distance of `m` from its adjoint.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm() / scale_of(m)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn eig_general(m: &CMat) -> Result<EigPair> {
    check_square(m)?;
    check_finite(m, "eig_general input")?;
    let n = m.nrows();
    if n == 0 {
        return Err(Error::Empty("eig_general input"));
    }
    let scale = scale_of(m);
    let (q, t) = schur(m, scale)?;
    let mut values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // Group numerically coincident eigenvalues.
    let tol = CLUSTER_TOL * scale;
    let mut cluster = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if cluster[i] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        cluster[i] = id;
        let mut k = 0;
        while k < members.len() {
            let a = values[members[k]];
            for j in 0..n {
                if cluster[j] == usize::MAX && (values[j] - a).norm() <= tol {
                    cluster[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let mut right = CMat::zeros(n, n);
    let mut left = CMat::zeros(n, n);
    let mut conditioning = vec![0.0; n];
    let smin = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);

    for members in &clusters {
        if members.len() == 1 {
            let j = members[0];
            let lam = values[j];
            let x = triangular_right(&t, j, lam, smin);
            let y = triangular_left(&t, j, lam, smin);
            let r = &q * x;
            let l = &q * y;
            right.set_column(j, &(&r / Complex64::from(r.norm())));
            left.set_column(j, &(&l / Complex64::from(l.norm())));
        } else {
            cluster_vectors(m, members, &mut values, &mut right, &mut left, &mut conditioning, scale)?;
            continue;
        }
    }
    for members in &clusters {
        if members.len() == 1 {
            let j = members[0];
            conditioning[j] = right.column(j).dotc(&left.column(j)).norm();
        }
    }
    Ok(EigPair { values, right, left, conditioning })
}

/// Complex Schur form m = q t q^dag. The QR sweep's deflation test is
/// relative to neighbouring diagonal entries, so it can stall on clusters of
/// zero eigenvalues; a complex shift of the whole spectrum moves them away.
fn schur(m: &CMat, scale: f64) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    let ok = |q: &CMat, t: &CMat| (q * t * q.adjoint() - m).norm() <= 1e-11 * scale;
    if let Some(s) = Schur::try_new(m.clone(), 5.0 * f64::EPSILON, 1000 * n) {
        let (q, t) = s.unpack();
        if ok(&q, &t) {
            return Ok((q, t));
        }
    }
    let sigma = Complex64::new(0.61, 0.37) * scale;
    let shifted = m + CMat::identity(n, n) * sigma;
    let s = Schur::try_new(shifted, 5.0 * f64::EPSILON, 1000 * n).ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (q, mut t) = s.unpack();
    for i in 0..n {
        t[(i, i)] -= sigma;
    }
    if !ok(&q, &t) {
        return Err(Error::NoConvergence("Schur decomposition"));
    }
    Ok((q, t))
}

/// Solves (T - lam) x = 0 with x_j = 1 and x_i = 0 for i > j.
fn triangular_right(t: &CMat, j: usize, lam: Complex64, smin: f64) -> CVec {
    let n = t.nrows();
    let mut x = CVec::zeros(n);
    x[j] = Complex64::new(1.0, 0.0);
    for i in (0..j).rev() {
        let mut s = Complex64::new(0.0, 0.0);
        for k in i + 1..=j {
            s += t[(i, k)] * x[k];
        }
        let mut den = t[(i, i)] - lam;
        if den.norm() < smin {
            den = Complex64::new(smin, 0.0);
        }
        x[i] = -s / den;
        let big = x[i].norm();
        if big > 1e150 {
            x /= Complex64::from(big);
        }
    }
    x
}

/// Solves (T - lam)^dag y = 0 with y_j = 1 and y_i = 0 for i < j.
fn triangular_left(t: &CMat, j: usize, lam: Complex64, smin: f64) -> CVec {
    let n = t.nrows();
    let mut y = CVec::zeros(n);
    y[j] = Complex64::new(1.0, 0.0);
    for i in j + 1..n {
        let mut s = Complex64::new(0.0, 0.0);
        for k in j..i {
            s += t[(k, i)].conj() * y[k];
        }
        let mut den = (t[(i, i)] - lam).conj();
        if den.norm() < smin {
            den = Complex64::new(smin, 0.0);
        }
        y[i] = -s / den;
        let big = y[i].norm();
        if big > 1e150 {
            y /= Complex64::from(big);
        }
    }
    y
}

fn cluster_vectors(
    m: &CMat,
    members: &[usize],
    values: &mut [Complex64],
    right: &mut CMat,
    left: &mut CMat,
    conditioning: &mut [f64],
    scale: f64,
) -> Result<()> {
    let n = m.nrows();
    let k = members.len();
    let mean = members.iter().map(|&i| values[i]).sum::<Complex64>() / k as f64;
    let shifted = m - CMat::identity(n, n) * mean;
    let d = svd(&shifted)?;
    let rv = d.v.columns(n - k, k).into_owned();
    // Left null vectors from the adjoint's right vectors, which the Jacobi
    // sweep accumulates accurately.
    let lu = svd(&shifted.adjoint())?.v.columns(n - k, k).into_owned();
    let null_tol = CLUSTER_TOL * scale;
    let geometric = d.s[n - k..].iter().filter(|&&s| s <= null_tol).count();

    if geometric == k {
        let g = lu.adjoint() * &rv;
        let gs = svd(&g)?;
        let well_posed = gs.s.last().copied().unwrap_or(0.0) > 1e-12;
        let lbasis = if well_posed {
            let ginv = g.clone().try_inverse().ok_or_else(|| Error::IllConditioned("cluster overlap".into()))?;
            &lu * ginv.adjoint()
        } else {
            lu.clone()
        };
        for (c, &idx) in members.iter().enumerate() {
            let r = rv.column(c).into_owned();
            let l = lbasis.column(c).into_owned();
            let overlap = l.dotc(&r);
            if well_posed && overlap.norm() > 0.0 {
                values[idx] = l.dotc(&(m * &r)) / overlap;
            }
            let (rn, ln) = (r.norm(), l.norm());
            right.set_column(idx, &(&r / Complex64::from(rn)));
            left.set_column(idx, &(&l / Complex64::from(ln)));
            conditioning[idx] = overlap.norm() / (rn * ln);
        }
    } else {
        // Defective: fewer independent eigenvectors than the multiplicity.
        let g = geometric.max(1);
        for (c, &idx) in members.iter().enumerate() {
            let col = k - 1 - (c % g);
            let r = rv.column(col).into_owned();
            let l = lu.column(col).into_owned();
            right.set_column(idx, &r);
            left.set_column(idx, &l);
            conditioning[idx] = 0.0;
        }
    }
    Ok(())
}

pub fn eig_hermitian(m: &CMat) -> Result<HermitianEig> {
    check_square(m)?;
    check_finite(m, "eig_hermitian input")?;
    let n = m.nrows();
    if n == 0 {
        return Err(Error::Empty("eig_hermitian input"));
    }
    let residual = hermiticity_residual(m);
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(h.clone(), 5.0 * f64::EPSILON, 1000 * n)
        .ok_or(Error::NoConvergence("Hermitian eigendecomposition"))?;
    let lam = CMat::from_diagonal(&eig.eigenvalues.map(|x| Complex64::new(x, 0.0)));
    if (&eig.eigenvectors * lam * eig.eigenvectors.adjoint() - &h).norm() > 1e-11 * scale_of(&h) {
        return Err(Error::NoConvergence("Hermitian eigendecomposition"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(HermitianEig { values, vectors })
}

/// Thin SVD in three stages: a rank-revealing QR drops the part of the
/// column space below rounding level, a second QR of the transposed factor
/// preconditions, and one-sided Jacobi finishes on the small square core.
/// Singular values beyond the numerical rank are exactly zero. The matching
/// columns of the longer factor are zero; those of the square factor
/// complete an orthonormal basis.
pub fn svd(m: &CMat) -> Result<Svd> {
    check_finite(m, "svd input")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty("svd input"));
    }
    if m.nrows() < m.ncols() {
        let d = svd(&m.adjoint())?;
        return Ok(Svd { u: d.v, s: d.s, v: d.u });
    }
    let (rows, n) = m.shape();
    let floor = 2.0 * f64::EPSILON * m.norm();
    let (q1, r1, p1) = pivoted_qr(m, floor);
    let rank = q1.ncols();
    let mut s = vec![0.0; n];
    let mut u = CMat::zeros(rows, n);
    let mut v = CMat::zeros(n, n);
    if rank > 0 {
        // r1 = w s z^dag, obtained from the SVD of its adjoint.
        let (q2, r2, p2) = pivoted_qr(&r1.adjoint(), floor);
        let core = jacobi_svd(r2)?;
        let k = core.s.len();
        let mut w = CMat::zeros(rank, k);
        for (row, &pr) in p2.iter().enumerate() {
            w.set_row(pr, &core.v.row(row));
        }
        let z = &q2 * &core.u;
        let uu = &q1 * w;
        for c in 0..k.min(n) {
            if core.s[c] <= floor {
                continue;
            }
            s[c] = core.s[c];
            u.set_column(c, &uu.column(c));
            for (row, &pr) in p1.iter().enumerate() {
                v[(pr, c)] = z[(row, c)];
            }
        }
    }
    let live = s.iter().filter(|&&x| x > 0.0).count();
    let v = complete_columns(&v, live)?;
    Ok(Svd { u, s, v })
}

/// Column-pivoted QR by Gram-Schmidt with one reorthogonalisation, stopped
/// once every remaining column norm is at most `floor`. Returns q (m x r),
/// r (r x n) and the pivot order, with a[:, perm[k]] = q r[:, k].
fn pivoted_qr(a: &CMat, floor: f64) -> (CMat, CMat, Vec<usize>) {
    let (rows, n) = a.shape();
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut q = CMat::zeros(rows, rows.min(n));
    let mut r = CMat::zeros(rows.min(n), n);
    // Squared norms of the deflated columns, downdated as columns are
    // eliminated and recomputed once cancellation eats into them.
    let mut norms: Vec<f64> = (0..n).map(|j| w.column(j).norm_squared()).collect();
    let mut exact = norms.clone();
    let mut k = 0;
    while k < rows.min(n) {
        let (j, best) = (k..n).map(|j| (j, norms[j])).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best.sqrt() <= floor {
            break;
        }
        w.swap_columns(k, j);
        r.swap_columns(k, j);
        perm.swap(k, j);
        norms.swap(k, j);
        exact.swap(k, j);
        let mut x = w.column(k).into_owned();
        if k > 0 {
            let qk = q.columns(0, k);
            let c = qk.adjoint() * &x;
            x -= qk * &c;
            for i in 0..k {
                r[(i, k)] += c[i];
            }
        }
        let nx = x.norm();
        if nx <= floor {
            break;
        }
        x /= Complex64::new(nx, 0.0);
        r[(k, k)] = Complex64::new(nx, 0.0);
        let xs = x.as_slice();
        for i in k + 1..n {
            let col = &mut w.as_mut_slice()[i * rows..(i + 1) * rows];
            let coef: Complex64 = xs.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            for (c, a) in col.iter_mut().zip(xs) {
                *c -= a * coef;
            }
            r[(k, i)] = coef;
            norms[i] -= coef.norm_sqr();
            if norms[i] <= 1e-4 * exact[i] {
                norms[i] = col.iter().map(|z| z.norm_sqr()).sum();
                exact[i] = norms[i];
            }
        }
        q.set_column(k, &x);
        k += 1;
    }
    (q.columns(0, k).into_owned(), r.rows(0, k).into_owned(), perm)
}

/// Keeps the first `live` orthonormal columns of `v` and replaces the rest
/// by an orthonormal completion.
fn complete_columns(v: &CMat, live: usize) -> Result<CMat> {
    let (n, cols) = v.shape();
    if live >= cols {
        return Ok(v.clone());
    }
    let mut out = v.clone();
    let basis = v.columns(0, live).into_owned();
    let full = if live == 0 {
        CMat::identity(n, n)
    } else {
        let qr = basis.clone().qr();
        let mut id = CMat::identity(n, n);
        qr.q_tr_mul(&mut id);
        id.adjoint()
    };
    let comp = full.columns(live, cols - live);
    let leak = if live == 0 { 0.0 } else { (basis.adjoint() * comp).norm() };
    if leak > 1e-10 {
        return Err(Error::NoConvergence("orthonormal completion"));
    }
    out.columns_mut(live, cols - live).copy_from(&comp);
    Ok(out)
}

const JACOBI_MAX_SWEEPS: usize = 60;

fn jacobi_svd(mut a: CMat) -> Result<Svd> {
    let (rows, n) = a.shape();
    let mut v = CMat::identity(n, n);
    let mut norms: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let tol = f64::EPSILON * (rows as f64).sqrt();
    // Pairs of columns at rounding level would otherwise keep rotating
    // towards underflow.
    let floor = (f64::EPSILON * f64::EPSILON) * norms.iter().sum::<f64>();
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dotc_cols(&a, p, q);
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() || g <= floor {
                    continue;
                }
                rotated = true;
                // Diagonalise [[alpha, gamma], [conj(gamma), beta]] by a phase
                // on column q followed by a real rotation.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate(&mut a, p, q, phase, c, sn);
                rotate(&mut v, p, q, phase, c, sn);
                norms[p] = a.column(p).norm_squared();
                norms[q] = a.column(q).norm_squared();
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("SVD"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let s_all: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&x, &y| s_all[y].total_cmp(&s_all[x]));
    let s: Vec<f64> = order.iter().map(|&j| s_all[j]).collect();
    let smax = s[0];
    let mut u = CMat::zeros(rows, n);
    let mut vs = CMat::zeros(n, n);
    let mut filled = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        vs.set_column(k, &v.column(j));
        if s[k] > (n as f64) * f64::EPSILON * smax && s[k] > 0.0 {
            u.set_column(k, &(a.column(j) / Complex64::new(s[k], 0.0)));
            filled.push(k);
        }
    }
    complete_orthonormal(&mut u, &filled);
    Ok(Svd { u, s, v: vs })
}

/// Columns p, q of `m` become (c x_p - s e x_q, s x_p + c e x_q) with
/// e = conj(phase).
fn rotate(m: &mut CMat, p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let e = phase.conj();
    let rows = m.nrows();
    let data = m.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * rows);
    let xp = &mut lo[p * rows..(p + 1) * rows];
    let xq = &mut hi[..rows];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let u = *a;
        let v = *b * e;
        *a = u * c - v * s;
        *b = u * s + v * c;
    }
}

fn dotc_cols(m: &CMat, p: usize, q: usize) -> Complex64 {
    let rows = m.nrows();
    let data = m.as_slice();
    let xp = &data[p * rows..(p + 1) * rows];
    let xq = &data[q * rows..(q + 1) * rows];
    xp.iter().zip(xq).map(|(a, b)| a.conj() * b).sum()
}

/// Fills the columns of `u` not listed in `filled` with an orthonormal
/// completion of the listed ones.
fn complete_orthonormal(u: &mut CMat, filled: &[usize]) {
    let (rows, cols) = u.shape();
    let mut basis: Vec<CVec> = filled.iter().map(|&k| u.column(k).into_owned()).collect();
    let mut candidate = 0;
    for k in 0..cols {
        if filled.contains(&k) {
            continue;
        }
        while candidate < rows {
            let mut x = CVec::zeros(rows);
            x[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&x);
                    x -= b * proj;
                }
            }
            let nx = x.norm();
            if nx > 1e-8 {
                x /= Complex64::new(nx, 0.0);
                u.set_column(k, &x);
                basis.push(x);
                break;
            }
        }
    }
}

/// exp(-i h t) for Hermitian h.
pub fn expm_unitary(h: &CMat, t: f64) -> Result<CMat> {
    if !t.is_finite() {
        return Err(Error::NonFinite("propagator time"));
    }
    let e = eig_hermitian(h)?;
    let n = h.nrows();
    let mut scaled = e.vectors.clone();
    for (c, &lam) in e.values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lam * t);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    Ok(scaled * e.vectors.adjoint())
}

/// Minimum-norm least-squares solution of a x = b, discarding singular
/// values below 1e-12 of the largest.
pub fn lstsq(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Empty("least-squares system"));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    check_finite(b, "least-squares right-hand side")?;
    let d = svd(a)?;
    let cutoff = 1e-12 * d.s[0];
    let mut utb = d.u.adjoint() * b;
    for (i, &s) in d.s.iter().enumerate() {
        let inv = if s > cutoff { 1.0 / s } else { 0.0 };
        for c in 0..utb.ncols() {
            utb[(i, c)] *= inv;
        }
    }
    Ok(&d.v * utb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn eig_residual(m: &CMat, e: &EigPair) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..m.nrows() {
            let r = e.right.column(j);
            let l = e.left.column(j);
            let lam = e.values[j];
            worst = worst.max((m * r - r * lam).norm());
            worst = worst.max((l.adjoint() * m - l.adjoint() * lam).norm());
        }
        worst / m.norm()
    }

    #[test]
    fn random_matrix_eigenpairs() {
        for (n, seed) in [(4, 1), (16, 2), (64, 3)] {
            let m = random(n, seed);
            let e = eig_general(&m).unwrap();
            assert!(eig_residual(&m, &e) < 1e-10);
            assert!(!e.is_near_defective());
        }
    }

    #[test]
    fn diagonal_matrix() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.5)]));
        let mut vals = eig_general(&m).unwrap().values;
        vals.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((vals[0] - c(0.0, 0.5)).norm() < 1e-14);
        assert!((vals[2] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_is_flagged() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let e = eig_general(&m).unwrap();
        assert!(e.is_near_defective());
        assert!(e.values.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn degenerate_semisimple_cluster() {
        // Similarity transform of diag(2, 2, 1) with a non-unitary basis.
        let p = CMat::from_row_slice(3, 3, &[
            c(1.0, 0.0), c(1.0, 0.5), c(0.0, 0.0),
            c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.0),
            c(0.2, -0.1), c(0.0, 0.0), c(1.0, 0.0),
        ]);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]));
        let m = &p * d * p.clone().try_inverse().unwrap();
        let e = eig_general(&m).unwrap();
        assert!(eig_residual(&m, &e) < 1e-10);
        assert!(!e.is_near_defective());
        // Biorthogonal within the degenerate pair.
        let twos: Vec<usize> = (0..3).filter(|&i| (e.values[i] - c(2.0, 0.0)).norm() < 1e-8).collect();
        assert_eq!(twos.len(), 2);
        let cross = e.left.column(twos[0]).dotc(&e.right.column(twos[1]));
        assert!(cross.norm() < 1e-10);
    }

    #[test]
    fn non_square_rejected() {
        let m = CMat::zeros(2, 3);
        assert!(matches!(eig_general(&m), Err(Error::NotSquare { .. })));
        assert!(matches!(eig_hermitian(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn nan_rejected() {
        let mut m = CMat::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(eig_general(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn hermitian_sorted_and_unitary() {
        let a = random(8, 4);
        let h = &a + a.adjoint();
        let e = eig_hermitian(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let v = &e.vectors;
        assert!((v.adjoint() * v - CMat::identity(8, 8)).norm() < 1e-12);
        let recon = v * CMat::from_diagonal(&CVec::from_iterator(8, e.values.iter().map(|&x| c(x, 0.0)))) * v.adjoint();
        assert!((recon - &h).norm() / h.norm() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = random(3, 5);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn expm_of_pauli_x() {
        let x = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let t = 0.37;
        let u = expm_unitary(&x, t).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[
            c(t.cos(), 0.0), c(0.0, -t.sin()),
            c(0.0, -t.sin()), c(t.cos(), 0.0),
        ]);
        assert!((u - expect).norm() < 1e-14);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = CMat::from_fn(6, 3, |i, j| c((i as f64 + 1.0).powi(j as i32), 0.1 * j as f64));
        let x = CMat::from_row_slice(3, 1, &[c(1.0, 2.0), c(-0.5, 0.0), c(0.25, -1.0)]);
        let b = &a * &x;
        let got = lstsq(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-12);
    }

    #[test]
    fn lstsq_rejects_bad_shapes() {
        assert!(lstsq(&CMat::zeros(0, 0), &CMat::zeros(0, 1)).is_err());
        assert!(lstsq(&CMat::zeros(2, 3), &CMat::zeros(2, 1)).is_err());
        assert!(lstsq(&CMat::identity(3, 3), &CMat::zeros(2, 1)).is_err());
    }

    #[test]
    fn svd_reconstructs() {
        let m = CMat::from_fn(5, 3, |i, j| c((i * 3 + j) as f64, (i as f64 - j as f64) * 0.5));
        let d = svd(&m).unwrap();
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let s = CMat::from_diagonal(&CVec::from_iterator(3, d.s.iter().map(|&x| c(x, 0.0))));
        assert!((&d.u * s * d.v.adjoint() - &m).norm() / m.norm() < 1e-12);
    }

    fn check_svd(m: &CMat) -> Svd {
        let d = svd(m).unwrap();
        let k = d.s.len();
        assert_eq!(k, m.nrows().min(m.ncols()));
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let s = CMat::from_diagonal(&CVec::from_iterator(k, d.s.iter().map(|&x| c(x, 0.0))));
        assert!((&d.u * s * d.v.adjoint() - m).norm() <= 1e-13 * m.norm().max(1.0));
        let square = if m.nrows() >= m.ncols() { &d.v } else { &d.u };
        assert!((square.adjoint() * square - CMat::identity(k, k)).norm() < 1e-12);
        d
    }

    #[test]
    fn svd_of_rank_deficient_hankel() {
        // Hankel matrices of short exponential sums; low rank with rounding
        // noise in the trailing directions.
        let z = Complex64::from_polar(0.6, 1.9686808004571288);
        let y: Vec<f64> = (0..60)
            .map(|m| 0.29 - 0.47 * 0.6957f64.powi(m) + 2.0 * (c(0.173, -0.408) * z.powu(m as u32)).re)
            .collect();
        for l in [15, 20, 22, 30, 44] {
            let h = CMat::from_fn(60 - l, l + 1, |i, j| c(y[i + j], 0.0));
            let d = check_svd(&h);
            assert_eq!(d.rank(), 4, "L = {l}");
            check_svd(&h.adjoint());
        }
        let d = check_svd(&CMat::from_fn(6, 4, |i, j| c(0.5f64.powi((i + j) as i32), 0.0)));
        assert_eq!(d.rank(), 1);
        let d = check_svd(&CMat::zeros(3, 3));
        assert_eq!(d.rank(), 0);
    }

    #[test]
    fn svd_of_random_matrices() {
        for (seed, (r, k)) in [(3, 3), (7, 2), (4, 6), (9, 9)].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let m = CMat::from_fn(r, k, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            check_svd(&m);
        }
    }
}
