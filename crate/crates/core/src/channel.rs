//! Channels on Hilbert-Schmidt space: Kraus sets, natural representation,
//! spectral decomposition with conjugate pairing, the pseudo-Hermitian
//! metric and the swap-time symmetry check.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ABS_FLOOR, NEAR_DEFECTIVE};

const TP_TOL: f64 = 1e-10;
const CHOI_TOL: f64 = 1e-10;
pub const FIXED_POINT_TOL: f64 = 1e-8;
const METRIC_MAX_CONDITION: f64 = 1e10;

/// Row-major flatten: |R>> = sum R_mn |m>|n>.
pub fn vectorize(op: &CMat) -> Result<CVec> {
    if op.nrows() != op.ncols() {
        return Err(Error::NotSquare { rows: op.nrows(), cols: op.ncols() });
    }
    let d = op.nrows();
    Ok(CVec::from_fn(d * d, |k, _| op[(k / d, k % d)]))
}

pub fn unvectorize(v: &CVec) -> Result<CMat> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::DimensionMismatch(format!("vector length {} is not a perfect square", v.len())));
    }
    Ok(CMat::from_fn(d, d, |m, n| v[m * d + n]))
}

/// Vectorized Hermitian conjugate of a vectorized operator.
pub fn vec_dagger(v: &CVec) -> CVec {
    let d = (v.len() as f64).sqrt().round() as usize;
    CVec::from_fn(v.len(), |k, _| v[(k % d) * d + k / d].conj())
}

#[derive(Debug, Clone)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMat>,
}

impl KrausSet {
    /// Builds a Kraus set and checks trace preservation.
    pub fn new(operators: Vec<CMat>) -> Result<Self> {
        let k = Self::unchecked(operators)?;
        let residual = k.trace_preserving_residual();
        if residual > TP_TOL {
            return Err(Error::InvalidKraus(format!(
                "not trace preserving: |sum M^dag M - I| = {residual:.3e}"
            )));
        }
        Ok(k)
    }

    /// Shape and finiteness checks only. Use for sets that are about to be
    /// verified rather than trusted.
    pub fn unchecked(operators: Vec<CMat>) -> Result<Self> {
        let first = operators.first().ok_or(Error::Empty("Kraus operator list"))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::Empty("Kraus operator"));
        }
        for (i, m) in operators.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {i} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::check_finite(m, "Kraus operator")?;
        }
        Ok(KrausSet { dim, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMat] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn trace_preserving_residual(&self) -> f64 {
        let mut s = -CMat::identity(self.dim, self.dim);
        for m in &self.operators {
            s += m.adjoint() * m;
        }
        s.norm()
    }

    /// Applies the channel to an operator.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for m in &self.operators {
            out += m * rho * m.adjoint();
        }
        out
    }

    /// Haar-like random channel with `rank` Kraus operators, obtained by
    /// slicing a random isometry from C^d into C^(rank d).
    pub fn random<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 || rank == 0 {
            return Err(Error::Empty("random channel dimensions"));
        }
        let g = CMat::from_fn(rank * dim, dim, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        let d = linalg::svd(&g)?;
        let iso = &d.u * d.v.adjoint();
        let ops = (0..rank).map(|k| iso.rows(k * dim, dim).into_owned()).collect();
        KrausSet::new(ops)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = KrausDocument {
            dim: self.dim,
            operators: self
                .operators
                .iter()
                .map(|m| {
                    (0..self.dim * self.dim)
                        .map(|k| {
                            let z = m[(k / self.dim, k % self.dim)];
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses and validates, including trace preservation.
    pub fn from_json(text: &str) -> Result<Self> {
        KrausSet::new(parse_kraus_operators(text)?)
    }

    /// Parses with shape checks only, so invalid channels can be reported.
    pub fn from_json_unchecked(text: &str) -> Result<Self> {
        KrausSet::unchecked(parse_kraus_operators(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct KrausDocument {
    dim: usize,
    operators: Vec<Vec<[f64; 2]>>,
}

fn parse_kraus_operators(text: &str) -> Result<Vec<CMat>> {
    let doc: KrausDocument = serde_json::from_str(text)?;
    let d = doc.dim;
    if d == 0 {
        return Err(Error::Parse("field `dim` must be positive".into()));
    }
    doc.operators
        .iter()
        .enumerate()
        .map(|(i, entries)| {
            if entries.len() != d * d {
                return Err(Error::Parse(format!(
                    "operators[{i}] has {} entries, expected dim^2 = {}",
                    entries.len(),
                    d * d
                )));
            }
            Ok(CMat::from_fn(d, d, |r, c| {
                let [re, im] = entries[r * d + c];
                Complex64::new(re, im)
            }))
        })
        .collect()
}

/// A d^2 x d^2 matrix acting on row-major vectorized operators.
#[derive(Debug, Clone)]
pub struct SuperopMatrix {
    d: usize,
    mat: CMat,
}

impl SuperopMatrix {
    pub fn new(d: usize, mat: CMat) -> Result<Self> {
        if mat.nrows() != d * d || mat.ncols() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "superoperator must be {0}x{0}, got {1}x{2}",
                d * d,
                mat.nrows(),
                mat.ncols()
            )));
        }
        linalg::check_finite(&mat, "superoperator")?;
        Ok(SuperopMatrix { d, mat })
    }

    pub fn identity(d: usize) -> Self {
        SuperopMatrix { d, mat: CMat::identity(d * d, d * d) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        &self.mat * v
    }

    pub fn adjoint(&self) -> Self {
        SuperopMatrix { d: self.d, mat: self.mat.adjoint() }
    }

    /// Composition self * other (apply `other` first).
    pub fn compose(&self, other: &SuperopMatrix) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch(format!("cannot compose d={} with d={}", self.d, other.d)));
        }
        Ok(SuperopMatrix { d: self.d, mat: &self.mat * &other.mat })
    }
}

/// sum M (x) conj(M).
pub fn natural_representation(k: &KrausSet) -> SuperopMatrix {
    let n = k.dim * k.dim;
    let mut mat = CMat::zeros(n, n);
    for m in &k.operators {
        mat += linalg::kron(m, &m.map(|z| z.conj()));
    }
    SuperopMatrix { d: k.dim, mat }
}

/// sum M^dag (x) M^T, the matrix of the Heisenberg-picture map.
pub fn dual_representation(k: &KrausSet) -> SuperopMatrix {
    let n = k.dim * k.dim;
    let mut mat = CMat::zeros(n, n);
    for m in &k.operators {
        mat += linalg::kron(&m.adjoint(), &m.transpose());
    }
    SuperopMatrix { d: k.dim, mat }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CptpReport {
    pub trace_preserving_residual: f64,
    pub choi_min_eigenvalue: f64,
}

impl CptpReport {
    pub fn trace_preserving(&self) -> bool {
        self.trace_preserving_residual <= TP_TOL
    }

    pub fn completely_positive(&self) -> bool {
        self.choi_min_eigenvalue >= -CHOI_TOL
    }

    pub fn passed(&self) -> bool {
        self.trace_preserving() && self.completely_positive()
    }
}

pub fn choi_matrix(k: &KrausSet) -> CMat {
    let d = k.dim;
    let mut j = CMat::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let mut e = CMat::zeros(d, d);
            e[(a, b)] = Complex64::new(1.0, 0.0);
            let block = k.apply(&e);
            j.view_mut((a * d, b * d), (d, d)).copy_from(&block);
        }
    }
    j
}

pub fn verify_cptp(k: &KrausSet) -> Result<CptpReport> {
    let j = choi_matrix(k);
    let j = (&j + j.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = linalg::eig_hermitian(&j)?;
    Ok(CptpReport {
        trace_preserving_residual: k.trace_preserving_residual(),
        choi_min_eigenvalue: eig.values[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenKind {
    Real,
    ConjugatePairMember { partner: usize },
    Unpaired,
}

#[derive(Debug, Clone)]
pub struct ChannelSpectrum {
    pub d: usize,
    pub values: Vec<Complex64>,
    /// Right eigenvectors as columns.
    pub right: CMat,
    /// Left eigenvectors as columns, scaled so that left^dag right = I
    /// unless the spectrum is near-defective.
    pub left: CMat,
    pub kinds: Vec<EigenKind>,
    pub fixed_points: Vec<usize>,
    pub min_conditioning: f64,
    pub near_defective: bool,
    pub pairing_tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub passed: bool,
    pub reals: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
}

/// Greedy nearest-conjugate pairing; ties go to the lower index.
pub fn pair_conjugates(values: &[Complex64], tol: f64) -> PairingReport {
    let n = values.len();
    let mut reals = Vec::new();
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    let mut used = vec![false; n];
    for i in 0..n {
        if values[i].im.abs() <= tol {
            reals.push(i);
            used[i] = true;
        }
    }
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = values[i].conj();
        let best = (0..n)
            .filter(|&j| !used[j])
            .map(|j| (j, (values[j] - target).norm()))
            .filter(|&(_, dist)| dist <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match best {
            Some((j, _)) => {
                used[j] = true;
                pairs.push((i, j));
            }
            None => unmatched.push(i),
        }
    }
    PairingReport { passed: unmatched.is_empty(), reals, pairs, unmatched }
}

pub fn classify_real_or_pairs(cs: &ChannelSpectrum) -> PairingReport {
    pair_conjugates(&cs.values, cs.pairing_tolerance)
}

pub fn spectral_decompose(s: &SuperopMatrix) -> Result<ChannelSpectrum> {
    let eig = linalg::eig_general(&s.mat)?;
    let min_conditioning = eig.min_conditioning();
    let near_defective = min_conditioning < NEAR_DEFECTIVE;
    let tol = 1e-8 * s.mat.norm().max(1.0);
    let pairing = pair_conjugates(&eig.values, tol);

    let n = eig.values.len();
    let mut kinds = vec![EigenKind::Unpaired; n];
    for &i in &pairing.reals {
        kinds[i] = EigenKind::Real;
    }
    for &(a, b) in &pairing.pairs {
        kinds[a] = EigenKind::ConjugatePairMember { partner: b };
        kinds[b] = EigenKind::ConjugatePairMember { partner: a };
    }

    let mut right = eig.right;
    let mut left = eig.left;
    if !near_defective {
        for j in 0..n {
            let overlap = left.column(j).dotc(&right.column(j));
            let scaled = left.column(j) / overlap.conj();
            left.set_column(j, &scaled);
        }
        // A Hermitian-preserving map sends R to R^dag for the conjugate
        // eigenvalue; using the daggers for the partner keeps the pair
        // consistent, which the metric relies on.
        for &(a, b) in &pairing.pairs {
            let r = vec_dagger(&right.column(a).into_owned());
            let l = vec_dagger(&left.column(a).into_owned());
            right.set_column(b, &r);
            left.set_column(b, &l);
        }
    }
    let fixed_points = (0..n)
        .filter(|&j| (eig.values[j] - Complex64::new(1.0, 0.0)).norm() <= FIXED_POINT_TOL)
        .collect();
    Ok(ChannelSpectrum {
        d: s.d,
        values: eig.values,
        right,
        left,
        kinds,
        fixed_points,
        min_conditioning,
        near_defective,
        pairing_tolerance: tol,
    })
}

impl ChannelSpectrum {
    /// max |<<L_i|R_j>> - delta_ij|.
    pub fn biorthonormality_error(&self) -> f64 {
        let g = self.left.adjoint() * &self.right;
        let n = g.nrows();
        (g - CMat::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest |Phi(R^dag) - conj(lambda) R^dag| over right eigenvectors,
    /// relative to |Phi|.
    pub fn conjugate_eigen_residual(&self, s: &SuperopMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.values.len() {
            let r = self.right.column(j).into_owned();
            let rd = vec_dagger(&r);
            let res = (s.apply(&rd) - &rd * self.values[j].conj()).norm() / r.norm().max(ABS_FLOOR);
            worst = worst.max(res);
        }
        worst / s.mat.norm().max(ABS_FLOOR)
    }
}

#[derive(Debug, Clone)]
pub struct Metric {
    pub eta: SuperopMatrix,
    pub eta_inv: SuperopMatrix,
    /// |eta Phi eta^-1 - Phi^dag| / |Phi|.
    pub residual: f64,
    pub hermiticity_residual: f64,
    pub condition: f64,
}

/// Metric operator from the left eigenvectors. `signs` holds one entry per
/// real eigenvalue (in index order); `None` means all +1.
pub fn build_metric(cs: &ChannelSpectrum, s: &SuperopMatrix, signs: Option<&[f64]>) -> Result<Metric> {
    if cs.near_defective {
        return Err(Error::NearDefective { min_conditioning: cs.min_conditioning });
    }
    let n = cs.values.len();
    let real_idx: Vec<usize> = (0..n).filter(|&j| cs.kinds[j] == EigenKind::Real).collect();
    if let Some(sg) = signs {
        if sg.len() != real_idx.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} metric signs given for {} real eigenvalues",
                sg.len(),
                real_idx.len()
            )));
        }
        if sg.iter().any(|&a| a != 1.0 && a != -1.0) {
            return Err(Error::InvalidParameter("metric signs must be +1 or -1".into()));
        }
    }
    if let Some(j) = cs.kinds.iter().position(|k| *k == EigenKind::Unpaired) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue {} has no conjugate partner; the map is not pseudo-Hermitian",
            cs.values[j]
        )));
    }
    let mut eta = CMat::zeros(n, n);
    let mut eta_inv = CMat::zeros(n, n);
    for (k, &j) in real_idx.iter().enumerate() {
        let a = Complex64::new(signs.map_or(1.0, |sg| sg[k]), 0.0);
        let l = cs.left.column(j);
        let r = cs.right.column(j);
        eta += l * l.adjoint() * a;
        eta_inv += r * r.adjoint() * a;
    }
    for j in 0..n {
        if let EigenKind::ConjugatePairMember { .. } = cs.kinds[j] {
            let l = cs.left.column(j).into_owned();
            let r = cs.right.column(j).into_owned();
            eta += &l * vec_dagger(&l).adjoint();
            eta_inv += vec_dagger(&r) * r.adjoint();
        }
    }
    let cond = linalg::svd(&eta)?.condition_number();
    if !(cond <= METRIC_MAX_CONDITION) {
        return Err(Error::SingularMetric { condition: cond });
    }
    let phi = s.mat();
    let residual = (&eta * phi * &eta_inv - phi.adjoint()).norm() / phi.norm().max(ABS_FLOOR);
    let herm = (&eta - eta.adjoint()).norm() / eta.norm().max(ABS_FLOOR);
    Ok(Metric {
        eta: SuperopMatrix { d: s.d, mat: eta },
        eta_inv: SuperopMatrix { d: s.d, mat: eta_inv },
        residual,
        hermiticity_residual: herm,
        condition: cond,
    })
}

/// |S conj(s) S - s| / |s| with S the tensor-factor swap.
pub fn verify_swap_time_symmetry(s: &SuperopMatrix) -> f64 {
    let d = s.d;
    let swap = |k: usize| (k % d) * d + k / d;
    let m = &s.mat;
    let n = m.nrows();
    let mut diff = 0.0;
    for a in 0..n {
        for b in 0..n {
            diff += (m[(swap(a), swap(b))].conj() - m[(a, b)]).norm_sqr();
        }
    }
    diff.sqrt() / m.norm().max(ABS_FLOOR)
}
