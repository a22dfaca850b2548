//! Sequential-measurement statistics: exact outcome probabilities under a
//! repeated channel, their spectral (exponential-sum) decomposition, and
//! Monte-Carlo sampling of measurement records.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{natural_representation, spectral_decompose, vectorize, KrausSet};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::models::Pauli;

const STATE_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-10;
const SAMPLE_PROB_TOL: f64 = 1e-12;
/// Trajectories per work unit. Fixed so that the reduction order does not
/// depend on the number of workers.
const CHUNK: usize = 2048;

/// A density operator stored in vectorized (row-major) form.
#[derive(Debug, Clone)]
pub struct StateVec {
    d: usize,
    vec: CVec,
}

impl StateVec {
    pub fn from_density(rho: &CMat) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::NotSquare { rows: rho.nrows(), cols: rho.ncols() });
        }
        linalg::check_finite(rho, "density matrix")?;
        let herm = (rho - rho.adjoint()).norm();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (|rho - rho^dag| = {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let h = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let min = linalg::eig_hermitian(&h)?.values[0];
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(StateVec { d: rho.nrows(), vec: vectorize(&h)? })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let rho = CMat::identity(d, d) / Complex64::new(d as f64, 0.0);
        StateVec { d, vec: vectorize(&rho).expect("square") }
    }

    /// Normalizes `psi` and returns |psi><psi|.
    pub fn pure(psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let p = psi / Complex64::new(n, 0.0);
        let rho = &p * p.adjoint();
        Ok(StateVec { d: psi.len(), vec: vectorize(&rho)? })
    }

    /// Product of single-spin states (I + r.sigma)/2 with |r| <= 1, site 0
    /// leftmost.
    pub fn product_bloch(bloch: &[[f64; 3]]) -> Result<Self> {
        if bloch.is_empty() {
            return Err(Error::Empty("Bloch vector list"));
        }
        let mut rho = CMat::identity(1, 1);
        for (k, r) in bloch.iter().enumerate() {
            let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if !len.is_finite() || len > 1.0 + 1e-12 {
                return Err(Error::InvalidState(format!("Bloch vector {k} has length {len}")));
            }
            let mut s = Pauli::I.matrix();
            for (axis, &c) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(r) {
                s += axis.matrix() * Complex64::new(c, 0.0);
            }
            rho = linalg::kron(&rho, &(s * Complex64::new(0.5, 0.0)));
        }
        StateVec::from_density(&rho)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vec(&self) -> &CVec {
        &self.vec
    }

    pub fn density(&self) -> CMat {
        CMat::from_fn(self.d, self.d, |m, n| self.vec[m * self.d + n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesKind {
    Exact,
    Sampled { samples: u64, seed: u64 },
}

/// Per-cycle values for one outcome; `values[k]` belongs to cycle m = k + 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencySeries {
    pub outcome: usize,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl FrequencySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub pole: Complex64,
    pub amplitude: Complex64,
    /// 0 for c lambda^k, 1 for c k lambda^(k-1).
    pub poly_order: u8,
}

/// Signal model sum_j c_j lambda_j^k over k = m - 1 = 0, 1, ...
#[derive(Debug, Clone, Serialize)]
pub struct ExponentialModel {
    pub modes: Vec<Mode>,
    pub residual: f64,
}

impl ExponentialModel {
    pub fn evaluate(&self, k: usize) -> Complex64 {
        self.modes
            .iter()
            .map(|m| match m.poly_order {
                0 => m.amplitude * m.pole.powu(k as u32),
                _ if k == 0 => Complex64::new(0.0, 0.0),
                _ => m.amplitude * (k as f64) * m.pole.powu(k as u32 - 1),
            })
            .sum()
    }

    pub fn series(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.evaluate(k).re).collect()
    }
}

fn effect_vector(kraus: &KrausSet, outcome: usize) -> Result<CVec> {
    if outcome >= kraus.len() {
        return Err(Error::InvalidOutcome { index: outcome, count: kraus.len() });
    }
    let m = &kraus.operators()[outcome];
    vectorize(&(m.adjoint() * m))
}

fn check_dims(kraus: &KrausSet, rho0: &StateVec) -> Result<()> {
    if kraus.dim() != rho0.d {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, state has dimension {}",
            kraus.dim(),
            rho0.d
        )));
    }
    Ok(())
}

/// p^(m) for m = 1..=n by repeated application of the channel to the state.
pub fn exact_probabilities(kraus: &KrausSet, rho0: &StateVec, outcome: usize, n: usize) -> Result<FrequencySeries> {
    check_dims(kraus, rho0)?;
    let w = effect_vector(kraus, outcome)?;
    let phi = natural_representation(kraus);
    let d = kraus.dim();
    let mut x = rho0.vec.clone();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let tr: Complex64 = (0..d).map(|i| x[i * d + i]).sum();
        if (tr - Complex64::new(1.0, 0.0)).norm() > PROB_TOL {
            return Err(Error::InvalidState(format!("trace drifted to {tr}")));
        }
        let p = w.dotc(&x);
        if p.im.abs() > PROB_TOL || p.re < -PROB_TOL || p.re > 1.0 + PROB_TOL {
            return Err(Error::ProbabilityOutOfRange { value: if p.im.abs() > PROB_TOL { p.norm() } else { p.re } });
        }
        values.push(p.re.clamp(0.0, 1.0));
        x = phi.apply(&x);
    }
    Ok(FrequencySeries { outcome, values, kind: SeriesKind::Exact })
}

/// Amplitudes c_j = Tr(M_i R_j M_i^dag) Tr(L_j^dag rho) over all channel
/// eigenvalues. `residual` is |sum_j c_j - p^(1)|.
pub fn decompose_coefficients(kraus: &KrausSet, rho0: &StateVec, outcome: usize) -> Result<ExponentialModel> {
    check_dims(kraus, rho0)?;
    let w = effect_vector(kraus, outcome)?;
    let cs = spectral_decompose(&natural_representation(kraus))?;
    if cs.near_defective {
        return Err(Error::NearDefective { min_conditioning: cs.min_conditioning });
    }
    let modes: Vec<Mode> = (0..cs.values.len())
        .map(|j| {
            let a = w.dotc(&cs.right.column(j)) * cs.left.column(j).dotc(&rho0.vec);
            Mode { pole: cs.values[j], amplitude: a, poly_order: 0 }
        })
        .collect();
    let p1 = w.dotc(&rho0.vec);
    let total: Complex64 = modes.iter().map(|m| m.amplitude).sum();
    Ok(ExponentialModel { modes, residual: (total - p1).norm() })
}

/// Outcome counts and frequencies from sampled measurement records.
#[derive(Debug, Clone)]
pub struct SampledRecord {
    /// counts[outcome][k] for cycle m = k + 1.
    pub counts: Vec<Vec<u64>>,
    pub samples: u64,
    pub seed: u64,
}

impl SampledRecord {
    pub fn frequencies(&self, outcome: usize) -> Result<FrequencySeries> {
        let c = self
            .counts
            .get(outcome)
            .ok_or(Error::InvalidOutcome { index: outcome, count: self.counts.len() })?;
        Ok(FrequencySeries {
            outcome,
            values: c.iter().map(|&x| x as f64 / self.samples as f64).collect(),
            kind: SeriesKind::Sampled { samples: self.samples, seed: self.seed },
        })
    }
}

/// Runs `samples` independent measurement records of `n` cycles each.
///
/// The initial mixed state is unravelled into its eigenvectors, and each
/// record evolves a pure state: psi <- K_a psi / sqrt(p_a). This gives the
/// same outcome statistics as collapsing the density matrix.
///
/// Trajectory t draws from ChaCha8 seeded with `seed` on stream t, so the
/// result is identical for every worker count. `threads = None` uses the
/// global rayon pool.
pub fn sample_trajectories(
    kraus: &KrausSet,
    rho0: &StateVec,
    n: usize,
    samples: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<SampledRecord> {
    check_dims(kraus, rho0)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let d = kraus.dim();
    let r = kraus.len();
    let ops: Vec<Vec<Complex64>> = kraus
        .operators()
        .iter()
        .map(|m| (0..d * d).map(|k| m[(k / d, k % d)]).collect())
        .collect();
    let rho = rho0.density();
    let eig = linalg::eig_hermitian(&rho)?;
    let mut components = Vec::new();
    let mut weights = Vec::new();
    for (i, &wt) in eig.values.iter().enumerate() {
        if wt > 1e-14 {
            components.push(eig.vectors.column(i).iter().cloned().collect::<Vec<_>>());
            weights.push(wt);
        }
    }
    let total: f64 = weights.iter().sum();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();

    let job = Job { d, r, n, ops: &ops, components: &components, cumulative: &cumulative, seed };
    let chunks = (samples as usize).div_ceil(CHUNK);
    let run = || -> Result<Vec<Vec<u64>>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = (c * CHUNK) as u64;
                let hi = (lo + CHUNK as u64).min(samples);
                job.run(lo, hi)
            })
            .try_reduce(|| vec![0u64; r * n], |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            })
            .map(|flat| flat.chunks(n).map(|c| c.to_vec()).collect())
    };
    let counts = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SampledRecord { counts, samples, seed })
}

struct Job<'a> {
    d: usize,
    r: usize,
    n: usize,
    ops: &'a [Vec<Complex64>],
    components: &'a [Vec<Complex64>],
    cumulative: &'a [f64],
    seed: u64,
}

impl Job<'_> {
    fn run(&self, lo: u64, hi: u64) -> Result<Vec<u64>> {
        let (d, r, n) = (self.d, self.r, self.n);
        let mut counts = vec![0u64; r * n];
        let mut psi = vec![Complex64::new(0.0, 0.0); d];
        let mut out = vec![vec![Complex64::new(0.0, 0.0); d]; r];
        let mut probs = vec![0.0; r];
        for t in lo..hi {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(t);
            let u: f64 = rng.random();
            let pick = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1);
            psi.copy_from_slice(&self.components[pick]);
            for m in 0..n {
                for a in 0..r {
                    let k = &self.ops[a];
                    let mut p = 0.0;
                    for i in 0..d {
                        let row = &k[i * d..(i + 1) * d];
                        let v: Complex64 = row.iter().zip(&psi).map(|(x, y)| x * y).sum();
                        out[a][i] = v;
                        p += v.norm_sqr();
                    }
                    if !(-SAMPLE_PROB_TOL..=1.0 + SAMPLE_PROB_TOL).contains(&p) {
                        return Err(Error::ProbabilityOutOfRange { value: p });
                    }
                    probs[a] = p;
                }
                let total: f64 = probs.iter().sum();
                let mut u: f64 = rng.random::<f64>() * total;
                let mut a = r - 1;
                for (i, &p) in probs.iter().enumerate() {
                    if u < p {
                        a = i;
                        break;
                    }
                    u -= p;
                }
                counts[a * n + m] += 1;
                let s = 1.0 / probs[a].sqrt();
                for (dst, src) in psi.iter_mut().zip(&out[a]) {
                    *dst = src * s;
                }
            }
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{probe_target, ConcatenatedChannel, HamiltonianSpec, RimParams};

    fn example1(mu: f64, nu: f64) -> ConcatenatedChannel {
        let (a, b) = probe_target(1.0, 1.0).unwrap();
        ConcatenatedChannel::build(&a, &b, &RimParams::new(mu), nu).unwrap()
    }

    fn plus_x() -> StateVec {
        StateVec::product_bloch(&[[1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn state_validation() {
        let bad = CMat::from_row_slice(2, 2, &[
            Complex64::new(1.2, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(-0.2, 0.0),
        ]);
        assert!(StateVec::from_density(&bad).is_err());
        assert!(StateVec::product_bloch(&[[1.0, 1.0, 0.0]]).is_err());
        let mm = StateVec::maximally_mixed(4);
        assert!((mm.density().trace().re - 1.0).abs() < 1e-15);
        let p = StateVec::product_bloch(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        assert!((p.density()[(1, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_probe_is_half() {
        let z = HamiltonianSpec::zero(1).unwrap();
        let ch = ConcatenatedChannel::build(&z, &z, &RimParams::new(1e-4), 1e-4).unwrap();
        let s = exact_probabilities(&ch.kraus, &StateVec::maximally_mixed(2), 1, 20).unwrap();
        assert!(s.values.iter().all(|&p| (p - 0.5).abs() < 1e-15));
        assert!(exact_probabilities(&ch.kraus, &StateVec::maximally_mixed(2), 2, 20).is_err());
    }

    #[test]
    fn spectral_formula_reproduces_series() {
        let ch = example1(0.3 * std::f64::consts::PI, 0.4 * std::f64::consts::PI);
        let rho = plus_x();
        let exact = exact_probabilities(&ch.kraus, &rho, 1, 500).unwrap();
        let model = decompose_coefficients(&ch.kraus, &rho, 1).unwrap();
        assert!(model.residual < 1e-10);
        let pred = model.series(500);
        let worst = exact.values.iter().zip(&pred).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "max deviation {worst}");
        for m in &model.modes {
            if m.pole.im.abs() > 1e-8 {
                let partner = model.modes.iter().find(|x| (x.pole - m.pole.conj()).norm() < 1e-8).unwrap();
                assert!((partner.amplitude - m.amplitude.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_channel_single_mode() {
        let k = KrausSet::new(vec![CMat::identity(2, 2)]).unwrap();
        let model = decompose_coefficients(&k, &plus_x(), 0).unwrap();
        let active: Vec<_> = model.modes.iter().filter(|m| m.amplitude.norm() > 1e-12).collect();
        assert!(active.iter().all(|m| (m.pole - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        let s: Complex64 = active.iter().map(|m| m.amplitude).sum();
        assert!((s.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_normalized() {
        let ch = example1(0.9, 0.6);
        let rho = plus_x();
        let a = sample_trajectories(&ch.kraus, &rho, 30, 5000, 42, Some(1)).unwrap();
        let b = sample_trajectories(&ch.kraus, &rho, 30, 5000, 42, Some(3)).unwrap();
        assert_eq!(a.counts, b.counts);
        for k in 0..30 {
            assert_eq!(a.counts[0][k] + a.counts[1][k], 5000);
        }
        let c = sample_trajectories(&ch.kraus, &rho, 30, 5000, 43, Some(1)).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn sampled_frequencies_track_probabilities() {
        let ch = example1(0.9, 0.6);
        let rho = plus_x();
        let s = 20_000u64;
        let rec = sample_trajectories(&ch.kraus, &rho, 40, s, 7, None).unwrap();
        let f = rec.frequencies(1).unwrap();
        let p = exact_probabilities(&ch.kraus, &rho, 1, 40).unwrap();
        let inside = f
            .values
            .iter()
            .zip(&p.values)
            .filter(|(f, p)| (*f - *p).abs() <= 4.0 * (*p * (1.0 - *p) / s as f64).sqrt() + 1e-12)
            .count();
        assert!(inside >= 39);
    }

    #[test]
    fn decoupled_probe_sampling() {
        let z = HamiltonianSpec::zero(1).unwrap();
        let ch = ConcatenatedChannel::build(&z, &z, &RimParams::new(1e-4), 1e-4).unwrap();
        let s = 10_000u64;
        let rec = sample_trajectories(&ch.kraus, &StateVec::maximally_mixed(2), 10, s, 1, None).unwrap();
        let sigma = (0.25 / s as f64).sqrt();
        assert!(rec.frequencies(1).unwrap().values.iter().all(|f| (f - 0.5).abs() <= 4.0 * sigma));
    }
}
