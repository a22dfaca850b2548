//! Hamiltonian parameters from estimated pole phases: phases become
//! frequencies, which are matched to linear forms of the unknowns.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::specest::EstimatedSpectrum;

/// Phases within this margin of pi are flagged as possibly aliased.
pub const ALIAS_MARGIN: f64 = 0.05;

/// Relative RMS residual above which a match is rejected.
pub const MAX_RELATIVE_RESIDUAL: f64 = 0.05;

/// Upper bound on enumerated assignments.
const MAX_ASSIGNMENTS: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaEstimate {
    /// rad/s, positive.
    pub beta: f64,
    /// |arg| of the source pole, in [0, pi].
    pub phase: f64,
    pub aliased: bool,
    /// Index into the spectrum's pole list.
    pub source: usize,
    pub tau_b: f64,
}

impl BetaEstimate {
    /// Member k of the alias family beta + 2 pi k / tau_B.
    pub fn family(&self, k: i32) -> f64 {
        self.beta + TAU * k as f64 / self.tau_b
    }
}

/// Converts the oscillating poles to positive angular frequencies. Real
/// poles (fixed points included) carry no frequency and are skipped, as is
/// the negative-phase member of each conjugate pair.
pub fn phases_to_betas(spec: &EstimatedSpectrum, tau_b: f64) -> Result<Vec<BetaEstimate>> {
    if !(tau_b > 0.0 && tau_b.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau_B must be positive, got {tau_b}")));
    }
    let mut out = Vec::new();
    for (source, p) in spec.poles.iter().enumerate() {
        let z = p.pole;
        if z.norm() < 1e-12 {
            return Err(Error::InvalidParameter(format!("pole {source} has zero magnitude")));
        }
        if z.im <= 1e-9 * z.norm() {
            continue;
        }
        let phase = z.arg();
        out.push(BetaEstimate { beta: phase / tau_b, phase, aliased: phase > PI - ALIAS_MARGIN, source, tau_b });
    }
    out.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub label: String,
    /// One coefficient per unknown.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Positive(usize),
    /// unknowns[a] >= unknowns[b]
    AtLeast(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPattern {
    pub name: String,
    pub unknowns: Vec<String>,
    pub forms: Vec<LinearForm>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

fn form(label: &str, coeffs: &[f64]) -> LinearForm {
    LinearForm { label: label.to_string(), coeffs: coeffs.to_vec() }
}

impl ParameterPattern {
    /// Gaps of the flip-flop two-spin B over (omega, D).
    pub fn two_spin() -> Self {
        ParameterPattern {
            name: "two_spin".into(),
            unknowns: vec!["omega".into(), "D".into()],
            forms: vec![
                form("2D", &[0.0, 2.0]),
                form("omega-3D", &[1.0, -3.0]),
                form("omega-D", &[1.0, -1.0]),
                form("omega+D", &[1.0, 1.0]),
                form("omega+3D", &[1.0, 3.0]),
                form("2omega", &[2.0, 0.0]),
            ],
            constraints: vec![Constraint::Positive(0), Constraint::Positive(1)],
        }
    }

    /// Gaps of the Ising three-spin B with omega_L tau_B a multiple of 2 pi.
    /// The labelling is fixed by D12 >= D23 >= D13.
    pub fn three_spin() -> Self {
        ParameterPattern {
            name: "three_spin".into(),
            unknowns: vec!["D12".into(), "D13".into(), "D23".into()],
            forms: vec![
                form("(D23-D13)/2", &[0.0, -0.5, 0.5]),
                form("(D12-D23)/2", &[0.5, 0.0, -0.5]),
                form("(D12-D13)/2", &[0.5, -0.5, 0.0]),
                form("(D13+D23)/2", &[0.0, 0.5, 0.5]),
                form("(D12+D13)/2", &[0.5, 0.5, 0.0]),
                form("(D12+D23)/2", &[0.5, 0.0, 0.5]),
            ],
            constraints: vec![
                Constraint::Positive(0),
                Constraint::Positive(1),
                Constraint::Positive(2),
                Constraint::AtLeast(0, 2),
                Constraint::AtLeast(2, 1),
            ],
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "two_spin" => Some(Self::two_spin()),
            "three_spin" => Some(Self::three_spin()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.unknowns.len();
        if k == 0 || self.forms.is_empty() {
            return Err(Error::InvalidParameter(format!("pattern {} has no unknowns or forms", self.name)));
        }
        for f in &self.forms {
            if f.coeffs.len() != k || f.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!("form {} needs {k} finite coefficients", f.label)));
            }
        }
        for c in &self.constraints {
            let bad = match *c {
                Constraint::Positive(i) => i >= k,
                Constraint::AtLeast(a, b) => a >= k || b >= k,
            };
            if bad {
                return Err(Error::InvalidParameter(format!("constraint {c:?} refers to a missing unknown")));
            }
        }
        Ok(())
    }

    /// Evaluates every form at the given unknowns.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forms.iter().map(|f| f.coeffs.iter().zip(x).map(|(c, v)| c * v).sum()).collect()
    }

    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|c| match *c {
            Constraint::Positive(i) => x[i] > 0.0,
            Constraint::AtLeast(a, b) => x[a] >= x[b] - tol,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    /// Unknowns in rad/s, ordered as in the pattern.
    pub values: Vec<f64>,
    /// (beta in rad/s, form index) pairs, ascending in beta.
    pub assignment: Vec<(f64, usize)>,
    /// RMS misfit in rad/s.
    pub residual: f64,
    /// Assignments that were solved.
    pub candidates: usize,
}

/// Exhaustive matching of frequencies (rad/s) to the pattern's forms. Each
/// injective assignment is solved by linear least squares; the feasible one
/// with the smallest residual wins, ties going to the lexicographically
/// first assignment over the sorted input.
pub fn match_parameters(betas: &[f64], pattern: &ParameterPattern) -> Result<Match> {
    pattern.validate()?;
    let k = pattern.unknowns.len();
    if betas.len() < k {
        return Err(Error::NoFeasibleAssignment(format!("{} frequencies for {k} unknowns", betas.len())));
    }
    if betas.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("frequencies"));
    }
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = pattern.forms.len();
    let used = sorted.len().min(nf);
    let count = binomial(sorted.len(), used).saturating_mul(permutations(nf, used));
    if count > MAX_ASSIGNMENTS {
        return Err(Error::InvalidParameter(format!("{count} assignments exceed the enumeration limit")));
    }
    let scale = sorted.iter().fold(0.0f64, |m, b| m.max(b.abs())).max(f64::MIN_POSITIVE);

    let mut best: Option<Match> = None;
    let mut candidates = 0;
    let mut full_rank_seen = false;
    let mut subset: Vec<usize> = (0..used).collect();
    loop {
        let chosen: Vec<f64> = subset.iter().map(|&i| sorted[i]).collect();
        for_each_permutation(nf, used, &mut |forms| {
            candidates += 1;
            let Some((x, rms)) = solve(pattern, &chosen, forms) else { return };
            full_rank_seen = true;
            if !pattern.feasible(&x, 1e-9 * scale) {
                return;
            }
            let pred = pattern.predict(&x);
            if forms.iter().any(|&f| pred[f] <= 0.0) {
                return;
            }
            let better = match &best {
                None => true,
                Some(b) => rms < b.residual - 1e-12 * scale,
            };
            if better {
                let assignment = chosen.iter().copied().zip(forms.iter().copied()).collect();
                best = Some(Match { values: x, assignment, residual: rms, candidates: 0 });
            }
        });
        if !next_combination(&mut subset, sorted.len()) {
            break;
        }
    }
    if !full_rank_seen {
        return Err(Error::RankDeficient(format!("no assignment determines all of {:?}", pattern.unknowns)));
    }
    match best {
        Some(mut m) if m.residual <= MAX_RELATIVE_RESIDUAL * scale => {
            m.candidates = candidates;
            Ok(m)
        }
        Some(m) => Err(Error::NoFeasibleAssignment(format!(
            "best residual {:.4e} rad/s over {candidates} candidate assignments exceeds {:.0}% of the largest frequency",
            m.residual,
            100.0 * MAX_RELATIVE_RESIDUAL
        ))),
        None => Err(Error::NoFeasibleAssignment(format!(
            "all {candidates} candidate assignments violate the pattern constraints"
        ))),
    }
}

fn solve(pattern: &ParameterPattern, betas: &[f64], forms: &[usize]) -> Option<(Vec<f64>, f64)> {
    let k = pattern.unknowns.len();
    let a = DMatrix::from_fn(forms.len(), k, |r, c| pattern.forms[forms[r]].coeffs[c]);
    let y = DVector::from_column_slice(betas);
    let svd = linalg::svd(&a.map(|v| Complex64::new(v, 0.0))).ok()?;
    if svd.s.len() < k || svd.s[k - 1] <= 1e-10 * svd.s[0].max(1.0) {
        return None;
    }
    let uty: Vec<f64> = (0..k).map(|i| svd.u.column(i).iter().zip(betas).map(|(u, b)| u.re * b).sum::<f64>() / svd.s[i]).collect();
    let x = DVector::from_fn(k, |j, _| (0..k).map(|i| svd.v[(j, i)].re * uty[i]).sum::<f64>());
    let r = &a * &x - &y;
    let rms = (r.norm_squared() / betas.len() as f64).sqrt();
    Some((x.iter().copied().collect(), rms))
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn permutations(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i))
}

/// Advances a sorted k-subset of 0..n in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Visits all k-permutations of 0..n in lexicographic order.
fn for_each_permutation(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, k, cur, used, f);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, k, &mut Vec::with_capacity(k), &mut vec![false; n], f);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterValue {
    pub value_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub beta_hz: f64,
    pub matched_form: String,
}

/// JSON-facing estimation report. Frequencies are ordinary (Hz), not angular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub parameters: BTreeMap<String, ParameterValue>,
    pub assignment: Vec<AssignmentRecord>,
    /// RMS misfit in Hz.
    pub residual: f64,
}

impl EstimationReport {
    /// `truth` holds the unknowns in rad/s, in pattern order.
    pub fn new(m: &Match, pattern: &ParameterPattern, truth: Option<&[f64]>) -> Result<Self> {
        if let Some(t) = truth {
            if t.len() != pattern.unknowns.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} truth values for {} unknowns",
                    t.len(),
                    pattern.unknowns.len()
                )));
            }
        }
        let parameters = pattern
            .unknowns
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let error_pct = truth.map(|t| 100.0 * (m.values[i] - t[i]).abs() / t[i].abs());
                (name.clone(), ParameterValue { value_hz: m.values[i] / TAU, error_pct })
            })
            .collect();
        let assignment = m
            .assignment
            .iter()
            .map(|&(b, f)| AssignmentRecord { beta_hz: b / TAU, matched_form: pattern.forms[f].label.clone() })
            .collect();
        Ok(EstimationReport { parameters, assignment, residual: m.residual / TAU })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn value_hz(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).map(|p| p.value_hz)
    }
}
