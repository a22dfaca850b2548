//! Run configuration. Frequencies are written in Hz and converted to rad/s
//! once, in `RunConfig::build`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::{Path, PathBuf};

use chanspec::models::{probe_target, spin_cluster_hamiltonians, ConcatenatedChannel, HamiltonianSpec, RimParams, SpinCluster};
use chanspec::specest::ModelOrder;
use chanspec::{Error, KrausSet, ParameterPattern, PencilConfig, Result, StateVec};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    /// Ground truth in Hz, keyed by pattern unknown.
    #[serde(default)]
    pub truth: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSection,
    pub scan: Option<ScanSection>,
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub larmor_hz: Option<f64>,
    /// Two-spin: one value. Three-spin: [D12, D13, D23].
    pub dipolar_hz: Option<Dipolar>,
    /// One (x, y, z) vector per target spin.
    pub hyperfine_hz: Option<Vec<[f64; 3]>>,
    /// probe_target: coupling g and precession w.
    pub coupling_hz: Option<f64>,
    pub omega_hz: Option<f64>,
    /// kraus: JSON file, relative to the config file.
    pub kraus_file: Option<PathBuf>,
    pub tau_a_s: Option<f64>,
    pub tau_b_s: Option<f64>,
    pub phi_rad: Option<f64>,
    #[serde(default)]
    pub include_free_b: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TwoSpin,
    ThreeSpin,
    ProbeTarget,
    Kraus,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Dipolar {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub cycles: usize,
    pub samples: u64,
    pub seed: u64,
    pub outcome: usize,
    pub initial_state: InitialState,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { cycles: 150, samples: 100_000, seed: 0, outcome: 1, initial_state: InitialState::MaximallyMixed }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialState {
    MaximallyMixed,
    ProductBloch { bloch: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub pencil: Option<usize>,
    pub order: OrderRule,
    pub max_modulus: f64,
    pub refine: bool,
    pub pattern: Option<String>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            pencil: None,
            order: OrderRule::SingularValueRatio { threshold: 1e-8 },
            max_modulus: 1.05,
            refine: false,
            pattern: None,
        }
    }
}

/// Model-order rule; `noise_floor` takes its sample count from the
/// simulation section.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum OrderRule {
    Fixed { order: usize },
    SingularValueRatio { threshold: f64 },
    NoiseFloor { factor: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub exact: bool,
}

/// Grid for ep-scan: [start, stop, count] in radians.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub mu: (f64, f64, usize),
    pub nu: (f64, f64, usize),
}

/// A channel built from a config, plus what the analysis steps need.
pub struct BuiltModel {
    pub kraus: KrausSet,
    pub tau_b: Option<f64>,
    pub b: Option<HamiltonianSpec>,
}

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("model.{field} is required for this model kind")))
}

fn positive(x: f64, field: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidParameter(format!("{field} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sim = &self.simulation;
        if sim.samples < 1 {
            return Err(Error::InvalidParameter("simulation.samples must be at least 1".into()));
        }
        if sim.cycles < 2 {
            return Err(Error::InvalidParameter("simulation.cycles must be at least 2".into()));
        }
        if let Some(name) = &self.analysis.pattern {
            let p = ParameterPattern::builtin(name)
                .ok_or_else(|| Error::InvalidParameter(format!("analysis.pattern: unknown pattern `{name}`")))?;
            for key in self.truth.keys() {
                if !p.unknowns.contains(key) {
                    return Err(Error::InvalidParameter(format!(
                        "truth.{key} is not an unknown of pattern `{name}` ({})",
                        p.unknowns.join(", ")
                    )));
                }
            }
        }
        if let Some(m) = &self.model {
            for (v, f) in [(m.tau_a_s, "model.tau_a_s"), (m.tau_b_s, "model.tau_b_s")] {
                if let Some(x) = v {
                    positive(x, f)?;
                }
            }
        }
        if !(self.analysis.max_modulus > 0.0) {
            return Err(Error::InvalidParameter("analysis.max_modulus must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSection> {
        self.model.as_ref().ok_or_else(|| Error::InvalidParameter("config has no [model] section".into()))
    }

    pub fn pattern(&self) -> Result<ParameterPattern> {
        let name = self
            .analysis
            .pattern
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("analysis.pattern is required".into()))?;
        ParameterPattern::builtin(name).ok_or_else(|| Error::InvalidParameter(format!("unknown pattern `{name}`")))
    }

    /// Truth values in rad/s, ordered as the pattern's unknowns. Missing
    /// entries mean no comparison.
    pub fn truth_for(&self, pattern: &ParameterPattern) -> Option<Vec<f64>> {
        pattern.unknowns.iter().map(|u| self.truth.get(u).map(|hz| TAU * hz)).collect()
    }

    pub fn pencil_config(&self, samples: u64) -> PencilConfig {
        let a = &self.analysis;
        let order = match a.order {
            OrderRule::Fixed { order } => ModelOrder::Fixed { order },
            OrderRule::SingularValueRatio { threshold } => ModelOrder::SingularValueRatio { threshold },
            OrderRule::NoiseFloor { factor } => ModelOrder::NoiseFloor { samples, factor },
        };
        PencilConfig { pencil: a.pencil, order, max_modulus: a.max_modulus, refine: a.refine }
    }

    pub fn initial_state(&self, d: usize) -> Result<StateVec> {
        let rho = match &self.simulation.initial_state {
            InitialState::MaximallyMixed => StateVec::maximally_mixed(d),
            InitialState::ProductBloch { bloch } => StateVec::product_bloch(bloch)?,
        };
        if rho.d() != d {
            return Err(Error::DimensionMismatch(format!(
                "initial state has dimension {}, channel acts on dimension {d}",
                rho.d()
            )));
        }
        Ok(rho)
    }

    fn relative(&self, p: &Path) -> PathBuf {
        match self.path.as_ref().and_then(|c| c.parent()) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Kraus file of a `kraus` model, resolved against the config's directory.
    pub fn kraus_path(&self) -> Result<PathBuf> {
        let file = self.model()?.kraus_file.as_ref().ok_or_else(|| Error::InvalidParameter("model.kraus_file is required".into()))?;
        Ok(self.relative(file))
    }

    pub fn build(&self) -> Result<BuiltModel> {
        let m = self.model()?;
        if m.kind == ModelKind::Kraus {
            let text = std::fs::read_to_string(self.kraus_path()?)?;
            return Ok(BuiltModel { kraus: KrausSet::from_json(&text)?, tau_b: m.tau_b_s, b: None });
        }
        let (a, b) = hamiltonians(m)?;
        let tau_a = positive(need(m.tau_a_s, "tau_a_s")?, "model.tau_a_s")?;
        let tau_b = positive(need(m.tau_b_s, "tau_b_s")?, "model.tau_b_s")?;
        let mut rim = RimParams::new(tau_a).with_phi(m.phi_rad.unwrap_or(FRAC_PI_2));
        if m.include_free_b {
            rim = rim.with_free_evolution(b.clone());
        }
        let ch = ConcatenatedChannel::build(&a, &b, &rim, tau_b)?;
        Ok(BuiltModel { kraus: ch.kraus, tau_b: Some(tau_b), b: Some(b) })
    }
}

fn hamiltonians(m: &ModelSection) -> Result<(HamiltonianSpec, HamiltonianSpec)> {
    let hyperfine = || -> Result<Vec<[f64; 3]>> {
        let h = m.hyperfine_hz.as_ref().ok_or_else(|| Error::InvalidParameter("model.hyperfine_hz is required".into()))?;
        Ok(h.iter().map(|v| v.map(|x| TAU * x)).collect())
    };
    match m.kind {
        ModelKind::TwoSpin => {
            let d = match &m.dipolar_hz {
                Some(Dipolar::One(d)) => *d,
                _ => return Err(Error::InvalidParameter("model.dipolar_hz must be a single number for two_spin".into())),
            };
            spin_cluster_hamiltonians(&SpinCluster::TwoSpin {
                larmor: TAU * need(m.larmor_hz, "larmor_hz")?,
                dipolar: TAU * d,
                hyperfine: hyperfine()?,
            })
        }
        ModelKind::ThreeSpin => {
            let d = match &m.dipolar_hz {
                Some(Dipolar::Many(d)) => d.iter().map(|x| TAU * x).collect(),
                _ => return Err(Error::InvalidParameter("model.dipolar_hz must be [D12, D13, D23] for three_spin".into())),
            };
            spin_cluster_hamiltonians(&SpinCluster::ThreeSpin {
                larmor: TAU * need(m.larmor_hz, "larmor_hz")?,
                dipolar: d,
                hyperfine: hyperfine()?,
            })
        }
        ModelKind::ProbeTarget => probe_target(TAU * need(m.coupling_hz, "coupling_hz")?, TAU * need(m.omega_hz, "omega_hz")?),
        ModelKind::Kraus => unreachable!("handled by the caller"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SPIN: &str = r#"
[model]
kind = "two_spin"
larmor_hz = 1000.0
dipolar_hz = 105.34
hyperfine_hz = [[848.5, 0.0, 848.5], [940.5, 0.0, 940.5]]
tau_a_s = 100e-6
tau_b_s = 227.3e-6

[simulation]
cycles = 50
samples = 1000
seed = 3
outcome = 1
initial_state = { kind = "product_bloch", bloch = [[0.8, 0.3, 0.5], [0.6, -0.5, 0.4]] }

[analysis]
order = { rule = "noise_floor", factor = 1.0 }
max_modulus = 1.05
refine = false
pattern = "two_spin"

[truth]
omega = 1000.0
D = 105.34
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = RunConfig::parse(TWO_SPIN).unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.kraus.dim(), 4);
        assert_eq!(built.tau_b, Some(227.3e-6));
        let truth = cfg.truth_for(&cfg.pattern().unwrap()).unwrap();
        assert!((truth[0] - TAU * 1000.0).abs() < 1e-9);
        assert!(matches!(cfg.pencil_config(1000).order, ModelOrder::NoiseFloor { samples: 1000, .. }));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = TWO_SPIN.replace("tau_a_s = 100e-6", "tau_a_s = -1.0");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::InvalidParameter(_))));
        let bad = TWO_SPIN.replace("pattern = \"two_spin\"", "pattern = \"five_spin\"");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = TWO_SPIN.replace("D = 105.34", "J = 1.0");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = TWO_SPIN.replace("samples = 1000", "samples = 0");
        assert!(RunConfig::parse(&bad).is_err());
        assert!(matches!(RunConfig::parse("[model]\nkind = 3"), Err(Error::Parse(_))));
    }
}
