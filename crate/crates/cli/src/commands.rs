use std::path::PathBuf;

use chanspec::channel::{
    build_metric, classify_real_or_pairs, natural_representation, spectral_decompose, verify_cptp,
    verify_swap_time_symmetry,
};
use chanspec::estimation::{match_parameters, phases_to_betas};
use chanspec::models::{example1_analytic, probe_target, unitary_channel, ConcatenatedChannel, RimParams};
use chanspec::specest::{ep_model_fit, matrix_pencil, ModelOrder};
use chanspec::trajectory::{exact_probabilities, sample_trajectories};
use chanspec::{Error, EstimatedSpectrum, EstimationReport, KrausSet, PencilConfig, Result, StateVec};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::output::{channel_hash, now_unix, read_signal, signal_csv, Manifest, Outputs};
use crate::svg::{self, PoleSet, Series};
use crate::{EpScanArgs, EstimateArgs, SimulateArgs, SpectrumArgs, VerifyArgs};

const METRIC_TOL: f64 = 1e-8;
const SWAP_TOL: f64 = 1e-12;
const EP_CYCLES: u32 = 48;

fn load(path: Option<&PathBuf>) -> Result<Option<RunConfig>> {
    path.map(|p| RunConfig::load(p)).transpose()
}

fn out_dir(flag: Option<&PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.cloned().or_else(|| cfg.and_then(|c| c.output.dir.clone())).unwrap_or_else(|| PathBuf::from("out"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: Option<f64>,
    passed: bool,
    note: String,
}

#[derive(Serialize)]
struct VerifyReport {
    passed: bool,
    dim: usize,
    kraus_rank: usize,
    eigenvalues: Vec<[f64; 2]>,
    checks: Vec<Check>,
}

pub fn verify(a: &VerifyArgs) -> Result<bool> {
    let cfg = load(a.config.as_ref())?;
    let kraus = match (&a.kraus, &cfg) {
        (Some(p), _) => KrausSet::from_json_unchecked(&std::fs::read_to_string(p)?)?,
        (None, Some(c)) if c.model()?.kind == ModelKind::Kraus => {
            KrausSet::from_json_unchecked(&std::fs::read_to_string(c.kraus_path()?)?)?
        }
        (None, Some(c)) => c.build()?.kraus,
        (None, None) => return Err(Error::InvalidParameter("give --config or --kraus".into())),
    };

    let cptp = verify_cptp(&kraus)?;
    let s = natural_representation(&kraus);
    let cs = spectral_decompose(&s)?;
    let pairing = classify_real_or_pairs(&cs);
    let mut checks = vec![
        Check {
            name: "trace_preserving",
            value: Some(cptp.trace_preserving_residual),
            passed: cptp.trace_preserving(),
            note: "|sum M^dag M - I|".into(),
        },
        Check {
            name: "completely_positive",
            value: Some(cptp.choi_min_eigenvalue),
            passed: cptp.completely_positive(),
            note: "smallest Choi eigenvalue".into(),
        },
        Check {
            name: "conjugate_pairing",
            value: None,
            passed: pairing.passed,
            note: format!(
                "{} real, {} pairs, {} unmatched (tolerance {:.1e})",
                pairing.reals.len(),
                pairing.pairs.len(),
                pairing.unmatched.len(),
                cs.pairing_tolerance
            ),
        },
    ];
    checks.push(if cs.near_defective {
        Check {
            name: "metric",
            value: None,
            passed: true,
            note: format!("skipped: near-defective spectrum (min conditioning {:.2e})", cs.min_conditioning),
        }
    } else {
        match build_metric(&cs, &s, None) {
            Ok(m) => Check {
                name: "metric",
                value: Some(m.residual),
                passed: m.residual <= METRIC_TOL,
                note: format!("|eta Phi eta^-1 - Phi^dag| / |Phi| <= {METRIC_TOL:.0e}, condition {:.2e}", m.condition),
            },
            Err(e) => Check { name: "metric", value: None, passed: false, note: e.to_string() },
        }
    });
    let swap = verify_swap_time_symmetry(&s);
    checks.push(Check { name: "swap_time", value: Some(swap), passed: swap <= SWAP_TOL, note: format!("<= {SWAP_TOL:.0e}") });

    for c in &checks {
        let v = c.value.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!("{:<20} {:>11}  {}  {}", c.name, v, if c.passed { "ok  " } else { "FAIL" }, c.note);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if let Some(dir) = &a.out {
        let report = VerifyReport {
            passed: failed.is_empty(),
            dim: kraus.dim(),
            kraus_rank: kraus.len(),
            eigenvalues: cs.values.iter().map(|z| [z.re, z.im]).collect(),
            checks,
        };
        let mut out = Outputs::default();
        out.add(dir.join("verify.json"), to_json(&report)?);
        out.write()?;
    }
    if !failed.is_empty() {
        eprintln!("failed invariants: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

pub fn simulate(a: &SimulateArgs) -> Result<bool> {
    let cfg = RunConfig::load(&a.config)?;
    let built = cfg.build()?;
    let n = a.cycles.map_or(cfg.simulation.cycles, |c| c as usize);
    let samples = a.samples.unwrap_or(cfg.simulation.samples);
    let seed = a.seed.unwrap_or(cfg.simulation.seed);
    if n < 2 {
        return Err(Error::InvalidParameter(format!("--cycles must be at least 2, got {n}")));
    }
    if samples < 1 {
        return Err(Error::InvalidParameter("--samples must be at least 1".into()));
    }
    if a.threads == Some(0) {
        return Err(Error::InvalidParameter("--threads must be at least 1".into()));
    }
    let outcome = cfg.simulation.outcome;
    let rho = cfg.initial_state(built.kraus.dim())?;
    let rec = sample_trajectories(&built.kraus, &rho, n, samples, seed, a.threads)?;
    let f = rec.frequencies(outcome)?.values;
    let exact = if a.exact || cfg.output.exact {
        Some(exact_probabilities(&built.kraus, &rho, outcome, n)?.values)
    } else {
        None
    };

    let dir = out_dir(a.out.as_ref(), Some(&cfg));
    let fname = format!("f_{outcome}");
    let pname = format!("p_{outcome}");
    let mut out = Outputs::default();
    out.add(dir.join("signal.csv"), signal_csv(&fname, &f, exact.as_deref().map(|p| (pname.as_str(), p)))?);
    let manifest = Manifest {
        seed,
        samples,
        cycles: n,
        channel_hash: channel_hash(&built.kraus)?,
        config_path: Some(a.config.display().to_string()),
        threads: a.threads,
        created_unix: now_unix(),
    };
    out.add(dir.join("manifest.json"), to_json(&manifest)?);
    if a.plot || cfg.output.plot {
        let m: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let mut series = vec![Series { label: &fname, y: &f }];
        if let Some(p) = &exact {
            series.push(Series { label: &pname, y: p });
        }
        let title = format!("outcome {outcome} frequency, S = {samples}");
        out.add(dir.join("signal.svg"), svg::line_plot(&title, "measurement m", &fname, &m, &series));
    }
    for p in out.write()? {
        println!("wrote {}", p.display());
    }
    Ok(true)
}

fn pencil_from_flags(a: &SpectrumArgs, cfg: Option<&RunConfig>) -> Result<PencilConfig> {
    let samples = a.samples.or(cfg.map(|c| c.simulation.samples));
    let mut pc = cfg.map(|c| c.pencil_config(samples.unwrap_or(1))).unwrap_or_default();
    if let Some(l) = a.pencil {
        pc.pencil = Some(l);
    }
    if let Some(order) = a.order {
        pc.order = ModelOrder::Fixed { order };
    }
    if let Some(threshold) = a.threshold {
        pc.order = ModelOrder::SingularValueRatio { threshold };
    }
    if let Some(factor) = a.noise_factor {
        let samples = samples
            .ok_or_else(|| Error::InvalidParameter("--noise-factor needs --samples or a config with [simulation]".into()))?;
        pc.order = ModelOrder::NoiseFloor { samples, factor };
    }
    if a.refine {
        pc.refine = true;
    }
    if let Some(m) = a.max_modulus {
        pc.max_modulus = m;
    }
    Ok(pc)
}

pub fn spectrum(a: &SpectrumArgs) -> Result<bool> {
    let cfg = load(a.config.as_ref())?;
    let pc = pencil_from_flags(a, cfg.as_ref())?;
    let (column, y) = read_signal(&a.signal, a.column.as_deref())?;
    let spec = matrix_pencil(&y, &pc)?;
    let json = spec.to_json()? + "\n";

    let mut summary = format!("{} poles from {column} (N = {}), RMS residual {:.3e}\n", spec.poles.len(), y.len(), spec.residual);
    for r in spec.records() {
        summary += &format!("  arg {:>9.3} deg  |l| {:.6}  amp {:.4e}\n", r.arg_deg, r.abs, r.amp_re.hypot(r.amp_im));
    }
    if !spec.discarded.is_empty() {
        summary += &format!("  discarded {} poles outside |l| <= {}\n", spec.discarded.len(), pc.max_modulus);
    }

    if a.out.is_none() && !a.plot {
        eprint!("{summary}");
        print!("{json}");
        return Ok(true);
    }
    let dir = out_dir(a.out.as_ref(), cfg.as_ref());
    let mut out = Outputs::default();
    out.add(dir.join("spectrum.json"), json);
    if a.plot {
        let est = spec.values();
        let mut sets = vec![PoleSet { label: "estimated", poles: &est, filled: true }];
        let ideal = match &cfg {
            Some(c) if c.model.is_some() => Some(ideal_spectra(c)?),
            _ => None,
        };
        if let Some((phi, phi_b)) = &ideal {
            sets.push(PoleSet { label: "channel", poles: phi, filled: false });
            if let Some(pb) = phi_b {
                sets.push(PoleSet { label: "free evolution", poles: pb, filled: false });
            }
        }
        out.add(dir.join("spectrum.svg"), svg::unit_circle("spectrum", &sets));
    }
    print!("{summary}");
    for p in out.write()? {
        println!("wrote {}", p.display());
    }
    Ok(true)
}

type IdealSpectra = (Vec<Complex64>, Option<Vec<Complex64>>);

fn ideal_spectra(cfg: &RunConfig) -> Result<IdealSpectra> {
    let built = cfg.build()?;
    let phi = spectral_decompose(&natural_representation(&built.kraus))?.values;
    let phi_b = match (&built.b, built.tau_b) {
        (Some(b), Some(t)) => Some(spectral_decompose(&unitary_channel(b, t)?.1)?.values),
        _ => None,
    };
    Ok((phi, phi_b))
}

pub fn estimate(a: &EstimateArgs) -> Result<bool> {
    let cfg = load(a.config.as_ref())?;
    let pattern = match (&a.pattern, &cfg) {
        (Some(name), _) => chanspec::ParameterPattern::builtin(name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown pattern `{name}`")))?,
        (None, Some(c)) => c.pattern()?,
        (None, None) => return Err(Error::InvalidParameter("give --pattern or a config with analysis.pattern".into())),
    };
    let tau_b = a
        .tau_b
        .or_else(|| cfg.as_ref().and_then(|c| c.model.as_ref()).and_then(|m| m.tau_b_s))
        .ok_or_else(|| Error::InvalidParameter("give --tau-b or a config with model.tau_b_s".into()))?;
    let spec = EstimatedSpectrum::from_json(&std::fs::read_to_string(&a.spectrum)?)?;
    let betas = phases_to_betas(&spec, tau_b)?;
    for b in betas.iter().filter(|b| b.aliased) {
        eprintln!("warning: phase {:.2} deg is near pi; beta may alias by multiples of 2 pi / tau_B", b.phase.to_degrees());
    }
    let values: Vec<f64> = betas.iter().map(|b| b.beta).collect();
    let m = match_parameters(&values, &pattern)?;
    let truth = cfg.as_ref().and_then(|c| c.truth_for(&pattern));
    let report = EstimationReport::new(&m, &pattern, truth.as_deref())?;
    let json = report.to_json() + "\n";
    match &a.out {
        None => print!("{json}"),
        Some(dir) => {
            let mut out = Outputs::default();
            out.add(dir.join("estimate.json"), json);
            for (name, v) in &report.parameters {
                match v.error_pct {
                    Some(e) => println!("{name} = {:.3} Hz ({e:.3}% from truth)", v.value_hz),
                    None => println!("{name} = {:.3} Hz", v.value_hz),
                }
            }
            for p in out.write()? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(true)
}

fn parse_range(text: &str, what: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("--{what} must be start:stop:count, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    linspace(start, stop, count, what)
}

fn linspace(start: f64, stop: f64, count: usize, what: &str) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter(format!("{what} range is empty")));
    }
    if !(start.is_finite() && stop.is_finite()) || start <= 0.0 || stop <= 0.0 {
        return Err(Error::InvalidParameter(format!("{what} range must lie in (0, inf), got {start}..{stop}")));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect())
}

#[derive(Debug, Clone, Serialize)]
struct ScanPoint {
    mu: f64,
    nu: f64,
    discriminant: f64,
    l_plus_re: f64,
    l_plus_im: f64,
    l_minus_re: f64,
    l_minus_im: f64,
    gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<String>,
}

/// Numeric eigenvalues closest to the analytic lambda_+ and lambda_-.
fn numeric_pair(values: &[Complex64], plus: Complex64, minus: Complex64) -> (Complex64, Complex64) {
    let mut best = (f64::INFINITY, values[0], values[0]);
    for (i, &x) in values.iter().enumerate() {
        for (j, &y) in values.iter().enumerate() {
            if i != j {
                let d = (x - plus).norm().max((y - minus).norm());
                if d < best.0 {
                    best = (d, x, y);
                }
            }
        }
    }
    (best.1, best.2)
}

fn scan_point(mu: f64, nu: f64, classify: Option<usize>) -> Result<ScanPoint> {
    let an = example1_analytic(mu, nu);
    let (a, b) = probe_target(1.0, 1.0)?;
    let ch = ConcatenatedChannel::build(&a, &b, &RimParams::new(mu), nu)?;
    let values = spectral_decompose(&ch.superop)?.values;
    let (lp, lm) = numeric_pair(&values, an.values[2], an.values[3]);
    let class = match classify {
        None => None,
        Some(n) => {
            let plus_x = StateVec::product_bloch(&[[1.0, 0.0, 0.0]])?;
            let signal = exact_probabilities(&ch.kraus, &plus_x, 1, n)?.values;
            Some(match ep_model_fit(&signal) {
                Ok(fit) => fit.selected.name().to_string(),
                Err(e) => {
                    log::warn!("mu = {mu}, nu = {nu}: {e}");
                    "unresolved".to_string()
                }
            })
        }
    };
    Ok(ScanPoint {
        mu,
        nu,
        discriminant: an.discriminant,
        l_plus_re: lp.re,
        l_plus_im: lp.im,
        l_minus_re: lm.re,
        l_minus_im: lm.im,
        gap: (lp - lm).norm(),
        class,
    })
}

pub fn ep_scan(a: &EpScanArgs) -> Result<bool> {
    let cfg = load(a.config.as_ref())?;
    let scan = cfg.as_ref().and_then(|c| c.scan.clone());
    let mus = match (&a.mu, &scan) {
        (Some(t), _) => parse_range(t, "mu")?,
        (None, Some(s)) => linspace(s.mu.0, s.mu.1, s.mu.2, "mu")?,
        (None, None) => return Err(Error::InvalidParameter("give --mu or a config with [scan]".into())),
    };
    let nus = match (&a.nu, &scan) {
        (Some(t), _) => parse_range(t, "nu")?,
        (None, Some(s)) => linspace(s.nu.0, s.nu.1, s.nu.2, "nu")?,
        (None, None) => return Err(Error::InvalidParameter("give --nu or a config with [scan]".into())),
    };
    let cycles = a.cycles.unwrap_or(EP_CYCLES) as usize;
    if a.classify && cycles < 8 {
        return Err(Error::InvalidParameter(format!("--cycles must be at least 8 for --classify, got {cycles}")));
    }
    let classify = a.classify.then_some(cycles);

    let mut rows = Vec::with_capacity(mus.len() * nus.len());
    for &nu in &nus {
        for &mu in &mus {
            rows.push(scan_point(mu, nu, classify)?);
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(crate::output::csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let dir = out_dir(a.out.as_ref(), cfg.as_ref());
    let mut out = Outputs::default();
    out.add(dir.join("ep_scan.csv"), bytes);

    let labels: Vec<&str> = if a.classify {
        vec!["ConjugatePairOscillation", "SecondOrderEP", "TwoRealExponentials", "unresolved"]
    } else {
        vec!["oscillatory (disc < 0)", "real (disc >= 0)"]
    };
    let class_index = |r: &ScanPoint| match &r.class {
        Some(c) => labels.iter().position(|l| l == c).unwrap_or(3),
        None => usize::from(r.discriminant >= 0.0),
    };
    let grid: Vec<Vec<usize>> = rows.chunks(mus.len()).map(|row| row.iter().map(class_index).collect()).collect();
    let mut counts = vec![0usize; labels.len()];
    grid.iter().flatten().for_each(|&k| counts[k] += 1);
    for (l, c) in labels.iter().zip(&counts) {
        println!("{l}: {c}");
    }
    if a.plot {
        out.add(dir.join("ep_scan.svg"), svg::grid("exceptional-line scan", &mus, &nus, &grid, &labels));
    }
    for p in out.write()? {
        println!("wrote {}", p.display());
    }
    Ok(true)
}
