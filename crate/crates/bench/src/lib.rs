//! Shared fixtures for the benchmarks.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use chanspec::models::{spin_cluster_hamiltonians, SpinCluster};
use chanspec::{ConcatenatedChannel, KrausSet, Result, RimParams, StateVec};

/// Two target spins, 1 kHz Larmor, 105.34 Hz dipolar, tilted hyperfine.
pub fn two_spin() -> Result<(KrausSet, StateVec)> {
    let tilt = |h: f64| [TAU * h * FRAC_1_SQRT_2, 0.0, TAU * h * FRAC_1_SQRT_2];
    let (a, b) = spin_cluster_hamiltonians(&SpinCluster::TwoSpin {
        larmor: TAU * 1000.0,
        dipolar: TAU * 105.34,
        hyperfine: vec![tilt(1200.0), tilt(1330.0)],
    })?;
    let ch = ConcatenatedChannel::build(&a, &b, &RimParams::new(100e-6), 227.3e-6)?;
    let rho = StateVec::product_bloch(&[[0.8, 0.3, 0.5], [0.6, -0.5, 0.4]])?;
    Ok((ch.kraus, rho))
}
