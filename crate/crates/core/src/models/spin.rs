use super::{HamiltonianSpec, Pauli, PauliTerm};
use crate::error::{Error, Result};

/// Nuclear-spin target clusters seen by a central probe. All frequencies in
/// rad/s. `hyperfine[k]` is the vector (h_x, h_y, h_z) coupling the probe
/// to spin k.
#[derive(Debug, Clone, PartialEq)]
pub enum SpinCluster {
    /// B = w sum Iz + D (I+I- + I-I+ - 4 IzIz).
    TwoSpin { larmor: f64, dipolar: f64, hyperfine: Vec<[f64; 3]> },
    /// B = wL sum Iz + sum_{j<k} D_jk Iz_j Iz_k, dipolar = [D12, D13, D23].
    ThreeSpin { larmor: f64, dipolar: Vec<f64>, hyperfine: Vec<[f64; 3]> },
}

fn hyperfine_terms(h: &[[f64; 3]]) -> Vec<PauliTerm> {
    let mut terms = Vec::new();
    for (k, v) in h.iter().enumerate() {
        for (axis, &c) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(v) {
            if c != 0.0 {
                terms.push(PauliTerm::spin(c, vec![(k, axis)]));
            }
        }
    }
    terms
}

fn zeeman_terms(larmor: f64, n: usize) -> Vec<PauliTerm> {
    (0..n).map(|k| PauliTerm::spin(larmor, vec![(k, Pauli::Z)])).collect()
}

fn check_arity(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidParameter(format!("{what}: expected {want} values, got {got}")));
    }
    Ok(())
}

/// Returns (A, B).
pub fn spin_cluster_hamiltonians(kind: &SpinCluster) -> Result<(HamiltonianSpec, HamiltonianSpec)> {
    match kind {
        SpinCluster::TwoSpin { larmor, dipolar, hyperfine } => {
            check_arity("two-spin hyperfine vectors", hyperfine.len(), 2)?;
            let a = HamiltonianSpec::from_terms(2, hyperfine_terms(hyperfine))?;
            let mut b = zeeman_terms(*larmor, 2);
            // I+I- + I-I+ = 2 (IxIx + IyIy)
            b.push(PauliTerm::spin(2.0 * dipolar, vec![(0, Pauli::X), (1, Pauli::X)]));
            b.push(PauliTerm::spin(2.0 * dipolar, vec![(0, Pauli::Y), (1, Pauli::Y)]));
            b.push(PauliTerm::spin(-4.0 * dipolar, vec![(0, Pauli::Z), (1, Pauli::Z)]));
            Ok((a, HamiltonianSpec::from_terms(2, b)?))
        }
        SpinCluster::ThreeSpin { larmor, dipolar, hyperfine } => {
            check_arity("three-spin hyperfine vectors", hyperfine.len(), 3)?;
            check_arity("three-spin dipolar couplings", dipolar.len(), 3)?;
            let a = HamiltonianSpec::from_terms(3, hyperfine_terms(hyperfine))?;
            let mut b = zeeman_terms(*larmor, 3);
            for (&(j, k), &d) in [(0, 1), (0, 2), (1, 2)].iter().zip(dipolar) {
                b.push(PauliTerm::spin(d, vec![(j, Pauli::Z), (k, Pauli::Z)]));
            }
            Ok((a, HamiltonianSpec::from_terms(3, b)?))
        }
    }
}

/// Single target spin: A = g sigma_x / 2, B = w sigma_z / 2.
pub fn probe_target(g: f64, omega: f64) -> Result<(HamiltonianSpec, HamiltonianSpec)> {
    let a = HamiltonianSpec::from_terms(1, vec![PauliTerm::spin(g, vec![(0, Pauli::X)])])?;
    let b = HamiltonianSpec::from_terms(1, vec![PauliTerm::spin(omega, vec![(0, Pauli::Z)])])?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn two_spin_b_spectrum() {
        let (w, d) = (TAU * 1000.0, TAU * 105.34);
        let (_, b) = spin_cluster_hamiltonians(&SpinCluster::TwoSpin {
            larmor: w,
            dipolar: d,
            hyperfine: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        })
        .unwrap();
        let got = b.eigen().unwrap().values;
        let mut want = [0.0, w - d, -w - d, 2.0 * d];
        want.sort_by(f64::total_cmp);
        for (g, x) in got.iter().zip(want) {
            assert!((g - x).abs() < 1e-9 * w);
        }
    }

    #[test]
    fn three_spin_b_spectrum() {
        let wl = TAU * 110.3e3;
        let ds = [TAU * 475.6, TAU * 238.3, TAU * 352.4];
        let (_, b) = spin_cluster_hamiltonians(&SpinCluster::ThreeSpin {
            larmor: wl,
            dipolar: ds.to_vec(),
            hyperfine: vec![[0.0; 3]; 3],
        })
        .unwrap();
        let got = b.eigen().unwrap().values;
        // Iz Iz has eigenvalues +-1/4.
        let mut want = Vec::new();
        for s in 0..8u32 {
            let sg: Vec<f64> = (0..3).map(|k| if s >> (2 - k) & 1 == 0 { 1.0 } else { -1.0 }).collect();
            want.push(
                wl / 2.0 * sg.iter().sum::<f64>()
                    + (ds[0] * sg[0] * sg[1] + ds[1] * sg[0] * sg[2] + ds[2] * sg[1] * sg[2]) / 4.0,
            );
        }
        want.sort_by(f64::total_cmp);
        for (g, x) in got.iter().zip(want) {
            assert!((g - x).abs() < 1e-9 * wl);
        }
    }

    #[test]
    fn zero_couplings_equally_spaced() {
        let wl = 3.0;
        let (_, b) = spin_cluster_hamiltonians(&SpinCluster::ThreeSpin {
            larmor: wl,
            dipolar: vec![0.0; 3],
            hyperfine: vec![[0.0; 3]; 3],
        })
        .unwrap();
        let v = b.eigen().unwrap().values;
        let mut levels: Vec<f64> = v.clone();
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(levels, vec![-1.5 * wl, -0.5 * wl, 0.5 * wl, 1.5 * wl]);
    }

    #[test]
    fn arity_errors() {
        assert!(spin_cluster_hamiltonians(&SpinCluster::TwoSpin {
            larmor: 1.0,
            dipolar: 1.0,
            hyperfine: vec![[0.0; 3]; 3]
        })
        .is_err());
        assert!(spin_cluster_hamiltonians(&SpinCluster::ThreeSpin {
            larmor: 1.0,
            dipolar: vec![1.0, 2.0],
            hyperfine: vec![[0.0; 3]; 3]
        })
        .is_err());
    }
}
