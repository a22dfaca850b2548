use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::HamiltonianSpec;
use crate::channel::{natural_representation, KrausSet, SuperopMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Ramsey-interferometry weak measurement settings.
#[derive(Debug, Clone)]
pub struct RimParams {
    /// Probe-target coupling time in seconds.
    pub tau_a: f64,
    /// Relative Ramsey phase in radians.
    pub phi: f64,
    /// Let the target's free Hamiltonian act during the coupling window.
    pub include_free_b: bool,
    pub b_during_rim: Option<HamiltonianSpec>,
}

impl RimParams {
    pub fn new(tau_a: f64) -> Self {
        RimParams { tau_a, phi: FRAC_PI_2, include_free_b: false, b_during_rim: None }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_free_evolution(mut self, b: HamiltonianSpec) -> Self {
        self.include_free_b = true;
        self.b_during_rim = Some(b);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_a > 0.0 && self.tau_a.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_A must be positive, got {}", self.tau_a)));
        }
        if !self.phi.is_finite() {
            return Err(Error::NonFinite("RIM phase"));
        }
        if self.include_free_b && self.b_during_rim.is_none() {
            return Err(Error::InvalidParameter("include_free_B set without a free Hamiltonian".into()));
        }
        Ok(())
    }

    /// tau_A^2 |A|^2 / 3; the second-order expansion of the RIM channel
    /// needs this to be small.
    pub fn validity_indicator(&self, a: &HamiltonianSpec) -> Result<f64> {
        let n = a.operator_norm()?;
        Ok(self.tau_a * self.tau_a * n * n / 3.0)
    }
}

/// Single Kraus operator exp(-i B tau_B) and its natural representation.
pub fn unitary_channel(b: &HamiltonianSpec, tau_b: f64) -> Result<(KrausSet, SuperopMatrix)> {
    if !(tau_b >= 0.0 && tau_b.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau_B must be non-negative, got {tau_b}")));
    }
    let v = linalg::expm_unitary(b.matrix(), tau_b)?;
    let k = KrausSet::new(vec![v])?;
    let s = natural_representation(&k);
    Ok((k, s))
}

/// Two-outcome RIM Kraus operators M_alpha = [U_0 - (-1)^alpha e^{i phi} U_1] / 2.
pub fn rim_channel(a: &HamiltonianSpec, p: &RimParams) -> Result<KrausSet> {
    p.validate()?;
    let (g0, g1) = match (&p.b_during_rim, p.include_free_b) {
        (Some(b), true) => (b.plus(a)?, b.minus(a)?),
        _ => (a.clone(), a.scaled(-1.0)),
    };
    let u0 = linalg::expm_unitary(g0.matrix(), p.tau_a)?;
    let u1 = linalg::expm_unitary(g1.matrix(), p.tau_a)?;
    let e = Complex64::from_polar(1.0, p.phi);
    let half = Complex64::new(0.5, 0.0);
    let m0 = (&u0 - &u1 * e) * half;
    let m1 = (&u0 + &u1 * e) * half;
    KrausSet::new(vec![m0, m1])
}

/// Free evolution followed by a RIM, Phi = Phi_A Phi_B. Outcome alpha has
/// Kraus operator M_alpha V.
#[derive(Debug, Clone)]
pub struct ConcatenatedChannel {
    pub kraus: KrausSet,
    pub superop: SuperopMatrix,
    pub tau_b: Option<f64>,
    pub a: Option<HamiltonianSpec>,
    pub b: Option<HamiltonianSpec>,
    pub rim: Option<RimParams>,
}

impl ConcatenatedChannel {
    /// Builds RIM(a) after free evolution under b for tau_b.
    pub fn build(a: &HamiltonianSpec, b: &HamiltonianSpec, rim: &RimParams, tau_b: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch(format!("A is {}-dimensional, B is {}", a.dim(), b.dim())));
        }
        let m = rim_channel(a, rim)?;
        let (v, _) = unitary_channel(b, tau_b)?;
        let mut c = concatenate(&m, &v)?;
        c.tau_b = Some(tau_b);
        c.a = Some(a.clone());
        c.b = Some(b.clone());
        c.rim = Some(rim.clone());
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.kraus.dim()
    }
}

pub fn concatenate(rim: &KrausSet, unitary: &KrausSet) -> Result<ConcatenatedChannel> {
    if rim.dim() != unitary.dim() {
        return Err(Error::DimensionMismatch(format!(
            "RIM acts on dimension {}, free evolution on {}",
            rim.dim(),
            unitary.dim()
        )));
    }
    if unitary.len() != 1 {
        return Err(Error::InvalidKraus(format!(
            "free evolution must be a single unitary Kraus operator, got {}",
            unitary.len()
        )));
    }
    let v = &unitary.operators()[0];
    let ops = rim.operators().iter().map(|m| m * v).collect();
    let kraus = KrausSet::new(ops)?;
    let superop = natural_representation(&kraus);
    Ok(ConcatenatedChannel { kraus, superop, tau_b: None, a: None, b: None, rim: None })
}

/// A (x) I - I (x) A^T, the matrix of Y -> [A, Y].
pub fn commutator_superop(a: &HamiltonianSpec) -> SuperopMatrix {
    let d = a.dim();
    let id = CMat::identity(d, d);
    let m = linalg::kron(a.matrix(), &id) - linalg::kron(&id, &a.matrix().transpose());
    SuperopMatrix::new(d, m).expect("commutator superoperator has d^2 x d^2 shape")
}
