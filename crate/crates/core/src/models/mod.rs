//! Physical channel builders: Hamiltonians from Pauli strings, free
//! evolution, RIM weak measurements and their concatenation, plus the
//! analytic and perturbative spectrum predictors.

mod hamiltonian;
mod perturb;
mod rim;
mod spin;

pub use hamiltonian::{HamiltonianSpec, Pauli, PauliTerm};
pub use perturb::{
    example1_analytic, example1_ep_mu, perturbative_spectrum, Example1Spectrum, PerturbativeSpectrum,
    PredictedEigenvalue, DEGENERACY_TOL,
};
pub use rim::{
    commutator_superop, concatenate, rim_channel, unitary_channel, ConcatenatedChannel, RimParams,
};
pub use spin::{probe_target, spin_cluster_hamiltonians, SpinCluster};
