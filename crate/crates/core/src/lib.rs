pub mod channel;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod models;
pub mod specest;
pub mod trajectory;

pub use channel::{ChannelSpectrum, KrausSet, SuperopMatrix};
pub use error::{Error, ErrorClass, Result};
pub use linalg::{CMat, CVec};
pub use models::{ConcatenatedChannel, HamiltonianSpec, RimParams};
pub use trajectory::{ExponentialModel, FrequencySeries, StateVec};
pub use specest::{EstimatedSpectrum, PencilConfig};
pub use estimation::{BetaEstimate, EstimationReport, ParameterPattern};
