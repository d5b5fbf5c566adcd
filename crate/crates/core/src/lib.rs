//! Secure-key bounds for decoy-state BB84 with arbitrary photon-number
//! statistics.
//!
//! The crate covers the infinite-key yield and error bounds, their
//! finite-key counterparts with Hoeffding confidence intervals, an
//! expected-value and a sampled channel model, and a simulated-annealing
//! parameter optimizer. The `decoyqkd` binary exposes all of it.

pub mod asymptotic;
pub mod channel;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod finite;
pub mod optimize;
pub mod photon;
pub mod protocol;

pub use error::{Error, Result};
pub use photon::{DecoyPair, Family, PhotonDistribution};
pub use protocol::{Basis, Intensity, PerBasis, PerIntensity, ProtocolConfig, Scheme};
