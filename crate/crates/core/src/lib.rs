//! Rate computations for conference key agreement driven by single-photon
//! interference at an untrusted multiport node.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`]: binary entropy, log-gamma and log-binomials.
//! * [`channel`]: closed-form click probability, QBER and phase-error rate of
//!   the honest setup, with and without detector dark counts.
//! * [`fock`]: an exact sparse Fock-space simulation of the same optical setup,
//!   used as an independent oracle for the closed forms.
//! * [`finite_key`]: the sampling tail-bound correction and the finite-key
//!   secret key length.
//! * [`rates`]: asymptotic rate, the direct-transmission benchmark, subgroup
//!   optimisation and the high-`q` approximations.
//! * [`optimizer`]: deterministic parameter optimisation and the minimum-rounds
//!   search.

pub mod channel;
pub mod error;
pub mod finite_key;
pub mod fock;
pub mod optimizer;
pub mod params;
pub mod rates;
pub mod special;

pub use channel::ChannelStatistics;
pub use error::{Error, Result};
pub use params::{loss_db_to_transmittance, transmittance_to_loss_db, SetupParams};
pub use rates::RateResult;
