//! Time-rescaled quantum dynamics.
//!
//! A reference protocol `H(t)` on `[0, t_f]` is replaced by
//! `ℋ(τ) = H(f(τ))·f'(τ)` on `[0, t_f/a]`. Both generate the same evolution
//! operator for any initial state, and with a rescaling whose rate is 1 at
//! both ends the shortcut starts and finishes on the reference Hamiltonian.
//!
//! * [`rescale`]: rescaling functions, their inverses and STA checks
//! * [`models`]: spin, oscillator and moving-trap schedules; the rescaling transform
//! * [`propagate`]: time-ordered and commuting-family propagators
//! * [`metrics`]: fidelity, phase, energy spread, populations, drive cost
//! * [`schedules`]: waveform tables (CSV)
//! * [`cli`]: scenario configuration, execution and reports

pub mod cli;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod propagate;
pub mod rescale;
pub mod schedules;

pub use error::{Error, Result};
pub use matrix::HermitianMatrix;
pub use models::HamiltonianSchedule;
pub use propagate::{PropagationResult, StateVector};
pub use rescale::{RescalingFamily, RescalingSpec, StaValidationReport};
