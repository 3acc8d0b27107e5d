//! Exact-orbit construction of sparse return-time sequences and the
//! ergodic averages taken along them.
//!
//! The crate is organised bottom-up:
//!
//! * [`exact_arith`]: lazily materialised digit and continued-fraction
//!   streams, threshold expressions with rigorous enclosures, and the
//!   precision-escalating comparison kernel.
//! * [`source_dynamics`]: the source systems (`×p`, Gauss map, rotations,
//!   finite Markov shifts) and the exact transfer-matrix probability oracle.
//! * [`target_families`]: shrinking targets `E_n` with closed-form measures.
//! * [`return_sequences`]: streaming return times, the Bernoulli baseline and
//!   deterministic comparison sequences.
//! * [`ergodic_averaging`]: test systems, observables, invariant projections
//!   and averages along sequences.
//! * [`verification`]: exact and Monte Carlo checks of the quantitative
//!   mixing and averaging estimates.

pub mod ergodic_averaging;
pub mod error;
pub mod exact_arith;
pub mod return_sequences;
pub mod source_dynamics;
pub mod stats;
pub mod target_families;
pub mod verification;

pub use error::{Error, Result};
