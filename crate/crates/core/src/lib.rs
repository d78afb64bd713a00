//! Operational quasiprobability (OQ) metrology for qubits.
//!
//! Two local two-outcome measurements `A` and `B` together with a conjunction
//! measurement `C` define a Hermitian operator-valued measure `W` whose
//! expectation values form a quasiprobability table. Where that table is a
//! genuine probability distribution its Fisher information can exceed the
//! quantum Fisher information of the probe, which is only possible when `A`
//! and `B` are incompatible.
//!
//! Module map:
//!
//! - [`matrix`]: dense complex matrices, Hermitian eigensystems, PSD roots.
//! - [`measurement`]: POVM / HOVM model, sequential composition, Busch criterion.
//! - [`probe`]: pure qubit probe states and their parameter derivatives.
//! - [`oq`]: quasiprobability evaluation and negativity.
//! - [`fisher`]: classical FI, OQFI, pure-state QFI, Cramér–Rao bounds, advantage.
//! - [`estimation`]: count sampling, MLE, linear error propagation, trial harness.
//! - [`sweep`]: grid drivers shared by the CLI and the browser demo.

#![forbid(unsafe_code)]
// `!(x > t)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimation;
pub mod fisher;
pub mod matrix;
pub mod measurement;
pub mod oq;
pub mod probe;
pub mod sweep;

pub use error::{Error, Result};
pub use estimation::{CountTable, Estimator, TrialConfig, TrialResult, TrialSummary};
pub use fisher::FisherResult;
pub use matrix::ComplexMatrix;
pub use measurement::{Hovm, Povm};
pub use oq::OqDistribution;
pub use probe::{ProbeParams, ProbeState, Target};
