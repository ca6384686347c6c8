//! Sequential reuse of a shared two-qubit resource in quantum teleportation
//! when the sender performs unsharp (weakened) Bell measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense complex matrices of dimension 2, 4 and 8, partial
//!   traces, a Jacobi Hermitian eigensolver and the PSD square root.
//! - [`states`]: Bell, Werner and X-state resources plus the Wootters
//!   concurrence and a PPT check.
//! - [`povm`]: the four weakened Bell measurement families.
//! - [`protocol`]: one teleportation round (receiver fidelity and the
//!   effective resource left for the next sender/receiver pair).
//! - [`recycle`]: repeated rounds at a fixed fidelity target, the maximal
//!   reusability number and boundary searches over the scan variables.
//! - [`cli`]: the command-line surface and CSV emitters.
//!
//! Subsystem ordering is fixed everywhere as (A′, A, B): the input qubit,
//! the sender's half of the resource and the receiver's half, with basis
//! index `4·a′ + 2·a + b`.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod povm;
pub mod protocol;
pub mod recycle;
pub mod states;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use povm::{PovmFamily, PovmKind};
pub use protocol::{run_round, run_round_mc, CorrectionSet, RoundResult};
pub use recycle::{mrn, RecycleTrace, Strictness};
pub use states::{DensityMatrix, ResourceSpec};
