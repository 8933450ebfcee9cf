//! Phase retrieval by lifting to rank-one Hermitian matrices.
//!
//! Measurements `b_k = |<a_k, x>|^2` are linear in `X = x x*`. The solvers in
//! [`dca`] recover `X` under a trace-minus-Frobenius penalty (PhaseLiftOff),
//! the plain trace penalty (PhaseLift) or a reweighted log-det surrogate, each
//! as a sequence of convex subproblems handled by [`admm`].
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the precision for the common case.

pub mod admm;
pub mod dca;
mod error;
pub mod harness;
pub mod hermitian;
pub mod measurement;
pub mod recovery;
mod scalar;
pub mod spectral;

pub use admm::{solve_subproblem, AdmmConfig, AdmmOutcome, AdmmSolver, AdmmState, AdmmTermination};
pub use dca::{solve, DcaConfig, KktResiduals, Method, SolveResult, Termination};
pub use error::{Error, Result};
pub use hermitian::HermitianMatrix;
pub use measurement::{MeasurementEnsemble, RegularizedInverse, SeededRng};
pub use recovery::{RecoveryReport, Signal};
pub use scalar::Real;
pub use spectral::{ConstraintClass, EigenDecomposition};

pub type Hermitian64 = HermitianMatrix<f64>;
pub type Hermitian32 = HermitianMatrix<f32>;
pub type Ensemble64 = MeasurementEnsemble<f64>;
pub type Ensemble32 = MeasurementEnsemble<f32>;
pub type Signal64 = Signal<f64>;
pub type Signal32 = Signal<f32>;
pub type DcaConfig64 = DcaConfig<f64>;
pub type DcaConfig32 = DcaConfig<f32>;
pub type SolveResult64 = SolveResult<f64>;
pub type SolveResult32 = SolveResult<f32>;
