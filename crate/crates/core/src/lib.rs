//! Resistor networks, Schur-complement traces and renormalization fixed points on self-similar cell structures.
//!
//! The pieces, bottom up:
//!
//! * [`network`]: resistor networks, Kirchhoff and Δ-Y reductions, energy
//!   forms with traces, effective resistance and harmonic extension.
//! * [`structure`]: cell schemas, the replication map `Ψ`, its trace `Λ`,
//!   and level-`n` network construction.
//! * [`solver`]: nonlinear power iteration for `Λ(1, M) = λ M`, energy
//!   ratios and bisection.
//! * [`catalog`]: the gasket, fractalina and pillow schemas plus their
//!   closed-form solution routes.
//! * [`verify`]: the numerical acceptance table shared by the CLI and tests.
//!
//! ```
//! use fractal_forms::{catalog, solver};
//!
//! let gasket = catalog::gasket_schema();
//! let start = solver::uniform_start(&gasket);
//! let report = solver::power_iterate(&gasket, &start, &Default::default()).unwrap();
//! assert!((report.lambda - 0.6).abs() < 1e-12);
//! ```

pub mod catalog;
pub mod network;
pub mod solver;
pub mod structure;
pub mod verify;

pub use network::{BoundaryValues, NetworkError, NodeId, QuadraticForm, ResistorNetwork};
pub use solver::{FixedPointReport, SolveError, SolverOptions};
pub use structure::{CellSchema, SchemaError, WeightVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn values_are_thread_safe() {
        assert_send_sync::<super::ResistorNetwork>();
        assert_send_sync::<super::QuadraticForm>();
        assert_send_sync::<super::CellSchema>();
        assert_send_sync::<super::FixedPointReport>();
        assert_send_sync::<super::Error>();
    }
}
