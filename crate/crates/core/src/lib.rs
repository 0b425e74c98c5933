//! Jet-space and flow-integral solvers for singular transport equations
//! `(D_X + A − λ)u = v` near a strictly positive source of `X`.

pub mod applications;
pub mod codec;
pub mod config;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod operator;
pub mod problem;
pub mod scalar;
pub mod spectral;
pub mod taylor;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use jet::{Jet, MonomialBasis, MultiIndex, ValueShape, VanishingOrder, VectorFieldJet};
pub use operator::{assemble, assemble_slice, OperatorMatrix};
pub use problem::ProblemData;
pub use scalar::{Field, Scalar};
pub use spectral::{DualDistribution, ResonanceEntry};
pub use taylor::{residual, solve_to_order, JetSolution};
pub use estimates::{compute_m, ell, two_regime_bound, EstimateReport, MatrixPath};
pub use flow::{
    empirical_decay_rate, evaluate_solution, FieldSampler, FlowConfig, PointSolution,
    SolutionEvaluator,
};
