use serde::{Deserialize, Serialize};

/// Tolerances shared by the spectral analysis and the jet solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Absolute tolerance on `|α·μ + ρ_j − λ|` for counting a representation.
    pub resonance_tol: f64,
    /// Representations closer than this (but not resonant) are reported as
    /// near-resonances.
    pub near_resonance_tol: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Relative tolerance on dual obstructions `|T_i(v)|`.
    pub solvability_tol: f64,
    /// Relative size allowed for dual-kernel components above the order bound.
    pub dual_order_tol: f64,
    /// Slice condition numbers above this are flagged.
    pub condition_warn: f64,
    /// Largest jet order the solver accepts.
    pub max_order: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            resonance_tol: 1e-9,
            near_resonance_tol: 1e-6,
            rank_tol: 1e-10,
            solvability_tol: 1e-9,
            dual_order_tol: 1e-8,
            condition_warn: 1e12,
            max_order: 64,
        }
    }
}
