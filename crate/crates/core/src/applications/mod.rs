//! End-to-end drivers built on the jet solver: heat-kernel transport
//! coefficients on flat space and one-dimensional WKB expansions.

pub mod heat;
pub mod quadrature;
pub mod wkb;

pub use heat::{heat_coefficients_jet, heat_coefficients_numeric, HeatProblem};
pub use wkb::{wkb_expand, WkbExpansion, WkbProblem};
