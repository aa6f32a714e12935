//! Penalized-spline regression models of reading times.

pub mod basis;
pub mod design;
pub mod fit;

pub use basis::{bspline_basis, difference_penalty, greville_abscissae};
pub use design::{
    assemble_design, tensor_basis, AssembledDesign, BasisSpec, BlockKind, DesignBlock, Penalty,
};
pub use fit::{delta_loglik, fit, FittedGam, LambdaPolicy, TermSummary};
