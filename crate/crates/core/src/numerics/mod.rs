//! Dense SPD linear algebra, a box-constrained minimizer and finite-difference helpers.

mod fd;
mod linalg;
mod minimize;

pub use fd::{finite_diff_gradient, finite_diff_jacobian};
pub use linalg::{factor_psd, logdet, solve_psd, symmetrize, PsdFactor};
pub use minimize::{
    minimize_bounded, projected_gradient_norm, BoundedProblem, Minimum, Termination,
    DEFAULT_GRADIENT_TOLERANCE, DEFAULT_MEMORY,
};
