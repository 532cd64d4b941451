//! Conditional variance of the hull given its values away from a point: the
//! Karhunen quotient built from a compactly supported bump with prescribed Fourier
//! decay, the closed-form lower bound, and a direct conditioning oracle.

pub mod bump;
pub mod majorant;
pub mod variance;

pub use bump::{build_bump, FourierDecayFunction};
pub use majorant::Majorant;
pub use variance::{
    conditional_variance_grid, conditional_variance_points, fit_eta, k_constant, karhunen_lower_bound,
    var_bound, variance_sweep, VarianceReport,
};
