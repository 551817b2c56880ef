//! Heat and Schrödinger semigroup kernels, fractional integrals and the
//! numerical checks of their size and smoothness estimates.

pub mod bounds;
pub mod fractional;
pub mod heat;
pub mod propagator;
pub mod semigroup;
pub mod subordination;

pub use fractional::{damped_riesz_kernel, fractional_integral_apply, fractional_kernel, riesz_kernel_free, FractionalField, KernelField};
pub use heat::{fit_gaussian_bound, heat_kernel, HeatConvention, HeatQuadrature};
pub use propagator::{RadialGrid, TrotterSpec};
pub use semigroup::{heat_semigroup_apply, schrodinger_semigroup_apply};
pub use subordination::SubordinationSpec;
