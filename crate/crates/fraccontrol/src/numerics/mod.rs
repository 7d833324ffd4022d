//! Shared numeric kernels.

pub mod fit;
pub mod fourier;
pub mod linalg;
pub mod logcomplex;
pub mod mp;
pub mod quad;
pub mod special;

pub use fit::{fit_fixed_tau, fit_scaling, CostFit};
pub use fourier::{fourier_integral, FourierOptions, FourierValue, Window};
pub use linalg::{solve_min_norm, MinNormSolution};
pub use logcomplex::LogComplex;
pub use quad::{integrate, integrate_adaptive, integrate_half_line, integrate_pv, AdaptiveOptions, PvResult, QuadRule};
