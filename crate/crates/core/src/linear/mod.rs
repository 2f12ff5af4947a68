//! Expanded-feature linear algebra: the bias column, the expected update
//! matrix `A = Phi~^T D (gamma P - I) Phi~`, its fixed point and the
//! spectral checks behind convergence of the coupled `(b, w)` iteration.

mod bstar;
mod features;
pub mod random;
mod spectral;
mod system;

pub use bstar::{b_star, BStar};
pub use features::{expand_features, expand_features_with_terminals, FeatureMode, FeatureSet};
pub use spectral::{definiteness_of, definiteness_report, hurwitz_check, HurwitzReport, SpectralReport, STRICT_NEGATIVE_TOL};
pub use system::{build_system, fixed_point, FixedPointReport, MeanFieldSystem};
