use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::FeatureSet;
use crate::mdp::ChainView;
use crate::{Error, Result, Scalar};

/// Mean-field ODE `w' = K (A w + b)` of the expanded-feature update.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldSystem<T: Scalar> {
    pub a_tilde: DMatrix<T>,
    pub b_tilde: DVector<T>,
    /// Diagonal of `K = diag(eta, 1, ..., 1)`.
    pub k_diag: DVector<T>,
    pub gamma: T,
    pub eta: T,
}

impl<T: Scalar> MeanFieldSystem<T> {
    pub fn dim(&self) -> usize {
        self.b_tilde.len()
    }

    /// `K A`.
    pub fn a_eta(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.k_diag) * &self.a_tilde
    }

    /// Expected update direction `A w + b` at `w`.
    pub fn expected_update(&self, w: &DVector<T>) -> DVector<T> {
        &self.a_tilde * w + &self.b_tilde
    }
}

/// `A = Phi~^T D (gamma P - I) Phi~` and `b = Phi~^T D r`.
///
/// Terminal rows of an episodic `Phi~` are zero, so bootstrapping from a
/// terminal successor contributes nothing; no `(1 - gamma)^-1` appears, and
/// `gamma = 1` is well defined.
pub fn build_system<T: Scalar>(features: &FeatureSet<T>, chain: &ChainView<T>, gamma: T, eta: T) -> Result<MeanFieldSystem<T>> {
    if features.num_states() != chain.len() {
        return Err(Error::Config(format!(
            "features cover {} states, chain has {}",
            features.num_states(),
            chain.len()
        )));
    }
    if !(gamma >= T::zero() && gamma <= T::one()) {
        return Err(Error::Config(format!("gamma {gamma} outside [0, 1]")));
    }
    if !(eta >= T::zero()) {
        return Err(Error::Config(format!("eta {eta} is negative")));
    }
    let d = chain.stationary()?;
    let n = chain.len();
    let phi = features.phi_tilde();
    let dmat = DMatrix::from_diagonal(&d);
    let gp_minus_i = chain.p() * gamma - DMatrix::identity(n, n);
    let a_tilde = phi.transpose() * &dmat * gp_minus_i * phi;
    let b_tilde = phi.transpose() * (dmat * chain.r());
    let mut k_diag = DVector::from_element(features.dim(), T::one());
    k_diag[0] = eta;
    Ok(MeanFieldSystem { a_tilde, b_tilde, k_diag, gamma, eta })
}

/// Fixed point with its residual, exported by `oracle-check`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub weights: Vec<f64>,
    pub residual: f64,
}

/// `w* = -A^{-1} b`. Fails if `A` is singular or the solve does not zero
/// the expected update to within 1e-10 (scaled by `|A| |w|` when larger).
pub fn fixed_point<T: Scalar>(sys: &MeanFieldSystem<T>) -> Result<DVector<T>> {
    let w = sys
        .a_tilde
        .clone()
        .lu()
        .solve(&(-&sys.b_tilde))
        .ok_or_else(|| Error::Domain("expected update matrix is singular; check ergodicity and feature rank".into()))?;
    let residual = sys.expected_update(&w).amax();
    let scale = T::one().max(sys.a_tilde.amax() * w.amax());
    if !(residual <= crate::scalar::tol::<T>(1e-10) * scale) {
        return Err(Error::Numerical {
            message: "fixed point does not zero the expected update".into(),
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(w)
}

impl FixedPointReport {
    pub fn from_system<T: Scalar>(sys: &MeanFieldSystem<T>) -> Result<Self> {
        let w = fixed_point(sys)?;
        Ok(Self {
            residual: sys.expected_update(&w).amax().to_f64_lossy(),
            weights: w.iter().map(|x| x.to_f64_lossy()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::dmatrix;

    use super::*;
    use crate::linear::{expand_features_with_terminals, FeatureMode};

    #[test]
    fn bias_only_continuing() {
        let chain = ChainView::new(dmatrix![0.2f64, 0.8; 0.6, 0.4], DVector::from_element(2, 3.0)).unwrap();
        let fs = expand_features_with_terminals(DMatrix::zeros(2, 0), &[false, false], FeatureMode::Continuing).unwrap();
        let sys = build_system(&fs, &chain, 0.9, 1.0).unwrap();
        assert!((sys.a_tilde[(0, 0)] + 0.1).abs() < 1e-14);
        assert!((sys.b_tilde[0] - 3.0).abs() < 1e-14);
        let w = fixed_point(&sys).unwrap();
        assert!((w[0] - 30.0).abs() < 1e-10);
    }

    #[test]
    fn singular_system_is_a_domain_error() {
        let sys = MeanFieldSystem {
            a_tilde: DMatrix::<f64>::zeros(2, 2),
            b_tilde: DVector::from_element(2, 1.0),
            k_diag: DVector::from_element(2, 1.0),
            gamma: 0.9,
            eta: 1.0,
        };
        assert!(matches!(fixed_point(&sys), Err(Error::Domain(_))));
    }
}
