use nalgebra::DMatrix;
use serde::Serialize;

use super::MeanFieldSystem;
use crate::{Error, Result, Scalar};

/// Eigenvalues at or above `-1e-10` do not count as strictly negative.
pub const STRICT_NEGATIVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    /// Largest eigenvalue of `(A + A^T) / 2`.
    pub max_symmetric_eigenvalue: f64,
    /// Eigenvalues of `A` as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    pub negative_definite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HurwitzReport {
    pub eta: f64,
    /// Eigenvalues of `K A` as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    pub max_real_part: f64,
    pub hurwitz: bool,
    /// Largest symmetric-part eigenvalue of `K^{1/2} A K^{1/2}`.
    pub similar_max_symmetric_eigenvalue: f64,
    pub similar_negative_definite: bool,
}

fn eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re.to_f64_lossy(), c.im.to_f64_lossy()))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ev
}

fn max_symmetric_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let sym = (m + m.transpose()) * T::lit(0.5);
    sym.symmetric_eigenvalues()
        .iter()
        .map(|x| x.to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Definiteness of an arbitrary square matrix.
pub fn definiteness_of<T: Scalar>(m: &DMatrix<T>) -> SpectralReport {
    let max_sym = max_symmetric_eigenvalue(m);
    SpectralReport {
        max_symmetric_eigenvalue: max_sym,
        eigenvalues: eigenvalues(m),
        negative_definite: max_sym < -STRICT_NEGATIVE_TOL,
    }
}

/// Negative definiteness of `A`: its symmetric part must have every
/// eigenvalue below `-1e-10`.
pub fn definiteness_report<T: Scalar>(sys: &MeanFieldSystem<T>) -> SpectralReport {
    definiteness_of(&sys.a_tilde)
}

/// Hurwitz check of `K A`, plus the similarity argument: `K^{1/2} A K^{1/2}`
/// is negative definite whenever `A` is.
pub fn hurwitz_check<T: Scalar>(sys: &MeanFieldSystem<T>) -> Result<HurwitzReport> {
    if !(sys.eta > T::zero()) {
        return Err(Error::Domain(format!("Hurwitz analysis requires eta > 0, got {}", sys.eta)));
    }
    let ev = eigenvalues(&sys.a_eta());
    let max_real_part = ev.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let k_half = DMatrix::from_diagonal(&sys.k_diag.map(|k| k.sqrt()));
    let similar = &k_half * &sys.a_tilde * &k_half;
    let sim_max = max_symmetric_eigenvalue(&similar);
    Ok(HurwitzReport {
        eta: sys.eta.to_f64_lossy(),
        eigenvalues: ev,
        max_real_part,
        hurwitz: max_real_part < -STRICT_NEGATIVE_TOL,
        similar_max_symmetric_eigenvalue: sim_max,
        similar_negative_definite: sim_max < -STRICT_NEGATIVE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{dmatrix, DVector};

    use super::*;

    fn system(a: DMatrix<f64>, eta: f64) -> MeanFieldSystem<f64> {
        let n = a.nrows();
        let mut k = DVector::from_element(n, 1.0);
        k[0] = eta;
        MeanFieldSystem { a_tilde: a, b_tilde: DVector::zeros(n), k_diag: k, gamma: 0.9, eta }
    }

    #[test]
    fn scalar_system() {
        let rep = definiteness_report(&system(dmatrix![-0.1], 1.0));
        assert!((rep.max_symmetric_eigenvalue + 0.1).abs() < 1e-15);
        assert!(rep.negative_definite);
    }

    #[test]
    fn eta_one_keeps_spectrum() {
        let a = dmatrix![-1.0, 0.5; -0.7, -0.3];
        let plain = definiteness_report(&system(a.clone(), 1.0));
        let h = hurwitz_check(&system(a, 1.0)).unwrap();
        for (x, y) in plain.eigenvalues.iter().zip(&h.eigenvalues) {
            assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
        }
        assert!(h.hurwitz && h.similar_negative_definite);
    }

    #[test]
    fn non_positive_eta_is_rejected() {
        assert!(matches!(hurwitz_check(&system(dmatrix![-1.0], 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn indefinite_matrix_is_flagged() {
        let rep = definiteness_of(&dmatrix![-1.0, 3.0; 0.0, -1.0]);
        // Hurwitz but not negative definite
        assert!(!rep.negative_definite);
        assert!(rep.eigenvalues.iter().all(|e| e.0 < 0.0));
    }
}
