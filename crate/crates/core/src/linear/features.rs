use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mdp::TabularMdp;
use crate::{Error, Result, Scalar};

/// Relative singular-value floor for the full-column-rank check.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Bias feature is 1 everywhere.
    Continuing,
    /// Bias feature is 1 on non-terminal states; terminal rows are all zero.
    Episodic,
}

/// Raw features and their bias-expanded form (bias column first).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet<T: Scalar> {
    phi: DMatrix<T>,
    phi_tilde: DMatrix<T>,
    mode: FeatureMode,
    terminal: Vec<bool>,
    sigma_min: T,
    sigma_max: T,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn phi(&self) -> &DMatrix<T> {
        &self.phi
    }

    pub fn phi_tilde(&self) -> &DMatrix<T> {
        &self.phi_tilde
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn num_states(&self) -> usize {
        self.phi_tilde.nrows()
    }

    /// Number of expanded features, `d + 1`.
    pub fn dim(&self) -> usize {
        self.phi_tilde.ncols()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Bias feature of a state: 1, or 0 for terminal states in episodic mode.
    pub fn bias_feature(&self, s: usize) -> T {
        self.phi_tilde[(s, 0)]
    }

    /// Smallest and largest singular value of `phi_tilde`.
    pub fn singular_value_range(&self) -> (T, T) {
        (self.sigma_min, self.sigma_max)
    }
}

/// Expand `phi` (one row per state of `mdp`) with a bias column.
pub fn expand_features<T: Scalar>(phi: DMatrix<T>, mdp: &TabularMdp<T>, mode: FeatureMode) -> Result<FeatureSet<T>> {
    expand_features_with_terminals(phi, mdp.terminal(), mode)
}

/// As [`expand_features`], for chains given without an MDP.
pub fn expand_features_with_terminals<T: Scalar>(
    phi: DMatrix<T>,
    terminal: &[bool],
    mode: FeatureMode,
) -> Result<FeatureSet<T>> {
    let n = terminal.len();
    if phi.nrows() != n {
        return Err(Error::Config(format!("features have {} rows for {n} states", phi.nrows())));
    }
    let d = phi.ncols();
    let mut phi_tilde = DMatrix::zeros(n, d + 1);
    for s in 0..n {
        if mode == FeatureMode::Episodic && terminal[s] {
            continue;
        }
        phi_tilde[(s, 0)] = T::one();
        for j in 0..d {
            phi_tilde[(s, j + 1)] = phi[(s, j)];
        }
    }
    let (sigma_min, sigma_max, null_dir) = rank_check(&phi_tilde);
    if !(sigma_min > T::lit(RANK_TOL) * sigma_max) {
        let hint = match &null_dir {
            Some(x) if d > 0 && x[0].abs() > T::lit(1e-6) => {
                "; the bias column lies in the span of the raw features"
            }
            Some(_) if d == 0 => "; no state carries the bias feature",
            _ => "",
        };
        let dir = null_dir
            .map(|x| format!("{:?}", x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()))
            .unwrap_or_else(|| "unavailable".into());
        return Err(Error::Domain(format!(
            "expanded features are rank deficient (sigma_min = {sigma_min}, sigma_max = {sigma_max}); \
             null direction {dir}{hint}"
        )));
    }
    Ok(FeatureSet { phi, phi_tilde, mode, terminal: terminal.to_vec(), sigma_min, sigma_max })
}

fn rank_check<T: Scalar>(m: &DMatrix<T>) -> (T, T, Option<DVector<T>>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (T::zero(), T::zero(), None);
    }
    // zero rows keep the SVD square so a null direction exists when n < d + 1
    let padded = if m.nrows() < m.ncols() { m.clone().resize_vertically(m.ncols(), T::zero()) } else { m.clone() };
    let svd = padded.svd(false, true);
    let sv = &svd.singular_values;
    let (mut imin, mut imax) = (0, 0);
    for i in 0..sv.len() {
        if sv[i] < sv[imin] {
            imin = i;
        }
        if sv[i] > sv[imax] {
            imax = i;
        }
    }
    let null = svd.v_t.map(|vt| vt.row(imin).transpose());
    (sv[imin], sv[imax], null)
}
