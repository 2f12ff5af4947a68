//! `difftd oracle-check`: spectral and fixed-point report for one system.

use std::fmt::Write as _;

use difftd::linear::{
    b_star, build_system, definiteness_report, expand_features_with_terminals, hurwitz_check, BStar, FeatureMode,
    FixedPointReport, HurwitzReport, SpectralReport,
};
use difftd::mdp::{policy_matrices, stationary_distribution_unichain, unroll, PolicyTable, TabularMdp};
use difftd::{Chain, Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::OracleConfig;

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub states: usize,
    pub expanded_features: usize,
    pub gamma: f64,
    pub mode: FeatureMode,
    pub spectral: SpectralReport,
    pub hurwitz: Vec<HurwitzReport>,
    /// `None` when `A` is singular.
    pub fixed_point: Option<FixedPointReport>,
    pub b_star: Option<BStar>,
}

impl OracleReport {
    /// Names of the properties that do not hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.spectral.negative_definite {
            out.push("negative_definiteness".to_string());
        }
        for h in &self.hurwitz {
            if !h.hurwitz {
                out.push(format!("hurwitz(eta={})", h.eta));
            }
        }
        if self.fixed_point.is_none() {
            out.push("fixed_point".to_string());
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "system: {} states, {} expanded features, gamma {}, {} features",
            self.states,
            self.expanded_features,
            self.gamma,
            match self.mode {
                FeatureMode::Continuing => "continuing",
                FeatureMode::Episodic => "episodic",
            }
        );
        let _ = writeln!(
            s,
            "A: max symmetric eigenvalue {:.6e} ({})",
            self.spectral.max_symmetric_eigenvalue,
            if self.spectral.negative_definite { "negative definite" } else { "NOT negative definite" }
        );
        for h in &self.hurwitz {
            let _ = writeln!(
                s,
                "K A at eta {}: max real part {:.6e} ({})",
                h.eta,
                h.max_real_part,
                if h.hurwitz { "Hurwitz" } else { "NOT Hurwitz" }
            );
        }
        match &self.fixed_point {
            Some(fp) => {
                let w = &fp.weights;
                let _ = writeln!(s, "fixed point: b = {:.10}", w[0]);
                if w.len() > 1 {
                    let rest: Vec<String> = w[1..].iter().map(|x| format!("{x:.10}")).collect();
                    let _ = writeln!(s, "fixed point: w = [{}]", rest.join(", "));
                }
                let _ = writeln!(s, "fixed point residual: {:.3e}", fp.residual);
            }
            None => {
                let _ = writeln!(s, "fixed point: none (A is singular)");
            }
        }
        if let Some(bs) = &self.b_star {
            let _ = writeln!(s, "b_star: formula {:.10}, exact discount {:.10}, gap {:.3e}", bs.formula, bs.exact_discount, bs.gap());
        }
        s
    }
}

fn policy_for(mdp: &TabularMdp<f64>, actions: Option<&[usize]>) -> Result<PolicyTable<f64>> {
    match actions {
        Some(a) => PolicyTable::deterministic(mdp, a),
        None => Ok(PolicyTable::uniform(mdp)),
    }
}

fn feature_matrix(rows: Option<&[Vec<f64>]>, n: usize) -> Result<DMatrix<f64>> {
    let Some(rows) = rows else {
        return Ok(DMatrix::zeros(n, 0));
    };
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("feature rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

pub fn oracle_check(config: &OracleConfig) -> Result<OracleReport> {
    let mdp: Option<TabularMdp<f64>> = match (&config.env, &config.mdp_file) {
        (Some(env), _) => Some(env.build(config.gamma)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Some(TabularMdp::<f64>::from_json(&text)?.with_gamma(config.gamma)?)
        }
        (None, None) => None,
    };
    let (chain, terminal, pi): (Chain, Vec<bool>, Option<PolicyTable<f64>>) = match &mdp {
        Some(mdp) => {
            let pi = policy_for(mdp, config.policy.as_deref())?;
            let chain = if mdp.has_terminal() { unroll(mdp, &pi)? } else { policy_matrices(mdp, &pi)? };
            (chain, mdp.terminal().to_vec(), Some(pi))
        }
        None => {
            let c = config.chain.as_ref().ok_or_else(|| Error::Config("oracle has no system".into()))?;
            let n = c.p.len();
            if c.p.iter().any(|row| row.len() != n) {
                return Err(Error::Config("chain.p must be square".into()));
            }
            let p = DMatrix::from_fn(n, n, |i, j| c.p[i][j]);
            (Chain::new(p, DVector::from_vec(c.r.clone()))?, vec![false; n], None)
        }
    };
    // periodic chains (deterministic corridors) still have a unique d
    let d = stationary_distribution_unichain(&chain)?;
    let chain = chain.with_stationary(d)?;
    let episodic = terminal.iter().any(|&t| t);
    let mode = config.mode.unwrap_or(if episodic { FeatureMode::Episodic } else { FeatureMode::Continuing });
    let phi = feature_matrix(config.features.as_deref(), chain.len())?;
    let features = expand_features_with_terminals(phi, &terminal, mode)?;
    let base = build_system(&features, &chain, config.gamma, 1.0)?;
    let spectral = definiteness_report(&base);
    let hurwitz = config
        .etas
        .iter()
        .map(|&eta| hurwitz_check(&build_system(&features, &chain, config.gamma, eta)?))
        .collect::<Result<Vec<_>>>()?;
    let fixed_point = match FixedPointReport::from_system(&base) {
        Ok(fp) => Some(fp),
        Err(Error::Domain(_) | Error::Numerical { .. }) => None,
        Err(e) => return Err(e),
    };
    let b_star = match (&mdp, &pi) {
        (Some(mdp), Some(pi)) if episodic => Some(b_star(mdp, pi, config.gamma)?),
        _ => None,
    };
    Ok(OracleReport {
        states: chain.len(),
        expanded_features: features.dim(),
        gamma: config.gamma,
        mode,
        spectral,
        hurwitz,
        fixed_point,
        b_star,
    })
}
