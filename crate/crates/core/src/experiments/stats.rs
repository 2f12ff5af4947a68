use serde::Serialize;

use super::RunRecord;
use crate::{Error, Result};

/// Mean and standard error (`n - 1` sample deviation over `sqrt(n)`).
/// A single value has standard error 0.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Pointwise mean and standard error of a set of curves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curves {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Curves {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

pub fn aggregate_series(series: &[Vec<f64>]) -> Result<Curves> {
    let first = series.first().ok_or_else(|| Error::Usage("aggregate needs at least one curve".into()))?;
    let len = first.len();
    if let Some(bad) = series.iter().position(|c| c.len() != len) {
        return Err(Error::Usage(format!(
            "curve {bad} has {} points, curve 0 has {len}",
            series[bad].len()
        )));
    }
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    let mut column = vec![0.0; series.len()];
    for t in 0..len {
        for (slot, c) in column.iter_mut().zip(series) {
            *slot = c[t];
        }
        let (m, se) = mean_stderr(&column);
        mean.push(m);
        stderr.push(se);
    }
    Ok(Curves { mean, stderr })
}

/// Cumulative-episode curves of `records`, aggregated.
pub fn aggregate(records: &[RunRecord]) -> Result<Curves> {
    let series: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.cumulative.iter().map(|&c| f64::from(c)).collect())
        .collect();
    aggregate_series(&series)
}
