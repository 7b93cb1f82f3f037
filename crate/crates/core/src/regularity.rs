//! Moment scaling of `Y` increments and the implied Hölder exponent.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::YEnsemble;
use crate::numeric::{fit_line, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    /// Moment order `r >= 2`.
    pub order: f64,
    /// Lags in grid steps.
    pub lags: Vec<usize>,
    /// Hölder exponent of the generator's time dependence, in `(0, 1/2]`.
    pub gamma: f64,
}

impl RegularityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.order >= 2.0 && self.order.is_finite()) {
            return Err(config(format!("moment order must be >= 2, got {}", self.order)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return Err(config(format!("gamma must lie in (0, 1/2], got {}", self.gamma)));
        }
        if self.lags.is_empty() || self.lags.contains(&0) {
            return Err(config("lags must be a nonempty list of positive step counts"));
        }
        Ok(())
    }

    /// `r γ > 1`, the moment condition behind the continuity argument.
    pub fn kolmogorov(&self) -> bool {
        self.order * self.gamma > 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lag: usize,
    pub lag_time: f64,
    pub moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub order: f64,
    pub rows: Vec<ScalingRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub slope: f64,
    pub exponent: f64,
}

/// `E|Y(t + ℓ dt) - Y(t)|^r` averaged over paths and every admissible `t`.
pub fn increment_moments(y: &YEnsemble, cfg: &RegularityConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let grid = *y.grid();
    let n = grid.n_steps();
    let max_lag = *cfg.lags.iter().max().expect("validated nonempty");
    if 4 * max_lag > n {
        return Err(config(format!("lag {max_lag} exceeds N/4 = {}", n / 4)));
    }
    let rows = cfg
        .lags
        .iter()
        .map(|&lag| {
            let mut acc = CompensatedSum::new();
            for p in 0..y.n_paths() {
                let path = y.path(p);
                for i in 0..=n - lag {
                    acc.add((path[i + lag] - path[i]).abs().powf(cfg.order));
                }
            }
            ScalingRow {
                lag,
                lag_time: lag as f64 * grid.dt(),
                moment: acc.value() / (y.n_paths() * (n - lag + 1)) as f64,
            }
        })
        .collect();
    Ok(ScalingReport { order: cfg.order, rows })
}

/// Least-squares slope of `log moment` against `log lag`, and `slope / r`.
pub fn holder_fit(report: &ScalingReport) -> Result<HolderFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = report
        .rows
        .iter()
        .filter(|r| r.moment > 0.0)
        .map(|r| (r.lag_time.ln(), r.moment.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} positive moments, need at least 3",
            xs.len()
        )));
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::InsufficientData("lags coincide".into()))?;
    Ok(HolderFit {
        slope: fit.slope,
        exponent: fit.slope / report.order,
    })
}
