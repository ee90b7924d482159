//! Unit-level nonparametric bootstrap with percentile intervals.
//!
//! Replicate `b` draws from its own ChaCha stream `(seed, b)`, so results do
//! not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{ConfidenceInterval, Estimate};
use crate::panel::PanelDataset;
use crate::stats::{quantile_sorted, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 999,
            seed: 0,
            level: 0.95,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("bootstrap replicates must be >= 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence level {} not in (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub failed: usize,
    pub last_error: Option<String>,
}

/// Resampling indices for replicate `b`.
pub fn replicate_indices(n: usize, seed: u64, b: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
}

fn run_replicates<T, F>(data: &PanelDataset, cfg: &BootstrapConfig, f: F) -> Result<(Vec<T>, BootstrapSummary)>
where
    T: Send,
    F: Fn(&PanelDataset) -> Result<T> + Sync,
{
    cfg.validate()?;
    let outcomes: Vec<Result<T>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| f(&data.resample(&replicate_indices(data.len(), cfg.seed, b))))
        .collect();
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    let mut last_error = None;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                last_error = Some(e.to_string());
            }
        }
    }
    if failed * 2 > cfg.replicates {
        return Err(Error::BootstrapFailed {
            failed,
            replicates: cfg.replicates,
            last: last_error.unwrap_or_default(),
        });
    }
    Ok((
        ok,
        BootstrapSummary {
            replicates: cfg.replicates,
            failed,
            last_error,
        },
    ))
}

/// Percentile interval of `draws`, widened if needed so it contains `point`.
fn percentile_interval(mut draws: Vec<f64>, point: f64, level: f64) -> (ConfidenceInterval, f64) {
    let se = sample_variance(&draws).sqrt();
    draws.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lo = quantile_sorted(&draws, alpha / 2.0).min(point);
    let hi = quantile_sorted(&draws, 1.0 - alpha / 2.0).max(point);
    (ConfidenceInterval { lo, hi, level }, se)
}

/// Attach a bootstrap standard error and percentile interval to a scalar
/// estimator. The estimator must succeed on the full data.
pub fn bootstrap_ci<F>(data: &PanelDataset, cfg: &BootstrapConfig, estimator: F) -> Result<(Estimate, BootstrapSummary)>
where
    F: Fn(&PanelDataset) -> Result<Estimate> + Sync,
{
    let mut est = estimator(data)?;
    let (draws, summary) = run_replicates(data, cfg, |d| estimator(d).map(|e| e.point))?;
    let (ci, se) = percentile_interval(draws, est.point, cfg.level);
    est.se = Some(se);
    est.ci = Some(ci);
    Ok((est, summary))
}

/// Bootstrap of an interval-valued estimator: lower and upper endpoints are
/// resampled jointly and their percentile intervals reported separately,
/// together with the outer interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBootstrap {
    pub lb: ConfidenceInterval,
    pub ub: ConfidenceInterval,
    pub lb_se: f64,
    pub ub_se: f64,
    /// `[lower end of the LB interval, upper end of the UB interval]`.
    pub outer: ConfidenceInterval,
}

pub fn bootstrap_interval<F>(
    data: &PanelDataset,
    cfg: &BootstrapConfig,
    point: (f64, f64),
    estimator: F,
) -> Result<(IntervalBootstrap, BootstrapSummary)>
where
    F: Fn(&PanelDataset) -> Result<(f64, f64)> + Sync,
{
    let (draws, summary) = run_replicates(data, cfg, estimator)?;
    let (lbs, ubs): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    let (lb, lb_se) = percentile_interval(lbs, point.0, cfg.level);
    let (ub, ub_se) = percentile_interval(ubs, point.1, cfg.level);
    let outer = ConfidenceInterval {
        lo: lb.lo,
        hi: ub.hi,
        level: cfg.level,
    };
    Ok((
        IntervalBootstrap {
            lb,
            ub,
            lb_se,
            ub_se,
            outer,
        },
        summary,
    ))
}
