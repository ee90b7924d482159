//! Complete-case and full-data difference-in-differences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub se: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
    pub n_used: usize,
}

impl Estimate {
    pub fn point(point: f64, n_used: usize) -> Self {
        Estimate {
            point,
            se: None,
            ci: None,
            n_used,
        }
    }
}

/// Y2 - Y1 of complete cases (both periods observed), split by arm, in
/// record order.
pub fn complete_case_deltas(data: &PanelDataset) -> [Vec<f64>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for r in data.iter() {
        if let Some(dy) = r.delta() {
            out[r.arm()].push(dy);
        }
    }
    out
}

/// Mean outcome change among complete cases, per arm.
pub fn complete_case_means(data: &PanelDataset) -> Result<([f64; 2], [usize; 2])> {
    let deltas = complete_case_deltas(data);
    for (arm, v) in deltas.iter().enumerate() {
        if v.is_empty() {
            return Err(Error::NoCompleteCases { arm });
        }
    }
    Ok((
        [mean(&deltas[0]), mean(&deltas[1])],
        [deltas[0].len(), deltas[1].len()],
    ))
}

/// DID of mean outcome changes restricted to units observed in both periods.
pub fn did_complete_case(data: &PanelDataset) -> Result<Estimate> {
    let (m, n) = complete_case_means(data)?;
    Ok(Estimate::point(m[1] - m[0], n[0] + n[1]))
}

/// Full-sample DID; only defined when nothing is missing.
pub fn naive_did_all(data: &PanelDataset) -> Result<Estimate> {
    if data.has_missing() {
        return Err(Error::MissingOutcomes);
    }
    did_complete_case(data)
}
