//! Complete-case DID corrected for outcome-dependent attrition, using
//! baseline response indicators as instruments for post-period response.
//!
//! Within arm `d` and among units observed at baseline, the gap between the
//! mean outcome change of nonrespondents and respondents is recovered from
//! how the respondent mean and the response rate move across the instrument
//! groups. The correction added to the arm mean is that gap times the arm's
//! post-period missing share.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{complete_case_means, Estimate};
use crate::panel::PanelDataset;
use crate::stats::mean;

/// Smallest usable |denominator|; below it the estimator refuses.
pub const WEAK_INSTRUMENT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvDiagnostics {
    /// 1-based auxiliary indices used.
    pub instruments: Vec<usize>,
    /// Instrument-strength denominator per arm (`None` when not needed).
    pub denom: [Option<f64>; 2],
    /// Pr(R2 = 0 | D = d, R1 = 1).
    pub missing_share: [f64; 2],
    /// Additive correction applied to each arm's complete-case mean change.
    pub bias_correction: [f64; 2],
    /// Observed difference in respondent mean change across instrument
    /// groups (difference of differences for a pair).
    pub trend_gap: [Option<f64>; 2],
    /// Implied mean change of post-period nonrespondents.
    pub nonrespondent_trend: [Option<f64>; 2],
    pub complete_case_trend: [f64; 2],
    pub estimand: &'static str,
}

/// Per arm and instrument value: units observed at baseline, how many of
/// them miss the post period, and the complete-case changes.
#[derive(Debug, Default, Clone)]
struct Cell {
    n: u64,
    missing: u64,
    deltas: Vec<f64>,
}

impl Cell {
    fn missing_rate(&self) -> f64 {
        self.missing as f64 / self.n as f64
    }
}

fn instrument_cells(data: &PanelDataset, k: usize) -> [[Cell; 2]; 2] {
    let mut cells: [[Cell; 2]; 2] = Default::default();
    for r in data.iter().filter(|r| r.r1()) {
        let c = &mut cells[r.arm()][r.aux[k] as usize];
        c.n += 1;
        match r.delta() {
            Some(dy) => c.deltas.push(dy),
            None => c.missing += 1,
        }
    }
    cells
}

/// Response gap pieces for one instrument in one arm: (trend gap m1 - m0,
/// missingness gap p0 - p1).
fn instrument_gaps(cells: &[Cell; 2], arm: usize, k: usize) -> Result<(f64, f64)> {
    for (v, c) in cells.iter().enumerate() {
        if c.deltas.is_empty() {
            return Err(Error::EmptyInstrumentCell {
                arm,
                aux: k + 1,
                value: v as u8,
            });
        }
    }
    Ok((
        mean(&cells[1].deltas) - mean(&cells[0].deltas),
        cells[0].missing_rate() - cells[1].missing_rate(),
    ))
}

fn check_index(data: &PanelDataset, k: usize) -> Result<()> {
    if k >= data.aux_arity() {
        return Err(Error::AuxIndex {
            index: k + 1,
            arity: data.aux_arity(),
        });
    }
    Ok(())
}

fn estimand(data: &PanelDataset) -> &'static str {
    if data.iter().all(|r| r.r1()) {
        "ATT"
    } else {
        "ATT among baseline respondents"
    }
}

/// Shared assembly: `gap(arm)` returns (numerator, denominator) of the
/// nonrespondent-gap ratio for an arm that has post-period missingness.
fn assemble<G>(data: &PanelDataset, instruments: Vec<usize>, gap: G) -> Result<(Estimate, IvDiagnostics)>
where
    G: Fn(usize) -> Result<(f64, f64)>,
{
    let (cc, n_cc) = complete_case_means(data)?;
    let mut n_r1 = [0u64; 2];
    let mut miss = [0u64; 2];
    for r in data.iter().filter(|r| r.r1()) {
        n_r1[r.arm()] += 1;
        miss[r.arm()] += !r.r2() as u64;
    }
    let mut diag = IvDiagnostics {
        instruments,
        denom: [None; 2],
        missing_share: [0.0; 2],
        bias_correction: [0.0; 2],
        trend_gap: [None; 2],
        nonrespondent_trend: [None; 2],
        complete_case_trend: cc,
        estimand: estimand(data),
    };
    for arm in 0..2 {
        let share = miss[arm] as f64 / n_r1[arm] as f64;
        diag.missing_share[arm] = share;
        if miss[arm] == 0 {
            continue;
        }
        let (num, denom) = gap(arm)?;
        diag.denom[arm] = Some(denom);
        diag.trend_gap[arm] = Some(num);
        if denom.abs() < WEAK_INSTRUMENT_EPS {
            return Err(Error::WeakInstrument {
                arm,
                denom: denom.abs(),
                eps: WEAK_INSTRUMENT_EPS,
            });
        }
        let g = num / denom;
        diag.bias_correction[arm] = g * share;
        diag.nonrespondent_trend[arm] = Some(cc[arm] + g);
    }
    let point = cc[1] + diag.bias_correction[1] - (cc[0] + diag.bias_correction[0]);
    Ok((Estimate::point(point, n_cc[0] + n_cc[1]), diag))
}

/// IV-corrected ATT with auxiliary indicator `k` (0-based).
pub fn att_iv(data: &PanelDataset, k: usize) -> Result<(Estimate, IvDiagnostics)> {
    check_index(data, k)?;
    let cells = instrument_cells(data, k);
    assemble(data, vec![k + 1], |arm| instrument_gaps(&cells[arm], arm, k))
}

/// IV-corrected ATT from a pair of auxiliary indicators whose trend gaps
/// differ by the same amount as the nonrespondent gap requires.
pub fn att_iv_multi(data: &PanelDataset, k1: usize, k2: usize) -> Result<(Estimate, IvDiagnostics)> {
    check_index(data, k1)?;
    check_index(data, k2)?;
    let identical = data
        .iter()
        .filter(|r| r.r1() && r.r2())
        .all(|r| r.aux[k1] == r.aux[k2]);
    if k1 == k2 || identical {
        return Err(Error::DegenerateInstrumentPair(k1 + 1, k2 + 1));
    }
    let c1 = instrument_cells(data, k1);
    let c2 = instrument_cells(data, k2);
    assemble(data, vec![k1 + 1, k2 + 1], |arm| {
        let (m1, p1) = instrument_gaps(&c1[arm], arm, k1)?;
        let (m2, p2) = instrument_gaps(&c2[arm], arm, k2)?;
        Ok((m1 - m2, p1 - p2))
    })
}
