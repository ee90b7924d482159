//! Covariate-cell principal scores and the ATT under principal
//! ignorability (within a covariate cell, outcome trends and effects do not
//! depend on the response type).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::panel::PanelDataset;
use crate::stats::{clip_logged, mean, ClipEvent};

/// Strata that can occur among the treated under monotone response.
pub const SCORED_STRATA: [&str; 3] = ["always-respondent", "if-treated-respondent", "never-respondent"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCell {
    pub x: Vec<u32>,
    /// Units per arm.
    pub n: [u64; 2],
    /// Scores e(x) for always-, if-treated- and never-respondents, among
    /// the treated.
    pub scores: [f64; 3],
    /// Complete-case mean outcome change per arm (`None` if no complete
    /// case).
    pub trend: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalScoreTable {
    pub cells: Vec<ScoreCell>,
    /// Treated-arm share of each cell.
    pub treated_share: Vec<f64>,
    /// Average score over treated units, per stratum.
    pub normalizers: [f64; 3],
    pub clip_events: Vec<ClipEvent>,
}

impl PrincipalScoreTable {
    /// Normalized weight e_s(x) / E[e_s(X) | D = 1] for cell index `c`.
    pub fn weight(&self, stratum: usize, c: usize) -> Option<f64> {
        let norm = self.normalizers[stratum];
        (norm > 0.0).then(|| self.cells[c].scores[stratum] / norm)
    }

    pub fn cell_index(&self, x: &[u32]) -> Option<usize> {
        self.cells.iter().position(|c| c.x == x)
    }
}

#[derive(Default)]
struct Acc {
    n: [u64; 2],
    r1: [u64; 2],
    r2: [u64; 2],
    deltas: [Vec<f64>; 2],
}

fn accumulate(data: &PanelDataset) -> BTreeMap<Vec<u32>, Acc> {
    let mut cells: BTreeMap<Vec<u32>, Acc> = BTreeMap::new();
    for r in data.iter() {
        let acc = cells.entry(r.x.clone()).or_default();
        let d = r.arm();
        acc.n[d] += 1;
        acc.r1[d] += r.r1() as u64;
        acc.r2[d] += r.r2() as u64;
        if let Some(dy) = r.delta() {
            acc.deltas[d].push(dy);
        }
    }
    cells
}

fn fmt_x(x: &[u32]) -> String {
    format!("{x:?}")
}

/// Cellwise scores under monotone response and parallel response trends
/// within covariate cells. A dataset without covariates is a single cell.
pub fn principal_scores(data: &PanelDataset) -> Result<PrincipalScoreTable> {
    let cells = accumulate(data);
    let empty: Vec<(Vec<u32>, usize)> = cells
        .iter()
        .flat_map(|(x, a)| (0..2).filter(|&d| a.n[d] == 0).map(move |d| (x.clone(), d)))
        .collect();
    if !empty.is_empty() {
        return Err(Error::EmptyCovariateCell(empty));
    }
    let n1: u64 = cells.values().map(|a| a.n[1]).sum();
    let mut ev = Vec::new();
    let mut out = Vec::with_capacity(cells.len());
    let mut share = Vec::with_capacity(cells.len());
    let mut norm = [0.0; 3];
    for (x, a) in cells {
        let rate = |num: [u64; 2], d: usize| num[d] as f64 / a.n[d] as f64;
        let resp1 = rate(a.r2, 1);
        let raw = rate(a.r2, 0) - rate(a.r1, 0) + rate(a.r1, 1);
        let always = clip_logged(&format!("e_11(x = {})", fmt_x(&x)), raw, 0.0, resp1, &mut ev);
        let scores = [always, resp1 - always, 1.0 - resp1];
        let f1 = a.n[1] as f64 / n1 as f64;
        for s in 0..3 {
            norm[s] += f1 * scores[s];
        }
        share.push(f1);
        out.push(ScoreCell {
            x,
            n: a.n,
            scores,
            trend: [0, 1].map(|d| (!a.deltas[d].is_empty()).then(|| mean(&a.deltas[d]))),
        });
    }
    Ok(PrincipalScoreTable {
        cells: out,
        treated_share: share,
        normalizers: norm,
        clip_events: ev,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalResult {
    pub estimate: Estimate,
    /// Effect within each scored stratum (`None` for an empty stratum).
    pub stratum_effects: [Option<f64>; 3],
    /// Stratum shares among the treated (the normalizers).
    pub stratum_shares: [f64; 3],
    pub scores: PrincipalScoreTable,
}

/// ATT as the share-weighted sum of stratum effects. Each stratum effect
/// reweights the cellwise complete-case DID by the normalized principal
/// score over the treated covariate distribution.
pub fn att_principal_ignorability(data: &PanelDataset) -> Result<PrincipalResult> {
    let table = principal_scores(data)?;
    let missing: Vec<(Vec<u32>, usize)> = table
        .cells
        .iter()
        .flat_map(|c| (0..2).filter(|&d| c.trend[d].is_none()).map(move |d| (c.x.clone(), d)))
        .collect();
    if !missing.is_empty() {
        return Err(Error::EmptyCovariateCell(missing));
    }
    let did: Vec<f64> = table
        .cells
        .iter()
        .map(|c| c.trend[1].unwrap() - c.trend[0].unwrap())
        .collect();

    let mut effects = [None; 3];
    let mut point = 0.0;
    for (s, effect) in effects.iter_mut().enumerate() {
        let share = table.normalizers[s];
        if share <= 0.0 {
            if let Some(c) = table.cells.iter().find(|c| c.scores[s] > 0.0) {
                return Err(Error::ZeroNormalizer {
                    stratum: SCORED_STRATA[s],
                    mass: c.scores[s],
                });
            }
            continue;
        }
        let tau: f64 = (0..table.cells.len())
            .map(|c| table.treated_share[c] * table.weight(s, c).unwrap() * did[c])
            .sum();
        *effect = Some(tau);
        point += share * tau;
    }
    let n_used = data_complete_counts(data, &table).iter().sum();
    Ok(PrincipalResult {
        estimate: Estimate::point(point, n_used),
        stratum_effects: effects,
        stratum_shares: table.normalizers,
        scores: table,
    })
}

fn data_complete_counts(data: &PanelDataset, table: &PrincipalScoreTable) -> Vec<usize> {
    let mut counts = vec![0usize; table.cells.len()];
    for r in data.iter().filter(|r| r.r1() && r.r2()) {
        if let Some(c) = table.cell_index(&r.x) {
            counts[c] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{strata_proportions_monotone, Stratum};
    use crate::estimators::did_complete_case;
    use crate::panel::PanelRecord;
    use crate::rates::compute_rates;

    fn rec(i: usize, d: bool, y1: Option<f64>, y2: Option<f64>, x: u32) -> PanelRecord {
        PanelRecord::new(i.to_string(), d, y1, y2).with_covariates(vec![x])
    }

    fn two_cells() -> PanelDataset {
        let mut v = Vec::new();
        let mut i = 0;
        let mut push = |d, y1, y2, x| {
            v.push(rec(i, d, y1, y2, x));
            i += 1;
        };
        // cell 0: treated 4 units (1 missing post), control 2 (1 missing post)
        push(true, Some(0.0), Some(1.0), 0);
        push(true, Some(0.0), Some(2.0), 0);
        push(true, Some(0.0), Some(3.0), 0);
        push(true, Some(0.0), None, 0);
        push(false, Some(0.0), Some(0.5), 0);
        push(false, Some(0.0), None, 0);
        // cell 1: treated 2 units complete, control 2 complete
        push(true, Some(1.0), Some(4.0), 1);
        push(true, Some(1.0), Some(2.0), 1);
        push(false, Some(1.0), Some(2.0), 1);
        push(false, Some(1.0), Some(1.0), 1);
        PanelDataset::new(v, None).unwrap()
    }

    #[test]
    fn hand_scores() {
        let t = principal_scores(&two_cells()).unwrap();
        assert_eq!(t.cells.len(), 2);
        // cell 0: e11 = 1 + 1/2 - 1 = 1/2, e10 = 3/4 - 1/2, e00 = 1/4
        assert_eq!(t.cells[0].scores, [0.5, 0.25, 0.25]);
        assert_eq!(t.cells[1].scores, [1.0, 0.0, 0.0]);
        assert_eq!(t.treated_share, vec![4.0 / 6.0, 2.0 / 6.0]);
        for s in 0..3 {
            let m: f64 = (0..2).map(|c| t.treated_share[c] * t.weight(s, c).unwrap()).sum();
            assert!((m - 1.0).abs() < 1e-12);
        }
        for c in &t.cells {
            assert!((c.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_estimate() {
        let r = att_principal_ignorability(&two_cells()).unwrap();
        // cell DIDs: 2 - 0.5 = 1.5 and 2 - 0.5 = 1.5
        assert!((r.estimate.point - 1.5).abs() < 1e-12);
        assert_eq!(r.estimate.n_used, 8);
    }

    #[test]
    fn single_cell_matches_monotone_proportions() {
        let data = two_cells().project(0, false).unwrap();
        let t = principal_scores(&data).unwrap();
        let p = strata_proportions_monotone(&compute_rates(&data)).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.cells[0].scores[0], p.get(1, Stratum::AlwaysRespondent).lo);
        assert_eq!(t.cells[0].scores[1], p.get(1, Stratum::IfTreatedRespondent).lo);
        let cc = did_complete_case(&data).unwrap().point;
        let pi = att_principal_ignorability(&data).unwrap().estimate.point;
        assert!((pi - cc).abs() < 1e-12);
    }

    #[test]
    fn empty_cells_are_listed() {
        let v = vec![
            rec(0, true, Some(0.0), Some(1.0), 0),
            rec(1, false, Some(0.0), Some(1.0), 0),
            rec(2, true, Some(0.0), Some(1.0), 7),
        ];
        let err = principal_scores(&PanelDataset::new(v, None).unwrap()).unwrap_err();
        match &err {
            Error::EmptyCovariateCell(cells) => assert_eq!(cells, &vec![(vec![7], 0)]),
            other => panic!("{other}"),
        }
        assert!(err.to_string().contains("x = [7], arm 0"));
    }

    #[test]
    fn inconsistent_cell_is_clipped() {
        // control post-period response far below baseline response gap
        let v = vec![
            rec(0, true, None, Some(1.0), 0),
            rec(1, true, None, None, 0),
            rec(2, true, Some(0.0), Some(1.0), 0),
            rec(3, false, Some(0.0), None, 0),
            rec(4, false, Some(0.0), Some(0.0), 0),
            rec(5, false, Some(0.0), None, 0),
            rec(6, false, Some(0.0), None, 0),
        ];
        let t = principal_scores(&PanelDataset::new(v, None).unwrap()).unwrap();
        // raw e11 = 1/3 + 1/4 - 1 < 0
        assert_eq!(t.cells[0].scores[0], 0.0);
        assert_eq!(t.clip_events.len(), 1);
        assert!(t.clip_events[0].raw < 0.0);
    }

    #[test]
    fn empty_stratum_contributes_nothing() {
        let v: Vec<_> = (0..8)
            .map(|i| rec(i, i % 2 == 0, Some(0.0), Some(i as f64), (i % 4 < 2) as u32))
            .collect();
        let r = att_principal_ignorability(&PanelDataset::new(v, None).unwrap()).unwrap();
        assert_eq!(r.stratum_effects[1], None);
        assert_eq!(r.stratum_effects[2], None);
        assert!(r.stratum_effects[0].is_some());
    }
}
