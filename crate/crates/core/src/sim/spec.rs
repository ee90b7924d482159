use serde::Serialize;

use crate::bounds::Stratum;
use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-9;

/// Baseline-period response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum R1Model {
    AlwaysObserved,
    /// Missing completely at random with probability `rate`.
    Mcar { rate: f64 },
}

/// Generator for one auxiliary response indicator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxModel {
    /// Pr(aux = 1 | S = s, D = d), indexed `[s][d]`.
    pub p_one: [[f64; 2]; 4],
    /// Per-arm shift of the untreated outcome trend, applied as
    /// `shift[d] * (aux - Pr(aux = 1 | D = d))` so the arm mean is unchanged.
    pub trend_shift: [f64; 2],
}

impl AuxModel {
    pub fn by_stratum(p: [f64; 4]) -> Self {
        AuxModel {
            p_one: p.map(|v| [v, v]),
            trend_shift: [0.0; 2],
        }
    }
}

/// One discrete covariate cell; the covariate value is the cell index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateCell {
    pub weight: f64,
    /// Pr(S = s, D = d | X = x), indexed `[s][d]`.
    pub joint_sd: [[f64; 2]; 4],
    pub trend_shift: f64,
    pub effect_shift: f64,
}

/// Latent-strata two-period panel generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpSpec {
    pub n: usize,
    pub seed: u64,
    /// Pr(S = s, D = d), indexed `[s][d]` in [`Stratum::ALL`] order. With a
    /// covariate layer this must equal the mixture of the cell tables.
    pub joint_sd: [[f64; 2]; 4],
    /// Untreated trend E[Y2(0) - Y1 | S = s], shared by both arms.
    pub trend: [f64; 4],
    /// Extra untreated trend for treated units only; nonzero entries break
    /// stratum-level parallel trends on purpose.
    pub treated_trend_delta: [f64; 4],
    /// E[Y1 | S = s, D = d].
    pub baseline: [[f64; 2]; 4],
    /// Y2(1) - Y2(0) by stratum.
    pub effect: [f64; 4],
    pub noise_sd: f64,
    pub r1_model: R1Model,
    pub aux_models: Vec<AuxModel>,
    pub covariates: Option<Vec<CovariateCell>>,
}

impl DgpSpec {
    /// Spec with the given strata table and everything else neutral.
    pub fn with_strata(joint_sd: [[f64; 2]; 4]) -> Self {
        DgpSpec {
            n: 1000,
            seed: 0,
            joint_sd,
            trend: [0.0; 4],
            treated_trend_delta: [0.0; 4],
            baseline: [[0.0; 2]; 4],
            effect: [0.0; 4],
            noise_sd: 1.0,
            r1_model: R1Model::AlwaysObserved,
            aux_models: Vec::new(),
            covariates: None,
        }
    }

    /// Strata table from per-arm stratum shares and Pr(D = 1).
    pub fn joint_from_shares(treated_share: f64, control: [f64; 4], treated: [f64; 4]) -> [[f64; 2]; 4] {
        let mut j = [[0.0; 2]; 4];
        for s in 0..4 {
            j[s] = [(1.0 - treated_share) * control[s], treated_share * treated[s]];
        }
        j
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProbabilityTable(m));
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be >= 1".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_sd {} must be >= 0", self.noise_sd)));
        }
        check_joint(&self.joint_sd, "joint_sd")?;
        if let R1Model::Mcar { rate } = self.r1_model {
            if !(0.0..1.0).contains(&rate) {
                return bad(format!("baseline missing rate {rate} not in [0, 1)"));
            }
        }
        for (k, a) in self.aux_models.iter().enumerate() {
            if a.p_one.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("aux model {} has a probability outside [0, 1]", k + 1));
            }
        }
        if let Some(cells) = &self.covariates {
            if cells.is_empty() {
                return bad("covariate layer has no cells".into());
            }
            let total: f64 = cells.iter().map(|c| c.weight).sum();
            if cells.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > PROB_TOL {
                return bad(format!("covariate cell weights sum to {total}"));
            }
            let mut mix = [[0.0; 2]; 4];
            for (x, c) in cells.iter().enumerate() {
                check_joint(&c.joint_sd, &format!("covariate cell {x}"))?;
                for s in 0..4 {
                    for d in 0..2 {
                        mix[s][d] += c.weight * c.joint_sd[s][d];
                    }
                }
            }
            for s in 0..4 {
                for d in 0..2 {
                    if (mix[s][d] - self.joint_sd[s][d]).abs() > PROB_TOL {
                        return bad("joint_sd differs from the covariate-cell mixture".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Exact Pr(S = s | D = d), indexed `[d][s]`.
    pub fn strata_table(&self) -> [[f64; 4]; 2] {
        let mut t = [[0.0; 4]; 2];
        for d in 0..2 {
            let arm: f64 = (0..4).map(|s| self.joint_sd[s][d]).sum();
            for s in 0..4 {
                t[d][s] = self.joint_sd[s][d] / arm;
            }
        }
        t
    }

    /// Pr(aux_k = 1 | D = d), the centring constant of the aux trend shift.
    pub fn aux_share(&self, k: usize) -> [f64; 2] {
        let a = &self.aux_models[k];
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate() {
            let arm: f64 = (0..4).map(|s| self.joint_sd[s][d]).sum();
            *o = (0..4).map(|s| self.joint_sd[s][d] * a.p_one[s][d]).sum::<f64>() / arm;
        }
        out
    }

    pub fn baseline_missing_rate(&self) -> f64 {
        match self.r1_model {
            R1Model::AlwaysObserved => 0.0,
            R1Model::Mcar { rate } => rate,
        }
    }

    /// Untreated trend of a unit given its latent draws.
    pub(crate) fn unit_trend(&self, s: Stratum, d: usize, aux: &[bool], cell: Option<usize>, shares: &[[f64; 2]]) -> f64 {
        let mut t = self.trend[s.index()];
        if d == 1 {
            t += self.treated_trend_delta[s.index()];
        }
        for (k, a) in self.aux_models.iter().enumerate() {
            t += a.trend_shift[d] * (aux[k] as u8 as f64 - shares[k][d]);
        }
        if let (Some(c), Some(cells)) = (cell, &self.covariates) {
            t += cells[c].trend_shift;
        }
        t
    }

    pub(crate) fn unit_effect(&self, s: Stratum, cell: Option<usize>) -> f64 {
        let mut e = self.effect[s.index()];
        if let (Some(c), Some(cells)) = (cell, &self.covariates) {
            e += cells[c].effect_shift;
        }
        e
    }
}

fn check_joint(j: &[[f64; 2]; 4], name: &str) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidProbabilityTable(m));
    if j.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return bad(format!("{name} has a negative or non-finite entry"));
    }
    let total: f64 = j.iter().flatten().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return bad(format!("{name} sums to {total}, not 1"));
    }
    for d in 0..2 {
        if (0..4).all(|s| j[s][d] == 0.0) {
            return bad(format!("{name} puts no mass on arm d = {d}"));
        }
    }
    Ok(())
}
