//! Identities that need the latent records: the five-term ATT
//! decomposition and the mixture form of the untreated trend.

use serde::Serialize;

use crate::bounds::Stratum;
use crate::stats::sample_variance;

use super::generate::OracleRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// Observed treated-respondent change times the treated response rate.
    pub treated_respondents: f64,
    /// Minus control always-respondent change times the treated
    /// always-respondent share.
    pub control_always_respondents: f64,
    /// Minus control if-treated-respondent change times the treated share of
    /// that stratum.
    pub control_if_treated_respondents: f64,
    /// Effect among treated never-respondents times their share.
    pub treated_never_respondents: f64,
    /// Effect among treated if-control-respondents times their share.
    pub treated_if_control_respondents: f64,
    pub sum: f64,
    /// Sample ATT over treated units.
    pub att: f64,
    /// Monte-Carlo standard error of `sum - att`.
    pub mc_se: f64,
    pub within_tolerance: bool,
}

impl DecompositionReport {
    pub fn terms(&self) -> [f64; 5] {
        [
            self.treated_respondents,
            self.control_always_respondents,
            self.control_if_treated_respondents,
            self.treated_never_respondents,
            self.treated_if_control_respondents,
        ]
    }
}

struct Group(Vec<f64>);

impl Group {
    fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.0.iter().sum::<f64>() / self.0.len() as f64
        }
    }

    fn var_of_mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            sample_variance(&self.0) / self.0.len() as f64
        }
    }
}

fn collect<F, G>(records: &[OracleRecord], keep: F, value: G) -> Group
where
    F: Fn(&OracleRecord) -> bool,
    G: Fn(&OracleRecord) -> f64,
{
    Group(records.iter().filter(|o| keep(o)).map(value).collect())
}

/// Decompose the ATT into the observed treated-respondent change, the two
/// stratum-matched control trends, and the effects among treated units
/// whose post-period outcome is missing. Stratum-level parallel trends make
/// the terms sum to the ATT up to sampling noise.
pub fn decompose_att(records: &[OracleRecord]) -> DecompositionReport {
    let n1 = records.iter().filter(|o| o.d() == 1).count() as f64;
    let share = |s: Stratum| records.iter().filter(|o| o.d() == 1 && o.s == s).count() as f64 / n1;
    let treated_resp = collect(records, |o| o.d() == 1 && o.r2_1(), |o| o.y2_1 - o.y1_latent);
    let resp_rate = treated_resp.0.len() as f64 / n1;

    let stratum_trend = |d: usize, s: Stratum| collect(records, |o| o.d() == d && o.s == s, OracleRecord::untreated_change);
    let effect = |s: Stratum| collect(records, |o| o.d() == 1 && o.s == s, OracleRecord::effect);

    let (ar, itr) = (Stratum::AlwaysRespondent, Stratum::IfTreatedRespondent);
    let terms = [
        treated_resp.mean() * resp_rate,
        -stratum_trend(0, ar).mean() * share(ar),
        -stratum_trend(0, itr).mean() * share(itr),
        effect(Stratum::NeverRespondent).mean() * share(Stratum::NeverRespondent),
        effect(Stratum::IfControlRespondent).mean() * share(Stratum::IfControlRespondent),
    ];
    let sum: f64 = terms.iter().sum();
    let att = effect_all(records);

    let mut var = 0.0;
    for s in [ar, itr] {
        let p = share(s);
        var += p * p * (stratum_trend(0, s).var_of_mean() + stratum_trend(1, s).var_of_mean());
    }
    let mc_se = var.sqrt();
    let tol = if mc_se > 0.0 { 3.0 * mc_se } else { 1e-9 };
    DecompositionReport {
        treated_respondents: terms[0],
        control_always_respondents: terms[1],
        control_if_treated_respondents: terms[2],
        treated_never_respondents: terms[3],
        treated_if_control_respondents: terms[4],
        sum,
        att,
        mc_se,
        within_tolerance: (sum - att).abs() < tol,
    }
}

fn effect_all(records: &[OracleRecord]) -> f64 {
    collect(records, |o| o.d() == 1, OracleRecord::effect).mean()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendMixtureReport {
    /// E[Y2(0) - Y1 | D = d], computed directly.
    pub direct: [f64; 2],
    /// The same through the stratum mixture.
    pub mixture: [f64; 2],
    /// Largest |direct - mixture|; zero up to rounding.
    pub mixture_error: f64,
    /// Treated minus control untreated trend.
    pub gap: f64,
    pub gap_se: f64,
    /// |gap| below three standard errors.
    pub parallel: bool,
}

/// Untreated trends by arm, directly and as a stratum mixture, and whether
/// they are parallel across arms.
pub fn check_remark_pt(records: &[OracleRecord]) -> TrendMixtureReport {
    let mut direct = [0.0; 2];
    let mut mixture = [0.0; 2];
    let mut var = [0.0; 2];
    for d in 0..2 {
        let all = collect(records, |o| o.d() == d, OracleRecord::untreated_change);
        direct[d] = all.mean();
        var[d] = all.var_of_mean();
        let n = all.0.len() as f64;
        for s in Stratum::ALL {
            let g = collect(records, |o| o.d() == d && o.s == s, OracleRecord::untreated_change);
            mixture[d] += g.mean() * g.0.len() as f64 / n;
        }
    }
    let gap = direct[1] - direct[0];
    let gap_se = (var[0] + var[1]).sqrt();
    TrendMixtureReport {
        direct,
        mixture,
        mixture_error: (direct[0] - mixture[0]).abs().max((direct[1] - mixture[1]).abs()),
        gap,
        gap_se,
        parallel: gap.abs() < 3.0 * gap_se.max(1e-12),
    }
}
