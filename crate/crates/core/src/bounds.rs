//! Response-type (principal stratum) proportions and trimming bounds for the
//! effect among always-respondents.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::complete_case_deltas;
use crate::panel::PanelDataset;
use crate::rates::{compute_rates, RateTable};
use crate::stats::{clip_logged, mean, ClipEvent};

/// Latent post-period response type `(R2(1), R2(0))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stratum {
    /// (1, 1)
    AlwaysRespondent,
    /// (1, 0)
    IfTreatedRespondent,
    /// (0, 1)
    IfControlRespondent,
    /// (0, 0)
    NeverRespondent,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::AlwaysRespondent,
        Stratum::IfTreatedRespondent,
        Stratum::IfControlRespondent,
        Stratum::NeverRespondent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Post-period response under arm `d`.
    pub fn responds(self, d: usize) -> bool {
        match self {
            Stratum::AlwaysRespondent => true,
            Stratum::NeverRespondent => false,
            Stratum::IfTreatedRespondent => d == 1,
            Stratum::IfControlRespondent => d == 0,
        }
    }

    pub fn from_responses(r2_treated: bool, r2_control: bool) -> Stratum {
        match (r2_treated, r2_control) {
            (true, true) => Stratum::AlwaysRespondent,
            (true, false) => Stratum::IfTreatedRespondent,
            (false, true) => Stratum::IfControlRespondent,
            (false, false) => Stratum::NeverRespondent,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stratum::AlwaysRespondent => "11",
            Stratum::IfTreatedRespondent => "10",
            Stratum::IfControlRespondent => "01",
            Stratum::NeverRespondent => "00",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    fn clamp_unit(self) -> Self {
        Interval {
            lo: self.lo.clamp(0.0, 1.0),
            hi: self.hi.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Monotone,
    NoMonotone,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monotone" => Ok(Mode::Monotone),
            "no-monotone" => Ok(Mode::NoMonotone),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected monotone or no-monotone)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Monotone => "monotone",
            Mode::NoMonotone => "no-monotone",
        })
    }
}

/// Stratum proportions within one arm, Pr(S = s | D = d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmProportions {
    pub always_respondent: Interval,
    pub if_treated_respondent: Interval,
    pub if_control_respondent: Interval,
    pub never_respondent: Interval,
}

impl ArmProportions {
    pub fn get(&self, s: Stratum) -> Interval {
        match s {
            Stratum::AlwaysRespondent => self.always_respondent,
            Stratum::IfTreatedRespondent => self.if_treated_respondent,
            Stratum::IfControlRespondent => self.if_control_respondent,
            Stratum::NeverRespondent => self.never_respondent,
        }
    }

    /// True if some choice of one value per interval sums to one.
    pub fn feasible(&self, tol: f64) -> bool {
        let lo: f64 = Stratum::ALL.iter().map(|&s| self.get(s).lo).sum();
        let hi: f64 = Stratum::ALL.iter().map(|&s| self.get(s).hi).sum();
        lo <= 1.0 + tol && hi >= 1.0 - tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrataProportions {
    pub mode: Mode,
    /// Indexed by arm, `[control, treated]`.
    pub arms: [ArmProportions; 2],
    /// Pr(R2(0) = 1 | D = 1) and, without monotonicity, Pr(R2(1) = 1 | D = 0).
    pub counterfactual_response: CounterfactualResponse,
    pub clip_events: Vec<ClipEvent>,
    /// Set when an identified interval came out empty.
    pub refuted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterfactualResponse {
    pub untreated_response_among_treated: f64,
    pub treated_response_among_control: Option<f64>,
}

impl StrataProportions {
    pub fn get(&self, d: usize, s: Stratum) -> Interval {
        self.arms[d].get(s)
    }

    /// Rates contradicted the assumed model and were clipped.
    pub fn inconsistent(&self) -> bool {
        !self.clip_events.is_empty() || self.refuted
    }
}

struct Observed {
    r1: [f64; 2],
    r2: [f64; 2],
}

fn observed(rates: &RateTable) -> Result<Observed> {
    let get = |v: Option<f64>, name| v.ok_or(Error::AbsentRate(name));
    Ok(Observed {
        r1: [
            get(rates.r1(0), "Pr(R1 = 1 | D = 0)")?,
            get(rates.r1(1), "Pr(R1 = 1 | D = 1)")?,
        ],
        r2: [
            get(rates.r2(0), "Pr(R2 = 1 | D = 0)")?,
            get(rates.r2(1), "Pr(R2 = 1 | D = 1)")?,
        ],
    })
}

/// Proportions under monotone response (treatment never prevents a
/// response) and parallel trends in response rates. Out-of-range values are
/// clipped and logged rather than rejected.
pub fn strata_proportions_monotone(rates: &RateTable) -> Result<StrataProportions> {
    let o = observed(rates)?;
    let mut ev = Vec::new();
    let q1_raw = o.r2[0] - o.r1[0] + o.r1[1];
    let always1 = clip_logged("pi_11(1)", q1_raw, 0.0, 1.0, &mut ev);
    let if_treated1 = clip_logged(
        "pi_10(1)",
        (o.r2[1] - o.r2[0]) - (o.r1[1] - o.r1[0]),
        0.0,
        1.0,
        &mut ev,
    );
    let never1 = clip_logged("pi_00(1)", 1.0 - always1 - if_treated1, 0.0, 1.0, &mut ev);
    let always0 = clip_logged("pi_11(0)", o.r2[0], 0.0, 1.0, &mut ev);
    let rest0 = Interval::new(0.0, 1.0 - always0);
    Ok(StrataProportions {
        mode: Mode::Monotone,
        arms: [
            ArmProportions {
                always_respondent: Interval::point(always0),
                if_treated_respondent: rest0,
                if_control_respondent: Interval::point(0.0),
                never_respondent: rest0,
            },
            ArmProportions {
                always_respondent: Interval::point(always1),
                if_treated_respondent: Interval::point(if_treated1),
                if_control_respondent: Interval::point(0.0),
                never_respondent: Interval::point(never1),
            },
        ],
        counterfactual_response: CounterfactualResponse {
            untreated_response_among_treated: q1_raw.clamp(0.0, 1.0),
            treated_response_among_control: None,
        },
        clip_events: ev,
        refuted: false,
    })
}

/// Proportions without monotonicity: counterfactual response rates are
/// identified from parallel response trends and equal treatment effects on
/// response across arms; the always-respondent share is then bounded by the
/// Frechet inequalities and the other cells follow linearly.
pub fn strata_proportions_bounds(rates: &RateTable) -> Result<StrataProportions> {
    let o = observed(rates)?;
    let mut ev = Vec::new();
    // Pr(R2(0) = 1 | D = 1), Pr(R2(1) = 1 | D = 0)
    let q1 = clip_logged("Pr(R2(0)=1|D=1)", o.r2[0] - o.r1[0] + o.r1[1], 0.0, 1.0, &mut ev);
    let q0 = clip_logged("Pr(R2(1)=1|D=0)", o.r2[1] - o.r1[1] + o.r1[0], 0.0, 1.0, &mut ev);

    let a1 = Interval::new((q1 - (1.0 - o.r2[1])).max(0.0), o.r2[1].min(q1));
    let a0 = Interval::new((q0 - (1.0 - o.r2[0])).max(0.0), o.r2[0].min(q0));
    let refuted = a1.lo > a1.hi || a0.lo > a0.hi;

    // With t = pi_11(d): observed responders minus t, counterfactual
    // responders minus t, and the remainder.
    let minus = |c: f64, a: Interval| Interval::new(c - a.hi, c - a.lo).clamp_unit();
    let rem = |c: f64, a: Interval| Interval::new(c + a.lo, c + a.hi).clamp_unit();
    Ok(StrataProportions {
        mode: Mode::NoMonotone,
        arms: [
            ArmProportions {
                always_respondent: a0,
                if_treated_respondent: minus(q0, a0),
                if_control_respondent: minus(o.r2[0], a0),
                never_respondent: rem(1.0 - o.r2[0] - q0, a0),
            },
            ArmProportions {
                always_respondent: a1,
                if_treated_respondent: minus(o.r2[1], a1),
                if_control_respondent: minus(q1, a1),
                never_respondent: rem(1.0 - o.r2[1] - q1, a1),
            },
        ],
        counterfactual_response: CounterfactualResponse {
            untreated_response_among_treated: q1,
            treated_response_among_control: Some(q0),
        },
        clip_events: ev,
        refuted,
    })
}

pub fn strata_proportions(rates: &RateTable, mode: Mode) -> Result<StrataProportions> {
    match mode {
        Mode::Monotone => strata_proportions_monotone(rates),
        Mode::NoMonotone => strata_proportions_bounds(rates),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Bottom,
    Top,
}

/// Mean of the lowest (or highest) fraction `keep` of `values`. The
/// boundary observation enters with fractional weight, so the result is
/// continuous in `keep`. `keep = 1` is the plain mean.
pub fn trimmed_mean(values: &[f64], keep: f64, side: Side) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("trimmed mean of an empty sample".into()));
    }
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidArgument(format!("keep fraction {keep} not in (0, 1]")));
    }
    if keep == 1.0 {
        return Ok(mean(values));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if side == Side::Top {
        sorted.reverse();
    }
    let mass = keep * sorted.len() as f64;
    let whole = mass.floor() as usize;
    let mut sum: f64 = sorted[..whole].iter().sum();
    if whole < sorted.len() {
        sum += (mass - whole as f64) * sorted[whole];
    }
    Ok(sum / mass)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub estimand: &'static str,
    pub lb: f64,
    pub ub: f64,
    /// Fraction of each arm's respondents retained by trimming; `None` where
    /// the support fallback was used.
    pub trim_share: [Option<f64>; 2],
    /// Retained fraction at the upper end of the always-respondent interval
    /// (differs from `trim_share` only without monotonicity).
    pub trim_share_upper: [Option<f64>; 2],
    /// Per-arm bounds on the always-respondent mean outcome change.
    pub arm_bounds: [Interval; 2],
    pub assumptions_used: Vec<&'static str>,
    pub support_fallback: bool,
    pub proportions: StrataProportions,
    /// Clip events from the proportions plus any keep fraction above one.
    pub clip_events: Vec<ClipEvent>,
    pub inconsistent_rates: bool,
    pub n_used: usize,
}

impl BoundResult {
    pub fn interval(&self) -> Interval {
        Interval::new(self.lb, self.ub)
    }
}

const MONOTONE_ASSUMPTIONS: &[&str] = &[
    "principal-strata-parallel-trends",
    "monotone-response",
    "parallel-response-trends",
];
const NO_MONOTONE_ASSUMPTIONS: &[&str] = &[
    "principal-strata-parallel-trends",
    "parallel-response-trends",
    "equal-response-effect-across-arms",
];

/// Bounds on the ATT among always-respondents by trimming each arm's
/// complete-case outcome changes to the always-respondent share.
pub fn att_ar_bounds(data: &PanelDataset, mode: Mode) -> Result<BoundResult> {
    let deltas = complete_case_deltas(data);
    for (arm, v) in deltas.iter().enumerate() {
        if v.is_empty() {
            return Err(Error::NoCompleteCases { arm });
        }
    }
    let rates = compute_rates(data);
    let props = strata_proportions(&rates, mode)?;
    let mut ev = props.clip_events.clone();
    let support = data.support();

    let mut trim_share = [None; 2];
    let mut trim_share_upper = [None; 2];
    let mut arm_bounds = [Interval::point(0.0); 2];
    let mut fallback = false;
    for arm in 0..2 {
        let a = props.get(arm, Stratum::AlwaysRespondent);
        let r2 = rates.r2(arm).unwrap_or(0.0);
        // Under monotonicity every control respondent is an always-respondent.
        let (keep_raw, keep_hi) = if mode == Mode::Monotone && arm == 0 {
            (1.0, 1.0)
        } else {
            (a.lo / r2, a.hi / r2)
        };
        if keep_raw.is_nan() || keep_raw <= 0.0 {
            let s = support.ok_or(Error::TrimmingInfeasible { arm, keep: keep_raw })?;
            arm_bounds[arm] = Interval::new(-s.range(), s.range());
            fallback = true;
            continue;
        }
        let keep = clip_logged(&format!("keep fraction (d = {arm})"), keep_raw, 0.0, 1.0, &mut ev);
        trim_share[arm] = Some(keep);
        trim_share_upper[arm] = Some(if keep_hi.is_nan() { keep } else { keep_hi.clamp(keep, 1.0) });
        arm_bounds[arm] = Interval::new(
            trimmed_mean(&deltas[arm], keep, Side::Bottom)?,
            trimmed_mean(&deltas[arm], keep, Side::Top)?,
        );
    }
    let mut lb = arm_bounds[1].lo - arm_bounds[0].hi;
    let mut ub = arm_bounds[1].hi - arm_bounds[0].lo;
    if let Some(s) = support {
        // Sampling noise can put the whole interval outside the effect
        // support; clamping both ends keeps it ordered.
        let r = s.range();
        if lb > r || ub < -r {
            lb = clip_logged("lower bound", lb, -r, r, &mut ev);
            ub = clip_logged("upper bound", ub, -r, r, &mut ev);
        } else {
            lb = lb.max(-r);
            ub = ub.min(r);
        }
    }
    let assumptions = match mode {
        Mode::Monotone => MONOTONE_ASSUMPTIONS,
        Mode::NoMonotone => NO_MONOTONE_ASSUMPTIONS,
    };
    Ok(BoundResult {
        estimand: "ATT-AR",
        lb,
        ub,
        trim_share,
        trim_share_upper,
        arm_bounds,
        assumptions_used: assumptions.to_vec(),
        support_fallback: fallback,
        inconsistent_rates: !ev.is_empty() || props.refuted,
        proportions: props,
        clip_events: ev,
        n_used: deltas[0].len() + deltas[1].len(),
    })
}
