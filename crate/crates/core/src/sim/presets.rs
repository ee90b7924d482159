//! Named DGP presets. Each carries the assumption tags it claims, and
//! [`assumption_holds`] checks every tag analytically on the population.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bounds::Stratum;
use crate::error::{Error, Result};

use super::population::Population;
use super::spec::{AuxModel, CovariateCell, DgpSpec, R1Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Missingness depends on an instrument but not on outcome trends.
    ZeroBias,
    /// Respondents and nonrespondents differ in trend by the same amount in
    /// both instrument groups; complete cases are biased.
    HomogeneousBias,
    /// The first instrument alone is misleading, the pair is not.
    MultiIv,
    /// Response type varies with a covariate; within a covariate cell it is
    /// unrelated to trends and effects.
    PrincipalIgnorability,
    /// Response types differ across arms, heterogeneous effects.
    MnarBaseline,
    /// No if-control-respondents; parallel response trends.
    Monotone,
    /// All four response types; parallel response trends and equal
    /// response effects across arms.
    NoMonotone,
}

/// Planted complete-case bias of the principal-ignorability preset.
pub const PI_PLANTED_BIAS: f64 = 0.2;
/// Planted bias of the single-instrument estimator in the multi-iv preset.
pub const MULTI_IV_PLANTED_GAP: f64 = 0.3;

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::ZeroBias,
        Preset::HomogeneousBias,
        Preset::MultiIv,
        Preset::PrincipalIgnorability,
        Preset::MnarBaseline,
        Preset::Monotone,
        Preset::NoMonotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ZeroBias => "zero-bias",
            Preset::HomogeneousBias => "homogeneous-bias",
            Preset::MultiIv => "multi-iv",
            Preset::PrincipalIgnorability => "pi",
            Preset::MnarBaseline => "mnar-baseline",
            Preset::Monotone => "monotone",
            Preset::NoMonotone => "no-monotone",
        }
    }

    pub fn assumptions(self) -> &'static [&'static str] {
        match self {
            Preset::ZeroBias => &[
                "principal-strata-parallel-trends",
                "canonical-parallel-trends",
                "trend-independent-of-response",
                "instrument-relevance",
                "bias-homogeneity",
                "monotone-response",
            ],
            Preset::HomogeneousBias => &[
                "canonical-parallel-trends",
                "instrument-relevance",
                "bias-homogeneity",
                "monotone-response",
            ],
            Preset::MultiIv => &[
                "canonical-parallel-trends",
                "instrument-relevance",
                "parallel-difference-in-trends",
                "monotone-response",
            ],
            Preset::PrincipalIgnorability => &[
                "canonical-parallel-trends",
                "principal-ignorability",
                "monotone-response",
                "parallel-response-trends-within-cells",
            ],
            Preset::MnarBaseline => &["principal-strata-parallel-trends"],
            Preset::Monotone => &[
                "principal-strata-parallel-trends",
                "monotone-response",
                "parallel-response-trends",
            ],
            Preset::NoMonotone => &[
                "principal-strata-parallel-trends",
                "parallel-response-trends",
                "equal-response-effect-across-arms",
            ],
        }
    }

    pub fn spec(self, n: usize, seed: u64) -> DgpSpec {
        let mut s = match self {
            Preset::ZeroBias => zero_bias(),
            Preset::HomogeneousBias => homogeneous_bias(),
            Preset::MultiIv => multi_iv(),
            Preset::PrincipalIgnorability => principal_ignorability(),
            Preset::MnarBaseline => mnar_baseline(),
            Preset::Monotone => monotone(),
            Preset::NoMonotone => no_monotone(),
        };
        s.n = n;
        s.seed = seed;
        s
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::InvalidArgument(format!("unknown preset {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn two_strata(ar: f64) -> [[f64; 2]; 4] {
    DgpSpec::joint_from_shares(0.5, [ar, 0.0, 0.0, 1.0 - ar], [ar, 0.0, 0.0, 1.0 - ar])
}

fn default_aux() -> AuxModel {
    AuxModel::by_stratum([0.7, 0.5, 0.5, 0.3])
}

fn zero_bias() -> DgpSpec {
    let mut s = DgpSpec::with_strata(two_strata(0.7));
    s.trend = [0.5; 4];
    s.effect = [1.0; 4];
    s.baseline = [[1.0, 1.2], [0.5, 0.5], [0.5, 0.5], [0.0, 0.3]];
    s.noise_sd = 0.5;
    s.aux_models = vec![AuxModel::by_stratum([0.8, 0.5, 0.5, 0.4])];
    s
}

/// Root of an affine function of one variable.
fn affine_root(f: impl Fn(f64) -> f64) -> f64 {
    let (f0, f1) = (f(0.0), f(1.0));
    -f0 / (f1 - f0)
}

fn population(s: &DgpSpec) -> Population {
    Population::new(s).expect("preset spec is valid")
}

fn homogeneous_bias() -> DgpSpec {
    // Respondent/nonrespondent effect gap 1; ATT stays 1.
    let mut s = zero_bias();
    s.effect = [1.3, 0.0, 0.0, 0.3];
    let with_shift = |t: f64| {
        let mut c = s.clone();
        c.aux_models[0].trend_shift = [0.0, t];
        c
    };
    // Instrument-linked trend shift in the treated arm chosen so that the
    // instrument-corrected arm mean equals the true arm mean.
    let t = affine_root(|t| {
        let p = population(&with_shift(t));
        p.iv_arm(1, 0) - p.arm_change(1)
    });
    with_shift(t)
}

fn multi_iv() -> DgpSpec {
    let mut s = zero_bias();
    s.effect = [1.15, 0.0, 0.0, 0.65];
    s.aux_models = vec![
        AuxModel::by_stratum([0.8, 0.5, 0.5, 0.4]),
        AuxModel::by_stratum([0.6, 0.5, 0.5, 0.45]),
    ];
    let with = |a: f64, b: f64| {
        let mut c = s.clone();
        c.aux_models[0].trend_shift = [0.0, a];
        c.aux_models[1].trend_shift = [0.0, b];
        c
    };
    // Two affine conditions on the treated-arm shifts: the pair recovers the
    // arm mean exactly, the first instrument alone misses it by the gap.
    let resid = |a: f64, b: f64| {
        let p = population(&with(a, b));
        let truth = p.arm_change(1);
        [p.iv_multi_arm(1, 0, 1) - truth, p.iv_arm(1, 0) - truth - MULTI_IV_PLANTED_GAP]
    };
    let r0 = resid(0.0, 0.0);
    let ra = resid(1.0, 0.0);
    let rb = resid(0.0, 1.0);
    let j = [[ra[0] - r0[0], rb[0] - r0[0]], [ra[1] - r0[1], rb[1] - r0[1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let a = (-r0[0] * j[1][1] + r0[1] * j[0][1]) / det;
    let b = (-r0[1] * j[0][0] + r0[0] * j[1][0]) / det;
    with(a, b)
}

fn principal_ignorability() -> DgpSpec {
    let cell = |shares: [f64; 4], effect_shift| CovariateCell {
        weight: 0.5,
        joint_sd: DgpSpec::joint_from_shares(0.5, shares, shares),
        trend_shift: 0.0,
        effect_shift,
    };
    let cells = vec![cell([0.6, 0.2, 0.0, 0.2], 0.4), cell([0.9, 0.05, 0.0, 0.05], 1.6)];
    let mut joint = [[0.0; 2]; 4];
    for c in &cells {
        for (j, cj) in joint.iter_mut().zip(c.joint_sd) {
            j[0] += c.weight * cj[0];
            j[1] += c.weight * cj[1];
        }
    }
    let mut s = DgpSpec::with_strata(joint);
    s.trend = [0.5; 4];
    s.baseline = [[1.0, 1.0], [0.5, 0.5], [0.0, 0.0], [-0.5, -0.5]];
    s.noise_sd = 0.5;
    s.aux_models = vec![default_aux()];
    s.covariates = Some(cells);
    let with_trend = |t: f64| {
        let mut c = s.clone();
        c.covariates.as_mut().unwrap()[1].trend_shift = t;
        c
    };
    // Trend difference between the two cells sized so the complete-case
    // DID is off by the planted bias.
    let t = affine_root(|t| {
        let p = population(&with_trend(t));
        p.complete_case_did() - p.att() - PI_PLANTED_BIAS
    });
    with_trend(t)
}

fn mnar_baseline() -> DgpSpec {
    let mut s = DgpSpec::with_strata(DgpSpec::joint_from_shares(
        0.5,
        [0.7, 0.05, 0.15, 0.1],
        [0.55, 0.2, 0.1, 0.15],
    ));
    s.trend = [0.5, 1.5, -0.5, 0.0];
    s.effect = [1.0, 2.0, 0.5, -0.5];
    s.baseline = [[1.0, 1.3], [0.0, 0.2], [2.0, 2.0], [-1.0, -0.8]];
    s.aux_models = vec![default_aux()];
    s
}

fn monotone() -> DgpSpec {
    let mut s = DgpSpec::with_strata(DgpSpec::joint_from_shares(0.5, [0.7, 0.1, 0.0, 0.2], [0.7, 0.2, 0.0, 0.1]));
    s.trend = [0.5, 1.0, 0.0, 0.0];
    s.effect = [1.0, 2.0, 0.0, 0.0];
    s.baseline = [[1.0, 1.0], [0.0, 0.5], [0.0, 0.0], [-1.0, -1.0]];
    s.r1_model = R1Model::Mcar { rate: 0.1 };
    s.aux_models = vec![default_aux()];
    s
}

fn no_monotone() -> DgpSpec {
    let mut s = DgpSpec::with_strata(DgpSpec::joint_from_shares(
        0.5,
        [0.65, 0.15, 0.05, 0.15],
        [0.6, 0.2, 0.1, 0.1],
    ));
    s.trend = [0.5, 1.0, 0.0, -0.5];
    s.effect = [1.0, 2.0, 0.5, 0.0];
    s.baseline = [[1.0, 1.0], [0.0, 0.5], [0.5, 0.5], [-1.0, -1.0]];
    s.aux_models = vec![default_aux()];
    s
}

const TOL: f64 = 1e-10;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}

/// Analytic check of one assumption tag on a spec's population.
pub fn assumption_holds(spec: &DgpSpec, tag: &str) -> Result<bool> {
    let p = Population::new(spec)?;
    let arms_missing = |d: usize| p.prob(|c| c.d == d && !c.responds()) > 0.0;
    Ok(match tag {
        "canonical-parallel-trends" => close(p.untreated_trend(1), p.untreated_trend(0)),
        "principal-strata-parallel-trends" => Stratum::ALL.iter().all(|&s| {
            match (
                p.mean(|c| c.d == 1 && c.s == s, |c| c.trend),
                p.mean(|c| c.d == 0 && c.s == s, |c| c.trend),
            ) {
                (Some(a), Some(b)) => close(a, b),
                _ => true,
            }
        }),
        "trend-independent-of-response" => (0..2).all(|d| {
            match (p.respondent_change(d, true), p.respondent_change(d, false)) {
                (Some(a), Some(b)) => close(a, b),
                _ => true,
            }
        }),
        "monotone-response" => p.prob(|c| c.s == Stratum::IfControlRespondent) == 0.0,
        "parallel-response-trends" => {
            // Baseline response is MCAR with the same rate in both arms.
            close(p.potential_response(1, 0), p.potential_response(0, 0))
        }
        "equal-response-effect-across-arms" => close(
            p.potential_response(1, 1) - p.potential_response(1, 0),
            p.potential_response(0, 1) - p.potential_response(0, 0),
        ),
        "instrument-relevance" => (0..p.aux_arity)
            .all(|k| (0..2).all(|d| !arms_missing(d) || p.instrument_strength(d, k) >= 0.1)),
        "bias-homogeneity" => (0..2).all(|d| {
            !arms_missing(d)
                || match (
                    p.response_gap_given_aux(d, 0, false),
                    p.response_gap_given_aux(d, 0, true),
                ) {
                    (Some(a), Some(b)) => close(a, b) && close(p.iv_arm(d, 0), p.arm_change(d)),
                    _ => false,
                }
        }),
        "parallel-difference-in-trends" => {
            p.aux_arity >= 2 && (0..2).all(|d| close(p.iv_multi_arm(d, 0, 1), p.arm_change(d)))
        }
        "principal-ignorability" => p.covariate_cells().into_iter().all(|x| {
            (0..2).all(|d| {
                let group: Vec<_> = p.cells.iter().filter(|c| c.cell == x && c.d == d).collect();
                group
                    .iter()
                    .all(|c| close(c.trend, group[0].trend) && close(c.effect, group[0].effect))
            })
        }),
        "parallel-response-trends-within-cells" => p.covariate_cells().into_iter().all(|x| {
            let untreated_response = |d: usize| {
                p.prob(|c| c.cell == x && c.d == d && c.s.responds(0)) / p.prob(|c| c.cell == x && c.d == d)
            };
            close(untreated_response(1), untreated_response(0))
        }),
        other => return Err(Error::InvalidArgument(format!("unknown assumption tag {other:?}"))),
    })
}
