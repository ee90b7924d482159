use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::Stratum;
use crate::error::{Error, Result};
use crate::estimators::did_complete_case;
use crate::panel::{PanelDataset, PanelRecord};

use super::spec::{DgpSpec, R1Model};

/// A simulated unit: the observable record plus the latent response type
/// and both potential post-period outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub record: PanelRecord,
    pub s: Stratum,
    /// Covariate cell, if the spec has a covariate layer.
    pub cell: Option<usize>,
    /// Baseline outcome before masking by baseline response.
    pub y1_latent: f64,
    pub y2_0: f64,
    pub y2_1: f64,
}

impl OracleRecord {
    pub fn d(&self) -> usize {
        self.record.arm()
    }

    pub fn r2_1(&self) -> bool {
        self.s.responds(1)
    }

    pub fn r2_0(&self) -> bool {
        self.s.responds(0)
    }

    /// Potential post-period outcome under the realized arm.
    pub fn y2_realized(&self) -> f64 {
        if self.d() == 1 {
            self.y2_1
        } else {
            self.y2_0
        }
    }

    /// Y2(0) - Y1 without masking.
    pub fn untreated_change(&self) -> f64 {
        self.y2_0 - self.y1_latent
    }

    pub fn effect(&self) -> f64 {
        self.y2_1 - self.y2_0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTruth {
    /// Sample ATT over the generated treated units.
    pub att: f64,
    /// Sample ATT over treated always-respondents (`None` if there are none).
    pub att_ar: Option<f64>,
    /// Exact Pr(S = s | D = d) from the spec, indexed `[d][s]`.
    pub pi_table: [[f64; 4]; 2],
    /// Sample complete-case DID minus `att` (`None` when an arm has no
    /// complete case).
    pub cc_bias: Option<f64>,
    /// Realized stratum counts per arm, indexed `[d][s]`.
    pub strata_counts: [[usize; 4]; 2],
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: PanelDataset,
    pub oracle: Vec<OracleRecord>,
    pub truth: OracleTruth,
}

fn categorical<R: Rng>(rng: &mut R, probs: impl Iterator<Item = f64>, last: usize) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

fn last_positive(p: &[f64]) -> usize {
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

fn draw_unit(spec: &DgpSpec, shares: &[[f64; 2]], noise: &Normal<f64>, i: usize) -> OracleRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64);

    let cell = spec.covariates.as_ref().map(|cells| {
        let w: Vec<f64> = cells.iter().map(|c| c.weight).collect();
        categorical(&mut rng, w.iter().copied(), last_positive(&w))
    });
    let joint = match (cell, &spec.covariates) {
        (Some(c), Some(cells)) => &cells[c].joint_sd,
        _ => &spec.joint_sd,
    };
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    let k = categorical(&mut rng, flat.iter().copied(), last_positive(&flat));
    let (s, d) = (Stratum::ALL[k / 2], k % 2);

    let aux: Vec<bool> = spec
        .aux_models
        .iter()
        .map(|a| rng.random::<f64>() < a.p_one[s.index()][d])
        .collect();
    let r1 = match spec.r1_model {
        R1Model::AlwaysObserved => true,
        R1Model::Mcar { rate } => rng.random::<f64>() >= rate,
    };
    let e1 = noise.sample(&mut rng);
    let e2 = noise.sample(&mut rng);

    let y1 = spec.baseline[s.index()][d] + e1;
    let y2_0 = y1 + spec.unit_trend(s, d, &aux, cell, shares) + e2;
    let y2_1 = y2_0 + spec.unit_effect(s, cell);
    let y2 = if d == 1 { y2_1 } else { y2_0 };

    let record = PanelRecord {
        unit_id: i.to_string().into(),
        d: d == 1,
        y1: r1.then_some(y1),
        y2: s.responds(d).then_some(y2),
        aux,
        x: cell.map(|c| vec![c as u32]).unwrap_or_default(),
    };
    OracleRecord {
        record,
        s,
        cell,
        y1_latent: y1,
        y2_0,
        y2_1,
    }
}

/// Draw the oracle records only. Deterministic in `(spec.seed, unit index)`
/// regardless of thread count.
pub fn simulate_oracle(spec: &DgpSpec) -> Result<Vec<OracleRecord>> {
    spec.validate()?;
    let shares: Vec<[f64; 2]> = (0..spec.aux_models.len()).map(|k| spec.aux_share(k)).collect();
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..spec.n)
        .into_par_iter()
        .map(|i| draw_unit(spec, &shares, &noise, i))
        .collect())
}

/// Generate a panel, its latent records and the implied truth.
pub fn simulate_panel(spec: &DgpSpec) -> Result<Simulation> {
    let oracle = simulate_oracle(spec)?;
    let data = PanelDataset::new(oracle.iter().map(|o| o.record.clone()).collect(), None)?;
    let truth = oracle_truth(spec, &oracle, &data);
    Ok(Simulation { data, oracle, truth })
}

fn mean_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn oracle_truth(spec: &DgpSpec, oracle: &[OracleRecord], data: &PanelDataset) -> OracleTruth {
    let treated = || oracle.iter().filter(|o| o.d() == 1);
    let att = mean_of(treated().map(OracleRecord::effect)).unwrap_or(f64::NAN);
    let att_ar = mean_of(
        treated()
            .filter(|o| o.s == Stratum::AlwaysRespondent)
            .map(OracleRecord::effect),
    );
    let mut counts = [[0usize; 4]; 2];
    for o in oracle {
        counts[o.d()][o.s.index()] += 1;
    }
    OracleTruth {
        att,
        att_ar,
        pi_table: spec.strata_table(),
        cc_bias: did_complete_case(data).ok().map(|e| e.point - att),
        strata_counts: counts,
    }
}

/// The same units with nothing missing.
pub fn fully_observed(oracle: &[OracleRecord]) -> Result<PanelDataset> {
    let records = oracle
        .iter()
        .map(|o| PanelRecord {
            y1: Some(o.y1_latent),
            y2: Some(o.y2_realized()),
            ..o.record.clone()
        })
        .collect();
    PanelDataset::new(records, None)
}
