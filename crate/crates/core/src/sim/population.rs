//! Exact population moments of a spec, by enumerating every latent cell.
//! Used to build presets with prescribed properties and to check them
//! analytically; it shares no code with the sample estimators.

use crate::bounds::Stratum;
use crate::error::Result;

use super::spec::DgpSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCell {
    pub cell: Option<usize>,
    pub s: Stratum,
    pub d: usize,
    pub aux: Vec<bool>,
    pub prob: f64,
    /// E[Y2(0) - Y1] in the cell.
    pub trend: f64,
    pub effect: f64,
}

impl PopulationCell {
    pub fn responds(&self) -> bool {
        self.s.responds(self.d)
    }

    /// Mean observable outcome change (if the outcome were observed).
    pub fn change(&self) -> f64 {
        self.trend + if self.d == 1 { self.effect } else { 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    pub cells: Vec<PopulationCell>,
    pub aux_arity: usize,
}

impl Population {
    pub fn new(spec: &DgpSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.aux_models.len();
        let shares: Vec<[f64; 2]> = (0..k).map(|j| spec.aux_share(j)).collect();
        let layers: Vec<(Option<usize>, f64, [[f64; 2]; 4])> = match &spec.covariates {
            Some(cs) => cs
                .iter()
                .enumerate()
                .map(|(i, c)| (Some(i), c.weight, c.joint_sd))
                .collect(),
            None => vec![(None, 1.0, spec.joint_sd)],
        };
        let mut cells = Vec::new();
        for (cell, weight, joint) in layers {
            for s in Stratum::ALL {
                for d in 0..2 {
                    let base = weight * joint[s.index()][d];
                    if base == 0.0 {
                        continue;
                    }
                    for bits in 0..(1usize << k) {
                        let aux: Vec<bool> = (0..k).map(|j| bits >> j & 1 == 1).collect();
                        let mut prob = base;
                        for (j, a) in spec.aux_models.iter().enumerate() {
                            let p = a.p_one[s.index()][d];
                            prob *= if aux[j] { p } else { 1.0 - p };
                        }
                        if prob == 0.0 {
                            continue;
                        }
                        cells.push(PopulationCell {
                            cell,
                            s,
                            d,
                            trend: spec.unit_trend(s, d, &aux, cell, &shares),
                            effect: spec.unit_effect(s, cell),
                            aux,
                            prob,
                        });
                    }
                }
            }
        }
        Ok(Population { cells, aux_arity: k })
    }

    pub fn prob<F: Fn(&PopulationCell) -> bool>(&self, f: F) -> f64 {
        self.cells.iter().filter(|c| f(c)).map(|c| c.prob).sum()
    }

    /// Conditional mean of `g` given the event `f`.
    pub fn mean<F, G>(&self, f: F, g: G) -> Option<f64>
    where
        F: Fn(&PopulationCell) -> bool,
        G: Fn(&PopulationCell) -> f64,
    {
        let (mut m, mut p) = (0.0, 0.0);
        for c in self.cells.iter().filter(|c| f(c)) {
            m += c.prob * g(c);
            p += c.prob;
        }
        (p > 0.0).then(|| m / p)
    }

    pub fn att(&self) -> f64 {
        self.mean(|c| c.d == 1, |c| c.effect).unwrap()
    }

    pub fn att_ar(&self) -> Option<f64> {
        self.mean(|c| c.d == 1 && c.s == Stratum::AlwaysRespondent, |c| c.effect)
    }

    /// E[Y2 - Y1 | D = d].
    pub fn arm_change(&self, d: usize) -> f64 {
        self.mean(|c| c.d == d, PopulationCell::change).unwrap()
    }

    /// E[Y2(0) - Y1 | D = d].
    pub fn untreated_trend(&self, d: usize) -> f64 {
        self.mean(|c| c.d == d, |c| c.trend).unwrap()
    }

    /// E[Y2 - Y1 | D = d, R2 = r].
    pub fn respondent_change(&self, d: usize, r: bool) -> Option<f64> {
        self.mean(|c| c.d == d && c.responds() == r, PopulationCell::change)
    }

    pub fn complete_case_did(&self) -> f64 {
        self.respondent_change(1, true).unwrap() - self.respondent_change(0, true).unwrap()
    }

    pub fn naive_did(&self) -> f64 {
        self.arm_change(1) - self.arm_change(0)
    }

    /// Pr(S = s | D = d), indexed `[d][s]`.
    pub fn strata_table(&self) -> [[f64; 4]; 2] {
        let mut t = [[0.0; 4]; 2];
        for d in 0..2 {
            let arm = self.prob(|c| c.d == d);
            for s in Stratum::ALL {
                t[d][s.index()] = self.prob(|c| c.d == d && c.s == s) / arm;
            }
        }
        t
    }

    /// Respondent-minus-nonrespondent mean change within `aux_k = v`.
    pub fn response_gap_given_aux(&self, d: usize, k: usize, v: bool) -> Option<f64> {
        let m = |r| self.mean(|c| c.d == d && c.aux[k] == v && c.responds() == r, PopulationCell::change);
        Some(m(true)? - m(false)?)
    }

    fn missing_rate(&self, d: usize, k: usize, v: bool) -> f64 {
        self.prob(|c| c.d == d && c.aux[k] == v && !c.responds()) / self.prob(|c| c.d == d && c.aux[k] == v)
    }

    fn trend_gap(&self, d: usize, k: usize) -> f64 {
        let m = |v| {
            self.mean(|c| c.d == d && c.aux[k] == v && c.responds(), PopulationCell::change)
                .unwrap()
        };
        m(true) - m(false)
    }

    fn missing_gap(&self, d: usize, k: usize) -> f64 {
        self.missing_rate(d, k, false) - self.missing_rate(d, k, true)
    }

    fn corrected_arm(&self, d: usize, gap: impl Fn(usize) -> f64) -> f64 {
        let cc = self.respondent_change(d, true).unwrap();
        let share = self.prob(|c| c.d == d && !c.responds()) / self.prob(|c| c.d == d);
        if share == 0.0 {
            cc
        } else {
            cc + gap(d) * share
        }
    }

    /// Population value of the single-instrument corrected arm mean change.
    pub fn iv_arm(&self, d: usize, k: usize) -> f64 {
        self.corrected_arm(d, |d| self.trend_gap(d, k) / self.missing_gap(d, k))
    }

    pub fn iv_multi_arm(&self, d: usize, k1: usize, k2: usize) -> f64 {
        self.corrected_arm(d, |d| {
            (self.trend_gap(d, k1) - self.trend_gap(d, k2)) / (self.missing_gap(d, k1) - self.missing_gap(d, k2))
        })
    }

    pub fn iv(&self, k: usize) -> f64 {
        self.iv_arm(1, k) - self.iv_arm(0, k)
    }

    pub fn iv_multi(&self, k1: usize, k2: usize) -> f64 {
        self.iv_multi_arm(1, k1, k2) - self.iv_multi_arm(0, k1, k2)
    }

    /// |Pr(R2 = 0 | aux_k = 0) - Pr(R2 = 0 | aux_k = 1)| within arm `d`.
    pub fn instrument_strength(&self, d: usize, k: usize) -> f64 {
        self.missing_gap(d, k).abs()
    }

    /// Pr(R2(0) = 1 | D = d) and Pr(R2(1) = 1 | D = d).
    pub fn potential_response(&self, d: usize, arm: usize) -> f64 {
        self.prob(|c| c.d == d && c.s.responds(arm)) / self.prob(|c| c.d == d)
    }

    pub fn covariate_cells(&self) -> Vec<Option<usize>> {
        let mut v: Vec<Option<usize>> = self.cells.iter().map(|c| c.cell).collect();
        v.sort();
        v.dedup();
        v
    }
}
