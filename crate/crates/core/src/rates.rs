//! Observable response rates by treatment arm.

use serde::{Serialize, Serializer};

use crate::panel::PanelDataset;

/// An empirical proportion kept as exact counts. A zero denominator marks
/// the rate as absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Self {
        debug_assert!(num <= den);
        Rate { num, den }
    }

    pub fn value(&self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }

    /// Proportion of the complement event.
    pub fn complement(&self) -> Rate {
        Rate::new(self.den - self.num, self.den)
    }

    fn bump(&mut self, hit: bool) {
        self.den += 1;
        self.num += hit as u64;
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.value().serialize(s)
    }
}

/// Response rates that feed the stratum-proportion formulas. All arrays are
/// indexed by arm, `[control, treated]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    /// Pr(R1 = 1 | D = d)
    pub p_r1: [Rate; 2],
    /// Pr(R2 = 1 | D = d)
    pub p_r2: [Rate; 2],
    /// Pr(R2 = 1 | D = d, R1 = 1)
    pub p_r2_given_r1: [Rate; 2],
    pub n: [u64; 2],
    /// Pr(R2 = 1 | D = d, aux_k = v, R1 = 1), indexed `[d][k][v]`.
    pub p_r2_given_aux: [Vec<[Rate; 2]>; 2],
}

impl RateTable {
    /// Rates supplied directly as proportions (e.g. published summary
    /// tables), encoded over a fixed notional denominator.
    pub fn from_proportions(p_r1: [f64; 2], p_r2: [f64; 2]) -> Self {
        const DEN: u64 = 1_000_000_000_000;
        let enc = |p: f64| Rate::new((p.clamp(0.0, 1.0) * DEN as f64).round() as u64, DEN);
        RateTable {
            p_r1: p_r1.map(enc),
            p_r2: p_r2.map(enc),
            p_r2_given_r1: [Rate::default(); 2],
            n: [0; 2],
            p_r2_given_aux: [Vec::new(), Vec::new()],
        }
    }

    pub fn r1(&self, d: usize) -> Option<f64> {
        self.p_r1[d].value()
    }

    pub fn r2(&self, d: usize) -> Option<f64> {
        self.p_r2[d].value()
    }
}

/// Empirical rates. Units missing both periods count toward every arm-level
/// denominator.
pub fn compute_rates(data: &PanelDataset) -> RateTable {
    let k = data.aux_arity();
    let mut t = RateTable {
        p_r1: [Rate::default(); 2],
        p_r2: [Rate::default(); 2],
        p_r2_given_r1: [Rate::default(); 2],
        n: [0; 2],
        p_r2_given_aux: [vec![[Rate::default(); 2]; k], vec![[Rate::default(); 2]; k]],
    };
    for r in data.iter() {
        let d = r.arm();
        t.n[d] += 1;
        t.p_r1[d].bump(r.r1());
        t.p_r2[d].bump(r.r2());
        if r.r1() {
            t.p_r2_given_r1[d].bump(r.r2());
            for (j, &a) in r.aux.iter().enumerate() {
                t.p_r2_given_aux[d][j][a as usize].bump(r.r2());
            }
        }
    }
    t
}
