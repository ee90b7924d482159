//! Latent-strata panel simulator with known truth.

pub mod generate;
pub mod oracle;
pub mod population;
pub mod presets;
pub mod spec;

pub use generate::{fully_observed, oracle_truth, simulate_oracle, simulate_panel, OracleRecord, OracleTruth, Simulation};
pub use oracle::{check_remark_pt, decompose_att, DecompositionReport, TrendMixtureReport};
pub use population::{Population, PopulationCell};
pub use presets::{assumption_holds, Preset, MULTI_IV_PLANTED_GAP, PI_PLANTED_BIAS};
pub use spec::{AuxModel, CovariateCell, DgpSpec, R1Model};
