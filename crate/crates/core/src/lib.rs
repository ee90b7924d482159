//! Two-period difference-in-differences with missing outcomes.
//!
//! Estimators for the average treatment effect on the treated when the
//! baseline and/or follow-up outcome can be missing: complete-case DID, an
//! instrument-corrected DID, sharp trimming bounds for always-respondents,
//! and a principal-ignorability estimator. The [`sim`] module generates
//! panels with known latent response types for validation.

pub mod bootstrap;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod iv;
pub mod panel;
pub mod principal;
pub mod rates;
pub mod sim;
pub mod stats;

pub use bootstrap::{bootstrap_ci, bootstrap_interval, BootstrapConfig, BootstrapSummary, IntervalBootstrap};
pub use bounds::{att_ar_bounds, strata_proportions, trimmed_mean, BoundResult, Interval, Mode, Side, StrataProportions, Stratum};
pub use error::{Error, Result};
pub use estimators::{did_complete_case, naive_did_all, ConfidenceInterval, Estimate};
pub use iv::{att_iv, att_iv_multi, IvDiagnostics, WEAK_INSTRUMENT_EPS};
pub use panel::{load_panel, load_panel_auto, read_panel_file, read_panel_file_with, write_panel_csv, ColumnMapping, OutcomeSupport, PanelDataset, PanelRecord};
pub use principal::{att_principal_ignorability, principal_scores, PrincipalResult, PrincipalScoreTable};
pub use rates::{compute_rates, Rate, RateTable};
pub use stats::ClipEvent;
