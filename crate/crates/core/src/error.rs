use thiserror::Error;

/// Treatment arm label used in error messages.
pub(crate) fn arm_name(d: usize) -> &'static str {
    if d == 1 {
        "treated"
    } else {
        "control"
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("single-arm dataset: every record has d = {0}")]
    SingleArm(u8),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row}: treatment value {value:?} is not 0 or 1")]
    InvalidTreatment { row: usize, value: String },

    #[error("row {row}, column `{column}`: auxiliary indicator {value:?} is not 0 or 1")]
    InvalidIndicator {
        row: usize,
        column: String,
        value: String,
    },

    #[error("inconsistent auxiliary arity: record {index} has {found} indicators, expected {expected}")]
    AuxArity {
        index: usize,
        found: usize,
        expected: usize,
    },

    #[error("inconsistent covariate arity: record {index} has {found} covariates, expected {expected}")]
    CovariateArity {
        index: usize,
        found: usize,
        expected: usize,
    },

    #[error("record {index}: observed outcome {value} lies outside the declared support [{lo}, {hi}]")]
    OutOfSupport {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid outcome support [{0}, {1}]")]
    InvalidSupport(f64, f64),

    #[error("no complete cases in arm d = {arm} ({})", arm_name(*.arm))]
    NoCompleteCases { arm: usize },

    #[error("dataset contains missing outcomes")]
    MissingOutcomes,

    #[error("auxiliary index {index} out of range (dataset has {arity} auxiliary indicators)")]
    AuxIndex { index: usize, arity: usize },

    #[error("weak instrument in arm d = {arm}: |denominator| = {denom:e} < {eps:e}")]
    WeakInstrument { arm: usize, denom: f64, eps: f64 },

    #[error("empty instrument cell: arm d = {arm}, auxiliary {aux} = {value} has no complete cases")]
    EmptyInstrumentCell { arm: usize, aux: usize, value: u8 },

    #[error("degenerate instrument pair: auxiliary {0} and {1} coincide on complete cases")]
    DegenerateInstrumentPair(usize, usize),

    #[error("response rate {0} is absent (zero denominator)")]
    AbsentRate(&'static str),

    #[error("trimming infeasible in arm d = {arm} (keep fraction {keep}) and no outcome support declared")]
    TrimmingInfeasible { arm: usize, keep: f64 },

    #[error("empty covariate cell(s): {}", format_cells(.0))]
    EmptyCovariateCell(Vec<(Vec<u32>, usize)>),

    #[error("stratum {stratum} has zero normalizer but a cell with score {mass}")]
    ZeroNormalizer { stratum: &'static str, mass: f64 },

    #[error("invalid probability table: {0}")]
    InvalidProbabilityTable(String),

    #[error("bootstrap failed: {failed} of {replicates} replicates errored (last error: {last})")]
    BootstrapFailed {
        failed: usize,
        replicates: usize,
        last: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn format_cells(cells: &[(Vec<u32>, usize)]) -> String {
    cells
        .iter()
        .map(|(x, d)| format!("(x = {x:?}, arm {d})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True when the data are well formed but the requested method cannot
    /// produce an estimate on them (weak instrument, infeasible trimming, ...).
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::NoCompleteCases { .. }
                | Error::MissingOutcomes
                | Error::WeakInstrument { .. }
                | Error::EmptyInstrumentCell { .. }
                | Error::DegenerateInstrumentPair(..)
                | Error::AbsentRate(_)
                | Error::TrimmingInfeasible { .. }
                | Error::EmptyCovariateCell(_)
                | Error::ZeroNormalizer { .. }
                | Error::BootstrapFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
