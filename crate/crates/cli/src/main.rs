mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use did_miss::panel::read_panel_file_with;
use did_miss::sim::{check_remark_pt, decompose_att, simulate_panel, Preset};
use did_miss::{
    att_ar_bounds, att_iv, att_iv_multi, att_principal_ignorability, bootstrap_ci, bootstrap_interval,
    compute_rates, did_complete_case, strata_proportions, write_panel_csv, BootstrapConfig, Error, Mode,
    OutcomeSupport, PanelDataset,
};

use report::{Fingerprint, RunReport};

/// Difference-in-differences with missing outcomes.
#[derive(Debug, Parser)]
#[command(name = "did-miss", version)]
struct Cli {
    /// Print an aligned table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Complete-case DID.
    Cc {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Instrument-corrected DID using auxiliary response indicators.
    Iv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// 1-based auxiliary indicator used as the instrument.
        #[arg(long)]
        aux: usize,
        /// Second auxiliary indicator; uses the paired-instrument correction.
        #[arg(long)]
        aux2: Option<usize>,
    },
    /// Trimming bounds on the ATT among always-respondents.
    Bounds {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// monotone or no-monotone.
        #[arg(long, default_value = "monotone")]
        mode: Mode,
    },
    /// Principal-ignorability ATT over discrete covariate cells.
    Pi {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Response rates and implied strata proportions.
    Rates {
        #[command(flatten)]
        data: DataArgs,
        /// Only report proportions for this mode.
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Generate a panel from a named preset.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Panel CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON destination.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Simulate a preset and evaluate the latent ATT decomposition.
    Decompose {
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Panel CSV with columns id,d,y1,y2[,auxK|wK][,xJ].
    #[arg(long)]
    input: PathBuf,
    /// Declared outcome support.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    support: Option<Vec<f64>>,
    /// Covariate columns (comma separated); defaults to the xJ columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct BootArgs {
    /// Bootstrap replicates; 0 disables the bootstrap.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl BootArgs {
    fn config(&self) -> Option<BootstrapConfig> {
        (self.bootstrap > 0).then_some(BootstrapConfig {
            replicates: self.bootstrap,
            seed: self.seed,
            level: self.level,
        })
    }

    fn seed(&self) -> Option<u64> {
        (self.bootstrap > 0).then_some(self.seed)
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    preset: Preset,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure carrying the report context known so far.
struct Failure {
    error: Error,
    fingerprint: Option<Fingerprint>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            fingerprint: None,
        }
    }
}

trait WithFingerprint<T> {
    fn with(self, fp: &Fingerprint) -> Result<T, Failure>;
}

impl<T> WithFingerprint<T> for did_miss::Result<T> {
    fn with(self, fp: &Fingerprint) -> Result<T, Failure> {
        self.map_err(|error| Failure {
            error,
            fingerprint: Some(fp.clone()),
        })
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn load(args: &DataArgs) -> did_miss::Result<PanelDataset> {
    let support = match args.support.as_deref() {
        Some(&[lo, hi]) => Some(OutcomeSupport::new(lo, hi)?),
        _ => None,
    };
    read_panel_file_with(&args.input, support, |m| {
        if let Some(cols) = &args.covariates {
            m.covariates = cols.iter().map(|c| c.trim().to_string()).collect();
        }
    })
}

fn aux_index(k: usize, data: &PanelDataset) -> did_miss::Result<usize> {
    if k == 0 || k > data.aux_arity() {
        return Err(Error::AuxIndex {
            index: k,
            arity: data.aux_arity(),
        });
    }
    Ok(k - 1)
}

fn run(cmd: &Command, argv: Vec<String>) -> Result<RunReport, Failure> {
    let report = |seed, fingerprint, result, diagnostics| RunReport::new(argv.clone(), seed, fingerprint, result, diagnostics);
    match cmd {
        Command::Cc { data, boot } => {
            let panel = load(data)?;
            let fp = Fingerprint::of(&panel);
            let (estimate, summary) = match boot.config() {
                Some(cfg) => bootstrap_ci(&panel, &cfg, did_complete_case).map(|(e, s)| (e, Some(s))),
                None => did_complete_case(&panel).map(|e| (e, None)),
            }
            .with(&fp)?;
            Ok(report(
                boot.seed(),
                Some(fp),
                json!({ "estimate": estimate }),
                json!({ "bootstrap": summary }),
            ))
        }
        Command::Iv { data, boot, aux, aux2 } => {
            let panel = load(data)?;
            let fp = Fingerprint::of(&panel);
            let k1 = aux_index(*aux, &panel).with(&fp)?;
            let k2 = aux2.map(|k| aux_index(k, &panel)).transpose().with(&fp)?;
            let estimator = |d: &PanelDataset| match k2 {
                Some(k2) => att_iv_multi(d, k1, k2),
                None => att_iv(d, k1),
            };
            let (mut estimate, diag) = estimator(&panel).with(&fp)?;
            let mut summary = None;
            if let Some(cfg) = boot.config() {
                let (e, s) = bootstrap_ci(&panel, &cfg, |d| estimator(d).map(|r| r.0)).with(&fp)?;
                estimate = e;
                summary = Some(s);
            }
            Ok(report(
                boot.seed(),
                Some(fp),
                json!({ "estimate": estimate }),
                json!({ "instrument": diag, "bootstrap": summary }),
            ))
        }
        Command::Bounds { data, boot, mode } => {
            let panel = load(data)?;
            let fp = Fingerprint::of(&panel);
            let b = att_ar_bounds(&panel, *mode).with(&fp)?;
            let (ci, summary) = match boot.config() {
                Some(cfg) => {
                    let (ci, s) = bootstrap_interval(&panel, &cfg, (b.lb, b.ub), |d| {
                        att_ar_bounds(d, *mode).map(|r| (r.lb, r.ub))
                    })
                    .with(&fp)?;
                    (Some(ci), Some(s))
                }
                None => (None, None),
            };
            Ok(report(
                boot.seed(),
                Some(fp),
                json!({
                    "estimand": b.estimand,
                    "mode": mode,
                    "lb": b.lb,
                    "ub": b.ub,
                    "trim_share": b.trim_share,
                    "trim_share_upper": b.trim_share_upper,
                    "arm_bounds": b.arm_bounds,
                    "assumptions_used": b.assumptions_used,
                    "proportions": b.proportions,
                    "n_used": b.n_used,
                    "bootstrap": ci,
                }),
                json!({
                    "support_fallback": b.support_fallback,
                    "inconsistent_rates": b.inconsistent_rates,
                    "clip_events": b.clip_events,
                    "bootstrap": summary,
                }),
            ))
        }
        Command::Pi { data, boot } => {
            let panel = load(data)?;
            let fp = Fingerprint::of(&panel);
            let r = att_principal_ignorability(&panel).with(&fp)?;
            let mut estimate = r.estimate.clone();
            let mut summary = None;
            if let Some(cfg) = boot.config() {
                let (e, s) = bootstrap_ci(&panel, &cfg, |d| att_principal_ignorability(d).map(|r| r.estimate))
                    .with(&fp)?;
                estimate = e;
                summary = Some(s);
            }
            Ok(report(
                boot.seed(),
                Some(fp),
                json!({
                    "estimate": estimate,
                    "stratum_effects": r.stratum_effects,
                    "stratum_shares": r.stratum_shares,
                    "scores": r.scores.cells,
                }),
                json!({ "clip_events": r.scores.clip_events, "bootstrap": summary }),
            ))
        }
        Command::Rates { data, mode } => {
            let panel = load(data)?;
            let fp = Fingerprint::of(&panel);
            let rates = compute_rates(&panel);
            let modes = match mode {
                Some(m) => vec![*m],
                None => vec![Mode::Monotone, Mode::NoMonotone],
            };
            let mut props = serde_json::Map::new();
            for m in modes {
                let v = match strata_proportions(&rates, m) {
                    Ok(p) => to_value(&p),
                    Err(e) => json!({ "error": e.to_string() }),
                };
                props.insert(m.to_string(), v);
            }
            Ok(report(
                None,
                Some(fp),
                json!({ "rates": rates, "proportions": props }),
                json!({}),
            ))
        }
        Command::Simulate { sim, out, truth } => {
            let spec = sim.preset.spec(sim.n, sim.seed);
            let s = simulate_panel(&spec)?;
            let mut w = BufWriter::new(File::create(out).map_err(Error::from)?);
            write_panel_csv(&s.data, &mut w)?;
            w.flush().map_err(Error::from)?;
            let truth_json = json!({ "preset": sim.preset, "truth": s.truth });
            if let Some(path) = truth {
                let mut f = BufWriter::new(File::create(path).map_err(Error::from)?);
                serde_json::to_writer_pretty(&mut f, &truth_json).expect("truth serializes");
                writeln!(f).and_then(|_| f.flush()).map_err(Error::from)?;
            }
            Ok(report(
                Some(sim.seed),
                Some(Fingerprint::of(&s.data)),
                json!({
                    "preset": sim.preset,
                    "assumptions": sim.preset.assumptions(),
                    "n": sim.n,
                    "out": out,
                    "truth": s.truth,
                }),
                json!({}),
            ))
        }
        Command::Decompose { sim } => {
            let s = simulate_panel(&sim.preset.spec(sim.n, sim.seed))?;
            Ok(report(
                Some(sim.seed),
                Some(Fingerprint::of(&s.data)),
                json!({
                    "preset": sim.preset,
                    "decomposition": decompose_att(&s.oracle),
                    "trend_mixture": check_remark_pt(&s.oracle),
                    "truth": s.truth,
                }),
                json!({}),
            ))
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("DIDMISS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("DIDMISS_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("did-miss: {e}");
        return ExitCode::from(1);
    }
    let echo = argv.into_iter().skip(1).collect::<Vec<_>>();
    match run(&cli.command, echo.clone()) {
        Ok(r) => {
            r.print(cli.pretty);
            ExitCode::SUCCESS
        }
        Err(Failure { error, fingerprint }) if error.is_refusal() => {
            eprintln!("did-miss: estimator refused: {error}");
            RunReport::refused(echo, fingerprint, &error).print(cli.pretty);
            ExitCode::from(2)
        }
        Err(Failure { error, .. }) => {
            eprintln!("did-miss: {error}");
            ExitCode::from(1)
        }
    }
}
