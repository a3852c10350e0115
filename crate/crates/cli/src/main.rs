use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use snstat::config::ExperimentConfig;
use snstat::experiment::{fit_rate, run_ks_cell, KSResult};
use snstat::ingest::load_sample;
use snstat::report::{self, Format, ReportRow};
use snstat::{HarnessError, Result};
use snstat_core::bounds::{theorem1_bound, BoundInputs};
use snstat_core::sampling::DistributionSpec;
use snstat_core::statistics;
use snstat_core::truncation::{self, Source, TruncationMode};

#[derive(Parser)]
#[command(
    name = "snstat",
    version,
    about = "Self-normalized max statistics: truncation levels, bound reports, and Monte Carlo KS experiments"
)]
struct Cli {
    /// Master seed; overrides the config file's seed for `simulate`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the replication loop; output bytes do not
    /// depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output path; "-" writes to stdout.
    #[arg(long, global = true, default_value = "-")]
    out: PathBuf,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = CliFormat::Csv)]
    format: CliFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

impl From<CliFormat> for Format {
    fn from(f: CliFormat) -> Format {
        match f {
            CliFormat::Csv => Format::Csv,
            CliFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliMode {
    PerCoordinate,
    Global,
}

impl From<CliMode> for TruncationMode {
    fn from(m: CliMode) -> TruncationMode {
        match m {
            CliMode::PerCoordinate => TruncationMode::PerCoordinate,
            CliMode::Global => TruncationMode::Global,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve truncation levels from a distribution spec or a sample file.
    Levels {
        /// Distribution spec: inline JSON or a path to a JSON file.
        #[arg(long, conflicts_with = "sample")]
        dist: Option<String>,
        /// Sample file (CSV/TSV), one observation per row.
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Sample size in the defining mean-square equation.
        #[arg(long)]
        n: usize,
        /// Truncation scheme.
        #[arg(long, value_enum, default_value_t = CliMode::PerCoordinate)]
        mode: CliMode,
    },
    /// Self-normalized max statistic of a sample file.
    Stat {
        /// Sample file (CSV/TSV), one observation per row.
        #[arg(long)]
        sample: PathBuf,
        /// Also evaluate the truncated variant at levels solved from the
        /// sample itself.
        #[arg(long, value_enum)]
        truncate: Option<CliMode>,
    },
    /// Assemble the bound report from moment inputs.
    Bound {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        /// Scaled mean bound: n * max_j |E Y_j|.
        #[arg(long)]
        mu1: f64,
        /// Scaled third moment: n * E max_j |Y_j|^3.
        #[arg(long)]
        mu3: f64,
        /// Truncation tail probability term.
        #[arg(long, default_value_t = 0.0)]
        tail_prob: f64,
        /// Second-moment remainder for the X-statistic variant.
        #[arg(long, default_value_t = 0.0)]
        r_n: f64,
        /// Covariance discrepancy for the comparison terms.
        #[arg(long)]
        varpi: Option<f64>,
        /// Smallest reference eigenvalue for the refined comparison term.
        #[arg(long)]
        lambda_min: Option<f64>,
        /// Standardized moment E max_j |X_j / sd_j|^{2+2 delta}.
        #[arg(long)]
        nu: Option<f64>,
        /// Moment exponent parameter in (0, 1].
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Run the configured KS experiment grid.
    Simulate {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit a report file in the requested format.
    Report {
        /// Existing report (.csv or .json).
        #[arg(long)]
        input: PathBuf,
    },
}

fn write_output(path: &Path, body: &str) -> Result<()> {
    if path.as_os_str() == "-" {
        use std::io::Write as _;
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(body.as_bytes())
            .map_err(|e| HarnessError::Io { path: "-".into(), source: e })?;
        return Ok(());
    }
    std::fs::write(path, body).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn parse_dist(text: &str) -> Result<DistributionSpec> {
    let json = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text).map_err(|e| HarnessError::Io {
            path: text.to_string(),
            source: e,
        })?
    };
    let spec: DistributionSpec = serde_json::from_str(&json)
        .map_err(|e| HarnessError::Parse(format!("distribution spec: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn key_value_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let format: Format = cli.format.into();
    match cli.command {
        Command::Levels { dist, sample, n, mode } => {
            let seed = cli.seed.unwrap_or(7);
            let levels = match (&dist, &sample) {
                (Some(text), None) => {
                    let spec = parse_dist(text)?;
                    truncation::solve_levels(Source::Law(&spec), n, mode.into())?
                }
                (None, Some(path)) => {
                    let matrix = load_sample(path)?;
                    truncation::solve_levels(Source::Sample(&matrix), n, mode.into())?
                }
                _ => {
                    return Err(HarnessError::config(
                        "levels needs exactly one of --dist or --sample",
                    ))
                }
            };
            let _ = seed;
            let body = match format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&levels)
                        .map_err(|e| HarnessError::Parse(e.to_string()))?;
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let mut out = String::from("j,level\n");
                    for (j, a) in levels.levels.iter().enumerate() {
                        out.push_str(&format!("{j},{a}\n"));
                    }
                    out
                }
            };
            write_output(&cli.out, &body)
        }
        Command::Stat { sample, truncate } => {
            let matrix = load_sample(&sample)?;
            let stat = statistics::self_normalized(&matrix)?;
            let mut truncated_max = None;
            if let Some(mode) = truncate {
                let levels =
                    truncation::solve_levels(Source::Sample(&matrix), matrix.n(), mode.into())?;
                let t_y = statistics::self_normalized_truncated(&matrix, &levels)?;
                truncated_max = Some(t_y.max_value);
            }
            let degenerate = stat.degenerate_mask.iter().filter(|m| **m).count();
            let body = match format {
                Format::Json => {
                    let mut v = serde_json::json!({
                        "n": matrix.n(),
                        "d": matrix.d(),
                        "max_value": stat.max_value,
                        "values": stat.values,
                        "degenerate_mask": stat.degenerate_mask,
                    });
                    if let Some(t) = truncated_max {
                        v["truncated_max_value"] = serde_json::json!(t);
                    }
                    let mut s = serde_json::to_string_pretty(&v)
                        .map_err(|e| HarnessError::Parse(e.to_string()))?;
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let t = truncated_max.map(|t| t.to_string()).unwrap_or_default();
                    format!(
                        "n,d,max_value,truncated_max_value,degenerate_count\n{},{},{},{},{}\n",
                        matrix.n(),
                        matrix.d(),
                        stat.max_value,
                        t,
                        degenerate
                    )
                }
            };
            write_output(&cli.out, &body)
        }
        Command::Bound {
            n,
            d,
            mu1,
            mu3,
            tail_prob,
            r_n,
            varpi,
            lambda_min,
            nu,
            delta,
        } => {
            let mut inputs = BoundInputs::new(n, d, mu1, mu3, tail_prob, r_n);
            if let Some(v) = varpi {
                inputs.varpi = v;
            }
            if let Some(v) = lambda_min {
                inputs.lambda_min = v;
            }
            if let Some(v) = nu {
                inputs.nu_2delta = v;
            }
            if let Some(v) = delta {
                inputs.delta = v;
            }
            let rep = theorem1_bound(&inputs)?;
            let body = match format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&rep)
                        .map_err(|e| HarnessError::Parse(e.to_string()))?;
                    s.push('\n');
                    s
                }
                Format::Csv => {
                    let mut pairs: Vec<(&str, String)> = vec![
                        ("eps_star", rep.eps_star.to_string()),
                        ("phi_at_eps_star", rep.phi_at_eps_star.to_string()),
                    ];
                    for (j, h) in rep.h.iter().enumerate() {
                        let name: &'static str = ["h1", "h2", "h3", "h4"][j];
                        pairs.push((name, h.to_string()));
                    }
                    pairs.extend([
                        ("term_tail", rep.term_tail.to_string()),
                        ("term_mu1", rep.term_mu1.to_string()),
                        ("term_mu3", rep.term_mu3.to_string()),
                        ("comparison_sqrt", rep.term_comparison.0.to_string()),
                        ("comparison_refined", rep.term_comparison.1.to_string()),
                        ("total_theorem1", rep.total_theorem1.to_string()),
                        ("total_theorem1_X", rep.total_theorem1_x.to_string()),
                        ("corollary_value", rep.corollary_value.to_string()),
                        ("propB1_value", rep.prop_b1_value.to_string()),
                        ("convention", rep.convention.clone()),
                    ]);
                    key_value_csv(&pairs)
                }
            };
            write_output(&cli.out, &body)
        }
        Command::Simulate { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            if let Some(workers) = cli.workers {
                cfg.workers = workers;
            }
            cfg.validate()?;
            let mut results: Vec<KSResult> = Vec::with_capacity(cfg.n_grid.len());
            for &n in &cfg.n_grid {
                log::info!("running cell n={n} (M={})", cfg.m);
                results.push(run_ks_cell(&cfg, n)?);
            }
            if results.len() >= 3 {
                match fit_rate(&results) {
                    Ok(fit) => log::info!(
                        "rate fit: slope {:.4} (se {:.4}), intercept {:.4}",
                        fit.slope,
                        fit.slope_se,
                        fit.intercept
                    ),
                    Err(e) => log::warn!("rate fit skipped: {e}"),
                }
            }
            let rows = report::rows_from_results(&results);
            report::emit_report(&rows, format, &cli.out)
        }
        Command::Report { input } => {
            let rows: Vec<ReportRow> = report::load_report(&input)?;
            report::emit_report(&rows, format, &cli.out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
