//! `ubnin` command-line interface.
//!
//! Exit codes: 0 success, 1 validation error, 2 degenerate statistics.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ubnin::builder::Covariate;
use ubnin::codec::{self, UbninCode};
use ubnin::io::{self, CodeRecord};
use ubnin::pipeline::{self, RunConfig, Sweep, ThresholdSpec};
use ubnin::Execution;

#[derive(Parser)]
#[command(name = "ubnin", version, about = "Exact network codes and structural covariance network analysis")]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, env = "UBNIN_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a 0/1 adjacency matrix CSV and print its code record.
    Encode {
        /// Matrix CSV: label row followed by n rows of 0/1.
        matrix: PathBuf,
    },
    /// Rebuild the adjacency matrix from a code record, code file or decimal literal.
    Decode {
        /// JSON record file, file holding a decimal, or a decimal literal.
        code: String,
        /// Node count; required unless the record carries it.
        #[arg(long)]
        nodes: Option<usize>,
        /// Write the matrix here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Encode every subject's thresholded similarity network into a registry.
    Fingerprint(RunArgs),
    /// Age-cohort metrics, permutation tests and clinical ANOVA.
    Cohort(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Subject CSV (or volume CSV when --demographics is given).
    #[arg(long, env = "UBNIN_INPUT")]
    input: PathBuf,
    /// Demographics CSV joined to --input by subject id.
    #[arg(long, env = "UBNIN_DEMOGRAPHICS")]
    demographics: Option<PathBuf>,
    /// sparsity:<f> or consistency:<f>:<per-subject|group-mask>.
    #[arg(long, env = "UBNIN_THRESHOLD", default_value = "consistency:0.3:per-subject")]
    threshold: ThresholdSpec,
    /// Sparsity sweep start:stop:step.
    #[arg(long, env = "UBNIN_SWEEP", default_value = "0.6:0.9:0.03")]
    sweep: Sweep,
    /// Ascending age cutoffs in years.
    #[arg(long, env = "UBNIN_BINS", default_value = "32,42,52,62", value_parser = parse_bins)]
    bins: Bins,
    /// Permutation iterations.
    #[arg(long, env = "UBNIN_ITERATIONS", default_value_t = ubnin::stats::DEFAULT_ITERATIONS)]
    iterations: usize,
    /// Master seed for every stochastic stage.
    #[arg(long, env = "UBNIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "UBNIN_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Remove a categorical covariate (gender or group) from the volumes first.
    #[arg(long, env = "UBNIN_RESIDUALIZE")]
    residualize: Option<Covariate>,
    /// Random references per small-world index.
    #[arg(long, env = "UBNIN_N_RAND", default_value_t = ubnin::metrics::DEFAULT_N_RAND)]
    n_rand: usize,
    /// Double-edge-swap attempts per edge for random references.
    #[arg(long, env = "UBNIN_SWAPS_PER_EDGE", default_value_t = ubnin::metrics::DEFAULT_SWAPS_PER_EDGE)]
    swaps_per_edge: usize,
    /// Clinical columns compared across cohorts by ANOVA.
    #[arg(long, env = "UBNIN_ANOVA_COLUMNS", value_delimiter = ',',
          default_value = "updrs_off,updrs_on,hy_stage,age_at_onset")]
    anova_columns: Vec<String>,
    /// Extra input columns to ignore.
    #[arg(long, env = "UBNIN_PASS_THROUGH", value_delimiter = ',')]
    pass_through: Vec<String>,
}

#[derive(Clone)]
struct Bins(Vec<f64>);

fn parse_bins(s: &str) -> Result<Bins, String> {
    pipeline::parse_bins(s).map(Bins).map_err(|e| e.to_string())
}

impl RunArgs {
    fn config(self) -> RunConfig {
        RunConfig {
            input: self.input,
            demographics: self.demographics,
            pass_through: self.pass_through,
            threshold: self.threshold,
            sweep: self.sweep,
            bins: self.bins.0,
            iterations: self.iterations,
            seed: self.seed,
            out_dir: self.out_dir,
            residualize: self.residualize,
            n_rand: self.n_rand,
            swaps_per_edge: self.swaps_per_edge,
            anova_columns: self.anova_columns,
            tail: "two-sided".into(),
        }
    }
}

/// Failure with its exit code.
struct Failure(u8, anyhow::Error);

impl From<ubnin::Error> for Failure {
    fn from(e: ubnin::Error) -> Self {
        let code = if e.is_degenerate_statistics() { 2 } else { 1 };
        Failure(code, e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure(1, e)
    }
}

fn read_code(arg: &str, nodes: Option<usize>) -> Result<(UbninCode, Option<Vec<String>>), Failure> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        io::read_to_string(path)?
    } else {
        arg.to_string()
    };
    let text = text.trim();
    if text.starts_with('{') {
        let record: CodeRecord = serde_json::from_str(text).context("parsing code record")?;
        if let Some(n) = nodes.filter(|&n| n != record.n) {
            return Err(anyhow::anyhow!("--nodes {n} contradicts record node count {}", record.n).into());
        }
        let code = record.to_code()?;
        Ok((code, record.labels))
    } else {
        let n = nodes.ok_or_else(|| anyhow::anyhow!("--nodes is required for a decimal code"))?;
        Ok((UbninCode::from_decimal_str(n, text)?, None))
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let exec = Execution::default();
    match cli.command {
        Command::Encode { matrix } => {
            let b = io::parse_binary_matrix(&io::read_to_string(&matrix)?)?;
            let code = codec::encode(&b);
            let record = CodeRecord::new(&code, Some(b.labels().to_vec()));
            println!("{}", serde_json::to_string(&record).context("serializing record")?);
            Ok(0)
        }
        Command::Decode { code, nodes, output } => {
            let (code, labels) = read_code(&code, nodes)?;
            let mut b = codec::decode(&code)?;
            if let Some(labels) = labels {
                b = b.with_labels(labels)?;
            }
            let text = io::write_binary_matrix(&b);
            match output {
                Some(path) => io::write_file(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Fingerprint(args) => {
            let out = pipeline::run_fingerprint(&args.config(), exec)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "{} subjects encoded, {} duplicate codes; wrote {}",
                out.registry.records.len(),
                out.registry.duplicates.len(),
                out.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
            );
            Ok(0)
        }
        Command::Cohort(args) => {
            let out = pipeline::run_cohort(&args.config(), exec)?;
            for w in &out.results.warnings {
                eprintln!("warning: {w}");
            }
            for d in &out.results.diagnostics {
                eprintln!("degenerate: {d}");
            }
            eprintln!(
                "{} metric rows, {} permutation tests, {} ANOVA rows",
                out.results.metrics.len(),
                out.results.permutation.len(),
                out.results.anova.len()
            );
            Ok(if out.results.diagnostics.is_empty() { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.threads > 0 {
        if let Err(e) = configure_threads(cli.threads) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(n: usize) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_n: usize) -> anyhow::Result<()> {
    Ok(())
}
