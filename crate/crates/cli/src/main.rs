//! `midp`: p-value triples, conservative combinations, sub-uniformity
//! certificates and power simulations from the command line.

mod input;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use midp::combiners::{fisher_chernoff_bound, fisher_statistic, mean_bound_closed};
use midp::sim::{load_scenarios, replication_rng, run_power_study, write_power_csv};
use midp::{certify_subuniform, combine, idf_of, CombinedResult, Method};
use rand::Rng;
use serde::Serialize;

use input::{read_batch, read_null, read_text, read_unit_distribution, Batch, Format};

/// Error reported on stderr as `{"error": kind, "message": ...}`.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    kind: String,
    message: String,
}

impl CliError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        CliError::new("ParseError", message)
    }

    pub fn in_file(path: &Path, err: midp::Error) -> Self {
        CliError::new(err.kind(), format!("{}: {err}", path.display()))
    }
}

impl From<midp::Error> for CliError {
    fn from(err: midp::Error) -> Self {
        CliError::new(err.kind(), err.to_string())
    }
}

#[derive(Parser)]
#[command(name = "midp", version, about = "Discrete p-values, mid-p-values and conservative combined tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// P-value, mid-p-value and randomized p-value of one observation.
    Midp(MidpArgs),
    /// Conservative combined p-value for a batch of mid-p-values.
    Combine(CombineArgs),
    /// Run power or calibration scenarios and write tidy CSV.
    Simulate(SimulateArgs),
    /// Conservative scores for the mean and the product of mid-p-values.
    Score(IoArgs),
    /// Check whether a distribution on [0, 1] is sub-uniform.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input file.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MidpArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Observed value of the test statistic.
    #[arg(long, allow_hyphen_values = true)]
    observed: f64,
    /// Randomization draw in [0, 1]; drawn from the seed when omitted.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// exp{-6n(1/2 - mean)^2} and the optimized mean bound.
    Mean,
    /// Optimized mean bound only.
    Meanopt,
    /// Barnard's standardized sum; needs a sigma column.
    Stdsum,
    /// Fisher's statistic with the sub-uniform bound.
    Fisher,
    /// Fisher's method with the chi-square reference.
    Fisherstd,
    /// Threshold test on 1/2 - mean.
    Delta,
}

impl MethodArg {
    fn methods(self) -> &'static [Method] {
        match self {
            MethodArg::Mean => &[Method::MeanBoundClosed, Method::MeanBound],
            MethodArg::Meanopt => &[Method::MeanBound],
            MethodArg::Stdsum => &[Method::StdSumBound, Method::StdSumBoundClosed],
            MethodArg::Fisher => &[Method::FisherSubUniform],
            MethodArg::Fisherstd => &[Method::FisherStandard],
            MethodArg::Delta => &[Method::DeltaTest],
        }
    }
}

#[derive(Args)]
struct CombineArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Mean)]
    method: MethodArg,
    /// Level used by the delta test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replication count of every scenario.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Treat the input as a null distribution and certify its mid-p-value.
    #[arg(long)]
    from_null: bool,
    /// Also write the integrated distribution function knots to this CSV.
    #[arg(long)]
    idf_csv: Option<PathBuf>,
}

fn emit(output: Option<&Path>, content: &[u8]) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::new("IoError", e.to_string());
    match output {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::new("IoError", format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content).map_err(io_err)?;
            out.flush().map_err(io_err)
        }
    }
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    emit(output, text.as_bytes())
}

#[derive(Serialize)]
struct MidpOutput {
    observed: f64,
    p: f64,
    midp: f64,
    randp: f64,
    tail_geq: f64,
    tail_gt: f64,
    u: f64,
    u_seeded: bool,
    seed: Option<u64>,
    barnard_s: Option<f64>,
    barnard_sigma: Option<f64>,
    barnard_d: Option<f64>,
}

fn cmd_midp(args: &MidpArgs) -> Result<(), CliError> {
    let null = read_null(&args.io.input, args.io.format)?;
    let (u, seeded) = match args.u {
        Some(u) if (0.0..=1.0).contains(&u) => (u, false),
        Some(u) => return Err(CliError::new("InvalidArgument", format!("u must lie in [0, 1], got {u}"))),
        None => (1.0 - replication_rng(args.seed, 0).gen::<f64>(), true),
    };
    let t = null.pvalues_at(args.observed, u);
    let moments = null.barnard_moments(args.observed).ok();
    emit_json(
        args.io.output.as_deref(),
        &MidpOutput {
            observed: args.observed,
            p: t.p,
            midp: t.midp,
            randp: t.randp,
            tail_geq: t.tail_geq,
            tail_gt: t.tail_gt,
            u,
            u_seeded: seeded,
            seed: seeded.then_some(args.seed),
            barnard_s: moments.map(|m| m.s),
            barnard_sigma: moments.map(|m| m.sigma),
            barnard_d: moments.map(|m| m.d),
        },
    )
}

/// Splits a batch by its group column, keeping first-appearance order.
fn groups(batch: Batch) -> Vec<(Option<String>, Batch)> {
    let Some(labels) = batch.group.clone() else {
        return vec![(None, batch)];
    };
    let mut out: Vec<(Option<String>, Batch)> = Vec::new();
    for (i, label) in labels.into_iter().enumerate() {
        let pos = match out.iter().position(|(g, _)| g.as_deref() == Some(label.as_str())) {
            Some(pos) => pos,
            None => {
                let empty = Batch {
                    sigma: batch.sigma.as_ref().map(|_| Vec::new()),
                    ..Batch::default()
                };
                out.push((Some(label), empty));
                out.len() - 1
            }
        };
        let target = &mut out[pos].1;
        target.q.push(batch.q[i]);
        if let (Some(dst), Some(src)) = (target.sigma.as_mut(), batch.sigma.as_ref()) {
            dst.push(src[i]);
        }
    }
    out
}

#[derive(Serialize)]
struct CombineRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(flatten)]
    result: CombinedResult,
}

fn cmd_combine(args: &CombineArgs) -> Result<(), CliError> {
    let batch = read_batch(&args.io.input, args.io.format)?;
    if args.method == MethodArg::Stdsum && batch.sigma.is_none() {
        return Err(CliError::new(
            "MissingSigmaColumn",
            format!("{}: method stdsum needs a sigma column", args.io.input.display()),
        ));
    }
    let mut records = Vec::new();
    for (group, part) in groups(batch) {
        for &method in args.method.methods() {
            let sigmas = if method.needs_sigma() { part.sigma.as_deref() } else { None };
            records.push(CombineRecord {
                group: group.clone(),
                result: combine(method, &part.q, sigmas, args.alpha)?,
            });
        }
    }
    emit_json(args.io.output.as_deref(), &records)
}

#[derive(Serialize)]
struct ScoreRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    n: usize,
    mean_q: f64,
    /// `exp{-6 n (1/2 - mean)^2}`, or 1 when the mean is at least 1/2.
    mean_score: f64,
    fisher_statistic: f64,
    /// `exp{n - f/2 - n ln(2n/f)}`, or 1 when `f <= 2n`.
    product_score: f64,
}

fn cmd_score(args: &IoArgs) -> Result<(), CliError> {
    let batch = read_batch(&args.input, args.format)?;
    let mut records = Vec::new();
    for (group, part) in groups(batch) {
        let n = part.q.len();
        if n == 0 {
            return Err(midp::Error::EmptyInput.into());
        }
        let f = fisher_statistic(&part.q)?;
        let mean_q = part.q.iter().sum::<f64>() / n as f64;
        records.push(ScoreRecord {
            group,
            n,
            mean_q,
            mean_score: mean_bound_closed(n, (0.5 - mean_q).max(0.0))?,
            fisher_statistic: f,
            product_score: fisher_chernoff_bound(n, f)?,
        });
    }
    emit_json(args.output.as_deref(), &records)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = read_text(&args.io.input)?;
    let mut configs = load_scenarios(&text).map_err(|e| CliError::in_file(&args.io.input, e))?;
    for cfg in &mut configs {
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(reps) = args.reps {
            cfg.reps = reps;
        }
    }
    let studies = configs
        .iter()
        .map(run_power_study)
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    write_power_csv(&mut buf, &studies)?;
    emit(args.io.output.as_deref(), &buf)
}

fn cmd_certify(args: &CertifyArgs) -> Result<(), CliError> {
    let dist = if args.from_null {
        read_null(&args.io.input, args.io.format)?
            .midp_distribution()
            .into_inner()
    } else {
        read_unit_distribution(&args.io.input, args.io.format)?
    };
    let idf = idf_of(&dist);
    if let Some(path) = &args.idf_csv {
        let mut buf = Vec::new();
        idf.write_csv(&mut buf)?;
        emit(Some(path), &buf)?;
    }
    emit_json(args.io.output.as_deref(), &certify_subuniform(&idf))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Midp(args) => cmd_midp(args),
        Command::Combine(args) => cmd_combine(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Score(args) => cmd_score(args),
        Command::Certify(args) => cmd_certify(args),
    }
}

fn report(err: &CliError) {
    eprintln!("{}", serde_json::to_string(err).expect("error serializes"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&CliError::new("UsageError", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report(&err);
            ExitCode::FAILURE
        }
    }
}
