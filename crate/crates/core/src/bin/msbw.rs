//! `msbw` command-line front end: train, decode, simulate, eval.
//!
//! Exit codes: 0 success, 2 usage, 3 data or format problem, 4 numerical
//! failure. Errors are printed as one `error[<code>]: <message>` line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use msbw::decoding::decode_dataset;
use msbw::model::{load_model, save_model, write_paths};
use msbw::simulate::{sample_dataset, SimulationSpec};
use msbw::training::{evaluate, fit_with_trace, TraceRecord};
use msbw::{CovarianceMode, Dataset, Error, FitConfig, InitStrategy};

#[derive(Parser, Debug)]
#[command(name = "msbw", version, about = "Gaussian HMMs from many short sequences")]
struct Cli {
    /// Worker threads for per-sequence work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model with multi-sequence Baum-Welch.
    Train(TrainArgs),
    /// Most probable state path of every sequence.
    Decode(DecodeArgs),
    /// Draw a synthetic dataset from a model.
    Simulate(SimulateArgs),
    /// Per-time-step log-likelihood of a dataset under a model.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Full,
    Diagonal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    UserSupplied,
    RandomResponsibility,
    SpreadMeans,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Number of hidden states K (including the absorbing one).
    #[arg(long, short = 'k', value_parser = clap::value_parser!(u64).range(1..))]
    states: u64,
    /// Make the last state an absorbing death state.
    #[arg(long)]
    absorbing: bool,
    #[arg(long, value_enum, default_value = "full")]
    covariance_mode: ModeArg,
    #[arg(long, alias = "iter-max", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: u64,
    /// Defaults to 10, or to --max-iterations when that is smaller.
    #[arg(long, alias = "iter-min", value_parser = clap::value_parser!(u64).range(1..))]
    min_iterations: Option<u64>,
    #[arg(long, default_value_t = 1e-4)]
    rel_tolerance: f64,
    #[arg(long, default_value_t = 1e-6)]
    variance_floor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to user-supplied when --init-model is given, spread-means otherwise.
    #[arg(long, value_enum)]
    init_strategy: Option<InitArg>,
    #[arg(long)]
    init_model: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    /// Per-iteration `iter,llh,delta` rows.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    paths_out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
    sequences: u64,
    #[arg(long, short = 't', value_parser = clap::value_parser!(u64).range(1..))]
    length: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data_out: PathBuf,
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

/// A failure with its exit code and machine-readable tag.
struct Failure {
    code: &'static str,
    exit: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: "usage",
            exit: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, exit) = match e.root() {
            Error::InvalidConfig(_) => ("invalid_config", 2),
            Error::Parse(_) => ("parse_error", 3),
            Error::Io(_) => ("io_error", 3),
            Error::InvalidData(_) => ("invalid_data", 3),
            Error::ReservedZeroRow { .. } => ("reserved_zero_row", 3),
            Error::DimensionMismatch { .. } => ("dimension_mismatch", 3),
            Error::InvalidModel(_) => ("invalid_model", 3),
            Error::InstanceTooLarge { .. } => ("instance_too_large", 3),
            Error::NotPositiveDefinite { .. } => ("not_positive_definite", 4),
            Error::ZeroProbability { .. } => ("zero_probability", 4),
            Error::StarvedState { .. } => ("starved_state", 4),
            Error::ImpossiblePath { .. } => ("impossible_sequence", 4),
            Error::Fit { .. } => ("fit_error", 4),
        };
        Failure {
            code,
            exit,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let file = File::open(path).map_err(|e| Failure {
        code: "io_error",
        exit: 3,
        message: format!("{}: {e}", path.display()),
    })?;
    Ok(Dataset::read_csv(BufReader::new(file))?)
}

fn banner(parts: &[(&str, String)]) {
    let line: Vec<String> = parts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("# {}", line.join(" "));
}

fn train(args: TrainArgs, threads: &str) -> Result<(), Failure> {
    let init_strategy = match (args.init_strategy, &args.init_model) {
        (Some(InitArg::UserSupplied), None) => {
            return Err(Failure::usage("--init-strategy user-supplied requires --init-model"))
        }
        (Some(InitArg::UserSupplied), Some(_)) | (None, Some(_)) => InitStrategy::UserSupplied,
        (Some(InitArg::RandomResponsibility), None) => InitStrategy::RandomResponsibility,
        (Some(InitArg::SpreadMeans), None) | (None, None) => InitStrategy::SpreadMeans,
        (Some(_), Some(_)) => {
            return Err(Failure::usage(
                "--init-model can only be combined with --init-strategy user-supplied",
            ))
        }
    };
    let config = FitConfig {
        max_iterations: args.max_iterations as usize,
        min_iterations: args
            .min_iterations
            .unwrap_or(10.min(args.max_iterations)) as usize,
        rel_tolerance: args.rel_tolerance,
        variance_floor: args.variance_floor,
        seed: args.seed,
        init_strategy,
        covariance_mode: match args.covariance_mode {
            ModeArg::Full => CovarianceMode::Full,
            ModeArg::Diagonal => CovarianceMode::Diagonal,
        },
        absorbing: args.absorbing,
    };
    config.validate()?;
    let k = args.states as usize;
    banner(&[
        ("command", "train".into()),
        ("data", args.data.display().to_string()),
        ("states", k.to_string()),
        ("threads", threads.to_string()),
        (
            "init_model",
            args.init_model
                .as_ref()
                .map_or("none".into(), |p| p.display().to_string()),
        ),
        ("config", format!("[{config}]")),
    ]);

    let data = read_dataset(&args.data)?;
    let initial = args.init_model.as_deref().map(load_model).transpose()?;
    if let Some(m) = &initial {
        if m.absorbing != args.absorbing || m.covariance_mode != config.covariance_mode {
            eprintln!("# note: structure (absorbing, covariance_mode) taken from the initial model");
        }
    }

    let mut trace = match &args.trace_out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            writeln!(w, "iter,llh,delta")?;
            Some(w)
        }
        None => None,
    };
    let mut write_err = None;
    let result = fit_with_trace(&data, k, &config, initial, |r: &TraceRecord, _| {
        if let Some(w) = trace.as_mut() {
            if let Err(e) = writeln!(w, "{},{:.16e},{:.16e}", r.iteration, r.llh, r.delta) {
                write_err.get_or_insert(e);
            }
        }
    });
    if let Some(w) = trace.as_mut() {
        w.flush()?;
    }
    if let Some(e) = write_err {
        return Err(e.into());
    }
    let (model, report) = result?;
    save_model(&model, &args.model_out)?;
    println!("termination: {}", report.termination);
    println!("iterations: {}", report.iterations);
    println!("initial_llh: {:.16e}", report.initial_llh);
    println!("final_llh: {:.16e}", report.final_llh());
    Ok(())
}

fn decode(args: DecodeArgs, threads: &str) -> Result<(), Failure> {
    banner(&[
        ("command", "decode".into()),
        ("model", args.model.display().to_string()),
        ("data", args.data.display().to_string()),
        ("threads", threads.to_string()),
    ]);
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    if data.obs_dim() != model.obs_dim {
        return Err(Error::DimensionMismatch {
            expected: model.obs_dim,
            found: data.obs_dim(),
        }
        .into());
    }
    let outcome = decode_dataset(&model, &data);
    let mut w = BufWriter::new(File::create(&args.paths_out)?);
    write_paths(&mut w, &data, &outcome.paths)?;
    w.flush()?;
    println!("decoded: {}", outcome.paths.len());
    println!("failed: {}", outcome.failures.len());
    if outcome.failures.is_empty() {
        return Ok(());
    }
    let mut worst = None;
    for f in outcome.failures {
        let failure = Failure::from(f.error);
        eprintln!("error[{}]: sequence {}: {}", failure.code, f.id, failure.message);
        worst.get_or_insert(failure);
    }
    let first = worst.expect("at least one failure");
    Err(Failure {
        message: "some sequences could not be decoded".into(),
        ..first
    })
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    banner(&[
        ("command", "simulate".into()),
        ("model", args.model.display().to_string()),
        ("sequences", args.sequences.to_string()),
        ("length", args.length.to_string()),
        ("seed", args.seed.to_string()),
    ]);
    let model = load_model(&args.model)?;
    let spec = SimulationSpec {
        emit_truth: args.truth_out.is_some(),
        ..SimulationSpec::uniform(model, args.sequences as usize, args.length as usize, args.seed)
    };
    let (data, truth) = sample_dataset(&spec)?;
    let mut w = BufWriter::new(File::create(&args.data_out)?);
    data.write_csv(&mut w)?;
    w.flush()?;
    if let (Some(path), Some(truth)) = (&args.truth_out, truth) {
        let mut w = BufWriter::new(File::create(path)?);
        write_paths(&mut w, &data, &truth)?;
        w.flush()?;
    }
    Ok(())
}

fn eval(args: EvalArgs, threads: &str) -> Result<(), Failure> {
    banner(&[
        ("command", "eval".into()),
        ("model", args.model.display().to_string()),
        ("data", args.data.display().to_string()),
        ("threads", threads.to_string()),
    ]);
    let model = load_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    println!("{:.16e}", evaluate(&model, &data)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let threads = match cli.threads {
        Some(0) => {
            let f = Failure::usage("--threads must be at least 1");
            eprintln!("error[{}]: {}", f.code, f.message);
            return ExitCode::from(f.exit);
        }
        Some(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error[usage]: {e}");
                return ExitCode::from(2);
            }
            n.to_string()
        }
        None => format!("{}", rayon::current_num_threads()),
    };
    let result = match cli.command {
        Command::Train(a) => train(a, &threads),
        Command::Decode(a) => decode(a, &threads),
        Command::Simulate(a) => simulate(a),
        Command::Eval(a) => eval(a, &threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}
