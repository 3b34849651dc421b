//! `qmc`: train, apply and check density-matrix classifiers from the shell.
//!
//! Exit codes: 0 success, 1 verification or prediction failure, 2 usage
//! error, 3 I/O error.

mod encoder;
mod heatmap;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qmc_core::data::{format_f64, generate, read_csv, write_csv, DatasetKind, DEFAULT_SEED, DEFAULT_SIZE};
use qmc_core::predictor::{evaluate, predict_batch, uniform_probabilities, PredictPath};
use qmc_core::timing::{time_prediction, time_training, DEFAULT_TRAIN_SIZES};
use qmc_core::verify::{run_verification, Fault, VerifyConfig};
use qmc_core::{fit, load_model, save_model, EncoderSpec, FeatureMap, LabeledDataset, ModelFormat, QmcError, TrainedModel, TrainingMode};

use encoder::{EncoderArgs, Encoding};
use heatmap::Bounds;

#[derive(Debug, Parser)]
#[command(name = "qmc", version, about = "Density-matrix classification by quantum measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum State {
    Pure,
    Mixed,
    Classical,
}

impl From<State> for TrainingMode {
    fn from(s: State) -> Self {
        match s {
            State::Pure => TrainingMode::Pure,
            State::Mixed => TrainingMode::Mixed,
            State::Classical => TrainingMode::Classical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PathChoice {
    Fast,
    Naive,
}

impl From<PathChoice> for PredictPath {
    fn from(p: PathChoice) -> Self {
        match p {
            PathChoice::Fast => PredictPath::Fast,
            PathChoice::Naive => PredictPath::Naive,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a benchmark dataset as CSV.
    Dataset {
        /// moons, circles or spirals.
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        n: usize,
        /// Defaults to the dataset's own noise level.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a labeled CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        encoder: EncoderArgs,
        #[arg(long, value_enum, default_value = "mixed")]
        state: State,
        #[arg(long)]
        out: PathBuf,
        /// Write the length-prefixed binary format instead of JSON.
        #[arg(long)]
        binary: bool,
    },
    /// Write per-row predictions as CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fast")]
        path: PathChoice,
    },
    /// Print accuracy on a labeled CSV as JSON.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        path: PathChoice,
    },
    /// Export class-0 probabilities over a 2-D grid.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        /// Points per axis.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, allow_hyphen_values = true)]
        xmin: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        xmax: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ymin: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ymax: Option<f64>,
        /// Grid CSV; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a binary PPM image.
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Run the seeded self-checks.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Time training growth and the two prediction paths; prints JSON.
    Bench {
        #[arg(long, value_enum, default_value = "coherent")]
        encoding: Encoding,
        #[arg(long, value_enum, default_value = "mixed")]
        state: State,
        /// Training set sizes.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TRAIN_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// States per feature for the training timings.
        #[arg(long, default_value_t = 20)]
        fock: usize,
        /// States per feature for the prediction timings.
        #[arg(long, default_value_t = 16)]
        predict_fock: usize,
        #[arg(long, default_value_t = 5)]
        queries: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// Error with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            error: anyhow!(message.into()),
        }
    }

    fn failed(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    fn io(path: &Path, error: io::Error) -> Self {
        Self {
            code: 3,
            error: anyhow!("i/o error on {}: {error}", path.display()),
        }
    }
}

impl From<QmcError> for Failure {
    fn from(e: QmcError) -> Self {
        let code = match e {
            QmcError::Io { .. } => 3,
            QmcError::UnknownDataset(_)
            | QmcError::InvalidSplit(_)
            | QmcError::InvalidParameter(_)
            | QmcError::UnsupportedDimension(_) => 2,
            _ => 1,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn with_context(context: String) -> impl FnOnce(QmcError) -> Failure {
    move |e| {
        let mut f = Failure::from(e);
        f.error = f.error.context(context);
        f
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

/// Writes to `path`, or stdout when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &serde_json::Value) -> CmdResult {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}").map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

fn load(path: &Path) -> Result<TrainedModel, Failure> {
    load_model(path).map_err(with_context(format!("loading model {}", path.display())))
}

fn load_matching_data(path: &Path, model: &TrainedModel) -> Result<LabeledDataset, Failure> {
    let data = read_csv(path).map_err(with_context(format!("reading {}", path.display())))?;
    if !data.is_empty() && data.num_features() != model.spec().num_features {
        return Err(QmcError::Schema(format!(
            "{} has {} features, the model expects {}",
            path.display(),
            data.num_features(),
            model.spec().num_features
        ))
        .into());
    }
    Ok(data)
}

fn cmd_dataset(name: &str, n: usize, noise: Option<f64>, seed: u64, out: &Path) -> CmdResult {
    let kind: DatasetKind = name.parse()?;
    let data = generate(kind, n, noise.unwrap_or(kind.default_noise()), seed)?;
    write_csv(&data, out)?;
    Ok(())
}

fn cmd_train(data: &Path, encoder: &EncoderArgs, state: State, out: &Path, binary: bool) -> CmdResult {
    let dataset = read_csv(data).map_err(with_context(format!("reading {}", data.display())))?;
    let map = encoder.feature_map(dataset.num_features()).map_err(Failure::usage)?;
    let spec = EncoderSpec::new(map, dataset.num_features())?;
    let model = fit(&dataset, spec, state.into()).map_err(with_context("training failed".into()))?;
    let format = if binary { ModelFormat::Binary } else { ModelFormat::Json };
    save_model(&model, out, format)?;
    print_json(&json!({
        "n_train": model.n_train,
        "k": model.shape.dim_x,
        "l": model.shape.dim_y,
        "mode": model.mode,
        "purity": model.purity(),
    }))
}

fn cmd_predict(model_path: &Path, data_path: &Path, out: Option<&Path>, path: PredictPath) -> CmdResult {
    let model = load(model_path)?;
    let data = load_matching_data(data_path, &model)?;
    let out_path = out.unwrap_or(Path::new("<stdout>"));
    let io_err = |e| Failure::io(out_path, e);
    let mut w = output(out)?;
    let mut header = vec!["row".to_string(), "label".to_string()];
    header.extend((0..model.num_classes()).map(|c| format!("p_{c}")));
    header.extend(["support".to_string(), "zero_support".to_string()]);
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    if data.is_empty() {
        eprintln!("warning: {} has no rows; wrote header only", data_path.display());
        return w.flush().map_err(io_err);
    }
    let rows: Vec<&[f64]> = data.rows().collect();
    let mut zero_support = 0;
    for (i, result) in predict_batch(&model, &rows, path).into_iter().enumerate() {
        let (label, probabilities, support, flag) = match result {
            Ok(r) => (r.label, r.probabilities, r.support, 0),
            Err(QmcError::ZeroSupport { support }) => {
                zero_support += 1;
                let p = uniform_probabilities(model.num_classes());
                let label = model.labels[qmc_core::predictor::predict_label(&p)].clone();
                (label, p, support, 1)
            }
            Err(e) => return Err(Failure::failed(anyhow!(e).context(format!("predicting row {i}")))),
        };
        let mut fields = vec![i.to_string(), label];
        fields.extend(probabilities.iter().map(|&p| format_f64(p)));
        fields.push(format_f64(support));
        fields.push(flag.to_string());
        writeln!(w, "{}", fields.join(",")).map_err(io_err)?;
    }
    if zero_support > 0 {
        eprintln!("warning: {zero_support} rows had zero support; reported uniform probabilities");
    }
    w.flush().map_err(io_err)
}

fn cmd_evaluate(model_path: &Path, data_path: &Path, path: PredictPath) -> CmdResult {
    let model = load(model_path)?;
    let data = load_matching_data(data_path, &model)?;
    if data.is_empty() {
        eprintln!("warning: {} has no rows", data_path.display());
        return print_json(&json!({ "accuracy": null, "n": 0, "zero_support_count": 0 }));
    }
    let e = evaluate(&model, &data, path)?;
    if e.zero_support_count > 0 {
        eprintln!("warning: {} rows had zero support", e.zero_support_count);
    }
    print_json(&serde_json::to_value(e).map_err(|e| Failure::failed(e.into()))?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_heatmap(
    model_path: &Path,
    resolution: usize,
    xmin: Option<f64>,
    xmax: Option<f64>,
    ymin: Option<f64>,
    ymax: Option<f64>,
    out: Option<&Path>,
    ppm: Option<&Path>,
) -> CmdResult {
    let model = load(model_path)?;
    if model.spec().num_features != 2 {
        return Err(QmcError::UnsupportedDimension(model.spec().num_features).into());
    }
    let d = heatmap::default_bounds(&model);
    let bounds = Bounds {
        xmin: xmin.unwrap_or(d.xmin),
        xmax: xmax.unwrap_or(d.xmax),
        ymin: ymin.unwrap_or(d.ymin),
        ymax: ymax.unwrap_or(d.ymax),
    };
    if !(bounds.xmax > bounds.xmin && bounds.ymax > bounds.ymin) {
        return Err(Failure::usage("heatmap bounds must satisfy xmin < xmax and ymin < ymax"));
    }
    let grid = heatmap::compute(&model, bounds, resolution)?;
    let out_path = out.unwrap_or(Path::new("<stdout>"));
    let io_err = |e| Failure::io(out_path, e);
    let mut w = output(out)?;
    writeln!(w, "x1,x2,p_class0").map_err(io_err)?;
    for (pt, p) in grid.points.iter().zip(&grid.p_class0) {
        writeln!(w, "{},{},{}", format_f64(pt[0]), format_f64(pt[1]), format_f64(*p)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    if let Some(ppm) = ppm {
        heatmap::write_ppm(&grid, create(ppm)?).map_err(|e| Failure::io(ppm, e))?;
    }
    if grid.zero_support > 0 {
        eprintln!("warning: {} grid cells had zero support; reported uniform probabilities", grid.zero_support);
    }
    Ok(())
}

fn cmd_verify(seed: u64, inject_fault: bool) -> CmdResult {
    let report = run_verification(&VerifyConfig {
        seed,
        fault: inject_fault.then_some(Fault::PerturbRho),
        ..VerifyConfig::default()
    });
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failed().map(|c| c.name.as_str()).collect();
        Err(Failure::failed(anyhow!("failed checks: {}", failed.join(", "))))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    encoding: Encoding,
    state: State,
    sizes: &[usize],
    repeats: usize,
    fock: usize,
    predict_fock: usize,
    queries: usize,
    seed: u64,
) -> CmdResult {
    let map_for = |m: usize| -> Result<FeatureMap, Failure> {
        let args = EncoderArgs {
            encoding,
            fock: Some(m),
            beta: None,
            gamma: None,
            r: None,
            rff_dim: None,
            rff_seed: None,
        };
        match encoding {
            Encoding::Onehot => Err(Failure::usage("bench uses continuous data; onehot is not supported")),
            _ => args.feature_map(2).map_err(Failure::usage),
        }
    };
    let mode: TrainingMode = state.into();
    let train = time_training(map_for(fock)?, mode, sizes, repeats, seed)?;
    let predict = time_prediction(map_for(predict_fock)?, mode, 500, queries, seed)?;
    let ratios: serde_json::Map<String, serde_json::Value> = train
        .step_ratios()
        .into_iter()
        .map(|(a, b, r)| (format!("{b}/{a}"), json!(r)))
        .collect();
    let overall = match (sizes.iter().min(), sizes.iter().max()) {
        (Some(&lo), Some(&hi)) if hi > lo => train.ratio(lo, hi),
        _ => None,
    };
    print_json(&json!({
        "encoder": train.encoder,
        "mode": mode,
        "train": train,
        "train_ratios": ratios,
        "train_ratio_max_min": overall,
        "predict": predict,
    }))
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var("QMC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage(format!("QMC_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::failed(e.into()))
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match cli.command {
        Command::Dataset { name, n, noise, seed, out } => cmd_dataset(&name, n, noise, seed, &out),
        Command::Train {
            data,
            encoder,
            state,
            out,
            binary,
        } => cmd_train(&data, &encoder, state, &out, binary),
        Command::Predict { model, data, out, path } => cmd_predict(&model, &data, out.as_deref(), path.into()),
        Command::Evaluate { model, data, path } => cmd_evaluate(&model, &data, path.into()),
        Command::Heatmap {
            model,
            grid,
            xmin,
            xmax,
            ymin,
            ymax,
            out,
            ppm,
        } => cmd_heatmap(&model, grid, xmin, xmax, ymin, ymax, out.as_deref(), ppm.as_deref()),
        Command::Verify { seed, inject_fault } => cmd_verify(seed, inject_fault),
        Command::Bench {
            encoding,
            state,
            sizes,
            repeats,
            fock,
            predict_fock,
            queries,
            seed,
        } => cmd_bench(encoding, state, &sizes, repeats, fock, predict_fock, queries, seed),
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message before them.
fn describe(error: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in error.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
