//! `repsim`: layer-wise representation similarity and prediction agreement
//! between pairs of model checkpoints.

mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repsim_core::engine::{compare_models, ComparisonSpec};
use repsim_core::linalg::DEFAULT_TRUNCATION;
use repsim_core::prediction::{
    auc_summary, prediction_similarity, read_predictions, PredictionSet,
};
use repsim_core::report::{
    aggregate_folds, emit, Emit, FoldProvenance, FoldRun, Format, SimilarityReport,
};
use repsim_core::sampling::{
    SamplePlan, DEFAULT_CHANNEL_CAP, DEFAULT_REPEATS, DEFAULT_TARGET_ROWS,
};
use repsim_core::store::{Activations, Manifest};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "repsim",
    version,
    about = "Compare model checkpoints layer by layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-layer CCA similarity between two activation manifests.
    Cca(CcaArgs),
    /// Agreement of correct/incorrect predictions between two dumps.
    Predsim {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Per-class and overall ROC AUC of one prediction dump.
    Auc {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Merge JSON similarity reports into one multi-fold report.
    Aggregate {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value = "aggregate")]
        label: String,
    },
    /// Structural checks on a manifest (.json) or prediction dump (.jsonl).
    Validate { path: PathBuf },
}

#[derive(Args)]
struct Output {
    /// Report path; the extension picks the format unless --format is given.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<Format>,
}

impl Output {
    fn format(&self) -> Result<Format, CliError> {
        self.format
            .or_else(|| Format::from_path(&self.out))
            .ok_or_else(|| {
                CliError::usage(format!(
                    "cannot infer format from {}; use a .csv/.json extension or --format",
                    self.out.display()
                ))
            })
    }
}

#[derive(Args)]
struct CcaArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value_t = DEFAULT_TARGET_ROWS)]
    target_rows: usize,
    /// Channels sampled per layer and side.
    #[arg(long, default_value_t = DEFAULT_CHANNEL_CAP)]
    channels: usize,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long, env = "REPSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Relative eigenvalue cutoff for the covariance whitening.
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    trunc: f64,
    /// Worker threads for per-layer jobs; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    label: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Cca(args) => cmd_cca(args),
        Command::Predsim { a, b, output } => {
            let format = output.format()?;
            let (a, b) = (load_dump(&a)?, load_dump(&b)?);
            write(&prediction_similarity(&a, &b)?, format, &output.out)
        }
        Command::Auc { input, output } => {
            let format = output.format()?;
            write(&auc_summary(&load_dump(&input)?)?, format, &output.out)
        }
        Command::Aggregate {
            inputs,
            output,
            label,
        } => {
            let format = output.format()?;
            if let Some(bad) = inputs
                .iter()
                .find(|p| Format::from_path(p) != Some(Format::Json))
            {
                return Err(CliError::usage(format!(
                    "{}: only JSON reports can be aggregated",
                    bad.display()
                )));
            }
            let reports = inputs
                .iter()
                .map(|p| SimilarityReport::load(p))
                .collect::<Result<Vec<_>, _>>()?;
            write(
                &SimilarityReport::stack(&label, &reports)?,
                format,
                &output.out,
            )
        }
        Command::Validate { path } => cmd_validate(&path),
    }
}

fn cmd_cca(args: CcaArgs) -> Result<(), CliError> {
    let format = args.output.format()?;
    let plan = SamplePlan::new(args.target_rows, args.channels, args.repeats, args.seed)
        .map_err(|e| CliError::usage(e.to_string()))?;
    if !(0.0..1.0).contains(&args.trunc) {
        return Err(CliError::usage(format!(
            "--trunc {} outside [0, 1)",
            args.trunc
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} workers: {e}", args.jobs)))?;

    let spec = ComparisonSpec {
        manifest_a: Manifest::load(&args.a)?,
        manifest_b: Manifest::load(&args.b)?,
        plan,
        trunc: args.trunc,
    };
    let layers = pool.install(|| compare_models(&spec))?;

    let (ma, mb) = (&spec.manifest_a, &spec.manifest_b);
    let label = args.label.unwrap_or_else(|| {
        format!(
            "{}:{} vs {}:{}",
            ma.model_id, ma.checkpoint_tag, mb.model_id, mb.checkpoint_tag
        )
    });
    let stimulus_source = if ma.stimulus_source == mb.stimulus_source {
        ma.stimulus_source.clone()
    } else {
        format!("{} | {}", ma.stimulus_source, mb.stimulus_source)
    };
    let fold = FoldRun {
        provenance: Some(FoldProvenance {
            model_a: ma.model_id.clone(),
            checkpoint_a: ma.checkpoint_tag.clone(),
            manifest_seed_a: ma.seed,
            model_b: mb.model_id.clone(),
            checkpoint_b: mb.checkpoint_tag.clone(),
            manifest_seed_b: mb.seed,
            stimulus_source,
            plan,
            trunc: args.trunc,
        }),
        layers,
    };
    write(&aggregate_folds(&label, &[fold])?, format, &args.output.out)
}

fn cmd_validate(path: &Path) -> Result<(), CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let manifest = Manifest::load(path)?;
            println!(
                "manifest {}:{} seed={} layers={}",
                manifest.model_id,
                manifest.checkpoint_tag,
                manifest.seed,
                manifest.layers.len()
            );
            for (i, entry) in manifest.layers.iter().enumerate() {
                let tensor = manifest.load_layer(i)?;
                println!(
                    "layer {} shape={} dtype={:?} ok",
                    entry.name,
                    tensor.shape(),
                    tensor.dtype()
                );
            }
            Ok(())
        }
        Some("jsonl") => {
            let set = load_dump(path)?;
            println!(
                "predictions {} classes={} examples={} accuracy={} ok",
                set.model_id(),
                set.num_classes(),
                set.len(),
                set.accuracy()
            );
            Ok(())
        }
        _ => Err(CliError::usage(format!(
            "{}: expected a manifest (.json) or prediction dump (.jsonl)",
            path.display()
        ))),
    }
}

fn load_dump(path: &Path) -> Result<PredictionSet, CliError> {
    read_predictions(path).map_err(|e| CliError::from(e).with("path", path.display().to_string()))
}

fn write<R: Emit>(report: &R, format: Format, out: &Path) -> Result<(), CliError> {
    emit(report, format, out).map_err(CliError::from)
}
