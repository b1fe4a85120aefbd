//! Command-line front end. Exit codes: 0 success, 1 failed pairs or runtime
//! error, 2 invalid configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sfid::pipeline::{run_eval, run_pipeline, write_report, RunConfig, Strategy};
use sfid::synth::{write_corpus, NoiseConfig, SynthConfig};
use sfid::Error;

#[derive(Parser)]
#[command(name = "sfid", version, about = "Open-vocabulary change detection over decoupled segmentation heads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect changes with instance matching (or any --strategy).
    Run(RunArgs),
    /// Detect changes with a pixel-level baseline: pmc, l1 or l2.
    Baseline(RunArgs),
    /// Score a prediction directory against a ground-truth directory.
    Eval(EvalArgs),
    /// Write a synthetic corpus of scene pairs with ground truth.
    Synth(SynthArgs),
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest file or directory; repeatable.
    #[arg(long = "input", short = 'i')]
    inputs: Vec<PathBuf>,
    /// Comma-separated subset of categories to emit.
    #[arg(long, value_delimiter = ',')]
    vocabulary: Option<Vec<String>>,
    #[arg(long)]
    tau_match: Option<f64>,
    #[arg(long)]
    background_threshold: Option<f64>,
    #[arg(long)]
    min_area: Option<usize>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    baseline_threshold: Option<f64>,
    /// Worker threads (falls back to SFID_WORKERS, then the CPU count).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> sfid::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs;
        }
        macro_rules! apply {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        apply!(tau_match, background_threshold, min_area, strategy, baseline_threshold, workers, output);
        if self.vocabulary.is_some() {
            cfg.vocabulary = self.vocabulary;
        }
        if cfg.inputs.is_empty() {
            return Err(Error::InvalidConfig("no inputs given (--input or config `inputs`)".into()));
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted `<pair_id>.<category>.sfid` masks.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth masks with the same names.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write report.json and report.txt; the table is printed either way.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short = 'o')]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from the pseudo-change preset instead of the noise-free default.
    #[arg(long)]
    pseudo_change: bool,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    categories: Option<usize>,
    #[arg(long)]
    min_objects: Option<usize>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    change_fraction: Option<f64>,
    #[arg(long)]
    semantic_jitter: Option<f64>,
    #[arg(long)]
    confidence_jitter: Option<f64>,
    #[arg(long)]
    presence_flip: Option<f64>,
    #[arg(long)]
    edge_softness: Option<f64>,
    #[arg(long)]
    illumination: Option<f64>,
    #[arg(long)]
    registration_shift: Option<usize>,
}

impl SynthArgs {
    fn resolve(&self) -> SynthConfig {
        let mut cfg = if self.pseudo_change {
            SynthConfig::pseudo_change(self.seed)
        } else {
            SynthConfig {
                seed: self.seed,
                ..SynthConfig::default()
            }
        };
        macro_rules! apply {
            ($target:expr, $($field:ident),*) => { $(if let Some(v) = self.$field { $target.$field = v; })* };
        }
        apply!(cfg, height, width, categories, change_fraction);
        let n: &mut NoiseConfig = &mut cfg.noise;
        apply!(n, semantic_jitter, confidence_jitter, presence_flip, edge_softness, illumination, registration_shift);
        if let Some(lo) = self.min_objects {
            cfg.objects_per_image.0 = lo;
        }
        if let Some(hi) = self.max_objects {
            cfg.objects_per_image.1 = hi;
        }
        cfg
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::InvalidConfig(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn detect(args: RunArgs, baseline: bool) -> ExitCode {
    let cfg = match args.resolve() {
        Ok(cfg) => cfg,
        Err(e) => return exit_for(&e),
    };
    if baseline && cfg.strategy == Strategy::Instance {
        return exit_for(&Error::InvalidConfig(
            "baseline needs --strategy pmc, l1 or l2".into(),
        ));
    }
    match run_pipeline(&cfg) {
        Ok(run) => {
            for pair in run.pairs.iter().filter(|p| p.error.is_some()) {
                eprintln!(
                    "failed: {}: {}",
                    pair.manifest.display(),
                    pair.error.as_deref().unwrap_or_default()
                );
            }
            eprintln!(
                "{} pairs ok, {} failed, masks in {}",
                run.succeeded,
                run.failed,
                run.config.output.display()
            );
            if run.has_failures() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => exit_for(&e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => detect(args, false),
        Command::Baseline(args) => detect(args, true),
        Command::Eval(args) => {
            let result = run_eval(&args.pred, &args.gt).and_then(|report| {
                print!("{}", report.to_table());
                match &args.output {
                    Some(dir) => write_report(&report, dir),
                    None => Ok(()),
                }
            });
            result.map_or_else(|e| exit_for(&e), |()| ExitCode::SUCCESS)
        }
        Command::Synth(args) => {
            let cfg = args.resolve();
            let result = cfg
                .validate()
                .and_then(|()| write_corpus(&cfg, args.count, &args.output));
            match result {
                Ok(layout) => {
                    eprintln!(
                        "{} pairs under {}, ground truth in {}",
                        layout.manifests.len(),
                        layout.scenes.display(),
                        layout.ground_truth.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => exit_for(&e),
            }
        }
    }
}
