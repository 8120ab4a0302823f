//! Command-line driver for the shapebench pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
//! violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use shapebench::baselines::{SimilarityMode, RBMD_VERSION};
use shapebench::dataset::Frame;
use shapebench::pipeline::{self, Method, RunConfig};
use shapebench::shape::VXBG_VERSION;
use shapebench::stats::{EvalReport, KsMode};
use shapebench::Error;

#[derive(Parser)]
#[command(
    name = "shapebench",
    about = "Single-view reconstruction benchmarking on voxel shapes"
)]
#[command(disable_version_flag = true, subcommand_required = false)]
struct Cli {
    /// Print the program and file format versions.
    #[arg(short = 'V', long)]
    version: bool,

    #[command(flatten)]
    opts: Overrides,

    #[command(subcommand)]
    command: Option<Command>,
}

/// Flags override the `--config` file, which overrides the defaults.
#[derive(Args, Default)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    classes: Option<usize>,
    #[arg(long, global = true)]
    shapes_per_class: Option<usize>,
    #[arg(long, global = true)]
    jitter: Option<f64>,
    #[arg(long, global = true)]
    contamination: Option<f64>,
    /// object or viewer
    #[arg(long, global = true)]
    frame: Option<Frame>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true)]
    low_resolution: Option<usize>,
    #[arg(long, global = true)]
    poses_per_shape: Option<usize>,
    /// Comma-separated: cluster, retrieval, oracle_nn
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// cosine or euclidean
    #[arg(long, global = true, value_parser = parse_similarity)]
    similarity: Option<SimilarityMode>,
    /// F-score threshold, as a fraction of the side length
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Surface samples per shape
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    cd_clamp: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// raw or binned
    #[arg(long, global = true, value_parser = parse_ks_mode)]
    ks_mode: Option<KsMode>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress (repeat for debug output)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (meshes, manifest and split)
    Gen,
    /// Recompute the train/val/test split
    Split,
    /// Voxelize the dataset's meshes into ground-truth grids
    Materialize,
    /// Fit a baseline on the training set
    Fit { method: Method },
    /// Predict test shapes with every configured method
    Predict,
    /// Score predictions and write report.json
    Eval,
    /// Derive tables from report.json
    Stats {
        #[command(subcommand)]
        what: StatsCommand,
        /// Report to read (default: <output>/report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write visualizations
    Viz {
        #[command(subcommand)]
        what: VizCommand,
    },
    /// Every stage in order: gen, materialize, fit, predict, eval, stats
    Run,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Pairwise KS heatmap
    Ks {
        #[arg(long, default_value = "iou")]
        metric: String,
    },
    /// Mean F-score over the threshold sweep
    Sweep,
    /// Class size against per-class mean IoU
    Corr,
    /// Cutoff (survival) curves for precision, recall and F-score
    Cutoff,
    /// Every table plus summary.json
    All,
}

#[derive(Subcommand)]
enum VizCommand {
    /// Distance-colored precision and recall point clouds for one prediction
    Pr {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        item: String,
    },
}

fn parse_similarity(s: &str) -> Result<SimilarityMode, String> {
    match s {
        "cosine" => Ok(SimilarityMode::Cosine),
        "euclidean" => Ok(SimilarityMode::Euclidean),
        _ => Err(format!("unknown similarity {s:?} (expected cosine or euclidean)")),
    }
}

fn parse_ks_mode(s: &str) -> Result<KsMode, String> {
    match s {
        "raw" => Ok(KsMode::Raw),
        "binned" => Ok(KsMode::Binned),
        _ => Err(format!("unknown KS mode {s:?} (expected raw or binned)")),
    }
}

impl Overrides {
    fn resolve(&self) -> shapebench::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            dataset,
            output,
            seed,
            classes,
            shapes_per_class,
            jitter,
            contamination,
            frame,
            resolution
        );
        set!(
            low_resolution,
            poses_per_shape,
            methods,
            k,
            max_iters,
            dim,
            similarity,
            alpha,
            ks_mode,
            workers
        );
        if let Some(d) = self.d {
            c.metrics.d = d;
        }
        if let Some(n) = self.samples {
            c.metrics.sample_count = n;
        }
        if self.cd_clamp.is_some() {
            c.metrics.cd_clamp = self.cd_clamp;
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn execute(command: Command, config: &RunConfig) -> shapebench::Result<()> {
    match command {
        Command::Gen => {
            let (m, s) = pipeline::run_gen(config)?;
            println!(
                "{} shapes, {} classes: {} train, {} val, {} test",
                m.shapes.len(),
                m.classes.len(),
                s.train.len(),
                s.val.len(),
                s.test.len()
            );
        }
        Command::Split => {
            let s = pipeline::run_split(config)?;
            println!("{} train, {} val, {} test", s.train.len(), s.val.len(), s.test.len());
        }
        Command::Materialize => {
            let index = pipeline::run_materialize(config)?;
            for set in &index.sets {
                println!("{} {} {}", set.resolution, set.frame, set.entries.len());
            }
        }
        Command::Fit { method } => match pipeline::run_fit(config, method)? {
            Some(path) => println!("{}", path.display()),
            None => println!("{method} needs no model"),
        },
        Command::Predict => {
            let records = pipeline::run_predict(config)?;
            println!("{} predictions", records.len());
        }
        Command::Eval => {
            let report = pipeline::evaluate_run(config)?;
            println!("{} entries, {} skips", report.entries().len(), report.skips().len());
        }
        Command::Stats { what, report } => {
            let path = report.unwrap_or_else(|| config.report_path());
            let report = EvalReport::load(&path)?;
            match what {
                StatsCommand::Ks { metric } => print_paths(&pipeline::emit_ks(config, &report, &[metric.as_str()])?.0),
                StatsCommand::Sweep => print_paths(&[pipeline::emit_sweep(config, &report)?]),
                StatsCommand::Corr => {
                    let (path, coefficients) = pipeline::emit_correlation(config, &report)?;
                    print_paths(&[path]);
                    for (method, c) in coefficients {
                        match c {
                            Some(c) => println!("{method} {c}"),
                            None => println!("{method} undefined"),
                        }
                    }
                }
                StatsCommand::Cutoff => print_paths(&pipeline::emit_cutoffs(config, &report)?),
                StatsCommand::All => print_paths(&pipeline::emit_reports(config, &report)?),
            }
        }
        Command::Viz {
            what: VizCommand::Pr { method, item },
        } => {
            let (p, r) = pipeline::viz_pr(config, method, &item)?;
            print_paths(&[p, r]);
        }
        Command::Run => {
            let report = pipeline::run_all(config)?;
            println!("{} entries, {} skips", report.entries().len(), report.skips().len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.version {
        println!("shapebench {}", env!("CARGO_PKG_VERSION"));
        println!("VXBG format {VXBG_VERSION}");
        println!("RBMD format {RBMD_VERSION}");
        return ExitCode::SUCCESS;
    }
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let Some(command) = cli.command else {
        eprintln!("error: no command given; see `shapebench --help`");
        return ExitCode::from(1);
    };
    let config = match cli.opts.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if config.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
        {
            error!("could not size the worker pool: {e}");
        }
    }
    match execute(command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = failure_code(&e);
            if code == 3 {
                eprintln!("internal error: {e}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}

/// Failures after the configuration was accepted: broken invariants are
/// internal errors, anything else is a problem with the data.
fn failure_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_codes() {
        assert_eq!(failure_code(&Error::Invariant("twice".into())), 3);
        assert_eq!(failure_code(&Error::EmptyShape), 2);
        assert_eq!(failure_code(&Error::InvalidArgument("x".into())), 2);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"k": 4, "dim": 5}"#).unwrap();
        let cli = Cli::try_parse_from([
            "shapebench",
            "eval",
            "--config",
            path.to_str().unwrap(),
            "--k",
            "7",
            "--d",
            "0.02",
        ])
        .unwrap();
        let c = cli.opts.resolve().unwrap();
        assert_eq!((c.k, c.dim, c.metrics.d), (7, 5, 0.02));
    }
}
