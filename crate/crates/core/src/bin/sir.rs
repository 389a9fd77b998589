use clap::{Args, Parser, Subcommand};
use sir_core::pipeline::{self, PipelineError, RunConfig, CONFIG_KEYS};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sir", version, about = "Sub-image recapture and memory-bounded multi-view stereo", after_long_help = CONFIG_KEYS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic terrain fixture (images, ground-truth depths, sparse model)
    OracleGen,
    /// Split images into sub-images with matching cameras
    Recapture,
    /// Group views into overlapping clusters
    Cluster,
    /// Estimate a depth map per view, one cluster at a time
    Depth,
    /// Filter depth maps and fuse them into a point cloud
    Fuse,
    /// Run the whole pipeline in the configured mode
    Reconstruct,
    /// Score a run against a fixture's ground truth
    Evaluate,
    /// Print the analytic memory report
    Bench,
}

#[derive(Args)]
struct Options {
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. --set sweep.window=9 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Sparse model directory
    #[arg(long, global = true)]
    model_dir: Option<PathBuf>,
    /// Image directory
    #[arg(long, global = true)]
    image_dir: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Fixture directory holding ground truth
    #[arg(long, global = true)]
    gt_dir: Option<PathBuf>,
    /// sir | downsample | native
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Sub-image grid as IxJ
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Longest image side in downsample mode
    #[arg(long, global = true)]
    max_image_size: Option<u32>,
    /// Target views per cluster
    #[arg(long, global = true)]
    cluster_size: Option<usize>,
    /// Source images per reference view
    #[arg(long, global = true)]
    num_sources: Option<usize>,
    /// Worker threads (SIR_WORKERS takes precedence)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Oracle scene seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Options {
    /// Flag values as `(key, json)` pairs, followed by the `--set` pairs.
    fn overrides(&self) -> Result<Vec<(String, String)>, PipelineError> {
        let mut out = Vec::new();
        let mut string = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((key.to_string(), serde_json::Value::String(v).to_string()));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        string("model_dir", path(&self.model_dir));
        string("image_dir", path(&self.image_dir));
        string("output_dir", path(&self.output_dir));
        string("gt_dir", path(&self.gt_dir));
        string("mode", self.mode.clone());
        string("grid", self.grid.clone());
        let numbers = [
            ("max_image_size", self.max_image_size.map(u64::from)),
            ("cluster_size", self.cluster_size.map(|v| v as u64)),
            ("num_sources", self.num_sources.map(|v| v as u64)),
            ("workers", self.workers.map(|v| v as u64)),
            ("seed", self.seed),
        ];
        for (key, v) in numbers {
            if let Some(v) = v {
                out.push((key.to_string(), v.to_string()));
            }
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| PipelineError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            out.push((k.trim().to_string(), v.to_string()));
        }
        Ok(out)
    }

    fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let config = base.with_overrides(&self.overrides()?)?;
        config.validate()?;
        Ok(config)
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let config = cli.options.resolve()?;
    pipeline::with_workers(&config, || -> Result<(), PipelineError> {
        match cli.command {
            Command::OracleGen => {
                pipeline::cmd_oracle_gen(&config)?;
                println!("fixture written to {}", config.output_dir.display());
            }
            Command::Recapture => {
                pipeline::cmd_recapture(&config)?;
                println!("recaptured model written to {}", config.output_dir.display());
            }
            Command::Cluster => {
                let clusters = pipeline::cmd_cluster(&config)?;
                print!("{}", sir_core::clustering::format_clusters(&clusters));
            }
            Command::Depth => {
                let report = pipeline::cmd_depth(&config)?;
                println!("{}", report.to_table());
            }
            Command::Fuse => {
                let cloud = pipeline::cmd_fuse(&config)?;
                println!("{} points", cloud.len());
            }
            Command::Reconstruct => {
                let summary = pipeline::cmd_reconstruct(&config)?;
                println!("{}", summary.memory.to_table());
                println!("{} points", summary.cloud_points);
                if let Some(m) = &summary.metrics {
                    println!("{}", pretty(m));
                }
            }
            Command::Evaluate => println!("{}", pretty(&pipeline::cmd_evaluate(&config)?)),
            Command::Bench => {
                let report = pipeline::cmd_bench(&config)?;
                println!("{}", report.to_table());
                println!("{}", report.to_json());
            }
        }
        Ok(())
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
