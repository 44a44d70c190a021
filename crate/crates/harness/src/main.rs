use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Args, Parser, Subcommand};
use vosprop_core::Similarity;
use vosprop_harness::analyze::analyze_sweep;
use vosprop_harness::evaluate::{evaluate_dirs, evaluate_manifest, write_report};
use vosprop_harness::propagate::run_propagation;
use vosprop_harness::sweep::{run_sweep, SweepSpec};
use vosprop_harness::synthetic::{generate, CellSpec, SyntheticSpec};
use vosprop_harness::{read_json, FilterKind, RadiusUnits, RunConfig, RunOverrides};

#[derive(Parser)]
#[command(
    name = "vosprop",
    version,
    about = "Label propagation for video object segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate first-frame masks through every video of a manifest.
    Propagate(RunArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvalArgs),
    /// Propagate and evaluate every (layer, timestep) cell.
    Sweep(SweepArgs),
    /// FG-BG percentage per sweep cell and its rank correlation with J&F.
    AnalyzeCorrs(AnalyzeArgs),
    /// Write a synthetic dataset of moving shapes.
    GenSynthetic(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset index or single video manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    affinity: Option<Similarity>,
    #[arg(long)]
    topk: Option<usize>,
    /// Softmax temperature (default 0.07 for cos, 1 otherwise).
    #[arg(long = "temp")]
    temperature: Option<f64>,
    #[arg(long)]
    memory_n: Option<usize>,
    #[arg(long, action = ArgAction::Set)]
    pin_first: Option<bool>,
    #[arg(long)]
    filter: Option<FilterKind>,
    /// MAG radius (default 25√2).
    #[arg(long)]
    mag_radius: Option<f64>,
    /// Units of --mag-radius: grid cells or image pixels.
    #[arg(long)]
    mag_units: Option<RadiusUnits>,
    #[arg(long)]
    layer: Option<u32>,
    #[arg(long)]
    timestep: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// FG-BG percentage cutoff (default H*W).
    #[arg(long)]
    fg_bg_k: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunOverrides::from_file(p)?,
            None => RunOverrides::default(),
        };
        let flags = RunOverrides {
            manifest: self.manifest,
            affinity: self.affinity,
            topk: self.topk,
            temperature: self.temperature,
            memory_n: self.memory_n,
            pin_first: self.pin_first,
            filter: self.filter,
            mag_radius: self.mag_radius,
            mag_units: self.mag_units,
            layer: self.layer,
            timestep: self.timestep,
            out: self.out,
            threads: self.threads,
            fg_bg_k: self.fg_bg_k,
        };
        RunConfig::resolve(flags.over(file))
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted masks, one subdirectory per video.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth tree with the same layout.
    #[arg(
        long,
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    gt: Option<PathBuf>,
    /// Take ground truth from a manifest instead.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Report directory (default: the prediction directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    timesteps: Vec<u32>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Output directory of a previous sweep.
    #[arg(long)]
    sweep: PathBuf,
    /// Report directory (default: the sweep directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// FG-BG percentage cutoff (default H*W).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Full generator spec as JSON; other generator flags are ignored.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    videos: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 2)]
    objects: u8,
    /// Feature-grid height.
    #[arg(long, default_value_t = 24)]
    height: usize,
    /// Feature-grid width.
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    /// Image pixels per grid cell.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Distance between signatures.
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    confusers: usize,
    /// Keep shapes still.
    #[arg(long = "static")]
    still: bool,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    layers: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    timesteps: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl SynthArgs {
    fn spec(&self) -> Result<SyntheticSpec> {
        if let Some(path) = &self.spec {
            return read_json(path);
        }
        let cells = self
            .layers
            .iter()
            .flat_map(|&layer| {
                self.timesteps.iter().map(move |&timestep| CellSpec {
                    layer,
                    timestep,
                    noise: self.noise,
                    separation: self.separation,
                })
            })
            .collect();
        Ok(SyntheticSpec {
            videos: self.videos,
            frames: self.frames,
            objects: self.objects,
            height: self.height,
            width: self.width,
            channels: self.channels,
            stride: self.stride,
            confusers: self.confusers,
            motion: !self.still,
            seed: self.seed,
            cells,
        })
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Propagate(args) => {
            let cfg = args.resolve()?;
            let record = run_propagation(&cfg)?;
            for v in &record.videos {
                match &v.error {
                    Some(e) => eprintln!("{}: failed after {:.3}s: {e}", v.video, v.seconds),
                    None => eprintln!("{}: {} frames in {:.3}s", v.video, v.frames, v.seconds),
                }
            }
            println!(
                "{} of {} videos propagated into {}",
                record.videos.len() - record.failures().count(),
                record.videos.len(),
                cfg.out.display()
            );
            Ok(record.all_ok())
        }
        Command::Evaluate(args) => {
            let result = match (&args.gt, &args.manifest) {
                (Some(gt), _) => evaluate_dirs(&args.pred, gt, args.threads)?,
                (None, Some(m)) => evaluate_manifest(&args.pred, m, args.threads)?,
                (None, None) => unreachable!("clap requires one of --gt and --manifest"),
            };
            write_report(&result, args.out.as_ref().unwrap_or(&args.pred))?;
            print!("{}", result.to_table());
            Ok(true)
        }
        Command::Sweep(args) => {
            let template = args.run.resolve()?;
            let report = run_sweep(&SweepSpec {
                layers: args.layers,
                timesteps: args.timesteps,
                template,
            })?;
            print!("{}", report.to_csv());
            if let Some(best) = report.best {
                println!("best: {best}");
            }
            Ok(report
                .cells
                .iter()
                .all(|c| c.status != vosprop_harness::sweep::CellStatus::Failed))
        }
        Command::AnalyzeCorrs(args) => {
            let out = args.out.clone().unwrap_or_else(|| args.sweep.clone());
            let analysis = analyze_sweep(&args.sweep, &out, args.k, args.threads)?;
            print!("{}", analysis.to_csv());
            println!("spearman_rho: {}", analysis.spearman_rho);
            Ok(true)
        }
        Command::GenSynthetic(args) => {
            let spec = args.spec()?;
            let index =
                vosprop_harness::with_threads(args.threads, || generate(&spec, &args.out))??;
            println!("{}", index.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
