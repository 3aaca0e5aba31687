use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lfdepth::bench::{self, run_benchmark};
use lfdepth::estimator::EstimatorRegistry;
use lfdepth::io::{self, scene};
use lfdepth::linefit::{self, HypothesisGrid};
use lfdepth::metrics::{EvalReport, DEFAULT_BADPIX_THRESHOLD};
use lfdepth::{pipeline, PatternRegistry, PipelineConfig};

#[derive(Parser)]
#[command(name = "lfdepth", version, about = "Depth estimation for 4D light fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate center-view disparity for a scene directory.
    Estimate(EstimateArgs),
    /// Compare a disparity map against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene in the benchmark layout.
    Synth(SynthArgs),
    /// Full-scan line fit without the stereo prior.
    Oracle(OracleArgs),
    /// Run scenes repeatedly and print the results table.
    Bench(BenchArgs),
    /// List registered estimators and Census patterns.
    List,
}

#[derive(Args)]
struct PipelineFlags {
    /// Flat key = value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also match the top and bottom views.
    #[arg(long)]
    top_bottom: bool,
    /// Exclude Sobel edges from the bordered search.
    #[arg(long)]
    edge_exclusion: bool,
    /// Registered estimator name.
    #[arg(long)]
    method: Option<String>,
    /// Census pattern name or "dx,dy; dx,dy; ...".
    #[arg(long)]
    census: Option<String>,
}

impl PipelineFlags {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(p) => PipelineConfig::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(t) = self.threads {
            config.threads = t;
        }
        config.enable_top_bottom |= self.top_bottom;
        config.enable_edge_exclusion |= self.edge_exclusion;
        if let Some(m) = &self.method {
            config.method = m.clone();
        }
        if let Some(c) = &self.census {
            config.census_pattern = PatternRegistry::builtin().resolve(c)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Write intermediate maps as PFMs into this directory.
    #[arg(long)]
    dump_intermediates: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BADPIX_THRESHOLD)]
    threshold: f32,
    /// Runtime in seconds, for the M metric.
    #[arg(long)]
    runtime: Option<f64>,
    /// 8-bit mask image; non-zero pixels are evaluated.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML scene description.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scene directories, run in the given order.
    #[arg(long = "scene", required = true)]
    scenes: Vec<PathBuf>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also time the full-scan line fit on each scene.
    #[arg(long)]
    compare_full_scan: bool,
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let config = args.pipeline.resolve()?;
    let scene = scene::load_scene(&args.input)?;
    let range = config.range.unwrap_or(scene.range);
    let estimator = EstimatorRegistry::builtin();
    let estimator = estimator.get(&config.method)?;
    let out = estimator.estimate(&scene.light_field, range, &config)?;

    io::write_pfm(&out.depth, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(dir) = &args.dump_intermediates {
        match &out.intermediates {
            Some(im) => io::dump_intermediates(dir, im)?,
            None => bail!("estimator `{}` has no intermediate maps", config.method),
        }
    }
    println!("{}", out.timing);
    if let Some(s) = out.stats {
        println!(
            "line fit: {} evaluations over {} pixels, {} bordered (N = {})",
            s.evaluations, s.pixels, s.bordered_pixels, s.hypotheses
        );
    }
    println!("runtime: {:.3} s (decode excluded)", out.timing.total_seconds);
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let result = io::read_pfm(&args.result).with_context(|| format!("reading {}", args.result.display()))?;
    let gt = io::read_pfm(&args.gt).with_context(|| format!("reading {}", args.gt.display()))?;
    let mask = args.mask.as_deref().map(scene::load_mask).transpose()?;
    let report = EvalReport::compute(&result, &gt, args.threshold, args.runtime, mask.as_ref())?;
    println!("{report}");
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()?)?;
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = io::SyntheticSceneSpec::from_file(&args.spec)?;
    let scene = io::write_synthetic(&spec, args.seed, &args.out)?;
    let lf = &scene.light_field;
    println!(
        "wrote {}x{} views of {}x{} to {}",
        lf.n(),
        lf.m(),
        lf.width(),
        lf.height(),
        args.out.display()
    );
    Ok(())
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    let scene = scene::load_scene(&args.input)?;
    let lf = &scene.light_field;
    let grid = HypothesisGrid::new(config.range.unwrap_or(scene.range), lf.n(), config.tau)?;
    let start = Instant::now();
    let map = linefit::full_scan_oracle(lf, &grid, config.h, config.median_kernel);
    let seconds = start.elapsed().as_secs_f64();
    io::write_pfm(&pipeline::to_view_step(&map, lf.n()), &args.output)?;
    println!("full scan over {} hypotheses: {seconds:.3} s", grid.hypotheses() + 1);
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<bool> {
    let config = args.pipeline.resolve()?;
    let report = run_benchmark(&args.scenes, &config, args.reps)?;
    println!("{report}");
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json()?)?;
    }
    if args.compare_full_scan {
        for dir in args.scenes.iter().take(report.scenes.len()) {
            let scene = scene::load_scene(dir)?;
            println!("\n{}:", scene.name());
            println!("{}", bench::compare_full_scan(&scene, &config, args.reps)?);
        }
    }
    Ok(report.is_complete())
}

fn list() {
    println!("estimators:");
    for e in EstimatorRegistry::builtin().iter() {
        println!("  {:<12} {}", e.name(), e.description());
    }
    println!("census patterns:");
    let patterns = PatternRegistry::builtin();
    for name in patterns.names() {
        let len = patterns.get(name).map(|p| p.len()).unwrap_or(0);
        println!("  {name:<12} {len} comparisons");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Estimate(a) => estimate(&a)?,
        Command::Eval(a) => eval(&a)?,
        Command::Synth(a) => synth(&a)?,
        Command::Oracle(a) => oracle(&a)?,
        Command::Bench(a) => return run_bench(&a),
        Command::List => list(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
