use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bands_core::export::{polylines_to_json, polylines_to_svg};
use bands_core::extract::{scene_curves, CurveKind};
use bands_core::raster::rasterize_with_threads;
use bands_core::render::render_scene;
use bands_core::Scene;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bands",
    version,
    about = "Density-adaptive procedural bands with stable ids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the scene to a binary PPM image.
    Render(OutputArgs),
    /// Extract labeled band borders to SVG or JSON.
    Curves(OutputArgs),
    /// Extract centerlines of fully deployed bands to SVG or JSON.
    Centerlines(OutputArgs),
    /// Print diagnostics for the scene's primary band set.
    Info(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scene config file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct OutputArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

#[derive(Clone, Copy)]
enum CurveFormat {
    Svg,
    Json,
}

fn curve_format(path: &Path) -> anyhow::Result<CurveFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("svg") => Ok(CurveFormat::Svg),
        Some("json") => Ok(CurveFormat::Json),
        _ => bail!("output {} must end in .svg or .json", path.display()),
    }
}

fn load(args: &CommonArgs) -> Result<Scene, Failure> {
    Scene::load(&args.config)
        .with_context(|| format!("invalid config {}", args.config.display()))
        .map_err(config_err)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime_err)
}

fn render(args: &OutputArgs) -> Result<(), Failure> {
    let scene = load(&args.common)?;
    let out = &scene.output;
    let image =
        render_scene(&scene, out.width, out.height, args.common.threads).map_err(runtime_err)?;
    write(&args.out, &image.encode_ppm())
}

fn curves(args: &OutputArgs, centerlines: bool) -> Result<(), Failure> {
    let format = curve_format(&args.out).map_err(config_err)?;
    let scene = load(&args.common)?;
    let kind = if centerlines {
        CurveKind::Centerlines
    } else {
        CurveKind::Borders
    };
    let polys = scene_curves(&scene, kind, args.common.threads).map_err(runtime_err)?;
    let text = match format {
        CurveFormat::Svg => polylines_to_svg(&polys, scene.view),
        CurveFormat::Json => polylines_to_json(&polys),
    };
    write(&args.out, text.as_bytes())
}

fn info(args: &CommonArgs) -> Result<(), Failure> {
    let scene = load(args)?;
    let out = &scene.output;
    let map =
        rasterize_with_threads(&scene, out.width, out.height, args.threads).map_err(runtime_err)?;
    let s = map.summary(&scene.primary.bands);
    println!("resolution: {}x{}", out.width, out.height);
    println!("distinct ids: {}", s.distinct_ids);
    println!("just-appeared fraction: {:.4}", s.just_appeared_fraction);
    println!("closures per transition:");
    if s.closures_per_transition.is_empty() {
        println!("  none");
    }
    for (level, n) in &s.closures_per_transition {
        println!("  level {} -> {}: {}", level, level - 1, n);
    }
    if s.clamped > 0 {
        let (lo, hi) = scene.primary.bands.density_range();
        println!(
            "warning: density clamped to [{lo}, {hi}] in {} of {} cells",
            s.clamped, s.cells
        );
    }
    if s.invalid > 0 {
        println!(
            "warning: {} of {} cells could not be evaluated",
            s.invalid, s.cells
        );
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
    let result = match &cli.command {
        Command::Render(args) => render(args),
        Command::Curves(args) => curves(args, false),
        Command::Centerlines(args) => curves(args, true),
        Command::Info(args) => info(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
