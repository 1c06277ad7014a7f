//! `dqloam`: run odometry, evaluate trajectories, generate synthetic scenes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dqloam::descriptor::{dump_descriptors, extract_descriptors};
use dqloam::eval::{self, EvalError};
use dqloam::exec;
use dqloam::io::{self, IoError, StampedPose};
use dqloam::pipeline::{ConfigError, PipelineConfig};
use dqloam::run::{self, InputFormat, RunError, ScanSource};
use dqloam::synth::SyntheticScene;

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_CANTCREAT: u8 = 73;
const EX_CONFIG: u8 = 78;
const EX_FATAL_SCAN: u8 = 2;

#[derive(Parser)]
#[command(name = "dqloam", version, about = "LiDAR odometry on dual quaternions")]
struct Cli {
    /// Worker threads for the data-parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Noise seed for synthetic scenes.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run odometry over a scan sequence.
    Run(RunArgs),
    /// Compare a trajectory against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic scene as scan files plus ground truth.
    Synth(SynthArgs),
    /// Print the triangle descriptors of one scan, 24 numbers per line.
    DumpDescriptors(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scan file or directory; a scene file for `synthetic`.
    #[arg(long)]
    input: PathBuf,
    /// kitti-bin, ascii-xyz or synthetic.
    #[arg(long)]
    format: InputFormat,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Also write the dense map and the descriptor map.
    #[arg(long)]
    export_maps: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated trajectory, KITTI or TUM.
    #[arg(long)]
    traj: PathBuf,
    /// Ground truth, KITTI or TUM.
    #[arg(long)]
    gt: PathBuf,
    /// Directory for `x,y` path series.
    #[arg(long, value_name = "DIR")]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: InputFormat,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scan index within a directory or synthetic scene.
    #[arg(long, default_value_t = 0)]
    scan: usize,
}

/// A failed command: exit code plus message.
struct Failure(u8, String);

impl Failure {
    fn new(code: u8, msg: impl std::fmt::Display) -> Self {
        Failure(code, msg.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(msg) = init_logging() {
        eprintln!("dqloam: {msg}");
        return ExitCode::from(EX_USAGE);
    }
    let threads = cli.threads;
    if threads == Some(0) {
        eprintln!("dqloam: --threads must be at least 1");
        return ExitCode::from(EX_USAGE);
    }
    let seed = cli.seed;
    let result = exec::with_threads(threads, move || match cli.command {
        Command::Run(a) => cmd_run(&a, seed),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a, seed),
        Command::DumpDescriptors(a) => cmd_dump(&a, seed),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("dqloam: {msg}");
            ExitCode::from(code)
        }
    }
}

fn init_logging() -> Result<(), String> {
    let level = match std::env::var("DQLOAM_LOG").as_deref() {
        Err(_) | Ok("") | Ok("info") => log::LevelFilter::Info,
        Ok("error") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => return Err(format!("DQLOAM_LOG={other:?}: expected error, info or debug")),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = io::read_to_string(path).map_err(|e| Failure::new(EX_NOINPUT, e))?;
    PipelineConfig::parse(&text).map_err(|e| match e {
        ConfigError::UnknownKey { line, key } => Failure::new(EX_CONFIG, format!("{}:{line}: unknown config key {key:?}", path.display())),
        other => Failure::new(EX_CONFIG, format!("{}: {other}", path.display())),
    })
}

fn run_failure(e: RunError) -> Failure {
    let code = match &e {
        RunError::Input(_) | RunError::NoScans { .. } => EX_NOINPUT,
        RunError::Scene(_) => EX_DATAERR,
        RunError::Scan { .. } | RunError::Pipeline(_) => EX_FATAL_SCAN,
        RunError::Output(_) => EX_CANTCREAT,
    };
    Failure::new(code, e)
}

fn cmd_run(a: &RunArgs, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    let source = ScanSource::open(&a.input, a.format, seed).map_err(run_failure)?;
    let summary = run::run_sequence(&source, cfg, &a.output, a.export_maps).map_err(|e| {
        let f = run_failure(e);
        if f.0 == EX_FATAL_SCAN {
            Failure(f.0, format!("{}; partial outputs kept in {}", f.1, a.output.display()))
        } else {
            f
        }
    })?;
    log::info!(
        "{} scans ({} coasted) in {:.2} s, outputs in {}",
        summary.scans,
        summary.coasted,
        summary.elapsed.as_secs_f64(),
        a.output.display()
    );
    Ok(())
}

fn read_any_trajectory(path: &Path) -> Result<Vec<StampedPose>, Failure> {
    let text = io::read_to_string(path).map_err(|e| Failure::new(EX_NOINPUT, e))?;
    let format = io::sniff_trajectory_format(&text)
        .ok_or_else(|| Failure::new(EX_DATAERR, format!("{}: neither KITTI (12 fields) nor TUM (8 fields)", path.display())))?;
    io::parse_trajectory(&text, format, path).map_err(|e| Failure::new(EX_DATAERR, e))
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let est = read_any_trajectory(&a.traj)?;
    let gt = read_any_trajectory(&a.gt)?;
    let result = eval::evaluate(&est, &gt).map_err(|e: EvalError| Failure::new(EX_DATAERR, e))?;
    if let Some(dir) = &a.plot_data {
        write_plot_data(dir, &est, &gt).map_err(|e| Failure::new(EX_CANTCREAT, e))?;
    }
    println!("{result}");
    println!("{}", result.machine_line());
    Ok(())
}

/// `x,y` series of both paths, the estimate moved onto the first
/// ground-truth pose.
fn write_plot_data(dir: &Path, est: &[StampedPose], gt: &[StampedPose]) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let align = match (est.first(), gt.first()) {
        (Some(e), Some(g)) => g.pose * e.pose.inverse(),
        _ => dqloam::UnitDualQuaternion::IDENTITY,
    };
    let series = |poses: &[StampedPose], a: &dqloam::UnitDualQuaternion| {
        let mut s = String::from("x,y\n");
        for p in poses {
            let t = (*a * p.pose).translation();
            let _ = writeln!(s, "{},{}", io::fmt_sig9(t.x), io::fmt_sig9(t.y));
        }
        s
    };
    io::write_string(&dir.join("trajectory_xy.csv"), &series(est, &align))?;
    io::write_string(&dir.join("groundtruth_xy.csv"), &series(gt, &dqloam::UnitDualQuaternion::IDENTITY))
}

fn read_scene(path: &Path, seed: Option<u64>) -> Result<SyntheticScene, Failure> {
    let text = io::read_to_string(path).map_err(|e| Failure::new(EX_NOINPUT, e))?;
    let mut scene = SyntheticScene::parse(&text).map_err(|e| Failure::new(EX_DATAERR, format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        scene.seed = s;
    }
    Ok(scene)
}

fn cmd_synth(a: &SynthArgs, seed: Option<u64>) -> Result<(), Failure> {
    let scene = read_scene(&a.scene, seed)?;
    let n = run::write_synthetic_sequence(&scene, &a.output).map_err(run_failure)?;
    log::info!("{n} scans written to {}", a.output.display());
    Ok(())
}

fn cmd_dump(a: &DumpArgs, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load_config(a.config.as_deref())?;
    let source = ScanSource::open(&a.input, a.format, seed).map_err(run_failure)?;
    if a.scan >= source.len() {
        return Err(Failure::new(EX_USAGE, format!("--scan {} but the input has {} scans", a.scan, source.len())));
    }
    let (_, cloud) = source.load(a.scan).map_err(|e| Failure::new(EX_NOINPUT, e))?;
    print!("{}", dump_descriptors(&extract_descriptors(&cloud, &cfg.descriptor)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
