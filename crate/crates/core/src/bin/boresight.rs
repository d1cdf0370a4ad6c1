use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use boresight::fusion::write_update_csv;
use boresight::geometry::EulerAngles;
use boresight::harness::{
    audit_run, build_report, fuse_log, run_accuracy_table, run_dynamic_test, run_experiment,
    run_static_test, run_warp, simulate, ConfigError, ExperimentConfig, HarnessError, Mode,
    TestReport,
};
use boresight::ingestion::encode_log;
use boresight::sensors::{write_acc_csv, write_imu_csv, write_truth_csv};

#[derive(Parser)]
#[command(version, about = "Estimate and correct sensor boresight misalignment")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: config output_dir, ./out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Dynamic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Static => Mode::Static,
            ModeArg::Dynamic => Mode::Dynamic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write the binary log plus CSVs
    Simulate {
        #[arg(long, value_enum, default_value = "static")]
        mode: ModeArg,
    },
    /// Estimate misalignment from a recorded .sbl log
    Fuse {
        /// Log to read [default: <out-dir>/run.sbl]
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "static")]
        mode: ModeArg,
    },
    /// Stationary run with the configured misalignment
    StaticTest,
    /// Moving run with the configured misalignment
    DynamicTest,
    /// Residual 3-sigma audit; exits 1 when the filter is mistuned
    Audit {
        #[arg(long, value_enum, default_value = "static")]
        mode: ModeArg,
    },
    /// Correct a PGM image for an estimated misalignment
    Warp {
        #[arg(long)]
        input: PathBuf,
        /// [default: <out-dir>/corrected.pgm]
        #[arg(long)]
        output: Option<PathBuf>,
        /// Estimated misalignment, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        roll: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        pitch: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw: f64,
        /// Focal length in pixels [default: camera.focal_px]
        #[arg(long)]
        focal: Option<f64>,
    },
    /// Six static maneuvers and two drives in one table
    Report {
        /// Config for the drives (the main --config sets the static runs)
        #[arg(long)]
        dynamic_config: Option<PathBuf>,
        /// Seeds of the drives
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        seeds: Vec<u64>,
    },
}

fn load(
    path: Option<&Path>,
    mode: Mode,
    seed: Option<u64>,
) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p, mode)?,
        None => ExperimentConfig::default_for(mode),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_report(dir: &Path, stem: &str, report: &TestReport) -> Result<(), HarnessError> {
    let table = report.to_table();
    print!("{table}");
    eprintln!("runtime {:.3} s", report.runtime.as_secs_f64());
    fs::write(dir.join(format!("{stem}.txt")), table)?;
    report.write_csv(create(&dir.join(format!("{stem}.csv")))?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let common = &cli.common;
    let config = common.config.as_deref();
    match cli.command {
        Command::Simulate { mode } => {
            let cfg = load(config, mode.into(), common.seed)?;
            let dir = out_dir(common, &cfg)?;
            let sim = simulate(&cfg)?;
            let bytes = encode_log(&sim.samples()).map_err(HarnessError::Encode)?;
            fs::write(dir.join("run.sbl"), &bytes)?;
            write_truth_csv(create(&dir.join("truth.csv"))?, &sim.truth)?;
            write_imu_csv(create(&dir.join("imu.csv"))?, &sim.imu)?;
            write_acc_csv(create(&dir.join("acc.csv"))?, &sim.acc)?;
            println!(
                "{} samples, {} bytes -> {}",
                sim.imu.len() + sim.acc.len(),
                bytes.len(),
                dir.display()
            );
        }
        Command::Fuse { log, mode } => {
            let cfg = load(config, mode.into(), common.seed)?;
            let dir = out_dir(common, &cfg)?;
            let path = log.unwrap_or_else(|| dir.join("run.sbl"));
            let bytes = fs::read(&path)?;
            let start = std::time::Instant::now();
            let run = fuse_log(&bytes, &cfg)?;
            let report = build_report(&cfg, &run, start.elapsed())?;
            eprintln!(
                "parsed {} frames, dropped {}; {} epochs",
                run.parse.frames,
                run.parse.dropped(),
                run.epochs
            );
            write_update_csv(create(&dir.join("residuals.csv"))?, &run.history)?;
            write_report(&dir, "report", &report)?;
        }
        Command::StaticTest => {
            let cfg = load(config, Mode::Static, common.seed)?;
            let dir = out_dir(common, &cfg)?;
            write_report(&dir, "static_report", &run_static_test(&cfg)?)?;
        }
        Command::DynamicTest => {
            let cfg = load(config, Mode::Dynamic, common.seed)?;
            let dir = out_dir(common, &cfg)?;
            write_report(&dir, "dynamic_report", &run_dynamic_test(&cfg)?)?;
        }
        Command::Audit { mode } => {
            let cfg = load(config, mode.into(), common.seed)?;
            let dir = out_dir(common, &cfg)?;
            let (_, run) = run_experiment(&cfg)?;
            let audit = audit_run(run)?;
            write_update_csv(create(&dir.join("residuals.csv"))?, &audit.records)?;
            println!("{}", audit.summary.summary_line());
            return Ok(audit.summary.exit_code());
        }
        Command::Warp {
            input,
            output,
            roll,
            pitch,
            yaw,
            focal,
        } => {
            let cfg = load(config, Mode::Static, common.seed)?;
            let output = match output {
                Some(o) => o,
                None => out_dir(common, &cfg)?.join("corrected.pgm"),
            };
            let estimate = EulerAngles::from_degrees(roll, pitch, yaw);
            let frame = run_warp(&input, &output, estimate, focal.unwrap_or(cfg.focal_px))?;
            println!(
                "{}x{} -> {}",
                frame.width(),
                frame.height(),
                output.display()
            );
        }
        Command::Report {
            dynamic_config,
            seeds,
        } => {
            let static_cfg = load(config, Mode::Static, common.seed)?;
            let dynamic_cfg = load(dynamic_config.as_deref(), Mode::Dynamic, None)?;
            if seeds.is_empty() {
                return Err(
                    ConfigError::Invalid("at least one drive seed is needed".into()).into(),
                );
            }
            let dir = out_dir(common, &static_cfg)?;
            let table = run_accuracy_table(&static_cfg, &dynamic_cfg, &seeds)?;
            let text = table.to_table();
            print!("{text}");
            fs::write(dir.join("accuracy.txt"), text)?;
            table.write_csv(create(&dir.join("accuracy.csv"))?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
