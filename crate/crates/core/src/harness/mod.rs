//! End-to-end experiments: simulate, encode and parse through the wire
//! format, calibrate, align, filter and report.
//!
//! Every run is single-threaded and fully determined by its config and seed.

pub mod config;
pub mod report;

use std::io;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, Mode, ProfileKind};
pub use report::{AccuracyTable, DynamicRow, StaticRow, TestReport, AXES};

use crate::affine::{
    load_pgm, save_pgm, warp, AffineError, CameraModel, FrameBuffer, PgmError, WarpParams,
};
use crate::fusion::{
    confidence, exceedance_rate, BoresightFilter, FilterDiagnostics, FusionError,
    MisalignmentEstimate, UpdateRecord,
};
use crate::geometry::{EulerAngles, GRAVITY};
use crate::ingestion::{
    align_streams, decode_log, encode_log, split_streams, ParseStats, Sample, WireError,
};
use crate::sensors::{
    calibrate_static, simulate_trajectory, time_ms, AccModel, AccSample, Calibration, ImuModel,
    ImuSample, SensorError, TruthState,
};

/// Exceedance rate above which the audit reports a mistuned filter.
pub const AUDIT_THRESHOLD: f64 = 0.01;

/// Smallest measurement noise accepted for moving runs, m/s².
pub const DYNAMIC_MIN_R_SIGMA: f64 = 0.015;

/// Fraction of updates, counted from the end, averaged for the reported estimate.
pub const AVERAGE_WINDOW: f64 = 0.1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("simulate: {0}")]
    Simulate(SensorError),
    #[error("encode: {0}")]
    Encode(WireError),
    #[error("calibrate: {0}")]
    Calibrate(SensorError),
    #[error("align: {0}")]
    Align(String),
    #[error("filter: {0}")]
    Filter(FusionError),
    #[error("warp: {0}")]
    Warp(#[from] AffineError),
    #[error("image: {0}")]
    Image(#[from] PgmError),
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for bad data or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Truth and raw instrument streams of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub truth: Vec<TruthState>,
    pub imu: Vec<ImuSample>,
    pub acc: Vec<AccSample>,
}

impl SimulatedRun {
    /// Both streams interleaved in time order, IMU first at equal timestamps.
    pub fn samples(&self) -> Vec<Sample> {
        self.imu
            .iter()
            .zip(&self.acc)
            .flat_map(|(i, a)| [Sample::Imu(*i), Sample::Acc(*a)])
            .collect()
    }
}

/// The sensor is aligned during calibration and misaligned afterwards.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulatedRun, HarnessError> {
    cfg.validate()?;
    let truth = simulate_trajectory(&cfg.maneuver_profile()).map_err(HarnessError::Simulate)?;
    let (imu_errors, acc_errors) = cfg.seeded_errors();
    let mut imu_model = ImuModel::new(imu_errors);
    let mut acc_model = AccModel::new(acc_errors);
    let cal_end = time_ms(cfg.calibration);
    let mut imu = Vec::with_capacity(truth.len());
    let mut acc = Vec::with_capacity(truth.len());
    for s in &truth {
        let mis = if time_ms(s.t) < cal_end {
            EulerAngles::ZERO
        } else {
            cfg.misalignment
        };
        imu.push(imu_model.sample(s));
        acc.push(acc_model.sample(s, mis));
    }
    Ok(SimulatedRun { truth, imu, acc })
}

/// Everything the fusion stage produced.
#[derive(Debug, Clone)]
pub struct FusionRun {
    pub calibration: Calibration,
    pub parse: ParseStats,
    pub epochs: usize,
    pub alignment_dropped: usize,
    pub estimate: MisalignmentEstimate,
    pub history: Vec<UpdateRecord>,
    pub diagnostics: FilterDiagnostics,
}

/// Calibrates on the samples before `cfg.calibration` and filters the rest.
pub fn fuse(samples: &[Sample], cfg: &ExperimentConfig) -> Result<FusionRun, HarnessError> {
    let (imu, acc) = split_streams(samples);
    let cal_end = time_ms(cfg.calibration);
    let (cal_imu, run_imu): (Vec<_>, Vec<_>) = imu.iter().partition(|s| s.t_ms < cal_end);
    let (cal_acc, run_acc): (Vec<_>, Vec<_>) = acc.iter().partition(|s| s.t_ms < cal_end);
    let calibration =
        calibrate_static(&cal_imu, &cal_acc, GRAVITY).map_err(HarnessError::Calibrate)?;
    log::debug!("calibration: {calibration:?}");

    let run_imu: Vec<_> = run_imu.iter().map(|s| calibration.correct_imu(s)).collect();
    let run_acc: Vec<_> = run_acc.iter().map(|s| calibration.correct_acc(s)).collect();
    let alignment = align_streams(&run_imu, &run_acc);
    if let Some(d) = alignment.diagnostic {
        return Err(HarnessError::Align(d));
    }
    if alignment.dropped > 0 {
        log::warn!("{} ACC samples outside the IMU span", alignment.dropped);
    }

    let mut filter = BoresightFilter::new(cfg.filter)
        .map_err(HarnessError::Filter)?
        .with_history();
    filter.run(&alignment.epochs);
    let estimate = *filter
        .estimate()
        .ok_or(HarnessError::Filter(FusionError::NoUpdates))?;
    if estimate.update_count == 0 {
        return Err(HarnessError::Filter(FusionError::NoUpdates));
    }
    Ok(FusionRun {
        calibration,
        parse: ParseStats::default(),
        epochs: alignment.epochs.len(),
        alignment_dropped: alignment.dropped,
        estimate,
        diagnostics: filter.diagnostics(),
        history: filter.take_history(),
    })
}

/// Decodes a raw `.sbl` byte log and fuses it.
pub fn fuse_log(bytes: &[u8], cfg: &ExperimentConfig) -> Result<FusionRun, HarnessError> {
    let (samples, stats) = decode_log(bytes);
    if stats.dropped() > 0 {
        log::warn!(
            "log: {} frames dropped ({} bad checksum, {} unknown kind)",
            stats.dropped(),
            stats.bad_checksum,
            stats.unknown_kind
        );
    }
    let mut run = fuse(&samples, cfg)?;
    run.parse = stats;
    Ok(run)
}

/// Simulation through the wire format into the filter.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<FusionRun, HarnessError> {
    let sim = simulate(cfg)?;
    let bytes = encode_log(&sim.samples()).map_err(HarnessError::Encode)?;
    fuse_log(&bytes, cfg)
}

/// Summarizes a fusion run against the configured truth.
pub fn build_report(
    cfg: &ExperimentConfig,
    run: &FusionRun,
    runtime: std::time::Duration,
) -> Result<TestReport, HarnessError> {
    let n = run.history.len();
    if n == 0 {
        return Err(HarnessError::Filter(FusionError::NoUpdates));
    }
    let window = ((n as f64 * AVERAGE_WINDOW).ceil() as usize).clamp(1, n);
    let mut avg = [0.0; 3];
    for r in &run.history[n - window..] {
        for (a, e) in avg.iter_mut().zip(r.eps_deg) {
            *a += e;
        }
    }
    let avg_est_deg = avg.map(|a| a / window as f64);
    let confidence_deg = confidence(&run.estimate);
    let p0_deg = cfg.filter.p0_sigma.to_degrees();
    Ok(TestReport {
        mode: cfg.mode,
        true_deg: cfg.misalignment.to_degrees(),
        avg_est_deg,
        confidence_deg,
        observed: confidence_deg.map(|c| c < 0.5 * p0_deg),
        exceedance_rate: exceedance_rate(&run.estimate).map_err(HarnessError::Filter)?,
        update_count: run.estimate.update_count,
        runtime,
    })
}

/// Runs the full pipeline and reports, timing the whole run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(TestReport, FusionRun), HarnessError> {
    let start = Instant::now();
    let run = run_pipeline(cfg)?;
    let report = build_report(cfg, &run, start.elapsed())?;
    Ok((report, run))
}

fn require_mode(cfg: &ExperimentConfig, mode: Mode) -> Result<(), HarnessError> {
    if cfg.mode != mode {
        return Err(ConfigError::Invalid(format!(
            "{mode} test needs mode = {mode}, config has mode = {}",
            cfg.mode
        ))
        .into());
    }
    Ok(())
}

pub fn run_static_test(cfg: &ExperimentConfig) -> Result<TestReport, HarnessError> {
    require_mode(cfg, Mode::Static)?;
    Ok(run_experiment(cfg)?.0)
}

/// Raises `filter.r_sigma` to at least [`DYNAMIC_MIN_R_SIGMA`] before running.
pub fn run_dynamic_test(cfg: &ExperimentConfig) -> Result<TestReport, HarnessError> {
    require_mode(cfg, Mode::Dynamic)?;
    let mut cfg = cfg.clone();
    if cfg.filter.r_sigma < DYNAMIC_MIN_R_SIGMA {
        log::warn!(
            "r_sigma {} too small for a moving vehicle, using {DYNAMIC_MIN_R_SIGMA}",
            cfg.filter.r_sigma
        );
        cfg.filter.r_sigma = DYNAMIC_MIN_R_SIGMA;
    }
    Ok(run_experiment(&cfg)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSummary {
    pub exceedance_rate: f64,
    pub exceed_count: u64,
    pub update_count: u64,
}

impl AuditSummary {
    pub fn passed(&self) -> bool {
        self.exceedance_rate <= AUDIT_THRESHOLD
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "updates={} exceedances={} exceedance_rate={:.5} threshold={} status={}",
            self.update_count,
            self.exceed_count,
            self.exceedance_rate,
            AUDIT_THRESHOLD,
            if self.passed() {
                "ok"
            } else {
                "increase r_sigma"
            }
        )
    }
}

#[derive(Debug, Clone)]
pub struct Audit {
    pub summary: AuditSummary,
    /// Per-update residuals and their 3-sigma bounds.
    pub records: Vec<UpdateRecord>,
}

/// Runs the configured experiment as is (no r_sigma floor) and checks how
/// often residuals leave their 3-sigma bound.
pub fn run_residual_audit(cfg: &ExperimentConfig) -> Result<Audit, HarnessError> {
    let run = run_pipeline(cfg)?;
    audit_run(run)
}

pub fn audit_run(run: FusionRun) -> Result<Audit, HarnessError> {
    let est = run.estimate;
    Ok(Audit {
        summary: AuditSummary {
            exceedance_rate: exceedance_rate(&est).map_err(HarnessError::Filter)?,
            exceed_count: est.exceed_count,
            update_count: est.update_count,
        },
        records: run.history,
    })
}

/// Warps `frame` by the correction for `misalignment`, centred on the frame.
pub fn correct_frame(
    frame: &FrameBuffer,
    misalignment: EulerAngles,
    focal_px: f64,
) -> Result<FrameBuffer, HarnessError> {
    let cam = CameraModel {
        focal_px,
        ..CameraModel::for_frame(frame)
    };
    cam.validate(frame)?;
    Ok(warp(
        frame,
        WarpParams::correction(misalignment, &cam),
        cam.centre,
    )?)
}

/// Reads a PGM, applies the correction for `misalignment` and writes the result.
pub fn run_warp(
    input: &Path,
    output: &Path,
    misalignment: EulerAngles,
    focal_px: f64,
) -> Result<FrameBuffer, HarnessError> {
    let frame = load_pgm(input)?;
    let out = correct_frame(&frame, misalignment, focal_px)?;
    save_pgm(output, &out)?;
    Ok(out)
}

/// The six single-axis static maneuvers: pitch, roll and yaw each way.
pub fn static_maneuvers() -> [(&'static str, usize, EulerAngles); 6] {
    [
        ("pitch +1", 1, EulerAngles::from_degrees(0.0, 1.0, 0.0)),
        ("pitch -1", 1, EulerAngles::from_degrees(0.0, -1.0, 0.0)),
        ("roll +2", 0, EulerAngles::from_degrees(2.0, 0.0, 0.0)),
        ("roll -2", 0, EulerAngles::from_degrees(-2.0, 0.0, 0.0)),
        ("yaw +1", 2, EulerAngles::from_degrees(0.0, 0.0, 1.0)),
        ("yaw -1", 2, EulerAngles::from_degrees(0.0, 0.0, -1.0)),
    ]
}

/// Six static maneuvers on `static_base`, then one dynamic run of
/// `dynamic_base` per seed.
pub fn run_accuracy_table(
    static_base: &ExperimentConfig,
    dynamic_base: &ExperimentConfig,
    dynamic_seeds: &[u64],
) -> Result<AccuracyTable, HarnessError> {
    let mut table = AccuracyTable::default();
    for (label, axis, mis) in static_maneuvers() {
        let cfg = ExperimentConfig {
            misalignment: mis,
            ..static_base.clone()
        };
        let report = run_static_test(&cfg)?;
        log::info!(
            "{label}: {:.3} deg in {:?}",
            report.avg_est_deg[axis],
            report.runtime
        );
        table.static_rows.push(StaticRow {
            label: label.to_string(),
            axis,
            report,
        });
    }
    for (i, &seed) in dynamic_seeds.iter().enumerate() {
        let cfg = ExperimentConfig {
            seed,
            ..dynamic_base.clone()
        };
        table.dynamic_rows.push(DynamicRow {
            label: format!("drive {}", i + 1),
            report: run_dynamic_test(&cfg)?,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::InstrumentErrors;

    fn short(mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            duration: 60.0,
            ..ExperimentConfig::default_for(mode)
        }
    }

    fn noiseless(mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.imu = InstrumentErrors::noiseless();
        cfg.acc = InstrumentErrors::noiseless();
        cfg
    }

    #[test]
    fn simulation_aligned_during_calibration() {
        let mut cfg = noiseless(short(Mode::Static));
        cfg.misalignment = EulerAngles::from_degrees(0.0, 1.0, 0.0);
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.imu.len(), 9000);
        assert_eq!(sim.acc[2999].ax, 0.0);
        assert!((sim.acc[3000].ax - GRAVITY * 1f64.to_radians().sin()).abs() < 1e-12);
    }

    #[test]
    fn samples_interleave_in_time_order() {
        let sim = simulate(&short(Mode::Static)).unwrap();
        let s = sim.samples();
        assert_eq!(s.len(), 2 * sim.imu.len());
        assert!(s.windows(2).all(|w| w[0].t_ms() <= w[1].t_ms()));
        assert!(matches!(s[0], Sample::Imu(_)));
    }

    #[test]
    fn zero_misalignment_zero_noise_estimates_zero() {
        let cfg = noiseless(short(Mode::Static));
        let (report, run) = run_experiment(&cfg).unwrap();
        assert_eq!(run.parse.dropped(), 0);
        for i in 0..3 {
            if report.observed[i] {
                assert!(report.avg_est_deg[i].abs() <= 1e-9, "{report:?}");
            }
        }
        assert_eq!(report.observed, [true, true, false]);
        assert_eq!(report.exceedance_rate, 0.0);
    }

    #[test]
    fn calibration_removes_biases() {
        let mut cfg = noiseless(short(Mode::Static));
        cfg.imu.accel_bias = crate::geometry::Vec3::new(0.05, -0.02, 0.1);
        // quantization to 1 mm/s² limits how exactly the bias is recovered
        let run = run_pipeline(&cfg).unwrap();
        let b = run.calibration.imu.accel_bias;
        assert!((b.x - 0.05).abs() < 1e-3 && (b.y + 0.02).abs() < 1e-3 && (b.z - 0.1).abs() < 1e-3);
    }

    #[test]
    fn static_test_rejects_dynamic_config() {
        let e = run_static_test(&short(Mode::Dynamic)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = run_dynamic_test(&short(Mode::Static)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn fuse_reports_stage_on_missing_calibration() {
        let e = fuse(&[], &short(Mode::Static)).unwrap_err();
        assert!(matches!(e, HarnessError::Calibrate(_)));
        assert!(e.to_string().starts_with("calibrate:"));
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn dynamic_floor_on_r_sigma() {
        let mut cfg = short(Mode::Dynamic);
        cfg.filter.r_sigma = 0.003;
        let floored = run_dynamic_test(&cfg).unwrap();
        cfg.filter.r_sigma = DYNAMIC_MIN_R_SIGMA;
        let explicit = run_dynamic_test(&cfg).unwrap();
        assert_eq!(floored.avg_est_deg, explicit.avg_est_deg);
    }

    #[test]
    fn zero_noise_audit_has_no_exceedances() {
        let mut cfg = noiseless(short(Mode::Static));
        cfg.misalignment = EulerAngles::from_degrees(0.5, -0.5, 0.0);
        let audit = run_residual_audit(&cfg).unwrap();
        assert_eq!(audit.summary.exceedance_rate, 0.0);
        assert_eq!(audit.summary.exit_code(), 0);
        assert_eq!(audit.records.len() as u64, audit.summary.update_count);
    }

    #[test]
    fn zero_angle_correction_is_identity() {
        let f = crate::affine::tile_pattern(64, 48, 8);
        let out = correct_frame(&f, EulerAngles::ZERO, 500.0).unwrap();
        assert_eq!(out.pixels(), f.pixels());
    }
}
