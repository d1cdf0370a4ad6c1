//! Truth trajectories, instrument error models and static calibration.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::{dcm_from_euler, EulerAngles, Vec3, GRAVITY};

/// Minimum samples per stream for [`calibrate_static`].
pub const MIN_CALIBRATION_SAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("empty profile")]
    EmptyProfile,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("insufficient calibration data: {imu} IMU and {acc} ACC samples (need {MIN_CALIBRATION_SAMPLES})")]
    InsufficientCalibrationData { imu: usize, acc: usize },
}

/// Ground truth at one sample tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthState {
    pub t: f64,
    /// Specific force in the vehicle frame, m/s².
    pub accel_v: Vec3,
    /// Angular rate in the vehicle frame, rad/s.
    pub rate_v: Vec3,
}

/// One constant-command stretch of a maneuver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub longitudinal: f64,
    pub lateral: f64,
    pub yaw_rate: f64,
    /// Platform attitude relative to level.
    pub tilt: EulerAngles,
}

impl Segment {
    pub fn rest(duration: f64) -> Self {
        Self {
            duration,
            longitudinal: 0.0,
            lateral: 0.0,
            yaw_rate: 0.0,
            tilt: EulerAngles::ZERO,
        }
    }

    pub fn tilted(duration: f64, tilt: EulerAngles) -> Self {
        Self {
            tilt,
            ..Self::rest(duration)
        }
    }

    pub fn drive(duration: f64, longitudinal: f64, lateral: f64, yaw_rate: f64) -> Self {
        Self {
            duration,
            longitudinal,
            lateral,
            yaw_rate,
            tilt: EulerAngles::ZERO,
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.longitudinal == 0.0 && self.lateral == 0.0 && self.yaw_rate == 0.0
    }

    /// Specific force sensed in the vehicle frame during this segment.
    pub fn specific_force(&self) -> Vec3 {
        let reaction = dcm_from_euler(self.tilt)
            .transpose()
            .rotate(&Vec3::new(0.0, 0.0, GRAVITY));
        Vec3::new(self.longitudinal, self.lateral, 0.0) + reaction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverProfile {
    pub segments: Vec<Segment>,
    pub sample_rate: f64,
}

impl ManeuverProfile {
    pub fn new(segments: Vec<Segment>, sample_rate: f64) -> Self {
        Self {
            segments,
            sample_rate,
        }
    }

    /// Repeats `pattern` until `duration` seconds are covered, truncating
    /// the final segment.
    pub fn cycled(pattern: &[Segment], duration: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        let cycle: f64 = pattern.iter().map(|s| s.duration).sum();
        if pattern.is_empty() || cycle <= 0.0 {
            return out;
        }
        let mut remaining = duration;
        'outer: loop {
            for seg in pattern {
                if remaining <= 1e-9 {
                    break 'outer;
                }
                let d = seg.duration.min(remaining);
                out.push(Segment {
                    duration: d,
                    ..*seg
                });
                remaining -= d;
            }
        }
        out
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if self.segments.is_empty() {
            return Err(SensorError::EmptyProfile);
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(SensorError::InvalidProfile(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(SensorError::InvalidProfile(format!(
                    "segment {i} has non-positive duration {}",
                    s.duration
                )));
            }
            if !(s.longitudinal.is_finite()
                && s.lateral.is_finite()
                && s.yaw_rate.is_finite()
                && s.tilt.is_finite())
            {
                return Err(SensorError::InvalidProfile(format!(
                    "segment {i} has non-finite commands"
                )));
            }
        }
        Ok(())
    }
}

/// Additive bias plus white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InstrumentErrors {
    pub accel_bias: Vec3,
    pub accel_noise_sigma: f64,
    pub gyro_bias: Vec3,
    pub gyro_noise_sigma: f64,
    pub seed: u64,
}

impl InstrumentErrors {
    pub fn noiseless() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t_ms: u32,
    pub rate: Vec3,
    pub accel: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccSample {
    pub t_ms: u32,
    pub ax: f64,
    pub ay: f64,
}

pub fn time_ms(t: f64) -> u32 {
    (1000.0 * t).round() as u32
}

/// One state per tick; segment `i` contributes `round(duration_i * rate)` ticks.
pub fn simulate_trajectory(profile: &ManeuverProfile) -> Result<Vec<TruthState>, SensorError> {
    profile.validate()?;
    let dt = 1.0 / profile.sample_rate;
    let mut out = Vec::with_capacity((profile.duration() * profile.sample_rate) as usize + 1);
    let mut tick: u64 = 0;
    for seg in &profile.segments {
        let n = (seg.duration * profile.sample_rate).round() as u64;
        let accel_v = seg.specific_force();
        let rate_v = Vec3::new(0.0, 0.0, seg.yaw_rate);
        for _ in 0..n {
            out.push(TruthState {
                t: tick as f64 * dt,
                accel_v,
                rate_v,
            });
            tick += 1;
        }
    }
    Ok(out)
}

fn normal(sigma: f64) -> Option<Normal<f64>> {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).ok()
    } else {
        None
    }
}

fn draw(dist: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    dist.as_ref().map_or(0.0, |d| d.sample(rng))
}

/// Seeded IMU error model. Identical seeds give bit-identical streams.
#[derive(Debug, Clone)]
pub struct ImuModel {
    errors: InstrumentErrors,
    accel_noise: Option<Normal<f64>>,
    gyro_noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl ImuModel {
    pub fn new(errors: InstrumentErrors) -> Self {
        Self {
            errors,
            accel_noise: normal(errors.accel_noise_sigma),
            gyro_noise: normal(errors.gyro_noise_sigma),
            rng: ChaCha8Rng::seed_from_u64(errors.seed),
        }
    }

    pub fn sample(&mut self, truth: &TruthState) -> ImuSample {
        let mut accel = truth.accel_v + self.errors.accel_bias;
        for i in 0..3 {
            accel[i] += draw(&self.accel_noise, &mut self.rng);
        }
        let mut rate = truth.rate_v + self.errors.gyro_bias;
        for i in 0..3 {
            rate[i] += draw(&self.gyro_noise, &mut self.rng);
        }
        ImuSample {
            t_ms: time_ms(truth.t),
            rate,
            accel,
        }
    }
}

/// Seeded model of the two-axis accelerometer on the misaligned sensor.
/// Only the x and y components of the bias are used.
#[derive(Debug, Clone)]
pub struct AccModel {
    errors: InstrumentErrors,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl AccModel {
    pub fn new(errors: InstrumentErrors) -> Self {
        Self {
            errors,
            noise: normal(errors.accel_noise_sigma),
            rng: ChaCha8Rng::seed_from_u64(errors.seed),
        }
    }

    pub fn sample(&mut self, truth: &TruthState, misalignment: EulerAngles) -> AccSample {
        let sensed = dcm_from_euler(misalignment).rotate(&truth.accel_v);
        let ax = sensed.x + self.errors.accel_bias.x + draw(&self.noise, &mut self.rng);
        let ay = sensed.y + self.errors.accel_bias.y + draw(&self.noise, &mut self.rng);
        AccSample {
            t_ms: time_ms(truth.t),
            ax,
            ay,
        }
    }
}

/// Single-shot IMU sampling with a fresh generator seeded from `errors.seed`.
pub fn sample_imu(truth: &TruthState, errors: &InstrumentErrors) -> ImuSample {
    ImuModel::new(*errors).sample(truth)
}

/// Single-shot ACC sampling with a fresh generator seeded from `errors.seed`.
pub fn sample_acc(
    truth: &TruthState,
    misalignment: EulerAngles,
    errors: &InstrumentErrors,
) -> AccSample {
    AccModel::new(*errors).sample(truth, misalignment)
}

/// Biases recovered on a level, stationary platform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Calibration {
    pub imu: InstrumentErrors,
    pub acc: InstrumentErrors,
}

impl Calibration {
    pub fn correct_imu(&self, s: &ImuSample) -> ImuSample {
        ImuSample {
            t_ms: s.t_ms,
            rate: s.rate - self.imu.gyro_bias,
            accel: s.accel - self.imu.accel_bias,
        }
    }

    pub fn correct_acc(&self, s: &AccSample) -> AccSample {
        AccSample {
            t_ms: s.t_ms,
            ax: s.ax - self.acc.accel_bias.x,
            ay: s.ay - self.acc.accel_bias.y,
        }
    }
}

/// Incremental mean; exact for constant input.
fn running_mean(values: impl Iterator<Item = Vec3>) -> Vec3 {
    let mut mean = Vec3::zeros();
    for (k, v) in values.enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

pub fn calibrate_static(
    imu: &[ImuSample],
    acc: &[AccSample],
    g: f64,
) -> Result<Calibration, SensorError> {
    if imu.len() < MIN_CALIBRATION_SAMPLES || acc.len() < MIN_CALIBRATION_SAMPLES {
        return Err(SensorError::InsufficientCalibrationData {
            imu: imu.len(),
            acc: acc.len(),
        });
    }
    let accel_mean = running_mean(imu.iter().map(|s| s.accel));
    let rate_mean = running_mean(imu.iter().map(|s| s.rate));
    let acc_mean = running_mean(acc.iter().map(|s| Vec3::new(s.ax, s.ay, 0.0)));
    let (ax, ay) = (acc_mean.x, acc_mean.y);
    Ok(Calibration {
        imu: InstrumentErrors {
            accel_bias: accel_mean - Vec3::new(0.0, 0.0, g),
            gyro_bias: rate_mean,
            ..Default::default()
        },
        acc: InstrumentErrors {
            accel_bias: Vec3::new(ax, ay, 0.0),
            ..Default::default()
        },
    })
}

pub fn write_truth_csv<W: Write>(mut w: W, states: &[TruthState]) -> io::Result<()> {
    writeln!(w, "t_ms,ax_v,ay_v,az_v,gx,gy,gz")?;
    for s in states {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            time_ms(s.t),
            s.accel_v.x,
            s.accel_v.y,
            s.accel_v.z,
            s.rate_v.x,
            s.rate_v.y,
            s.rate_v.z
        )?;
    }
    Ok(())
}

pub fn write_imu_csv<W: Write>(mut w: W, samples: &[ImuSample]) -> io::Result<()> {
    writeln!(w, "t_ms,gx,gy,gz,ax_v,ay_v,az_v")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.t_ms, s.rate.x, s.rate.y, s.rate.z, s.accel.x, s.accel.y, s.accel.z
        )?;
    }
    Ok(())
}

pub fn write_acc_csv<W: Write>(mut w: W, samples: &[AccSample]) -> io::Result<()> {
    writeln!(w, "t_ms,ax_s,ay_s")?;
    for s in samples {
        writeln!(w, "{},{},{}", s.t_ms, s.ax, s.ay)?;
    }
    Ok(())
}
