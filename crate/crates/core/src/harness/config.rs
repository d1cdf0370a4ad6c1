//! Experiment configuration and its flat `key = value` text form.
//!
//! ```text
//! # static pitch run
//! mode = static
//! misalignment.pitch_deg = 1.0
//! filter.r_sigma = 0.01
//! imu.accel_bias = 0.02, -0.015, 0.03
//! ```
//!
//! Keys not present keep the defaults of the selected mode. Blank lines and
//! `#` comments are ignored.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::fusion::{FilterConfig, MeasurementModel};
use crate::geometry::{EulerAngles, Vec3};
use crate::sensors::{InstrumentErrors, ManeuverProfile, Segment, MIN_CALIBRATION_SAMPLES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {key}: cannot parse {value:?} as {expected}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Static,
    Dynamic,
}

impl FromStr for Mode {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "static" => Ok(Mode::Static),
            "dynamic" => Ok(Mode::Dynamic),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        })
    }
}

/// Which maneuver schedule follows the calibration period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `level` for static runs that only misalign pitch, `tilt` for other
    /// static runs, `forward` for dynamic runs.
    Auto,
    /// Stationary and level.
    Level,
    /// Stationary, cycling through roll and pitch platform tilts.
    Tilt,
    /// Mostly straight-line accelerate/cruise/brake with gentle turns.
    Forward,
    /// Hard turns combined with longitudinal acceleration.
    Mixed,
}

impl FromStr for ProfileKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "auto" => Ok(Self::Auto),
            "level" => Ok(Self::Level),
            "tilt" => Ok(Self::Tilt),
            "forward" => Ok(Self::Forward),
            "mixed" => Ok(Self::Mixed),
            _ => Err(()),
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Level => "level",
            Self::Tilt => "tilt",
            Self::Forward => "forward",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Misalignment applied to the sensor after calibration, rad.
    pub misalignment: EulerAngles,
    /// Data collected after calibration, s.
    pub duration: f64,
    /// Level, stationary, aligned calibration period at the start, s.
    pub calibration: f64,
    pub sample_rate: f64,
    pub filter: FilterConfig,
    /// Seeds inside `imu` and `acc` are ignored; both derive from `seed`.
    pub imu: InstrumentErrors,
    pub acc: InstrumentErrors,
    pub profile: ProfileKind,
    /// Platform tilt magnitude for the `tilt` schedule, rad.
    pub tilt: f64,
    /// Time spent at each tilt, s.
    pub dwell: f64,
    pub seed: u64,
    pub focal_px: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn static_default() -> Self {
        Self {
            mode: Mode::Static,
            misalignment: EulerAngles::ZERO,
            duration: 300.0,
            calibration: 30.0,
            sample_rate: 100.0,
            filter: FilterConfig::static_default(),
            imu: InstrumentErrors {
                accel_bias: Vec3::new(0.02, -0.015, 0.03),
                accel_noise_sigma: 0.007,
                gyro_bias: Vec3::new(0.001, -0.002, 0.0005),
                gyro_noise_sigma: 0.0005,
                seed: 0,
            },
            acc: InstrumentErrors {
                accel_bias: Vec3::new(0.05, -0.03, 0.0),
                accel_noise_sigma: 0.007,
                ..Default::default()
            },
            profile: ProfileKind::Auto,
            tilt: 10f64.to_radians(),
            dwell: 30.0,
            seed: 42,
            focal_px: 500.0,
            output_dir: PathBuf::from("out"),
        }
    }

    /// Vibration raises the noise on both instruments.
    pub fn dynamic_default() -> Self {
        let base = Self::static_default();
        Self {
            mode: Mode::Dynamic,
            misalignment: EulerAngles::from_degrees(2.0, 1.0, 1.0),
            filter: FilterConfig::dynamic_default(),
            imu: InstrumentErrors {
                accel_noise_sigma: 0.0106,
                ..base.imu
            },
            acc: InstrumentErrors {
                accel_noise_sigma: 0.0106,
                ..base.acc
            },
            ..base
        }
    }

    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Static => Self::static_default(),
            Mode::Dynamic => Self::dynamic_default(),
        }
    }

    /// Parses config text. `mode` in the text, if present, selects the
    /// defaults; otherwise `default_mode` does.
    pub fn parse(text: &str, default_mode: Mode) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            if entries.iter().any(|(_, seen, _)| *seen == k) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: k.to_string(),
                });
            }
            entries.push((line, k, v));
        }

        let mode = match entries.iter().find(|(_, k, _)| *k == "mode") {
            Some(&(line, key, value)) => parse_value(line, key, value, "static|dynamic")?,
            None => default_mode,
        };
        let mut cfg = Self::default_for(mode);
        for (line, key, value) in entries {
            cfg.apply(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, default_mode: Mode) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, default_mode)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = |expected| parse_value::<f64>(line, key, value, expected);
        let deg = || num("degrees").map(f64::to_radians);
        match key {
            "mode" => self.mode = parse_value(line, key, value, "static|dynamic")?,
            "duration_s" => self.duration = num("seconds")?,
            "calibration_s" => self.calibration = num("seconds")?,
            "sample_rate_hz" => self.sample_rate = num("hertz")?,
            "seed" => self.seed = parse_value(line, key, value, "unsigned integer")?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "misalignment.roll_deg" => self.misalignment.roll = deg()?,
            "misalignment.pitch_deg" => self.misalignment.pitch = deg()?,
            "misalignment.yaw_deg" => self.misalignment.yaw = deg()?,
            "filter.r_sigma" => self.filter.r_sigma = num("m/s²")?,
            "filter.q_psd" => self.filter.q_psd = num("rad²/s")?,
            "filter.p0_sigma" => self.filter.p0_sigma = num("rad")?,
            "filter.accel_gate" => self.filter.accel_gate = num("m/s²")?,
            "filter.yaw_gate" => self.filter.yaw_gate = num("m/s²")?,
            "filter.model" => {
                self.filter.model = match value {
                    "rotation" => MeasurementModel::Rotation,
                    "linearized" => MeasurementModel::Linearized,
                    _ => return Err(bad(line, key, value, "rotation|linearized")),
                }
            }
            "imu.accel_bias" => self.imu.accel_bias = parse_vec3(line, key, value)?,
            "imu.accel_noise" => self.imu.accel_noise_sigma = num("m/s²")?,
            "imu.gyro_bias" => self.imu.gyro_bias = parse_vec3(line, key, value)?,
            "imu.gyro_noise" => self.imu.gyro_noise_sigma = num("rad/s")?,
            "acc.bias" => {
                let [x, y] = parse_list::<2>(line, key, value)?;
                self.acc.accel_bias = Vec3::new(x, y, 0.0);
            }
            "acc.noise" => self.acc.accel_noise_sigma = num("m/s²")?,
            "profile.kind" => {
                self.profile = parse_value(line, key, value, "auto|level|tilt|forward|mixed")?
            }
            "profile.tilt_deg" => self.tilt = deg()?,
            "profile.dwell_s" => self.dwell = num("seconds")?,
            "camera.focal_px" => self.focal_px = num("pixels")?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (name, v) in [
            ("duration_s", self.duration),
            ("calibration_s", self.calibration),
            ("sample_rate_hz", self.sample_rate),
            ("profile.dwell_s", self.dwell),
            ("camera.focal_px", self.focal_px),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if self.sample_rate > 1000.0 {
            return invalid(format!(
                "sample_rate_hz {} exceeds the 1 ms timestamp resolution",
                self.sample_rate
            ));
        }
        let cal_samples = (self.calibration * self.sample_rate).round() as usize;
        if cal_samples < MIN_CALIBRATION_SAMPLES {
            return invalid(format!(
                "calibration_s gives {cal_samples} samples, need {MIN_CALIBRATION_SAMPLES}"
            ));
        }
        if !self.misalignment.is_finite() || !self.tilt.is_finite() {
            return invalid("angles must be finite".into());
        }
        for (name, e) in [("imu", &self.imu), ("acc", &self.acc)] {
            if !(e.accel_noise_sigma >= 0.0 && e.gyro_noise_sigma >= 0.0) {
                return invalid(format!("{name} noise must be non-negative"));
            }
        }
        self.filter
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match (self.mode, self.profile) {
            (Mode::Static, ProfileKind::Forward | ProfileKind::Mixed) => invalid(format!(
                "static mode cannot use the moving profile {:?}",
                self.profile.to_string()
            )),
            (Mode::Dynamic, ProfileKind::Level | ProfileKind::Tilt) => invalid(format!(
                "dynamic mode needs a moving profile, got {:?}",
                self.profile.to_string()
            )),
            _ => Ok(()),
        }
    }

    pub fn resolved_profile(&self) -> ProfileKind {
        match (self.profile, self.mode) {
            (ProfileKind::Auto, Mode::Static) => {
                if self.misalignment.roll == 0.0 && self.misalignment.yaw == 0.0 {
                    ProfileKind::Level
                } else {
                    ProfileKind::Tilt
                }
            }
            (ProfileKind::Auto, Mode::Dynamic) => ProfileKind::Forward,
            (kind, _) => kind,
        }
    }

    /// Calibration rest followed by the selected schedule.
    pub fn maneuver_profile(&self) -> ManeuverProfile {
        let pattern = match self.resolved_profile() {
            ProfileKind::Level | ProfileKind::Auto => vec![Segment::rest(self.duration)],
            ProfileKind::Tilt => tilt_pattern(self.tilt, self.dwell),
            ProfileKind::Forward => forward_pattern(),
            ProfileKind::Mixed => mixed_pattern(),
        };
        let mut segments = vec![Segment::rest(self.calibration)];
        segments.extend(ManeuverProfile::cycled(&pattern, self.duration));
        ManeuverProfile::new(segments, self.sample_rate)
    }

    /// Error models with seeds derived from `seed`.
    pub fn seeded_errors(&self) -> (InstrumentErrors, InstrumentErrors) {
        let imu = InstrumentErrors {
            seed: self.seed,
            ..self.imu
        };
        let acc = InstrumentErrors {
            seed: self.seed ^ 0x9E37_79B9_7F4A_7C15,
            ..self.acc
        };
        (imu, acc)
    }

    /// Every key, in the order `parse` documents them. Parsing the result
    /// gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let m = &self.misalignment;
        let f = &self.filter;
        let model = match f.model {
            MeasurementModel::Rotation => "rotation",
            MeasurementModel::Linearized => "linearized",
        };
        let v3 = |v: &Vec3| format!("{}, {}, {}", v.x, v.y, v.z);
        let lines = [
            ("mode", self.mode.to_string()),
            ("duration_s", self.duration.to_string()),
            ("calibration_s", self.calibration.to_string()),
            ("sample_rate_hz", self.sample_rate.to_string()),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("misalignment.roll_deg", m.roll.to_degrees().to_string()),
            ("misalignment.pitch_deg", m.pitch.to_degrees().to_string()),
            ("misalignment.yaw_deg", m.yaw.to_degrees().to_string()),
            ("filter.r_sigma", f.r_sigma.to_string()),
            ("filter.q_psd", f.q_psd.to_string()),
            ("filter.p0_sigma", f.p0_sigma.to_string()),
            ("filter.accel_gate", f.accel_gate.to_string()),
            ("filter.yaw_gate", f.yaw_gate.to_string()),
            ("filter.model", model.to_string()),
            ("imu.accel_bias", v3(&self.imu.accel_bias)),
            ("imu.accel_noise", self.imu.accel_noise_sigma.to_string()),
            ("imu.gyro_bias", v3(&self.imu.gyro_bias)),
            ("imu.gyro_noise", self.imu.gyro_noise_sigma.to_string()),
            (
                "acc.bias",
                format!("{}, {}", self.acc.accel_bias.x, self.acc.accel_bias.y),
            ),
            ("acc.noise", self.acc.accel_noise_sigma.to_string()),
            ("profile.kind", self.profile.to_string()),
            ("profile.tilt_deg", self.tilt.to_degrees().to_string()),
            ("profile.dwell_s", self.dwell.to_string()),
            ("camera.focal_px", self.focal_px.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Roll and pitch tilts in turn, so every dwell has a horizontal gravity
/// component.
fn tilt_pattern(tilt: f64, dwell: f64) -> Vec<Segment> {
    [
        EulerAngles::new(tilt, 0.0, 0.0),
        EulerAngles::new(0.0, tilt, 0.0),
        EulerAngles::new(-tilt, 0.0, 0.0),
        EulerAngles::new(0.0, -tilt, 0.0),
    ]
    .into_iter()
    .map(|t| Segment::tilted(dwell, t))
    .collect()
}

fn forward_pattern() -> Vec<Segment> {
    vec![
        Segment::drive(8.0, 2.0, 0.0, 0.0),
        Segment::drive(12.0, 0.0, 0.0, 0.0),
        Segment::drive(5.0, -3.0, 0.0, 0.0),
        Segment::drive(6.0, 0.0, 1.0, 0.1),
        Segment::drive(6.0, 0.0, -1.0, -0.1),
        Segment::rest(3.0),
    ]
}

fn mixed_pattern() -> Vec<Segment> {
    vec![
        Segment::drive(6.0, 2.5, 0.0, 0.0),
        Segment::drive(8.0, 0.0, 3.0, 0.3),
        Segment::drive(4.0, -3.5, 0.0, 0.0),
        Segment::drive(8.0, 0.0, -3.0, -0.3),
        Segment::drive(6.0, 1.5, 2.0, 0.2),
        Segment::drive(6.0, -2.0, -2.0, -0.2),
    ]
}

fn bad(line: usize, key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn parse_value<T: FromStr>(
    line: usize,
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(line, key, value, expected))
}

fn parse_list<const N: usize>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<[f64; N], ConfigError> {
    let expected = if N == 2 {
        "two numbers"
    } else {
        "three numbers"
    };
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad(line, key, value, expected))?;
    parts
        .try_into()
        .map_err(|_| bad(line, key, value, expected))
}

fn parse_vec3(line: usize, key: &str, value: &str) -> Result<Vec3, ConfigError> {
    let [x, y, z] = parse_list::<3>(line, key, value)?;
    Ok(Vec3::new(x, y, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_mode_defaults() {
        let s = ExperimentConfig::parse("", Mode::Static).unwrap();
        assert_eq!(s, ExperimentConfig::static_default());
        let d = ExperimentConfig::parse("# nothing\n\n", Mode::Dynamic).unwrap();
        assert_eq!(d, ExperimentConfig::dynamic_default());
    }

    #[test]
    fn mode_key_selects_defaults() {
        let d = ExperimentConfig::parse("mode = dynamic\n", Mode::Static).unwrap();
        assert_eq!(d.filter.r_sigma, 0.015);
    }

    #[test]
    fn keys_apply() {
        let text = "\
mode = static
misalignment.pitch_deg = 1.0   # pitch up
filter.r_sigma = 0.02
imu.accel_bias = 0.1, 0.2, 0.3
acc.bias = -0.1, 0.05
profile.kind = tilt
seed = 7
";
        let c = ExperimentConfig::parse(text, Mode::Dynamic).unwrap();
        assert_eq!(c.mode, Mode::Static);
        assert!((c.misalignment.pitch - 1f64.to_radians()).abs() < 1e-15);
        assert_eq!(c.filter.r_sigma, 0.02);
        assert_eq!(c.imu.accel_bias, Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(c.acc.accel_bias, Vec3::new(-0.1, 0.05, 0.0));
        assert_eq!(c.profile, ProfileKind::Tilt);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::dynamic_default();
        c.seed = 99;
        c.profile = ProfileKind::Mixed;
        c.filter.model = MeasurementModel::Linearized;
        let text = c.to_config_string();
        let back = ExperimentConfig::parse(&text, Mode::Static).unwrap();
        assert_eq!(back.to_config_string(), text);
        assert_eq!(back.seed, 99);
        assert_eq!(back.profile, ProfileKind::Mixed);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = ExperimentConfig::parse("seed = 1\nnonsense\n", Mode::Static).unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 2, .. }), "{e}");
        let e = ExperimentConfig::parse("wat = 1", Mode::Static).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { line: 1, .. }));
        let e = ExperimentConfig::parse("\nfilter.r_sigma = abc", Mode::Static).unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { line: 2, .. }));
        let e = ExperimentConfig::parse("seed = 1\nseed = 2", Mode::Static).unwrap_err();
        assert!(matches!(e, ConfigError::Duplicate { line: 2, .. }));
        let e = ExperimentConfig::parse("imu.accel_bias = 1, 2", Mode::Static).unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { .. }));
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "duration_s = 0",
            "duration_s = -5",
            "calibration_s = 0.5",
            "filter.r_sigma = 0",
            "sample_rate_hz = 5000",
            "profile.kind = forward",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::parse(text, Mode::Static),
                    Err(ConfigError::Invalid(_))
                ),
                "{text}"
            );
        }
        assert!(ExperimentConfig::parse("profile.kind = level", Mode::Dynamic).is_err());
    }

    #[test]
    fn auto_profile_resolution() {
        let mut c = ExperimentConfig::static_default();
        c.misalignment = EulerAngles::from_degrees(0.0, 1.0, 0.0);
        assert_eq!(c.resolved_profile(), ProfileKind::Level);
        c.misalignment = EulerAngles::from_degrees(0.0, 0.0, 1.0);
        assert_eq!(c.resolved_profile(), ProfileKind::Tilt);
        assert_eq!(
            ExperimentConfig::dynamic_default().resolved_profile(),
            ProfileKind::Forward
        );
    }

    #[test]
    fn profile_starts_with_calibration_and_covers_duration() {
        for mode in [Mode::Static, Mode::Dynamic] {
            let c = ExperimentConfig::default_for(mode);
            let p = c.maneuver_profile();
            assert_eq!(p.segments[0], Segment::rest(30.0));
            assert!((p.duration() - 330.0).abs() < 1e-9);
            p.validate().unwrap();
        }
    }

    #[test]
    fn static_profiles_never_move() {
        let mut c = ExperimentConfig::static_default();
        c.profile = ProfileKind::Tilt;
        assert!(c
            .maneuver_profile()
            .segments
            .iter()
            .all(Segment::is_stationary));
    }
}
