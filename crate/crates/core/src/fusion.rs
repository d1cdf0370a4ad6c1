//! Kalman filter over the three misalignment angles.
//!
//! The state is `eps = (roll, pitch, yaw)` of the sensor relative to the
//! vehicle, modelled as a constant plus a slow random walk. Each fused epoch
//! provides a two-axis measurement: the ACC reading is compared with the IMU
//! specific force rotated by the current estimate, and the residual drives a
//! linearized update. Level gravity only observes roll and pitch; yaw needs a
//! horizontal specific force component.

use std::io::{self, Write};

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Vector2};
use thiserror::Error;

use crate::geometry::{dcm_from_euler, EulerAngles, Vec3};
use crate::ingestion::FusedEpoch;

/// Largest innovation-covariance condition number accepted by an update.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("non-positive dt: {0}")]
    NonPositiveDt(f64),
    #[error("no updates")]
    NoUpdates,
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
}

/// How the expected ACC reading is formed from the current estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementModel {
    /// Full rotation of the IMU specific force.
    #[default]
    Rotation,
    /// First-order rotation; makes the filter exactly linear in `eps`.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Measurement noise std per ACC axis, m/s².
    pub r_sigma: f64,
    /// Random-walk power spectral density per angle, rad²/s.
    pub q_psd: f64,
    /// Initial angle std, rad.
    pub p0_sigma: f64,
    /// Updates are skipped when |a_v| is below this, m/s².
    pub accel_gate: f64,
    /// Below this horizontal specific force (m/s²) the yaw column of the
    /// Jacobian is zeroed, so sensor noise cannot masquerade as yaw signal.
    pub yaw_gate: f64,
    pub model: MeasurementModel,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            r_sigma: 0.01,
            q_psd: 1e-9,
            p0_sigma: 0.0873,
            accel_gate: 1.0,
            yaw_gate: 0.2,
            model: MeasurementModel::Rotation,
        }
    }
}

impl FilterConfig {
    pub fn static_default() -> Self {
        Self::default()
    }

    pub fn dynamic_default() -> Self {
        Self {
            r_sigma: 0.015,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let positive = [
            ("r_sigma", self.r_sigma),
            ("p0_sigma", self.p0_sigma),
            ("accel_gate", self.accel_gate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FusionError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("q_psd", self.q_psd), ("yaw_gate", self.yaw_gate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(FusionError::InvalidConfig(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Filter state and diagnostics after the most recent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisalignmentEstimate {
    /// (roll, pitch, yaw), rad.
    pub eps: Vec3,
    /// Covariance of `eps`, rad².
    pub p: Matrix3<f64>,
    pub t_ms: u32,
    pub last_residual: Vector2<f64>,
    pub last_3sigma: Vector2<f64>,
    /// Per-axis residuals outside their 3-sigma bound.
    pub exceed_count: u64,
    pub update_count: u64,
}

impl MisalignmentEstimate {
    pub fn initial(cfg: &FilterConfig, t_ms: u32) -> Self {
        Self {
            eps: Vec3::zeros(),
            p: Matrix3::identity() * cfg.p0_sigma * cfg.p0_sigma,
            t_ms,
            last_residual: Vector2::zeros(),
            last_3sigma: Vector2::zeros(),
            exceed_count: 0,
            update_count: 0,
        }
    }

    pub fn angles(&self) -> EulerAngles {
        EulerAngles::from_vector(&self.eps)
    }

    pub fn angles_deg(&self) -> [f64; 3] {
        [
            self.eps.x.to_degrees(),
            self.eps.y.to_degrees(),
            self.eps.z.to_degrees(),
        ]
    }
}

/// Jacobian of the two sensed ACC axes with respect to `eps` at zero:
/// the first two rows of `-skew(a_v)`.
pub fn measurement_jacobian(a_v: &Vec3) -> Matrix2x3<f64> {
    Matrix2x3::new(0.0, a_v.z, -a_v.y, -a_v.z, 0.0, a_v.x)
}

pub fn predict(
    est: &MisalignmentEstimate,
    cfg: &FilterConfig,
    dt: f64,
) -> Result<MisalignmentEstimate, FusionError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(FusionError::NonPositiveDt(dt));
    }
    let mut out = *est;
    out.p += Matrix3::identity() * (cfg.q_psd * dt);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome {
    Applied,
    /// Total specific force below `accel_gate`.
    Gated,
    /// Innovation covariance too ill-conditioned to invert.
    Singular {
        condition: f64,
    },
}

fn expected_measurement(eps: &Vec3, a_v: &Vec3, model: MeasurementModel) -> Vector2<f64> {
    match model {
        MeasurementModel::Rotation => {
            let sensed = dcm_from_euler(EulerAngles::from_vector(eps)).rotate(a_v);
            Vector2::new(sensed.x, sensed.y)
        }
        MeasurementModel::Linearized => {
            Vector2::new(a_v.x, a_v.y) + measurement_jacobian(a_v) * eps
        }
    }
}

/// Closed-form inverse of a symmetric 2×2 matrix with its 2-norm condition number.
fn invert_sym2(s: &Matrix2<f64>) -> (Option<Matrix2<f64>>, f64) {
    let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let det = a * d - b * b;
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (hi, lo) = (half_tr + disc, half_tr - disc);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_INNOVATION_CONDITION || det == 0.0 {
        return (None, condition);
    }
    (Some(Matrix2::new(d, -b, -b, a) / det), condition)
}

/// Measurement update from one fused epoch (biases already removed).
pub fn update(
    est: &MisalignmentEstimate,
    epoch: &FusedEpoch,
    cfg: &FilterConfig,
) -> (MisalignmentEstimate, UpdateOutcome) {
    let a_v = epoch.imu.accel;
    let mut out = *est;
    out.t_ms = epoch.t_ms;
    if a_v.norm() < cfg.accel_gate {
        return (out, UpdateOutcome::Gated);
    }

    let z = Vector2::new(epoch.acc.ax, epoch.acc.ay);
    let residual = z - expected_measurement(&est.eps, &a_v, cfg.model);
    let mut h = measurement_jacobian(&a_v);
    if a_v.x.hypot(a_v.y) < cfg.yaw_gate {
        h.set_column(2, &Vector2::zeros());
    }

    let r = cfg.r_sigma * cfg.r_sigma;
    let ph_t: Matrix3x2<f64> = est.p * h.transpose();
    let s = h * ph_t + Matrix2::identity() * r;
    let (s_inv, condition) = invert_sym2(&s);
    let Some(s_inv) = s_inv else {
        log::warn!(
            "update at t={} ms skipped: innovation condition {condition:e}",
            epoch.t_ms
        );
        return (out, UpdateOutcome::Singular { condition });
    };

    let k = ph_t * s_inv;
    out.eps = est.eps + k * residual;
    let ikh = Matrix3::identity() - k * h;
    let p = ikh * est.p * ikh.transpose() + k * k.transpose() * r;
    out.p = (p + p.transpose()) * 0.5;

    let three_sigma = Vector2::new(3.0 * s[(0, 0)].sqrt(), 3.0 * s[(1, 1)].sqrt());
    out.exceed_count += (0..2)
        .filter(|&i| residual[i].abs() > three_sigma[i])
        .count() as u64;
    out.update_count += 1;
    out.last_residual = residual;
    out.last_3sigma = three_sigma;
    (out, UpdateOutcome::Applied)
}

/// Per-axis standard deviation in degrees.
pub fn confidence(est: &MisalignmentEstimate) -> [f64; 3] {
    [0, 1, 2].map(|i| est.p[(i, i)].max(0.0).sqrt().to_degrees())
}

/// Fraction of per-axis residual checks that fell outside 3 sigma, pooled
/// over both ACC axes.
pub fn exceedance_rate(est: &MisalignmentEstimate) -> Result<f64, FusionError> {
    if est.update_count == 0 {
        return Err(FusionError::NoUpdates);
    }
    Ok(est.exceed_count as f64 / (2 * est.update_count) as f64)
}

/// One row of the per-update log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub t_ms: u32,
    pub eps_deg: [f64; 3],
    pub sigma_deg: [f64; 3],
    pub residual: [f64; 2],
    pub three_sigma: [f64; 2],
}

impl UpdateRecord {
    pub fn from_estimate(est: &MisalignmentEstimate) -> Self {
        Self {
            t_ms: est.t_ms,
            eps_deg: est.angles_deg(),
            sigma_deg: confidence(est),
            residual: [est.last_residual.x, est.last_residual.y],
            three_sigma: [est.last_3sigma.x, est.last_3sigma.y],
        }
    }
}

pub const UPDATE_CSV_HEADER: &str = "t_ms,eps_x_deg,eps_y_deg,eps_z_deg,sigma_x_deg,sigma_y_deg,sigma_z_deg,res_x,res_y,three_sigma_x,three_sigma_y";

pub fn write_update_csv<W: Write>(mut w: W, records: &[UpdateRecord]) -> io::Result<()> {
    writeln!(w, "{UPDATE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t_ms,
            r.eps_deg[0],
            r.eps_deg[1],
            r.eps_deg[2],
            r.sigma_deg[0],
            r.sigma_deg[1],
            r.sigma_deg[2],
            r.residual[0],
            r.residual[1],
            r.three_sigma[0],
            r.three_sigma[1]
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterDiagnostics {
    pub gated: u64,
    pub singular: u64,
}

/// Runs predict/update over a sequence of epochs. Single writer.
#[derive(Debug, Clone)]
pub struct BoresightFilter {
    cfg: FilterConfig,
    est: Option<MisalignmentEstimate>,
    diagnostics: FilterDiagnostics,
    history: Option<Vec<UpdateRecord>>,
}

impl BoresightFilter {
    pub fn new(cfg: FilterConfig) -> Result<Self, FusionError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            est: None,
            diagnostics: FilterDiagnostics::default(),
            history: None,
        })
    }

    /// Keep an [`UpdateRecord`] for every applied update.
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn estimate(&self) -> Option<&MisalignmentEstimate> {
        self.est.as_ref()
    }

    pub fn diagnostics(&self) -> FilterDiagnostics {
        self.diagnostics
    }

    pub fn history(&self) -> &[UpdateRecord] {
        self.history.as_deref().unwrap_or(&[])
    }

    pub fn take_history(&mut self) -> Vec<UpdateRecord> {
        self.history.take().unwrap_or_default()
    }

    pub fn step(&mut self, epoch: &FusedEpoch) -> UpdateOutcome {
        let est = match self.est {
            None => MisalignmentEstimate::initial(&self.cfg, epoch.t_ms),
            Some(prev) => {
                let dt = epoch.t_ms.saturating_sub(prev.t_ms) as f64 / 1000.0;
                predict(&prev, &self.cfg, dt).unwrap_or(prev)
            }
        };
        let (next, outcome) = update(&est, epoch, &self.cfg);
        match outcome {
            UpdateOutcome::Applied => {
                if let Some(h) = self.history.as_mut() {
                    h.push(UpdateRecord::from_estimate(&next));
                }
            }
            UpdateOutcome::Gated => self.diagnostics.gated += 1,
            UpdateOutcome::Singular { .. } => self.diagnostics.singular += 1,
        }
        self.est = Some(next);
        outcome
    }

    pub fn run<'a>(&mut self, epochs: impl IntoIterator<Item = &'a FusedEpoch>) {
        for e in epochs {
            self.step(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{skew, GRAVITY};
    use crate::sensors::{AccSample, ImuSample};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn epoch(t_ms: u32, a_v: Vec3, ax: f64, ay: f64) -> FusedEpoch {
        FusedEpoch {
            t_ms,
            imu: ImuSample {
                t_ms,
                rate: Vec3::zeros(),
                accel: a_v,
            },
            acc: AccSample { t_ms, ax, ay },
        }
    }

    fn level() -> Vec3 {
        Vec3::new(0.0, 0.0, GRAVITY)
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(measurement_jacobian(&Vec3::zeros()), Matrix2x3::zeros());
        assert_eq!(
            measurement_jacobian(&level()),
            Matrix2x3::new(0.0, GRAVITY, 0.0, -GRAVITY, 0.0, 0.0)
        );
        assert_eq!(
            measurement_jacobian(&Vec3::new(2.0, 0.0, GRAVITY)),
            Matrix2x3::new(0.0, GRAVITY, 0.0, -GRAVITY, 0.0, 2.0)
        );
        // top rows of -skew(a)
        let a = Vec3::new(0.3, -1.2, 9.0);
        let m = -skew(&a);
        assert_eq!(measurement_jacobian(&a), m.fixed_rows::<2>(0).into_owned());
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let a = Vec3::new(1.5, -0.7, 9.6);
        let h = measurement_jacobian(&a);
        let step = 1e-6;
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = step;
            let plus = dcm_from_euler(EulerAngles::from_vector(&e)).rotate(&a);
            e[j] = -step;
            let minus = dcm_from_euler(EulerAngles::from_vector(&e)).rotate(&a);
            let d = (plus - minus) / (2.0 * step);
            assert!((d.x - h[(0, j)]).abs() < 1e-6);
            assert!((d.y - h[(1, j)]).abs() < 1e-6);
        }
    }

    #[test]
    fn predict_examples() {
        let cfg = FilterConfig {
            q_psd: 0.0,
            ..Default::default()
        };
        let est = MisalignmentEstimate::initial(&cfg, 0);
        assert_eq!(predict(&est, &cfg, 1.0).unwrap().p, est.p);

        let cfg = FilterConfig::default();
        let mut est = MisalignmentEstimate::initial(&cfg, 0);
        est.p = Matrix3::identity() * 1e-4;
        let p = predict(&est, &cfg, 1.0).unwrap().p;
        assert_eq!(p[(0, 0)], 1e-4 + 1e-9);

        assert_eq!(
            predict(&est, &cfg, 0.0),
            Err(FusionError::NonPositiveDt(0.0))
        );
        assert!(predict(&est, &cfg, -1.0).is_err());
    }

    #[test]
    fn long_prediction_closed_form() {
        let cfg = FilterConfig::default();
        let mut est = MisalignmentEstimate::initial(&cfg, 0);
        for _ in 0..300 {
            est = predict(&est, &cfg, 1.0).unwrap();
        }
        let expected = cfg.p0_sigma.powi(2) + 300.0 * cfg.q_psd;
        for i in 0..3 {
            assert!((est.p[(i, i)] - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn zero_innovation_keeps_eps_and_shrinks_trace() {
        let cfg = FilterConfig::default();
        let est = MisalignmentEstimate::initial(&cfg, 0);
        let (next, outcome) = update(&est, &epoch(0, level(), 0.0, 0.0), &cfg);
        assert_eq!(outcome, UpdateOutcome::Applied);
        assert_eq!(next.eps, Vec3::zeros());
        assert!(next.p.trace() < est.p.trace());
        assert_eq!(next.update_count, 1);
        assert_eq!(next.exceed_count, 0);
    }

    #[test]
    fn scalar_gain_is_half() {
        // a_v = (0,0,1): x' observes pitch alone with unit sensitivity, and
        // y' observes roll alone. Prior variance equal to R gives K = 0.5.
        let cfg = FilterConfig {
            r_sigma: 0.1,
            p0_sigma: 0.1,
            accel_gate: 0.5,
            ..Default::default()
        };
        let est = MisalignmentEstimate::initial(&cfg, 0);
        let (next, _) = update(
            &est,
            &epoch(0, Vec3::new(0.0, 0.0, 1.0), 0.02, 0.0),
            &FilterConfig {
                model: MeasurementModel::Linearized,
                ..cfg
            },
        );
        assert!((next.eps.y - 0.01).abs() < 1e-15);
        assert!((next.p[(1, 1)] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn gated_update_is_prediction_only() {
        let cfg = FilterConfig::default();
        let est = MisalignmentEstimate::initial(&cfg, 0);
        let (next, outcome) = update(&est, &epoch(10, Vec3::new(0.0, 0.0, 0.5), 1.0, 1.0), &cfg);
        assert_eq!(outcome, UpdateOutcome::Gated);
        assert_eq!(next.p, est.p);
        assert_eq!(next.eps, est.eps);
        assert_eq!(next.update_count, 0);
    }

    #[test]
    fn singular_innovation_skipped() {
        let cfg = FilterConfig {
            r_sigma: 1e-9,
            p0_sigma: 1e3,
            ..Default::default()
        };
        let est = MisalignmentEstimate::initial(&cfg, 0);
        // a_v along x only: H has a single non-zero entry, S is rank-deficient up to R.
        let (next, outcome) = update(&est, &epoch(0, Vec3::new(5.0, 0.0, 0.0), 0.0, 0.0), &cfg);
        assert!(matches!(outcome, UpdateOutcome::Singular { condition } if condition > 1e12));
        assert_eq!(next.p, est.p);
    }

    #[test]
    fn confidence_examples() {
        let cfg = FilterConfig::default();
        let mut est = MisalignmentEstimate::initial(&cfg, 0);
        let c = confidence(&est);
        for v in c {
            assert!((v - 5.0).abs() < 2e-3, "{v}");
        }
        est.p = Matrix3::zeros();
        assert_eq!(confidence(&est), [0.0; 3]);
    }

    #[test]
    fn exceedance_needs_updates() {
        let cfg = FilterConfig::default();
        let est = MisalignmentEstimate::initial(&cfg, 0);
        assert_eq!(exceedance_rate(&est), Err(FusionError::NoUpdates));
    }

    #[test]
    fn zero_noise_never_exceeds() {
        let cfg = FilterConfig::default();
        let truth = EulerAngles::from_degrees(0.5, -1.0, 0.0);
        let mut f = BoresightFilter::new(cfg).unwrap();
        for k in 0..2000u32 {
            let a = Vec3::new(if k % 200 < 100 { 1.5 } else { 0.0 }, 0.0, GRAVITY);
            let s = dcm_from_euler(truth).rotate(&a);
            f.step(&epoch(k * 10, a, s.x, s.y));
        }
        let est = f.estimate().unwrap();
        assert_eq!(exceedance_rate(est), Ok(0.0));
    }

    /// Simulates matched or mistuned noise directly at the epoch level.
    fn noisy_rate(true_sigma: f64, r_sigma: f64, n: u32, seed: u64) -> f64 {
        let cfg = FilterConfig {
            r_sigma,
            ..Default::default()
        };
        let truth = EulerAngles::from_degrees(1.0, 2.0, -1.0);
        let noise = Normal::new(0.0, true_sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = BoresightFilter::new(cfg).unwrap();
        for k in 0..n {
            let phase = (k / 500) % 4;
            let a = match phase {
                0 => Vec3::new(2.0, 0.0, GRAVITY),
                1 => Vec3::new(0.0, 0.0, GRAVITY),
                2 => Vec3::new(-2.5, 0.5, GRAVITY),
                _ => Vec3::new(0.0, 1.5, GRAVITY),
            };
            let s = dcm_from_euler(truth).rotate(&a);
            f.step(&epoch(
                k * 10,
                a,
                s.x + noise.sample(&mut rng),
                s.y + noise.sample(&mut rng),
            ));
        }
        exceedance_rate(f.estimate().unwrap()).unwrap()
    }

    #[test]
    fn matched_noise_meets_one_in_hundred() {
        let rate = noisy_rate(0.01, 0.01, 30_000, 3);
        assert!(rate <= 0.01, "rate {rate}");
    }

    #[test]
    fn mistuned_noise_exceeds_one_in_hundred() {
        let rate = noisy_rate(0.01, 0.005, 30_000, 3);
        assert!(rate > 0.01, "rate {rate}");
    }

    #[test]
    fn level_gravity_leaves_yaw_variance() {
        let cfg = FilterConfig::default();
        let mut f = BoresightFilter::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut prev = cfg.p0_sigma.powi(2);
        for k in 0..5000u32 {
            // IMU noise on the horizontal axes stays below the yaw gate
            let a = Vec3::new(
                noise.sample(&mut rng),
                noise.sample(&mut rng),
                GRAVITY + noise.sample(&mut rng),
            );
            f.step(&epoch(
                k * 10,
                a,
                noise.sample(&mut rng),
                noise.sample(&mut rng),
            ));
            let p33 = f.estimate().unwrap().p[(2, 2)];
            assert!(p33 >= prev, "yaw variance fell at step {k}");
            prev = p33;
        }
    }

    #[test]
    fn history_rows_written() {
        let mut f = BoresightFilter::new(FilterConfig::default())
            .unwrap()
            .with_history();
        f.step(&epoch(0, level(), 0.0, 0.0));
        f.step(&epoch(10, Vec3::new(0.0, 0.0, 0.1), 0.0, 0.0));
        assert_eq!(f.history().len(), 1);
        assert_eq!(f.diagnostics().gated, 1);
        let mut buf = Vec::new();
        write_update_csv(&mut buf, f.history()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(UPDATE_CSV_HEADER));
        assert_eq!(text.lines().count(), 2);
    }

    /// Normal-equations solution of the stacked linear problem with the
    /// prior as a pseudo-measurement.
    fn batch_oracle(epochs: &[FusedEpoch], cfg: &FilterConfig) -> (Vec3, Matrix3<f64>) {
        let w = 1.0 / (cfg.r_sigma * cfg.r_sigma);
        let mut info = Matrix3::identity() / (cfg.p0_sigma * cfg.p0_sigma);
        let mut rhs = Vec3::zeros();
        for e in epochs {
            let a = e.imu.accel;
            let h = Matrix2x3::new(0.0, a.z, -a.y, -a.z, 0.0, a.x);
            let y = Vector2::new(e.acc.ax - a.x, e.acc.ay - a.y);
            info += h.transpose() * h * w;
            rhs += h.transpose() * y * w;
        }
        let chol = info.cholesky().expect("information matrix is SPD");
        (chol.solve(&rhs), chol.inverse())
    }

    #[test]
    fn sequential_equals_batch_least_squares() {
        let cfg = FilterConfig {
            q_psd: 0.0,
            yaw_gate: 0.0,
            model: MeasurementModel::Linearized,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, cfg.r_sigma).unwrap();
        let truth = Vec3::new(0.02, -0.015, 0.03);
        let epochs: Vec<_> = (0..1000u32)
            .map(|k| {
                let a = Vec3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    GRAVITY,
                );
                let z = Vector2::new(a.x, a.y) + measurement_jacobian(&a) * truth;
                epoch(
                    k * 10,
                    a,
                    z.x + noise.sample(&mut rng),
                    z.y + noise.sample(&mut rng),
                )
            })
            .collect();
        let mut f = BoresightFilter::new(cfg).unwrap();
        f.run(&epochs);
        let est = f.estimate().unwrap();
        let (eps, p) = batch_oracle(&epochs, &cfg);
        assert!((est.eps - eps).norm() <= 1e-9 * eps.norm());
        assert!((est.p - p).norm() <= 1e-9 * p.norm());
    }

    fn min_eigenvalue(p: &Matrix3<f64>) -> f64 {
        p.symmetric_eigenvalues().min()
    }

    proptest! {
        #[test]
        fn covariance_stays_psd_and_trace_monotone(
            ops in proptest::collection::vec((any::<bool>(), -5.0..5.0f64, -5.0..5.0f64, 0.001..1.0f64), 1..200)
        ) {
            let cfg = FilterConfig::default();
            let mut est = MisalignmentEstimate::initial(&cfg, 0);
            for (is_update, ax, ay, dt) in ops {
                let before = est.p.trace();
                if is_update {
                    let a = Vec3::new(ax, ay, GRAVITY);
                    est = update(&est, &epoch(0, a, ax * 0.01, ay * 0.01), &cfg).0;
                    prop_assert!(est.p.trace() <= before * (1.0 + 1e-12));
                } else {
                    est = predict(&est, &cfg, dt).unwrap();
                    prop_assert!(est.p.trace() >= before);
                }
                prop_assert!((est.p - est.p.transpose()).amax() <= 1e-12);
                prop_assert!(min_eigenvalue(&est.p) >= -1e-12);
            }
        }
    }
}
