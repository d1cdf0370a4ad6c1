//! Reference frames and rotations shared by the simulator and the filter.
//!
//! Vehicle frame: x forward, y left, z up. An accelerometer triad at rest
//! senses the gravity reaction `(0, 0, +g)`.
//!
//! Euler angles compose as `Rz(yaw) * Ry(pitch) * Rx(roll)`. For a small
//! misalignment `eps` this is `I + skew(eps)` to first order.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.806_65;

/// Three-component vector (m/s² or rad/s depending on context).
pub type Vec3 = Vector3<f64>;

/// Roll/pitch/yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const ZERO: EulerAngles = EulerAngles {
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }

    pub fn from_vector(v: &Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.roll, self.pitch, self.yaw)
    }

    /// Wraps every angle into (−π, π].
    pub fn wrapped(self) -> Self {
        Self::new(
            wrap_angle(self.roll),
            wrap_angle(self.pitch),
            wrap_angle(self.yaw),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.roll.abs().max(self.pitch.abs()).max(self.yaw.abs())
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Direction cosine matrix. Orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Dcm {
        Dcm(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Largest entrywise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }
}

impl fmt::Display for Dcm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn dcm_from_euler(e: EulerAngles) -> Dcm {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    Dcm(Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// First-order rotation `I + skew(eps)`.
///
/// Not orthonormal; the error against [`dcm_from_euler`] is O(|eps|²).
pub fn small_angle_dcm(eps: EulerAngles) -> Matrix3<f64> {
    if eps.max_abs() > 0.2 {
        log::warn!(
            "small-angle rotation used outside its range: max |angle| = {:.3} rad",
            eps.max_abs()
        );
    }
    Matrix3::identity() + skew(&eps.as_vector())
}
