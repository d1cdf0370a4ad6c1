//! Computational boresighting of a vehicle-mounted sensor.
//!
//! A two-axis accelerometer on the sensor and a six-axis IMU on the vehicle
//! both sense the common specific-force vector. Their disagreement, fed
//! through a Kalman filter, yields the roll/pitch/yaw misalignment of the
//! sensor and its uncertainty. The angles then drive a fixed-point affine
//! correction of the sensor's image.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: frames, Euler angles, rotations.
//! - [`sensors`]: trajectory simulation, instrument error models, calibration.
//! - [`ingestion`]: the `.sbl` binary log format and stream alignment.
//! - [`fusion`]: the misalignment filter.
//! - [`affine`]: Q16.16 rotation pipeline and frame warping.
//! - [`harness`]: static/dynamic experiments, residual audit, reports.

pub mod affine;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod ingestion;
pub mod sensors;
