//! Image realignment: `r' = A r + b` with `A` a rotation by the roll angle
//! and `b` the pixel shift produced by pitch and yaw.
//!
//! The rotation runs in Q16.16 with a 1024-entry sine table, structured as
//! the five-stage pipeline in [`rotate`]. Warping is an inverse gather with
//! nearest-neighbour sampling.

pub mod fixed;
pub mod frame;
pub mod rotate;

use thiserror::Error;

pub use fixed::{
    angle_to_index, fixed_mult, index_to_angle, lut_cos, lut_sin, negate_index, FixedError,
    FixedQ16, TrigLut, LUT_SIZE,
};
pub use frame::{load_pgm, read_pgm, save_pgm, write_pgm, DoubleBuffer, FrameBuffer, PgmError};
pub use rotate::{
    pipeline_stream, rotate_coordinates, rotate_coordinates_exact, Point, RotatePipeline,
    PIPELINE_LATENCY,
};

use crate::geometry::EulerAngles;

#[derive(Debug, Error, PartialEq)]
pub enum AffineError {
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error("frame dimensions differ: {src:?} vs {dst:?}")]
    DimensionMismatch {
        src: (usize, usize),
        dst: (usize, usize),
    },
    #[error("source and destination share generation {0}; warp needs the other buffer")]
    SameGeneration(u64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Pinhole camera: maps angular misalignment to pixel shifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub focal_px: f64,
    pub centre: Point,
}

impl CameraModel {
    pub const DEFAULT_FOCAL_PX: f64 = 500.0;

    /// Default focal length, centred on the frame.
    pub fn for_frame(frame: &FrameBuffer) -> Self {
        Self {
            focal_px: Self::DEFAULT_FOCAL_PX,
            centre: ((frame.width() / 2) as i32, (frame.height() / 2) as i32),
        }
    }

    pub fn validate(&self, frame: &FrameBuffer) -> Result<(), AffineError> {
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return Err(AffineError::InvalidCamera(format!(
                "focal length {} must be positive",
                self.focal_px
            )));
        }
        let (cx, cy) = self.centre;
        if cx < 0 || cy < 0 || cx as usize >= frame.width() || cy as usize >= frame.height() {
            return Err(AffineError::InvalidCamera(format!(
                "centre {:?} outside {}x{} frame",
                self.centre,
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }
}

/// `(b_x, b_y) = (round(f tan(yaw)), round(f tan(pitch)))`.
pub fn angle_offsets(pitch: f64, yaw: f64, cam: &CameraModel) -> Point {
    (
        (cam.focal_px * yaw.tan()).round() as i32,
        (cam.focal_px * pitch.tan()).round() as i32,
    )
}

/// Quantized parameters of one warp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpParams {
    pub roll_idx: usize,
    pub offsets: Point,
}

impl WarpParams {
    pub const IDENTITY: WarpParams = WarpParams {
        roll_idx: 0,
        offsets: (0, 0),
    };

    /// Applies the given angles directly.
    pub fn from_angles(angles: EulerAngles, cam: &CameraModel) -> Self {
        Self {
            roll_idx: angle_to_index(angles.roll),
            offsets: angle_offsets(angles.pitch, angles.yaw, cam),
        }
    }

    /// Undoes a misalignment: every angle negated.
    pub fn correction(misalignment: EulerAngles, cam: &CameraModel) -> Self {
        Self::from_angles(
            EulerAngles::new(-misalignment.roll, -misalignment.pitch, -misalignment.yaw),
            cam,
        )
    }
}

/// For every destination pixel `d`, samples the source at
/// `rotate(-roll, d - offsets)`. Sources outside the frame give black.
pub fn warp_frame(
    src: &FrameBuffer,
    params: WarpParams,
    centre: Point,
    dst: &mut FrameBuffer,
) -> Result<(), AffineError> {
    if (src.width(), src.height()) != (dst.width(), dst.height()) {
        return Err(AffineError::DimensionMismatch {
            src: (src.width(), src.height()),
            dst: (dst.width(), dst.height()),
        });
    }
    if src.generation == dst.generation {
        return Err(AffineError::SameGeneration(src.generation));
    }
    let inverse = negate_index(params.roll_idx);
    let (bx, by) = params.offsets;
    let width = dst.width();
    for y in 0..dst.height() {
        for x in 0..width {
            let q = (x as i32 - bx, y as i32 - by);
            let (sx, sy) = rotate_coordinates(inverse, q, centre)?;
            let v = src.get(sx as i64, sy as i64).unwrap_or(0);
            dst.pixels_mut()[y * width + x] = v;
        }
    }
    dst.generation = src.generation.wrapping_add(1);
    Ok(())
}

/// Allocating form of [`warp_frame`].
pub fn warp(
    src: &FrameBuffer,
    params: WarpParams,
    centre: Point,
) -> Result<FrameBuffer, AffineError> {
    let mut dst = src.scratch_like();
    warp_frame(src, params, centre, &mut dst)?;
    Ok(dst)
}

/// What a camera misaligned by `misalignment` records of a scene that an
/// aligned camera sees as `frame`: shifted by the pitch/yaw offsets in the
/// vehicle's image axes, then rolled. Warping the result with
/// [`WarpParams::correction`] of the same angles restores `frame` up to
/// nearest-neighbour resampling.
pub fn simulate_misaligned_view(
    frame: &FrameBuffer,
    misalignment: EulerAngles,
    cam: &CameraModel,
) -> Result<FrameBuffer, AffineError> {
    let params = WarpParams::from_angles(misalignment, cam);
    let shifted = warp(
        frame,
        WarpParams {
            roll_idx: 0,
            offsets: params.offsets,
        },
        cam.centre,
    )?;
    warp(
        &shifted,
        WarpParams {
            roll_idx: params.roll_idx,
            offsets: (0, 0),
        },
        cam.centre,
    )
}

/// Fraction of pixels at least `margin` from every border that are equal.
pub fn interior_match_fraction(a: &FrameBuffer, b: &FrameBuffer, margin: usize) -> f64 {
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    let mut total = 0usize;
    let mut same = 0usize;
    for y in margin..a.height().saturating_sub(margin) {
        for x in margin..a.width().saturating_sub(margin) {
            total += 1;
            if a.pixels()[y * a.width() + x] == b.pixels()[y * b.width() + x] {
                same += 1;
            }
        }
    }
    if total == 0 {
        return 0.0;
    }
    same as f64 / total as f64
}

/// Test pattern of large flat tiles with a slow gradient, so nearest-
/// neighbour resampling only disturbs tile edges.
pub fn tile_pattern(width: usize, height: usize, tile: usize) -> FrameBuffer {
    FrameBuffer::from_fn(width, height, |x, y| {
        let (tx, ty) = (x / tile, y / tile);
        let base = ((tx * 37 + ty * 61) % 7) as u8 * 30;
        base.wrapping_add(((tx + ty) % 5) as u8 * 5)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> FrameBuffer {
        FrameBuffer::from_fn(w, h, |x, y| ((x / 24 + y / 24) * 9) as u8)
    }

    #[test]
    fn offsets_examples() {
        let cam = CameraModel {
            focal_px: 500.0,
            centre: (320, 240),
        };
        assert_eq!(angle_offsets(0.0, 0.0, &cam), (0, 0));
        assert_eq!(angle_offsets(0.0, 1f64.to_radians(), &cam), (9, 0));
        assert_eq!(angle_offsets(-2f64.to_radians(), 0.0, &cam), (0, -17));
    }

    #[test]
    fn identity_warp_copies() {
        let src = gradient(64, 48);
        let out = warp(&src, WarpParams::IDENTITY, (32, 24)).unwrap();
        assert_eq!(out.pixels(), src.pixels());
        assert_eq!(out.generation, src.generation + 1);
    }

    #[test]
    fn pure_translation() {
        let src = FrameBuffer::from_fn(40, 30, |x, y| (x * 5 + y + 1) as u8);
        let params = WarpParams {
            roll_idx: 0,
            offsets: (5, 0),
        };
        let out = warp(&src, params, (20, 15)).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                let v = out.get(x, y).unwrap();
                if x < 5 {
                    assert_eq!(v, 0);
                } else {
                    assert_eq!(v, src.get(x - 5, y).unwrap());
                }
            }
        }
    }

    #[test]
    fn rotate_and_back() {
        let src = gradient(320, 240);
        let c = (160, 120);
        let fwd = warp(
            &src,
            WarpParams {
                roll_idx: 16,
                offsets: (0, 0),
            },
            c,
        )
        .unwrap();
        let back = warp(
            &fwd,
            WarpParams {
                roll_idx: 1008,
                offsets: (0, 0),
            },
            c,
        )
        .unwrap();
        let frac = interior_match_fraction(&src, &back, 10);
        // corners rotate out of frame and back in as black
        let mut inner = 0usize;
        let mut same = 0usize;
        for y in 10..230 {
            for x in 10..310 {
                let r = ((x as f64 - 160.0).powi(2) + (y as f64 - 120.0).powi(2)).sqrt();
                if r < 100.0 {
                    inner += 1;
                    same += (src.get(x, y) == back.get(x, y)) as usize;
                }
            }
        }
        assert!(
            same as f64 / inner as f64 >= 0.95,
            "central {}",
            same as f64 / inner as f64
        );
        assert!(frac > 0.85, "interior {frac}");
    }

    #[test]
    fn warp_errors() {
        let a = FrameBuffer::new(4, 4);
        let mut b = FrameBuffer::new(4, 5);
        assert!(matches!(
            warp_frame(&a, WarpParams::IDENTITY, (2, 2), &mut b),
            Err(AffineError::DimensionMismatch { .. })
        ));
        let mut same = FrameBuffer::new(4, 4);
        assert_eq!(
            warp_frame(&a, WarpParams::IDENTITY, (2, 2), &mut same),
            Err(AffineError::SameGeneration(0))
        );
    }

    #[test]
    fn misaligned_view_is_undone_by_correction() {
        let src = tile_pattern(320, 240, 40);
        let cam = CameraModel::for_frame(&src);
        let mis = EulerAngles::from_degrees(2.0, 1.0, 1.0);
        let view = simulate_misaligned_view(&src, mis, &cam).unwrap();
        assert!(interior_match_fraction(&src, &view, 10) < 0.9);
        let fixed = warp(&view, WarpParams::correction(mis, &cam), cam.centre).unwrap();
        let frac = interior_match_fraction(&src, &fixed, 30);
        assert!(frac >= 0.95, "{frac}");
    }

    #[test]
    fn camera_validation() {
        let f = FrameBuffer::new(10, 10);
        assert!(CameraModel::for_frame(&f).validate(&f).is_ok());
        let bad = CameraModel {
            focal_px: 0.0,
            centre: (5, 5),
        };
        assert!(bad.validate(&f).is_err());
        let off = CameraModel {
            focal_px: 10.0,
            centre: (10, 5),
        };
        assert!(off.validate(&f).is_err());
    }
}
