//! Coordinate rotation about a centre, single-shot and as a five-stage
//! pipeline that accepts one coordinate per clock.

use super::fixed::{fixed_mult, FixedError, FixedQ16, TrigLut};

/// Integer pixel coordinate.
pub type Point = (i32, i32);

/// Rotates `p` about `centre` by table angle `theta_idx` in Q16.16.
///
/// ```text
/// out_x = x cos θ - y sin θ
/// out_y = y cos θ + x sin θ
/// ```
pub fn rotate_coordinates(theta_idx: usize, p: Point, centre: Point) -> Result<Point, FixedError> {
    let s1 = stage_trig(theta_idx, p);
    let s2 = stage_map(&s1, centre)?;
    let s3 = stage_mult(&s2)?;
    let s4 = stage_back(&s3)?;
    stage_recentre(&s4, centre)
}

/// Double-precision rotation used as the reference for the fixed path.
pub fn rotate_coordinates_exact(theta: f64, p: (f64, f64), centre: (f64, f64)) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (x, y) = (p.0 - centre.0, p.1 - centre.1);
    (x * c - y * s + centre.0, y * c + x * s + centre.1)
}

#[derive(Debug, Clone, Copy)]
struct Trig {
    sin: FixedQ16,
    cos: FixedQ16,
    p: Point,
}

#[derive(Debug, Clone, Copy)]
struct Mapped {
    sin: FixedQ16,
    cos: FixedQ16,
    x: FixedQ16,
    y: FixedQ16,
}

#[derive(Debug, Clone, Copy)]
struct Products {
    y_neg_sin: FixedQ16,
    x_cos: FixedQ16,
    x_sin: FixedQ16,
    y_cos: FixedQ16,
}

#[derive(Debug, Clone, Copy)]
struct Back {
    x: i32,
    y: i32,
}

fn stage_trig(theta_idx: usize, p: Point) -> Trig {
    let lut = TrigLut::global();
    Trig {
        sin: lut.sin(theta_idx),
        cos: lut.cos(theta_idx),
        p,
    }
}

fn stage_map(t: &Trig, centre: Point) -> Result<Mapped, FixedError> {
    let dx = t.p.0.checked_sub(centre.0).ok_or(FixedError::Overflow)?;
    let dy = t.p.1.checked_sub(centre.1).ok_or(FixedError::Overflow)?;
    Ok(Mapped {
        sin: t.sin,
        cos: t.cos,
        x: FixedQ16::from_int(dx)?,
        y: FixedQ16::from_int(dy)?,
    })
}

fn stage_mult(m: &Mapped) -> Result<Products, FixedError> {
    Ok(Products {
        y_neg_sin: fixed_mult(m.y, m.sin.checked_neg()?)?,
        x_cos: fixed_mult(m.x, m.cos)?,
        x_sin: fixed_mult(m.x, m.sin)?,
        y_cos: fixed_mult(m.y, m.cos)?,
    })
}

fn stage_back(p: &Products) -> Result<Back, FixedError> {
    Ok(Back {
        x: p.y_neg_sin.checked_add(p.x_cos)?.round_to_int(),
        y: p.x_sin.checked_add(p.y_cos)?.round_to_int(),
    })
}

fn stage_recentre(b: &Back, centre: Point) -> Result<Point, FixedError> {
    Ok((
        b.x.checked_add(centre.0).ok_or(FixedError::Overflow)?,
        b.y.checked_add(centre.1).ok_or(FixedError::Overflow)?,
    ))
}

/// Number of clocks between a coordinate entering and its result leaving.
pub const PIPELINE_LATENCY: usize = 5;

/// Registered five-stage rotator. Each [`clock`](RotatePipeline::clock)
/// advances every stage at once and emits what the last stage held on the
/// previous clock.
#[derive(Debug, Clone)]
pub struct RotatePipeline {
    theta_idx: usize,
    centre: Point,
    r1: Option<Trig>,
    r2: Option<Mapped>,
    r3: Option<Products>,
    r4: Option<Back>,
    r5: Option<Point>,
}

impl RotatePipeline {
    pub fn new(theta_idx: usize, centre: Point) -> Self {
        Self {
            theta_idx,
            centre,
            r1: None,
            r2: None,
            r3: None,
            r4: None,
            r5: None,
        }
    }

    /// `None` in means a bubble; `None` out means the output is not valid yet.
    pub fn clock(&mut self, input: Option<Point>) -> Result<Option<Point>, FixedError> {
        let out = self.r5;
        self.r5 = self
            .r4
            .as_ref()
            .map(|b| stage_recentre(b, self.centre))
            .transpose()?;
        self.r4 = self.r3.as_ref().map(stage_back).transpose()?;
        self.r3 = self.r2.as_ref().map(stage_mult).transpose()?;
        self.r2 = self
            .r1
            .as_ref()
            .map(|t| stage_map(t, self.centre))
            .transpose()?;
        self.r1 = input.map(|p| stage_trig(self.theta_idx, p));
        Ok(out)
    }
}

/// Streams coordinates through a fresh pipeline, one per clock. The output
/// has the same length as the input; the first five entries are `None`.
pub fn pipeline_stream(
    theta_idx: usize,
    centre: Point,
    input: &[Point],
) -> Result<Vec<Option<Point>>, FixedError> {
    let mut pipe = RotatePipeline::new(theta_idx, centre);
    input.iter().map(|&p| pipe.clock(Some(p))).collect()
}
