//! Grayscale frame buffers and binary PGM (P5) I/O.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("pgm parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("pgm i/o: {0}")]
    Io(String),
}

fn parse_err(offset: usize, message: impl Into<String>) -> PgmError {
    PgmError::Parse {
        offset,
        message: message.into(),
    }
}

/// Row-major 8-bit raster. `generation` counts how many warps produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub generation: u64,
}

impl FrameBuffer {
    /// Black frame. Panics if either dimension is zero.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![0; width * height],
            generation: 0,
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (width > 0 && height > 0 && pixels.len() == width * height).then_some(Self {
            width,
            height,
            pixels,
            generation: 0,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut frame = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                frame.pixels[y * width + x] = f(x, y);
            }
        }
        frame
    }

    /// Black frame of the same size, one generation behind `self` so it can
    /// receive a warp of `self`.
    pub fn scratch_like(&self) -> Self {
        Self {
            generation: self.generation.wrapping_sub(1),
            ..Self::new(self.width, self.height)
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: i64, y: i64) -> Option<u8> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some(self.pixels[y as usize * self.width + x as usize])
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

/// Two frame buffers whose roles alternate: one is read while the other is
/// written.
#[derive(Debug, Clone)]
pub struct DoubleBuffer {
    buffers: [FrameBuffer; 2],
    front: usize,
}

impl DoubleBuffer {
    pub fn new(initial: FrameBuffer) -> Self {
        let back = initial.scratch_like();
        Self {
            buffers: [initial, back],
            front: 0,
        }
    }

    pub fn front(&self) -> &FrameBuffer {
        &self.buffers[self.front]
    }

    /// Front for reading and back for writing, never the same buffer.
    pub fn split(&mut self) -> (&FrameBuffer, &mut FrameBuffer) {
        let [a, b] = &mut self.buffers;
        if self.front == 0 {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn swap(&mut self) {
        self.front ^= 1;
    }
}

fn skip_ws_and_comments(data: &[u8], mut pos: usize) -> usize {
    while pos < data.len() {
        match data[pos] {
            b'#' => {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => pos += 1,
            _ => break,
        }
    }
    pos
}

fn read_number(data: &[u8], pos: usize, what: &str) -> Result<(usize, usize), PgmError> {
    let start = skip_ws_and_comments(data, pos);
    let mut end = start;
    while end < data.len() && data[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(parse_err(start, format!("expected {what}")));
    }
    let text = std::str::from_utf8(&data[start..end]).expect("ascii digits");
    let value = text
        .parse::<usize>()
        .map_err(|_| parse_err(start, format!("{what} too large")))?;
    Ok((value, end))
}

/// Parses a binary PGM with maxval 255.
pub fn read_pgm(data: &[u8]) -> Result<FrameBuffer, PgmError> {
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(parse_err(0, "missing P5 magic"));
    }
    let (width, pos) = read_number(data, 2, "width")?;
    let (height, pos) = read_number(data, pos, "height")?;
    let (maxval, pos) = read_number(data, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(pos, "zero dimension"));
    }
    if maxval != 255 {
        return Err(parse_err(pos, format!("unsupported maxval {maxval}")));
    }
    match data.get(pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(parse_err(pos, "expected single whitespace before raster")),
    }
    let start = pos + 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(pos, "dimensions overflow"))?;
    let raster = data.get(start..);
    match raster {
        Some(r) if r.len() >= need => {
            Ok(FrameBuffer::from_pixels(width, height, r[..need].to_vec()).expect("sized"))
        }
        _ => Err(parse_err(
            data.len(),
            format!("raster truncated: need {need} bytes"),
        )),
    }
}

pub fn write_pgm(frame: &FrameBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

pub fn load_pgm(path: &Path) -> Result<FrameBuffer, PgmError> {
    let data = fs::read(path).map_err(|e| PgmError::Io(format!("{}: {e}", path.display())))?;
    read_pgm(&data)
}

pub fn save_pgm(path: &Path, frame: &FrameBuffer) -> Result<(), PgmError> {
    fs::write(path, write_pgm(frame)).map_err(|e| PgmError::Io(format!("{}: {e}", path.display())))
}
