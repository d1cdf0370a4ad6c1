//! Binary sensor log format (`.sbl`) and time alignment of the two streams.
//!
//! Frame layout, all multi-byte fields little-endian:
//!
//! ```text
//! 0xAA | kind | t_ms: u32 | payload: i16 x n | xor(kind..payload)
//! ```
//!
//! `kind` is `0x01` for IMU frames (n = 6: gx, gy, gz, ax, ay, az) and `0x02`
//! for ACC frames (n = 2: ax, ay). Acceleration is scaled at 0.001 m/s² per
//! LSB and angular rate at 0.0001 rad/s per LSB.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Vec3;
use crate::sensors::{AccSample, ImuSample};

pub const SYNC: u8 = 0xAA;
pub const KIND_IMU: u8 = 0x01;
pub const KIND_ACC: u8 = 0x02;
pub const ACCEL_LSB: f64 = 0.001;
pub const GYRO_LSB: f64 = 0.0001;
pub const IMU_FRAME_LEN: usize = 1 + 1 + 4 + 12 + 1;
pub const ACC_FRAME_LEN: usize = 1 + 1 + 4 + 4 + 1;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("value out of range on channel {channel}: {value}")]
    OutOfRange { channel: &'static str, value: f64 },
    #[error("incomplete frame: have {have} bytes, need {need}")]
    Incomplete { have: usize, need: usize },
    #[error("bad checksum: expected {expected:#04x}, found {found:#04x}")]
    BadChecksum { expected: u8, found: u8 },
    #[error("unknown frame kind {0:#04x}")]
    UnknownKind(u8),
    #[error("no sync byte")]
    NoSync,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Imu(ImuSample),
    Acc(AccSample),
}

impl Sample {
    pub fn t_ms(&self) -> u32 {
        match self {
            Sample::Imu(s) => s.t_ms,
            Sample::Acc(s) => s.t_ms,
        }
    }
}

impl From<ImuSample> for Sample {
    fn from(s: ImuSample) -> Self {
        Sample::Imu(s)
    }
}

impl From<AccSample> for Sample {
    fn from(s: AccSample) -> Self {
        Sample::Acc(s)
    }
}

fn scale(value: f64, lsb: f64, channel: &'static str) -> Result<i16, WireError> {
    let scaled = (value / lsb).round();
    if !scaled.is_finite() || scaled < i16::MIN as f64 || scaled > i16::MAX as f64 {
        return Err(WireError::OutOfRange { channel, value });
    }
    Ok(scaled as i16)
}

fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

pub fn encode_frame(sample: &Sample) -> Result<Vec<u8>, WireError> {
    let (kind, t_ms, values): (u8, u32, Vec<i16>) = match sample {
        Sample::Imu(s) => (
            KIND_IMU,
            s.t_ms,
            vec![
                scale(s.rate.x, GYRO_LSB, "gx")?,
                scale(s.rate.y, GYRO_LSB, "gy")?,
                scale(s.rate.z, GYRO_LSB, "gz")?,
                scale(s.accel.x, ACCEL_LSB, "ax")?,
                scale(s.accel.y, ACCEL_LSB, "ay")?,
                scale(s.accel.z, ACCEL_LSB, "az")?,
            ],
        ),
        Sample::Acc(s) => (
            KIND_ACC,
            s.t_ms,
            vec![
                scale(s.ax, ACCEL_LSB, "ax_s")?,
                scale(s.ay, ACCEL_LSB, "ay_s")?,
            ],
        ),
    };
    let mut out = Vec::with_capacity(IMU_FRAME_LEN);
    out.push(SYNC);
    out.push(kind);
    out.extend_from_slice(&t_ms.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(checksum(&out[1..]));
    Ok(out)
}

fn frame_len(kind: u8) -> Option<usize> {
    match kind {
        KIND_IMU => Some(IMU_FRAME_LEN),
        KIND_ACC => Some(ACC_FRAME_LEN),
        _ => None,
    }
}

fn read_i16(b: &[u8], at: usize) -> f64 {
    i16::from_le_bytes([b[at], b[at + 1]]) as f64
}

/// Decodes one frame that starts at `bytes[0]`. On success returns the
/// sample and the number of bytes consumed.
pub fn parse_frame(bytes: &[u8]) -> Result<(Sample, usize), WireError> {
    match bytes.first() {
        None => {
            return Err(WireError::Incomplete {
                have: 0,
                need: ACC_FRAME_LEN,
            })
        }
        Some(&b) if b != SYNC => return Err(WireError::NoSync),
        _ => {}
    }
    let Some(&kind) = bytes.get(1) else {
        return Err(WireError::Incomplete {
            have: bytes.len(),
            need: ACC_FRAME_LEN,
        });
    };
    let len = frame_len(kind).ok_or(WireError::UnknownKind(kind))?;
    if bytes.len() < len {
        return Err(WireError::Incomplete {
            have: bytes.len(),
            need: len,
        });
    }
    let frame = &bytes[..len];
    let expected = checksum(&frame[1..len - 1]);
    let found = frame[len - 1];
    if expected != found {
        return Err(WireError::BadChecksum { expected, found });
    }
    let t_ms = u32::from_le_bytes([frame[2], frame[3], frame[4], frame[5]]);
    let sample = if kind == KIND_IMU {
        Sample::Imu(ImuSample {
            t_ms,
            rate: Vec3::new(
                read_i16(frame, 6) * GYRO_LSB,
                read_i16(frame, 8) * GYRO_LSB,
                read_i16(frame, 10) * GYRO_LSB,
            ),
            accel: Vec3::new(
                read_i16(frame, 12) * ACCEL_LSB,
                read_i16(frame, 14) * ACCEL_LSB,
                read_i16(frame, 16) * ACCEL_LSB,
            ),
        })
    } else {
        Sample::Acc(AccSample {
            t_ms,
            ax: read_i16(frame, 6) * ACCEL_LSB,
            ay: read_i16(frame, 8) * ACCEL_LSB,
        })
    };
    Ok((sample, len))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub frames: usize,
    pub bad_checksum: usize,
    pub unknown_kind: usize,
    /// Bytes discarded while hunting for a sync byte.
    pub skipped_bytes: usize,
}

impl ParseStats {
    pub fn dropped(&self) -> usize {
        self.bad_checksum + self.unknown_kind
    }
}

/// Incremental decoder for one byte stream. A truncated frame at the end of
/// the buffer is kept until more bytes arrive.
#[derive(Debug, Default)]
pub struct FrameParser {
    buf: Vec<u8>,
    stats: ParseStats,
}

impl FrameParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Sample> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < self.buf.len() {
            if self.buf[pos] != SYNC {
                let next = self.buf[pos..]
                    .iter()
                    .position(|&b| b == SYNC)
                    .map_or(self.buf.len(), |off| pos + off);
                self.stats.skipped_bytes += next - pos;
                pos = next;
                continue;
            }
            match parse_frame(&self.buf[pos..]) {
                Ok((sample, used)) => {
                    self.stats.frames += 1;
                    out.push(sample);
                    pos += used;
                }
                Err(WireError::Incomplete { .. }) => break,
                Err(WireError::BadChecksum { .. }) => {
                    self.stats.bad_checksum += 1;
                    pos += 1;
                }
                Err(WireError::UnknownKind(_)) => {
                    self.stats.unknown_kind += 1;
                    pos += 1;
                }
                Err(_) => pos += 1,
            }
        }
        self.buf.drain(..pos);
        out
    }
}

pub fn encode_log(samples: &[Sample]) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(samples.len() * IMU_FRAME_LEN);
    for s in samples {
        out.extend(encode_frame(s)?);
    }
    Ok(out)
}

pub fn decode_log(bytes: &[u8]) -> (Vec<Sample>, ParseStats) {
    let mut parser = FrameParser::new();
    let samples = parser.feed(bytes);
    (samples, parser.stats())
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
}

pub fn write_log(path: &Path, samples: &[Sample]) -> Result<(), LogError> {
    fs::write(path, encode_log(samples)?)?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<(Vec<Sample>, ParseStats), LogError> {
    Ok(decode_log(&fs::read(path)?))
}

/// Splits a decoded log into its IMU and ACC streams.
pub fn split_streams(samples: &[Sample]) -> (Vec<ImuSample>, Vec<AccSample>) {
    let mut imu = Vec::new();
    let mut acc = Vec::new();
    for s in samples {
        match s {
            Sample::Imu(x) => imu.push(*x),
            Sample::Acc(x) => acc.push(*x),
        }
    }
    (imu, acc)
}

/// IMU and ACC readings at a common timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedEpoch {
    pub t_ms: u32,
    pub imu: ImuSample,
    pub acc: AccSample,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    pub epochs: Vec<FusedEpoch>,
    /// ACC samples outside the IMU span or repeating an earlier timestamp.
    pub dropped: usize,
    pub diagnostic: Option<String>,
}

fn interpolate(a: &ImuSample, b: &ImuSample, t_ms: u32) -> ImuSample {
    if b.t_ms == a.t_ms || t_ms == b.t_ms {
        return ImuSample { t_ms, ..*b };
    }
    if t_ms == a.t_ms {
        return ImuSample { t_ms, ..*a };
    }
    let w = (t_ms - a.t_ms) as f64 / (b.t_ms - a.t_ms) as f64;
    ImuSample {
        t_ms,
        rate: a.rate + (b.rate - a.rate) * w,
        accel: a.accel + (b.accel - a.accel) * w,
    }
}

/// One epoch per ACC sample inside the IMU time span, with the IMU linearly
/// interpolated to the ACC timestamp.
pub fn align_streams(imu: &[ImuSample], acc: &[AccSample]) -> Alignment {
    let mut aligner = StreamAligner::new();
    let mut epochs = Vec::with_capacity(acc.len());
    // Feeding all IMU first is equivalent to any interleaving.
    for s in imu {
        epochs.extend(aligner.push_imu(*s));
    }
    for s in acc {
        epochs.extend(aligner.push_acc(*s));
    }
    let mut out = aligner.finish();
    epochs.append(&mut out.epochs);
    out.epochs = epochs;
    out
}

/// Incremental form of [`align_streams`]. Any interleaving of pushes
/// produces the same epochs as the batch call.
#[derive(Debug, Default)]
pub struct StreamAligner {
    /// Last two IMU samples plus anything newer not yet consumed.
    imu: std::collections::VecDeque<ImuSample>,
    first_imu: Option<u32>,
    pending: std::collections::VecDeque<AccSample>,
    last_epoch: Option<u32>,
    dropped: usize,
    seen_acc: bool,
}

impl StreamAligner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_imu(&mut self, s: ImuSample) -> Vec<FusedEpoch> {
        if self.first_imu.is_none() {
            self.first_imu = Some(s.t_ms);
        }
        self.imu.push_back(s);
        self.drain(false)
    }

    pub fn push_acc(&mut self, s: AccSample) -> Vec<FusedEpoch> {
        self.seen_acc = true;
        self.pending.push_back(s);
        self.drain(false)
    }

    /// Until `finished`, an ACC sample waits for an IMU sample strictly
    /// after it, since later IMU samples may repeat its timestamp.
    fn drain(&mut self, finished: bool) -> Vec<FusedEpoch> {
        let mut out = Vec::new();
        let Some(first) = self.first_imu else {
            return out;
        };
        while let Some(&acc) = self.pending.front() {
            if acc.t_ms < first || self.last_epoch.is_some_and(|t| acc.t_ms <= t) {
                self.dropped += 1;
                self.pending.pop_front();
                continue;
            }
            let last = self.imu.back().expect("first_imu implies a sample").t_ms;
            if acc.t_ms > last || (!finished && acc.t_ms == last) {
                break;
            }
            // Bracket: the last sample at or before acc.t_ms and the next one.
            let idx = self.imu.partition_point(|s| s.t_ms <= acc.t_ms);
            let lo = &self.imu[idx - 1];
            let hi = self.imu.get(idx).unwrap_or(lo);
            let imu = interpolate(lo, hi, acc.t_ms);
            out.push(FusedEpoch {
                t_ms: acc.t_ms,
                imu,
                acc,
            });
            self.last_epoch = Some(acc.t_ms);
            self.pending.pop_front();
            // Samples strictly before the bracket are no longer needed.
            if idx >= 2 {
                self.imu.drain(..idx - 1);
            }
        }
        out
    }

    pub fn finish(mut self) -> Alignment {
        let mut epochs = self.drain(true);
        let diagnostic = if self.first_imu.is_none() || !self.seen_acc {
            Some(format!(
                "empty input stream: {} IMU, {} ACC samples",
                if self.first_imu.is_some() {
                    "some"
                } else {
                    "no"
                },
                if self.seen_acc { "some" } else { "no" },
            ))
        } else {
            None
        };
        self.dropped += self.pending.len();
        if self.first_imu.is_none() {
            epochs.clear();
        }
        Alignment {
            epochs,
            dropped: self.dropped,
            diagnostic,
        }
    }
}

pub fn write_epochs_csv<W: Write>(mut w: W, epochs: &[FusedEpoch]) -> io::Result<()> {
    writeln!(w, "t_ms,gx,gy,gz,ax_v,ay_v,az_v,ax_s,ay_s")?;
    for e in epochs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            e.t_ms,
            e.imu.rate.x,
            e.imu.rate.y,
            e.imu.rate.z,
            e.imu.accel.x,
            e.imu.accel.y,
            e.imu.accel.z,
            e.acc.ax,
            e.acc.ay
        )?;
    }
    Ok(())
}
