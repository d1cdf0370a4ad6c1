//! Records a simulated run in the `.sbl` binary format, damages the log and
//! decodes it again with the streaming parser fed in uneven chunks.
//!
//! ```text
//! cargo run --example wire_log [-- out.sbl]
//! ```

use boresight::harness::{simulate, ExperimentConfig};
use boresight::ingestion::{encode_log, FrameParser, Sample, ACC_FRAME_LEN, IMU_FRAME_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        duration: 30.0,
        ..ExperimentConfig::static_default()
    };
    let samples = simulate(&cfg)?.samples();
    let mut bytes = encode_log(&samples)?;
    println!(
        "{} samples -> {} bytes (IMU frame {IMU_FRAME_LEN} B, ACC frame {ACC_FRAME_LEN} B)",
        samples.len(),
        bytes.len()
    );
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, &bytes)?;
        println!("wrote {path}");
    }

    // flip one byte in every ~500
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let damaged = bytes.len() / 500;
    for _ in 0..damaged {
        let i = rng.random_range(0..bytes.len());
        bytes[i] ^= 1 << rng.random_range(0..8);
    }

    let mut parser = FrameParser::new();
    let mut decoded = Vec::new();
    let mut rest = &bytes[..];
    while !rest.is_empty() {
        let n = rng.random_range(1..64).min(rest.len());
        decoded.extend(parser.feed(&rest[..n]));
        rest = &rest[n..];
    }
    let stats = parser.stats();
    let imu = decoded
        .iter()
        .filter(|s| matches!(s, Sample::Imu(_)))
        .count();
    println!("{damaged} bytes damaged");
    println!(
        "decoded {} frames ({imu} IMU, {} ACC), {} bad checksums, {} unknown kinds, {} bytes skipped, {} pending",
        decoded.len(),
        decoded.len() - imu,
        stats.bad_checksum,
        stats.unknown_kind,
        stats.skipped_bytes,
        parser.pending()
    );
    Ok(())
}
