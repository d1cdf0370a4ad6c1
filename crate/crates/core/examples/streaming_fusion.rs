//! Runs the filter incrementally, the way it would sit behind a serial
//! link: bytes in, frames out, IMU/ACC pairs aligned as they arrive, one
//! predict/update per pair.
//!
//! ```text
//! cargo run --example streaming_fusion
//! ```

use boresight::fusion::{confidence, BoresightFilter, FilterConfig};
use boresight::geometry::{EulerAngles, GRAVITY};
use boresight::harness::{simulate, ExperimentConfig, ProfileKind};
use boresight::ingestion::{encode_log, FrameParser, Sample, StreamAligner};
use boresight::sensors::calibrate_static;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        misalignment: EulerAngles::from_degrees(1.5, -0.8, 1.2),
        profile: ProfileKind::Mixed,
        ..ExperimentConfig::dynamic_default()
    };
    let bytes = encode_log(&simulate(&cfg)?.samples())?;
    let cal_end = (cfg.calibration * 1000.0) as u32;

    let mut parser = FrameParser::new();
    let (mut cal_imu, mut cal_acc) = (Vec::new(), Vec::new());
    let mut calibration = None;
    let mut aligner = StreamAligner::new();
    let mut filter = BoresightFilter::new(FilterConfig::dynamic_default())?;
    let mut next_print = cal_end;

    // 256-byte reads
    for chunk in bytes.chunks(256) {
        for sample in parser.feed(chunk) {
            if sample.t_ms() < cal_end {
                match sample {
                    Sample::Imu(s) => cal_imu.push(s),
                    Sample::Acc(s) => cal_acc.push(s),
                }
                continue;
            }
            let cal = match calibration {
                Some(c) => c,
                None => {
                    let c = calibrate_static(&cal_imu, &cal_acc, GRAVITY)?;
                    println!(
                        "calibrated on {} IMU / {} ACC samples, ACC bias ({:.4}, {:.4})",
                        cal_imu.len(),
                        cal_acc.len(),
                        c.acc.accel_bias.x,
                        c.acc.accel_bias.y
                    );
                    calibration = Some(c);
                    c
                }
            };
            let epochs = match sample {
                Sample::Imu(s) => aligner.push_imu(cal.correct_imu(&s)),
                Sample::Acc(s) => aligner.push_acc(cal.correct_acc(&s)),
            };
            for e in &epochs {
                filter.step(e);
                if e.t_ms >= next_print {
                    let est = filter.estimate().expect("stepped");
                    let [r, p, y] = est.angles_deg();
                    let [sr, sp, sy] = confidence(est);
                    println!(
                        "t={:>6.1} s  roll {r:+.3} ({sr:.3})  pitch {p:+.3} ({sp:.3})  yaw {y:+.3} ({sy:.3}) deg",
                        e.t_ms as f64 / 1000.0
                    );
                    next_print += 30_000;
                }
            }
        }
    }
    for e in &aligner.finish().epochs {
        filter.step(e);
    }
    let [r, p, y] = cfg.misalignment.to_degrees();
    println!("truth        roll {r:+.3}          pitch {p:+.3}          yaw {y:+.3} deg");
    println!("{:?}", filter.diagnostics());
    Ok(())
}
