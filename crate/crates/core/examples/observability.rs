//! How much each maneuver schedule reveals about yaw. Level gravity says
//! nothing about it; tilting the platform or driving supplies the horizontal
//! specific force it needs.
//!
//! ```text
//! cargo run --release --example observability
//! ```

use boresight::geometry::EulerAngles;
use boresight::harness::{run_experiment, ExperimentConfig, Mode, ProfileKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mis = EulerAngles::from_degrees(1.0, 1.0, 1.0);
    println!(
        "{:<8} {:>10} {:>10} {:>10} {:>10}",
        "profile", "roll_sd", "pitch_sd", "yaw_sd", "yaw_est"
    );
    for (mode, kind) in [
        (Mode::Static, ProfileKind::Level),
        (Mode::Static, ProfileKind::Tilt),
        (Mode::Dynamic, ProfileKind::Forward),
        (Mode::Dynamic, ProfileKind::Mixed),
    ] {
        let cfg = ExperimentConfig {
            misalignment: mis,
            profile: kind,
            ..ExperimentConfig::default_for(mode)
        };
        let (r, _) = run_experiment(&cfg)?;
        println!(
            "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            kind.to_string(),
            r.confidence_deg[0],
            r.confidence_deg[1],
            r.confidence_deg[2],
            r.avg_est_deg[2]
        );
    }
    Ok(())
}
