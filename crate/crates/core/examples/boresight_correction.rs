//! The whole loop: a camera knocked out of alignment, the misalignment
//! estimated from accelerometer data, and the image corrected with the
//! estimate. Writes the original, misaligned and corrected frames as PGM.
//!
//! ```text
//! cargo run --release --example boresight_correction [-- out_dir]
//! ```

use std::path::PathBuf;

use boresight::affine::{
    interior_match_fraction, save_pgm, simulate_misaligned_view, tile_pattern, CameraModel,
};
use boresight::geometry::EulerAngles;
use boresight::harness::{correct_frame, run_static_test, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir)?;

    let truth = EulerAngles::from_degrees(2.0, 1.0, 1.0);
    let cfg = ExperimentConfig {
        misalignment: truth,
        ..ExperimentConfig::static_default()
    };
    let report = run_static_test(&cfg)?;
    print!("{}", report.to_table());
    let [r, p, y] = report.avg_est_deg;
    let estimate = EulerAngles::from_degrees(r, p, y);

    let scene = tile_pattern(640, 480, 40);
    let cam = CameraModel::for_frame(&scene);
    let view = simulate_misaligned_view(&scene, truth, &cam)?;
    let fixed = correct_frame(&view, estimate, cam.focal_px)?;
    for (name, frame) in [
        ("scene", &scene),
        ("misaligned", &view),
        ("corrected", &fixed),
    ] {
        save_pgm(&dir.join(format!("{name}.pgm")), frame)?;
    }
    println!(
        "interior pixels matching the scene: {:.1}% misaligned, {:.1}% corrected",
        100.0 * interior_match_fraction(&scene, &view, 32),
        100.0 * interior_match_fraction(&scene, &fixed, 32)
    );
    println!("frames written to {}", dir.display());
    Ok(())
}
