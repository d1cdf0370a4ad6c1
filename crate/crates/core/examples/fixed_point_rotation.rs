//! The Q16.16 rotation path: table lookups, single-shot rotation against
//! double precision, and the five-stage pipeline fed one point per clock.
//!
//! ```text
//! cargo run --example fixed_point_rotation
//! ```

use boresight::affine::{
    angle_to_index, index_to_angle, lut_cos, lut_sin, rotate_coordinates, rotate_coordinates_exact,
    FixedQ16, RotatePipeline, LUT_SIZE,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "table of {LUT_SIZE} entries, step {:.4} deg",
        360.0 / LUT_SIZE as f64
    );
    for idx in [0, 128, 256, 512, 768] {
        println!(
            "  idx {idx:>4}  sin {:>9}  cos {:>9}",
            lut_sin(idx).to_string(),
            lut_cos(idx).to_string()
        );
    }
    let half = FixedQ16::from_f64(0.5)?;
    println!("0.5 in Q16.16: raw {:#x}", half.raw());

    let centre = (320, 240);
    let theta = 2f64.to_radians();
    let idx = angle_to_index(theta);
    println!(
        "\n2 deg -> index {idx} ({:.4} deg after quantization)",
        index_to_angle(idx).to_degrees()
    );
    for p in [(0, 0), (639, 0), (639, 479), (100, 400)] {
        let fixed = rotate_coordinates(idx, p, centre)?;
        let (ex, ey) = rotate_coordinates_exact(
            index_to_angle(idx),
            (p.0 as f64, p.1 as f64),
            (centre.0 as f64, centre.1 as f64),
        );
        println!("  {p:?} -> fixed {fixed:?}, float ({ex:.3}, {ey:.3})");
    }

    println!("\npipeline, one point per clock:");
    let mut pipe = RotatePipeline::new(256, centre);
    let input = [(330, 240), (320, 250), (310, 240), (320, 230)];
    let feed = input
        .iter()
        .map(|&p| Some(p))
        .chain(std::iter::repeat_n(None, 5));
    for (clock, p) in feed.enumerate() {
        let out = pipe.clock(p)?;
        println!("  clock {clock}: in {p:?}, out {out:?}");
    }
    Ok(())
}
