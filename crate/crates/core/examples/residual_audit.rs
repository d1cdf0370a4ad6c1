//! Residuals against their 3-sigma bounds for a static and a moving run,
//! each with a well-tuned and an under-estimated measurement noise. Writes
//! one residual CSV per case for plotting.
//!
//! ```text
//! cargo run --release --example residual_audit [-- out_dir]
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use boresight::fusion::write_update_csv;
use boresight::harness::{run_residual_audit, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir)?;

    let cases = [
        ("static", ExperimentConfig::static_default(), [0.01, 0.005]),
        (
            "moving",
            ExperimentConfig::dynamic_default(),
            [0.015, 0.003],
        ),
    ];
    for (name, base, sigmas) in cases {
        for r_sigma in sigmas {
            let mut cfg = base.clone();
            cfg.filter.r_sigma = r_sigma;
            let audit = run_residual_audit(&cfg)?;
            let path = dir.join(format!("residuals_{name}_r{r_sigma}.csv"));
            write_update_csv(BufWriter::new(File::create(&path)?), &audit.records)?;
            println!(
                "{name:<7} r_sigma {r_sigma:<6} {}  -> {}",
                audit.summary.summary_line(),
                path.display()
            );
        }
    }
    Ok(())
}
