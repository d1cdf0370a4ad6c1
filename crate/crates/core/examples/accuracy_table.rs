//! Reproduces both halves of the accuracy table: six static single-axis
//! maneuvers and two dynamic drives with different seeds.
//!
//! ```text
//! cargo run --release --example accuracy_table
//! ```

use boresight::harness::{run_accuracy_table, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = run_accuracy_table(
        &ExperimentConfig::static_default(),
        &ExperimentConfig::dynamic_default(),
        &[1, 2],
    )?;
    print!("{}", table.to_table());
    for row in &table.static_rows {
        let r = &row.report;
        println!(
            "{:<10} error {:+.4} deg  exceedance {:.4}  {} updates  {:?}",
            row.label,
            r.error_deg()[row.axis],
            r.exceedance_rate,
            r.update_count,
            r.runtime
        );
    }
    Ok(())
}
