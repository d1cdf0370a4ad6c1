//! Experiment reports as aligned text tables and CSV.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Duration;

use super::config::Mode;

pub const AXES: [&str; 3] = ["roll", "pitch", "yaw"];

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub mode: Mode,
    pub true_deg: [f64; 3],
    /// Mean estimate over the final 10% of updates.
    pub avg_est_deg: [f64; 3],
    /// Final per-axis standard deviation.
    pub confidence_deg: [f64; 3],
    /// Axes whose final confidence is below half the initial one.
    pub observed: [bool; 3],
    pub exceedance_rate: f64,
    pub update_count: u64,
    /// Excluded from the written table and CSV so reruns stay identical.
    pub runtime: Duration,
}

impl TestReport {
    pub fn error_deg(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.avg_est_deg[i] - self.true_deg[i])
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:>10} {:>12} {:>10} {:>15} {:>9}",
            "axis", "true_deg", "avg_est_deg", "error_deg", "confidence_deg", "observed"
        );
        let err = self.error_deg();
        for i in 0..3 {
            let _ = writeln!(
                s,
                "{:<6} {:>10.4} {:>12.4} {:>10.4} {:>15.4} {:>9}",
                AXES[i],
                self.true_deg[i],
                self.avg_est_deg[i],
                err[i],
                self.confidence_deg[i],
                if self.observed[i] { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            s,
            "mode {}  updates {}  exceedance_rate {:.5}",
            self.mode, self.update_count, self.exceedance_rate
        );
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "axis,true_deg,avg_est_deg,confidence_deg,observed,exceedance_rate,update_count"
        )?;
        for (i, axis) in AXES.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                axis,
                self.true_deg[i],
                self.avg_est_deg[i],
                self.confidence_deg[i],
                self.observed[i],
                self.exceedance_rate,
                self.update_count
            )?;
        }
        Ok(())
    }
}

/// One static maneuver: a single misaligned axis.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub label: String,
    pub axis: usize,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRow {
    pub label: String,
    pub report: TestReport,
}

/// Static accuracy runs above, dynamic repeatability runs below.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyTable {
    pub static_rows: Vec<StaticRow>,
    pub dynamic_rows: Vec<DynamicRow>,
}

impl AccuracyTable {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>14} {:>20} {:>18}",
            "test", "true_angle_deg", "avg_estimated_deg", "confidence_deg"
        );
        for row in &self.static_rows {
            let r = &row.report;
            let _ = writeln!(
                s,
                "{:<12} {:>14.3} {:>20.3} {:>18.3}",
                row.label,
                r.true_deg[row.axis],
                r.avg_est_deg[row.axis],
                r.confidence_deg[row.axis]
            );
        }
        if !self.dynamic_rows.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "{:<12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                "run", "roll_est", "pitch_est", "yaw_est", "roll_sd", "pitch_sd", "yaw_sd"
            );
            for row in &self.dynamic_rows {
                let r = &row.report;
                let _ = writeln!(
                    s,
                    "{:<12} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                    row.label,
                    r.avg_est_deg[0],
                    r.avg_est_deg[1],
                    r.avg_est_deg[2],
                    r.confidence_deg[0],
                    r.confidence_deg[1],
                    r.confidence_deg[2]
                );
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "section,label,roll_true,pitch_true,yaw_true,roll_est,pitch_est,yaw_est,roll_sd,pitch_sd,yaw_sd,exceedance_rate,update_count"
        )?;
        let rows = self
            .static_rows
            .iter()
            .map(|r| ("static", &r.label, &r.report))
            .chain(
                self.dynamic_rows
                    .iter()
                    .map(|r| ("dynamic", &r.label, &r.report)),
            );
        for (section, label, r) in rows {
            writeln!(
                w,
                "{section},{label},{},{},{},{},{},{},{},{},{},{},{}",
                r.true_deg[0],
                r.true_deg[1],
                r.true_deg[2],
                r.avg_est_deg[0],
                r.avg_est_deg[1],
                r.avg_est_deg[2],
                r.confidence_deg[0],
                r.confidence_deg[1],
                r.confidence_deg[2],
                r.exceedance_rate,
                r.update_count
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> TestReport {
        TestReport {
            mode: Mode::Static,
            true_deg: [0.0, 1.0, 0.0],
            avg_est_deg: [0.001, 0.979, 0.0],
            confidence_deg: [0.011, 0.011, 5.2],
            observed: [true, true, false],
            exceedance_rate: 0.0025,
            update_count: 27000,
            runtime: Duration::from_millis(123),
        }
    }

    #[test]
    fn table_lists_every_axis() {
        let t = report().to_table();
        assert_eq!(t.lines().count(), 5);
        assert!(t.contains("pitch"));
        assert!(t.contains("0.9790"));
        assert!(t.contains("-0.0210"));
        assert!(!t.contains("123"));
    }

    #[test]
    fn csv_shape() {
        let mut buf = Vec::new();
        report().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 7));
        assert_eq!(lines[2], "pitch,1,0.979,0.011,true,0.0025,27000");
    }

    #[test]
    fn accuracy_table_sections() {
        let t = AccuracyTable {
            static_rows: vec![StaticRow {
                label: "pitch +1".into(),
                axis: 1,
                report: report(),
            }],
            dynamic_rows: vec![DynamicRow {
                label: "drive 1".into(),
                report: report(),
            }],
        };
        let text = t.to_table();
        assert!(text.contains("0.979"));
        assert!(text.contains("yaw_sd"));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
