use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Rounds to `digits` decimals, sending decimal ties to the even neighbour.
pub fn round_half_even(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    let y = x * s;
    let fl = y.floor();
    let frac = y - fl;
    let tol = 1e-9 * y.abs().max(1.0);
    let r = if (frac - 0.5).abs() <= tol {
        if fl.rem_euclid(2.0) == 0.0 { fl } else { fl + 1.0 }
    } else {
        y.round()
    };
    r / s
}

fn fmt2(x: f64) -> String {
    format!("{:.2}", round_half_even(x, 2))
}

/// Success percentages on the two difficulty buckets plus validity.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SuccessRow {
    pub method: String,
    pub easy: f64,
    pub hard: f64,
    pub valid: f64,
}

impl SuccessRow {
    pub fn average(&self) -> f64 {
        (self.easy + self.hard) / 2.0
    }
}

/// Generative-quality row: Fréchet distance, precision, recall, validity.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct QualityRow {
    pub method: String,
    pub fid: f64,
    pub precision: f64,
    pub recall: f64,
    pub valid: f64,
}

pub const SUCCESS_COLUMNS: [&str; 5] = ["Method", "Easy", "Hard", "Average", "Valid"];
pub const QUALITY_COLUMNS: [&str; 5] = ["Method", "FID-like", "Pre", "Rec", "Val%"];

fn table(columns: &[&str], rows: &[Vec<String>]) -> (String, String) {
    let mut csv = columns.join(",");
    csv.push('\n');
    let mut md = format!("| {} |\n|{}\n", columns.join(" | "), "---|".repeat(columns.len()));
    for r in rows {
        let _ = writeln!(csv, "{}", r.join(","));
        let _ = writeln!(md, "| {} |", r.join(" | "));
    }
    (csv, md)
}

pub fn success_table(rows: &[SuccessRow]) -> (String, String) {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.method.clone(), fmt2(r.easy), fmt2(r.hard), fmt2(r.average()), fmt2(r.valid)])
        .collect();
    table(&SUCCESS_COLUMNS, &body)
}

pub fn quality_table(rows: &[QualityRow]) -> (String, String) {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.method.clone(), fmt2(r.fid), fmt2(r.precision), fmt2(r.recall), fmt2(r.valid)])
        .collect();
    table(&QUALITY_COLUMNS, &body)
}

/// Writes `<stem>.csv` and `<stem>.md` into `dir`.
pub fn write_report(dir: &Path, stem: &str, tables: (String, String)) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{stem}.csv")), tables.0)?;
    std::fs::write(dir.join(format!("{stem}.md")), tables.1)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even() {
        assert_eq!(round_half_even(0.125, 2), 0.12);
        assert_eq!(round_half_even(0.135, 2), 0.14);
        assert_eq!(round_half_even(2.675, 2), 2.68);
        assert_eq!(round_half_even(1.004, 2), 1.0);
        assert_eq!(round_half_even(-0.125, 2), -0.12);
        assert_eq!(round_half_even(50.5, 0), 50.0);
    }

    #[test]
    fn column_order_is_fixed() {
        let (csv, md) = success_table(&[SuccessRow { method: "search".into(), easy: 90.0, hard: 41.125, valid: 100.0 }]);
        assert_eq!(csv, "Method,Easy,Hard,Average,Valid\nsearch,90.00,41.12,65.56,100.00\n");
        assert!(md.starts_with("| Method | Easy | Hard | Average | Valid |"));
        let (csv, _) = quality_table(&[QualityRow { method: "m".into(), fid: 1.0, precision: 0.5, recall: 0.25, valid: 99.0 }]);
        assert!(csv.starts_with("Method,FID-like,Pre,Rec,Val%\n"));
    }

    #[test]
    fn rerun_identical() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [SuccessRow { method: "a".into(), easy: 1.0, hard: 2.0, valid: 3.0 }];
        write_report(dir.path(), "t", success_table(&rows)).unwrap();
        let first = std::fs::read(dir.path().join("t.csv")).unwrap();
        write_report(dir.path(), "t", success_table(&rows)).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("t.csv")).unwrap());
    }
}
