//! Report emission: `report.json`, `summary.csv`, `xfer.csv`, `curves/*.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use svrt_core::evalx::{self, PublishedReference, XferMatrix, PUBLISHED_REFERENCE};

use crate::error::{Error, Result};
use crate::record::{curve_csv, RunRecord};

pub const SUMMARY_HEADER: &str = "problem,preset,test_acc,convergence_epoch";

#[derive(Serialize)]
struct NamedRecord<'a> {
    run: &'a str,
    #[serde(flatten)]
    record: &'a RunRecord,
}

#[derive(Serialize)]
struct Report<'a> {
    runs: Vec<NamedRecord<'a>>,
    xfer: &'a XferMatrix,
    annotations: Vec<String>,
    /// Published values, shown for comparison only.
    published_reference: PublishedReference,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per run; an absent convergence epoch is an empty field.
pub fn summary_csv(records: &[(String, RunRecord)]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for (_, r) in records {
        writeln!(
            s,
            "{},{},{},{}",
            r.problem,
            r.preset,
            opt(r.final_test_accuracy),
            opt(r.convergence_epoch)
        )
        .unwrap();
    }
    s
}

/// Transfer matrix with one `test_<problem>` column per target.
pub fn xfer_csv(m: &XferMatrix) -> String {
    let mut s = String::from("run,preset,train_problem");
    for c in &m.cols {
        write!(s, ",test_{c}").unwrap();
    }
    s.push('\n');
    for r in &m.rows {
        write!(s, "{},{},{}", r.run, r.preset, r.train_problem).unwrap();
        for c in &r.cells {
            write!(s, ",{}", opt(*c)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Human-readable matrix in percent, with empty cells shown as `-`.
pub fn matrix_table(m: &XferMatrix) -> String {
    let mut s = format!("{:<24} {:<6}", "run", "train");
    for c in &m.cols {
        write!(s, " {:>8}", format!("test {c}")).unwrap();
    }
    for r in &m.rows {
        write!(s, "\n{:<24} {:<6}", r.run, r.train_problem).unwrap();
        for c in &r.cells {
            let cell = c.map_or("-".to_string(), |v| format!("{:.1}", 100.0 * v));
            write!(s, " {cell:>8}").unwrap();
        }
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_report(records: &[(String, RunRecord)], matrix: &XferMatrix, out_dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Usage("a report needs at least one run record".into()));
    }
    let curves = out_dir.join("curves");
    fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    let report = Report {
        runs: records
            .iter()
            .map(|(run, record)| NamedRecord { run, record })
            .collect(),
        xfer: matrix,
        annotations: evalx::annotate(matrix),
        published_reference: PUBLISHED_REFERENCE,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&out_dir.join("report.json"), &json)?;
    write(&out_dir.join("summary.csv"), &summary_csv(records))?;
    write(&out_dir.join("xfer.csv"), &xfer_csv(matrix))?;
    for (run, r) in records {
        write(&curves.join(format!("{run}.csv")), &curve_csv(&r.curve))?;
    }
    Ok(())
}
