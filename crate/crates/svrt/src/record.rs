//! Run records and curve CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use svrt_core::problems::ProblemId;
use svrt_core::training::{CurvePoint, Divergence, NormStats, OptimConfig, TrainCurve};

use crate::error::{Error, Result};

pub const RECORD_FILE: &str = "run_record.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: ProblemId,
    pub preset: String,
    pub optim: OptimConfig,
    pub curve: TrainCurve,
    pub final_test_accuracy: Option<f64>,
    /// Absent when validation accuracy never reached the threshold.
    pub convergence_epoch: Option<f64>,
    pub checkpoint_path: String,
    pub wall_time_secs: f64,
    pub norm: NormStats,
    pub input_side: usize,
    pub init_seed: u64,
    pub best_epoch: f64,
    pub diverged: Option<Divergence>,
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("record serializes");
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

pub const CURVE_HEADER: &str = "epoch,val_acc,train_loss";

pub fn curve_csv(curve: &TrainCurve) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for p in curve.points() {
        writeln!(s, "{},{},{}", p.epoch, p.val_accuracy, p.train_loss).unwrap();
    }
    s
}

pub fn parse_curve_csv(text: &str) -> std::result::Result<TrainCurve, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(format!("curve header must be '{CURVE_HEADER}'"));
    }
    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> std::result::Result<f64, String> {
            f.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| format!("row {}: bad field {i}", n + 1))
        };
        if f.len() != 3 {
            return Err(format!("row {}: expected 3 fields", n + 1));
        }
        points.push(CurvePoint {
            epoch: num(0)?,
            val_accuracy: num(1)?,
            train_loss: num(2)?,
        });
    }
    TrainCurve::from_points(points).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_round_trips() {
        let curve = TrainCurve::from_points([
            CurvePoint {
                epoch: 0.5,
                val_accuracy: 0.5125,
                train_loss: 0.6875,
            },
            CurvePoint {
                epoch: 1.0,
                val_accuracy: 0.75,
                train_loss: 0.1 + 0.2,
            },
        ])
        .unwrap();
        let csv = curve_csv(&curve);
        assert!(csv.starts_with("epoch,val_acc,train_loss\n0.5,0.5125,0.6875\n"));
        assert_eq!(parse_curve_csv(&csv).unwrap(), curve);
    }

    #[test]
    fn malformed_curves_are_rejected() {
        assert!(parse_curve_csv("epoch,acc\n").is_err());
        assert!(parse_curve_csv("epoch,val_acc,train_loss\n0.5,x,1\n").is_err());
        assert!(parse_curve_csv("epoch,val_acc,train_loss\n1.0,0.5,1\n").is_err());
    }
}
