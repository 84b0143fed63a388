//! Test-set evaluation, the zero-shot transfer matrix and the published
//! reference numbers shown next to our own results.
//!
//! Reference values are display-only: nothing in this crate computes with
//! them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::models::Model;
use crate::problems::ProblemId;
use crate::tensor::Real;
use crate::training::{evaluate_accuracy, ImageSet, NormStats};

/// Accuracy of a frozen model over all of `set`, normalized with `norm`,
/// which must be the statistics of the problem the model was trained on.
pub fn evaluate<T: Real>(model: &Model<T>, set: &ImageSet, norm: &NormStats) -> Result<f64> {
    let side = model.config().input_side;
    if set.side() != side {
        bail!(Shape, "model expects {side} px inputs, split has {} px", set.side());
    }
    evaluate_accuracy(model, set, norm)
}

/// `0.5 ± 3σ` for the accuracy of a guessing classifier on `n` balanced
/// samples, `σ = sqrt(0.25 / n)`.
pub fn chance_band(n: usize) -> (f64, f64) {
    let sigma = libm::sqrt(0.25 / n as f64);
    (0.5 - 3.0 * sigma, 0.5 + 3.0 * sigma)
}

/// One trained model's row of the transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XferRow {
    /// Run identifier, usually the run directory name.
    pub run: String,
    pub preset: String,
    pub train_problem: ProblemId,
    /// Aligned with [`XferMatrix::cols`]; `None` when the model or the
    /// target split could not be loaded.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XferMatrix {
    pub cols: Vec<ProblemId>,
    pub rows: Vec<XferRow>,
}

impl XferMatrix {
    pub fn new(cols: Vec<ProblemId>) -> Self {
        Self { cols, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: XferRow) -> Result<()> {
        if row.cells.len() != self.cols.len() {
            bail!(
                Argument,
                "row has {} cells for {} columns",
                row.cells.len(),
                self.cols.len()
            );
        }
        if let Some(v) = row.cells.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            bail!(Argument, "accuracy {v} outside [0, 1]");
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn cell(&self, row: usize, col: ProblemId) -> Option<f64> {
        let c = self.cols.iter().position(|&p| p == col)?;
        self.rows.get(row)?.cells[c]
    }

    /// Mean over rows trained on `from` of their accuracy on `to`.
    pub fn mean_transfer(&self, from: ProblemId, to: ProblemId) -> Option<f64> {
        let vals: Vec<f64> = (0..self.rows.len())
            .filter(|&r| self.rows[r].train_problem == from)
            .filter_map(|r| self.cell(r, to))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// A trained model offered to [`xfer_matrix`]. `model: None` marks a run
/// whose checkpoint could not be loaded; its cells stay empty.
#[derive(Clone)]
pub struct XferModel<'a, T> {
    pub run: String,
    pub preset: String,
    pub train_problem: ProblemId,
    pub model: Option<&'a Model<T>>,
    pub norm: NormStats,
}

/// Evaluates every model on every target test split. Models are only read.
pub fn xfer_matrix<T: Real>(models: &[XferModel<'_, T>], targets: &[(ProblemId, &ImageSet)]) -> Result<XferMatrix> {
    let mut m = XferMatrix::new(targets.iter().map(|t| t.0).collect());
    for xm in models {
        let cells = match xm.model {
            Some(model) => targets
                .iter()
                .map(|(_, set)| evaluate(model, set, &xm.norm).map(Some))
                .collect::<Result<Vec<_>>>()?,
            None => alloc::vec![None; targets.len()],
        };
        m.push_row(XferRow {
            run: xm.run.clone(),
            preset: xm.preset.clone(),
            train_problem: xm.train_problem,
            cells,
        })?;
    }
    Ok(m)
}

/// Published convergence-epoch entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RefCe {
    Epoch(f64),
    /// Printed as "-": the model never reached the threshold.
    NotReached,
    /// Printed as "n.a." or left blank: not measured.
    NotAvailable,
}

/// One published accuracy, in percent as printed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefEntry {
    pub model: &'static str,
    pub train_problem: ProblemId,
    pub test_problem: ProblemId,
    pub accuracy_pct: f64,
    pub ce: RefCe,
}

/// Which published table an entry comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RefTable {
    /// Same-problem test accuracy and convergence epoch.
    SameProblem,
    /// Trained on P1, tested on P5, P20 and P21.
    FromP1,
    /// Trained on P21, tested on P1, P5 and P20.
    FromP21,
}

/// Published results, for side-by-side display only.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PublishedReference {
    pub normative: bool,
    pub same_problem: &'static [RefEntry],
    pub from_p1: &'static [RefEntry],
    pub from_p21: &'static [RefEntry],
}

pub const PUBLISHED_REFERENCE: PublishedReference = PublishedReference {
    normative: false,
    same_problem: SAME_PROBLEM,
    from_p1: FROM_P1,
    from_p21: FROM_P21,
};

impl PublishedReference {
    pub fn table(&self, t: RefTable) -> &'static [RefEntry] {
        match t {
            RefTable::SameProblem => self.same_problem,
            RefTable::FromP1 => self.from_p1,
            RefTable::FromP21 => self.from_p21,
        }
    }

    pub fn lookup(&self, t: RefTable, model: &str, test: ProblemId) -> Option<&'static RefEntry> {
        self.table(t)
            .iter()
            .find(|e| e.model == model && e.test_problem == test)
    }
}

/// Published architecture closest in connectivity to each preset.
pub fn reference_model_for(preset: &str) -> Option<&'static str> {
    Some(match preset {
        "mini-res" => "ResNet-18",
        "mini-res-ws" | "mini-plain" => "ResNet-18-WS",
        "mini-dense" => "DenseNet-121",
        "mini-cor" => "CorNet-S",
        "mini-cor-ws" => "CorNet-S-WS",
        "mini-cor-wr" => "CorNet-S-WR",
        "mini-cor-ws-wr" => "CorNet-S-WS-WR",
        _ => return None,
    })
}

use ProblemId::{P1, P20, P21, P5};
use RefCe::{Epoch as E, NotAvailable as NA, NotReached as NR};

const fn same(model: &'static str, p: ProblemId, accuracy_pct: f64, ce: RefCe) -> RefEntry {
    RefEntry {
        model,
        train_problem: p,
        test_problem: p,
        accuracy_pct,
        ce,
    }
}

const fn cross(model: &'static str, from: ProblemId, to: ProblemId, accuracy_pct: f64) -> RefEntry {
    RefEntry {
        model,
        train_problem: from,
        test_problem: to,
        accuracy_pct,
        ce: NA,
    }
}

macro_rules! row4 {
    ($m:literal, $a1:expr, $c1:expr, $a5:expr, $c5:expr, $a20:expr, $c20:expr, $a21:expr, $c21:expr) => {
        [
            same($m, P1, $a1, $c1),
            same($m, P5, $a5, $c5),
            same($m, P20, $a20, $c20),
            same($m, P21, $a21, $c21),
        ]
    };
}

const SAME_PROBLEM_ROWS: [[RefEntry; 4]; 22] = [
    row4!("LeNet", 57.0, NA, 54.0, NA, 55.0, NA, 51.0, NA),
    row4!("GoogLeNet", 50.0, NA, 50.0, NA, 50.0, NA, 51.0, NA),
    row4!("AdaBoost", 98.0, NA, 87.0, NA, 70.0, NA, 50.0, NA),
    row4!("AlexNet", 50.0, NR, 50.0, NR, 50.0, NR, 50.0, NR),
    row4!("AlexNet 224x224", 50.0, NR, 50.0, NR, 50.0, NR, 50.0, NR),
    row4!("AlexNet norm.input", 80.1, NR, 50.0, NR, 76.1, NR, 84.1, NR),
    row4!("VGG-19", 50.0, NR, 50.0, NR, 50.0, NR, 50.0, NR),
    row4!("VGG-19 224x224", 50.0, NR, 50.0, NR, 50.0, NR, 50.0, NR),
    row4!("VGG-19-BN", 50.0, NR, 50.0, NR, 50.0, NR, 50.0, NR),
    row4!("VGG-19-BN 224x224", 93.8, E(1.5), 93.1, E(6.0), 50.0, NR, 50.0, NR),
    row4!("ResNet-18", 99.2, E(0.5), 99.9, E(2.5), 95.5, E(2.0), 96.2, E(17.5)),
    row4!("ResNet-18-WS", 98.9, E(0.5), 99.5, E(2.0), 95.7, E(1.0), 96.7, E(8.5)),
    row4!("ResNet-34", 98.2, E(4.5), 98.7, E(1.5), 93.8, E(6.5), 96.9, E(13.0)),
    row4!("ResNet-34-WS", 98.6, E(1.0), 97.6, E(1.5), 93.6, E(1.0), 90.8, E(17.5)),
    row4!("ResNet-101", 99.1, E(3.5), 96.0, E(3.5), 95.8, E(4.0), 91.1, E(20.5)),
    row4!("CorNet-S", 96.9, E(1.0), 96.8, E(2.0), 95.0, E(2.0), 96.9, E(17.0)),
    row4!("CorNet-S-WS", 95.6, E(1.5), 97.1, E(2.0), 92.7, E(3.0), 90.7, E(18.5)),
    row4!("CorNet-S-WR", 94.2, E(1.5), 91.0, E(7.5), 91.5, E(4.0), 88.3, NR),
    row4!("CorNet-S-WS-WR", 93.5, E(1.5), 92.7, E(8.0), 91.3, E(7.5), 86.5, NR),
    row4!("DenseNet-121", 99.6, E(1.0), 98.2, E(2.5), 94.2, E(1.5), 95.1, E(7.0)),
    row4!("DenseNet-201", 99.5, E(0.5), 99.3, E(1.5), 94.3, E(1.5), 97.5, E(17.0)),
    row4!("Human", 98.0, NA, 90.0, NA, 98.0, NA, 83.0, NA),
];

const SAME_PROBLEM: &[RefEntry] = SAME_PROBLEM_ROWS.as_flattened();

macro_rules! xrow {
    ($m:literal, $from:expr, [$t1:expr, $t2:expr, $t3:expr], [$a1:expr, $a2:expr, $a3:expr]) => {
        [
            cross($m, $from, $t1, $a1),
            cross($m, $from, $t2, $a2),
            cross($m, $from, $t3, $a3),
        ]
    };
}

const FROM_P1_ROWS: [[RefEntry; 3]; 10] = [
    xrow!("ResNet-18", P1, [P5, P20, P21], [56.5, 55.6, 51.6]),
    xrow!("ResNet-18-WS", P1, [P5, P20, P21], [56.4, 58.4, 51.2]),
    xrow!("ResNet-34", P1, [P5, P20, P21], [84.4, 61.6, 51.5]),
    xrow!("ResNet-34-WS", P1, [P5, P20, P21], [75.4, 61.3, 51.5]),
    xrow!("CorNet-S", P1, [P5, P20, P21], [73.6, 78.7, 52.0]),
    xrow!("CorNet-S-WS", P1, [P5, P20, P21], [64.6, 76.8, 51.7]),
    xrow!("CorNet-S-WR", P1, [P5, P20, P21], [63.9, 71.3, 52.5]),
    xrow!("CorNet-S-WS-WR", P1, [P5, P20, P21], [60.7, 76.2, 52.4]),
    xrow!("DenseNet-121", P1, [P5, P20, P21], [58.8, 55.3, 51.2]),
    xrow!("DenseNet-201", P1, [P5, P20, P21], [56.2, 54.5, 51.3]),
];

const FROM_P1: &[RefEntry] = FROM_P1_ROWS.as_flattened();

const FROM_P21_ROWS: [[RefEntry; 3]; 10] = [
    xrow!("ResNet-18", P21, [P1, P5, P20], [97.9, 54.2, 96.0]),
    xrow!("ResNet-18-WS", P21, [P1, P5, P20], [98.3, 53.3, 96.6]),
    xrow!("ResNet-34", P21, [P1, P5, P20], [98.3, 59.4, 96.6]),
    xrow!("ResNet-34-WS", P21, [P1, P5, P20], [94.2, 63.4, 91.7]),
    xrow!("CorNet-S", P21, [P1, P5, P20], [98.6, 54.2, 97.0]),
    xrow!("CorNet-S-WS", P21, [P1, P5, P20], [95.6, 59.1, 91.7]),
    xrow!("CorNet-S-WR", P21, [P1, P5, P20], [92.4, 61.4, 89.9]),
    xrow!("CorNet-S-WS-WR", P21, [P1, P5, P20], [91.7, 62.4, 87.9]),
    xrow!("DenseNet-121", P21, [P1, P5, P20], [96.9, 55.7, 95.1]),
    xrow!("DenseNet-201", P21, [P1, P5, P20], [98.9, 50.8, 97.4]),
];

const FROM_P21: &[RefEntry] = FROM_P21_ROWS.as_flattened();

/// Accuracy gap that counts as "easy" versus "near chance" in annotations.
pub const ASYMMETRY_GAP: f64 = 0.15;
/// Upper accuracy still considered near chance in annotations.
pub const NEAR_CHANCE: f64 = 0.6;

/// Qualitative observations about a transfer matrix, for reports only.
pub fn annotate(m: &XferMatrix) -> Vec<String> {
    let mut notes = Vec::new();
    if let (Some(fwd), Some(back)) = (m.mean_transfer(P21, P1), m.mean_transfer(P1, P21)) {
        if fwd - back >= ASYMMETRY_GAP && back <= NEAR_CHANCE {
            notes.push(format!(
                "asymmetry reproduced: trained on p21 -> p1 {:.1}%, trained on p1 -> p21 {:.1}% (near chance); published: 97.9% vs 51.6% for ResNet-18",
                100.0 * fwd,
                100.0 * back
            ));
        } else {
            notes.push(format!(
                "asymmetry not reproduced: trained on p21 -> p1 {:.1}%, trained on p1 -> p21 {:.1}%; published: 97.9% vs 51.6% for ResNet-18",
                100.0 * fwd,
                100.0 * back
            ));
        }
    }
    for from in [P1, P21] {
        let others: Vec<f64> = m
            .cols
            .iter()
            .filter(|&&c| c != from && c != P5)
            .filter_map(|&c| m.mean_transfer(from, c))
            .collect();
        if let (Some(p5), false) = (m.mean_transfer(from, P5), others.is_empty()) {
            let best = others.iter().cloned().fold(f64::MIN, f64::max);
            let verdict = if p5 < best { "harder than" } else { "not harder than" };
            notes.push(format!(
                "zero-shot transfer from {from} to p5 ({:.1}%) is {verdict} the best other target ({:.1}%)",
                100.0 * p5,
                100.0 * best
            ));
        }
    }
    notes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelConfig};
    use alloc::string::ToString;
    use alloc::vec;

    fn row(p: ProblemId, cells: Vec<Option<f64>>) -> XferRow {
        XferRow {
            run: p.to_string(),
            preset: "mini-res".into(),
            train_problem: p,
            cells,
        }
    }

    #[test]
    fn chance_band_matches_binomial_sigma() {
        let (lo, hi) = chance_band(10_000);
        assert!((lo - 0.485).abs() < 1e-12 && (hi - 0.515).abs() < 1e-12);
    }

    #[test]
    fn reference_tables_have_expected_sizes_and_anchor_values() {
        let r = PUBLISHED_REFERENCE;
        assert!(!r.normative);
        assert_eq!(r.same_problem.len(), 88);
        assert_eq!(r.from_p1.len(), 30);
        assert_eq!(r.from_p21.len(), 30);
        let e = r.lookup(RefTable::SameProblem, "ResNet-18", P1).unwrap();
        assert_eq!((e.accuracy_pct, e.ce), (99.2, RefCe::Epoch(0.5)));
        assert_eq!(
            r.lookup(RefTable::SameProblem, "DenseNet-201", P21)
                .unwrap()
                .accuracy_pct,
            97.5
        );
        assert_eq!(
            r.lookup(RefTable::SameProblem, "CorNet-S-WR", P21).unwrap().ce,
            RefCe::NotReached
        );
        assert_eq!(r.lookup(RefTable::FromP1, "ResNet-34", P5).unwrap().accuracy_pct, 84.4);
        assert_eq!(r.lookup(RefTable::FromP1, "ResNet-18", P21).unwrap().accuracy_pct, 51.6);
        assert_eq!(r.lookup(RefTable::FromP21, "ResNet-18", P1).unwrap().accuracy_pct, 97.9);
        for e in r.from_p1 {
            assert_eq!(e.train_problem, P1);
            assert_ne!(e.test_problem, P1);
        }
        for e in r.from_p21 {
            assert_eq!(e.train_problem, P21);
            assert_ne!(e.test_problem, P21);
        }
    }

    #[test]
    fn every_preset_maps_to_a_reference_row() {
        for p in crate::models::PRESET_NAMES {
            let m = reference_model_for(p).unwrap();
            assert!(
                PUBLISHED_REFERENCE.lookup(RefTable::SameProblem, m, P1).is_some(),
                "{p}"
            );
        }
    }

    #[test]
    fn push_row_validates_width_and_range() {
        let mut m = XferMatrix::new(vec![P1, P5]);
        assert!(m.push_row(row(P1, vec![Some(0.9)])).is_err());
        assert!(m.push_row(row(P1, vec![Some(1.2), None])).is_err());
        m.push_row(row(P1, vec![Some(0.9), None])).unwrap();
        assert_eq!(m.cell(0, P1), Some(0.9));
        assert_eq!(m.cell(0, P5), None);
        assert_eq!(m.cell(0, P21), None);
    }

    #[test]
    fn asymmetry_annotation_follows_the_numbers() {
        let cols = vec![P1, P5, P20, P21];
        let mut m = XferMatrix::new(cols.clone());
        m.push_row(row(P1, vec![Some(0.95), Some(0.55), Some(0.6), Some(0.51)]))
            .unwrap();
        m.push_row(row(P21, vec![Some(0.9), Some(0.52), Some(0.85), Some(0.9)]))
            .unwrap();
        let notes = annotate(&m);
        assert!(notes[0].starts_with("asymmetry reproduced"), "{notes:?}");
        assert!(notes
            .iter()
            .any(|n| n.contains("from p1 to p5") && n.contains("is harder than")));

        let mut flat = XferMatrix::new(cols);
        flat.push_row(row(P1, vec![Some(0.95), Some(0.5), Some(0.5), Some(0.5)]))
            .unwrap();
        flat.push_row(row(P21, vec![Some(0.52), Some(0.5), Some(0.5), Some(0.9)]))
            .unwrap();
        assert!(annotate(&flat)[0].starts_with("asymmetry not reproduced"));
    }

    #[test]
    fn annotation_needs_both_directions() {
        let mut m = XferMatrix::new(vec![P1, P21]);
        m.push_row(row(P1, vec![Some(0.9), Some(0.5)])).unwrap();
        assert!(annotate(&m).is_empty());
    }

    #[test]
    fn xfer_matrix_shape_missing_models_and_read_only() {
        let cfg = ModelConfig::preset("mini-res").unwrap().with_input_side(16);
        let model = build_model::<f64>(&cfg, 3).unwrap();
        let before = model
            .params()
            .iter()
            .map(|(_, p)| p.value.data().to_vec())
            .collect::<Vec<_>>();
        let mut set = ImageSet::new(16);
        for i in 0..6u8 {
            let px: Vec<u8> = (0..256)
                .map(|j| if (j + i as usize).is_multiple_of(7) { 0 } else { 255 })
                .collect();
            set.push(&px, i % 2 == 0).unwrap();
        }
        let norm = NormStats { mean: 0.8, std: 0.4 };
        let targets: Vec<(ProblemId, &ImageSet)> = ProblemId::ALL.iter().map(|&p| (p, &set)).collect();
        let models = [
            XferModel {
                run: "a".into(),
                preset: "mini-res".into(),
                train_problem: P1,
                model: Some(&model),
                norm,
            },
            XferModel {
                run: "missing".into(),
                preset: "mini-res".into(),
                train_problem: P21,
                model: None,
                norm,
            },
        ];
        let m = xfer_matrix(&models, &targets).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].cells.len(), 4);
        assert!(m.rows[0].cells.iter().all(Option::is_some));
        assert!(m.rows[1].cells.iter().all(Option::is_none));
        assert_eq!(m, xfer_matrix(&models, &targets).unwrap());
        let after = model
            .params()
            .iter()
            .map(|(_, p)| p.value.data().to_vec())
            .collect::<Vec<_>>();
        assert_eq!(before, after);

        let wrong = ImageSet::new(8);
        assert!(matches!(evaluate(&model, &wrong, &norm), Err(crate::Error::Shape(_))));
    }
}
