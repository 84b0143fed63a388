//! Finite-difference gradient suite over every differentiable op and every
//! preset model, run at 64-bit.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::models::{build_model, Model, ModelConfig, PRESET_NAMES};
use crate::tensor::{
    check_tape_gradients, BnStats, BuildFn, Fault, GradComparison, Mode, RunningStats, Tape, Tensor, ABS_FALLBACK,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    /// Central-difference step for single ops.
    pub op_eps: f64,
    /// Step for whole models. Small so that few input batches are rejected
    /// for lying near a kink; round-off stays below the absolute fallback.
    pub model_eps: f64,
    pub op_tolerance: f64,
    pub bce_tolerance: f64,
    pub model_tolerance: f64,
    /// Input side of the preset models. Parameter shapes do not depend on it.
    pub model_side: usize,
    pub model_batch: usize,
    /// Probed coordinates per parameter tensor.
    pub model_coords: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            op_eps: 1e-5,
            model_eps: 1e-7,
            op_tolerance: 1e-5,
            bce_tolerance: 1e-6,
            model_tolerance: 1e-5,
            model_side: 16,
            model_batch: 4,
            model_coords: 2,
            seed: 0x5eed,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel: f64,
    pub max_abs: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel < self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(CheckResult::passed)
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], away_from_zero: bool) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            match away_from_zero {
                true if v >= 0.0 => v + 0.1,
                true => v - 0.1,
                false => v,
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

/// Runs every op check and every preset model check.
pub fn run_suite(cfg: &GradcheckConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for (name, tol, inputs, build) in op_cases(cfg.seed, cfg.op_tolerance, cfg.bce_tolerance) {
        let c = check_tape_gradients(&inputs, cfg.op_eps, cfg.fault, &*build)?;
        report.results.push(result(name, c, tol));
    }
    for preset in PRESET_NAMES {
        let c = check_preset(preset, cfg)?;
        report
            .results
            .push(result(format!("model {preset}"), c, cfg.model_tolerance));
    }
    Ok(report)
}

fn result(name: impl Into<String>, c: GradComparison, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        max_rel: c.max_rel,
        max_abs: c.max_abs,
        tolerance,
    }
}

type Case = (&'static str, f64, Vec<Tensor<f64>>, Box<BuildFn<'static, f64>>);

fn op_cases(seed: u64, tol: f64, bce_tol: f64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |shape: &[usize]| uniform(&mut rng, shape, false);
    let x = r(&[2, 3, 6, 6]);
    let x7 = r(&[2, 3, 7, 7]);
    let w3 = r(&[4, 3, 3, 3]);
    let w1 = r(&[4, 3, 1, 1]);
    let b4 = r(&[4]);
    let gamma = r(&[3]).map(|g| g + 1.5);
    let beta = r(&[3]);
    let y = r(&[2, 3, 6, 6]);
    let z = r(&[2, 2, 6, 6]);
    let feats = r(&[5, 7]);
    let dw = r(&[7, 3]);
    let db = r(&[3]);
    let logits = r(&[8]).map(|v| 4.0 * v);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let xa = uniform(&mut rng2, &[2, 3, 6, 6], true);
    let targets: Vec<f64> = (0..8).map(|i| f64::from(i % 3 == 0)).collect();
    let weights: Vec<f64> = (0..6).map(|i| 0.5 - i as f64 * 0.3).collect();

    vec![
        (
            "conv2d 3x3 stride 1",
            tol,
            vec![x.clone(), w3.clone(), b4.clone()],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.conv2d(i[0], i[1], Some(i[2]), 1, 1)) as Box<BuildFn<'static, f64>>,
        ),
        (
            "conv2d 3x3 stride 2",
            tol,
            vec![x7, w3],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.conv2d(i[0], i[1], None, 2, 1)),
        ),
        (
            "conv2d 1x1",
            tol,
            vec![x.clone(), w1, b4],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.conv2d(i[0], i[1], Some(i[2]), 1, 0)),
        ),
        (
            "batchnorm2d",
            tol,
            vec![x.clone(), gamma, beta],
            Box::new(|t: &mut Tape<f64>, i: &[_]| {
                let mut rs = RunningStats::new(3);
                t.batchnorm2d(i[0], i[1], i[2], BnStats::Train(&mut rs))
            }),
        ),
        (
            "relu",
            tol,
            vec![xa.clone()],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.relu(i[0])),
        ),
        (
            "maxpool2",
            tol,
            vec![x.clone()],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.maxpool2(i[0])),
        ),
        (
            "global_avg_pool",
            tol,
            vec![x.clone()],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.global_avg_pool(i[0])),
        ),
        (
            "dense",
            tol,
            vec![feats, dw, db],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.dense(i[0], i[1], i[2])),
        ),
        (
            "add",
            tol,
            vec![x.clone(), y],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.add(i[0], i[1])),
        ),
        (
            "concat_channels",
            tol,
            vec![x.clone(), z],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.concat_channels(i[0], i[1])),
        ),
        (
            "reshape",
            tol,
            vec![x],
            Box::new(|t: &mut Tape<f64>, i: &[_]| t.reshape(i[0], &[6, 36])),
        ),
        (
            "sigmoid_bce",
            bce_tol,
            vec![logits.clone()],
            Box::new(move |t: &mut Tape<f64>, i: &[_]| Ok(t.sigmoid_bce(i[0], &targets)?.0)),
        ),
        (
            "weighted_sum",
            tol,
            vec![r(&[6])],
            Box::new(move |t: &mut Tape<f64>, i: &[_]| t.weighted_sum(i[0], &weights)),
        ),
    ]
}

/// Train-mode loss and the tape's kink margin; fills parameter gradients
/// when `grads` is set.
fn model_loss(
    model: &mut Model<f64>,
    x: &Tensor<f64>,
    targets: &[f64],
    fault: Option<Fault>,
    grads: bool,
) -> Result<(f64, f64)> {
    let mut tape = Tape::new().with_fault(fault);
    let xi = tape.constant(x.clone())?;
    let z = model.forward(&mut tape, xi, Mode::Train)?;
    let (loss, _) = tape.sigmoid_bce(z, targets)?;
    let value = tape.value(loss).item();
    let margin = tape.kink_margin();
    if grads {
        model.params_mut().zero_grad();
        tape.backward(loss)?.write_params(model.params_mut());
    }
    Ok((value, margin))
}

/// Train-mode loss gradient of a preset at `cfg.model_side`, checked on
/// `cfg.model_coords` seeded coordinates of every parameter tensor.
///
/// Input batches whose forward pass lies within `KINK_SAFETY × model_eps` of
/// a ReLU or max-pool kink are redrawn: there the loss is not differentiable
/// and central differences disagree with any one-sided derivative.
pub fn check_preset(preset: &str, cfg: &GradcheckConfig) -> Result<GradComparison> {
    let mc = ModelConfig::preset(preset)?.with_input_side(cfg.model_side);
    let mut model = build_model::<f64>(&mc, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d6f64);
    let side = cfg.model_side;
    let targets: Vec<f64> = (0..cfg.model_batch).map(|i| f64::from(i % 2 == 0)).collect();

    let mut probe = model.clone();
    let mut x = None;
    for _ in 0..MAX_REDRAWS {
        let cand = uniform(&mut rng, &[cfg.model_batch, 1, side, side], false);
        let (_, margin) = model_loss(&mut probe, &cand, &targets, None, false)?;
        if margin > KINK_SAFETY * cfg.model_eps {
            x = Some(cand);
            break;
        }
    }
    let Some(x) = x else {
        bail!(
            Internal,
            "{preset}: no input batch clear of activation kinks in {MAX_REDRAWS} draws"
        );
    };
    model_loss(&mut model, &x, &targets, cfg.fault, true)?;
    let mut total = GradComparison::default();
    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    for id in ids {
        let p = model.params().get(id);
        let (len, analytic) = (p.value.len(), p.grad.clone());
        for _ in 0..cfg.model_coords.min(len) {
            let k = rng.gen_range(0..len);
            let orig = probe.params().get(id).value.data()[k];
            probe.params_mut().get_mut(id).value.data_mut()[k] = orig + cfg.model_eps;
            let up = model_loss(&mut probe, &x, &targets, None, false)?.0;
            probe.params_mut().get_mut(id).value.data_mut()[k] = orig - cfg.model_eps;
            let down = model_loss(&mut probe, &x, &targets, None, false)?.0;
            probe.params_mut().get_mut(id).value.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * cfg.model_eps);
            let a = analytic.data()[k];
            let abs = (a - numeric).abs();
            let rel = if abs > ABS_FALLBACK {
                abs / a.abs().max(numeric.abs())
            } else {
                0.0
            };
            total = total.merge(GradComparison {
                max_rel: if abs.is_finite() { rel } else { f64::INFINITY },
                max_abs: abs,
                worst_index: k,
            });
        }
    }
    Ok(total)
}

/// Required kink margin in units of the finite-difference step.
pub const KINK_SAFETY: f64 = 100.0;
const MAX_REDRAWS: usize = 64;
