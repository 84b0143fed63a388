//! SGD with momentum and weight decay, half-epoch validation and the
//! convergence-epoch metric.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::models::Model;
use crate::seed::derive_seed;
use crate::tensor::{Mode, ParamStore, Real, Tape, Tensor};

/// Validation accuracy that defines the convergence epoch.
pub const CE_THRESHOLD: f64 = 0.90;

/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 64;

const SHUFFLE_TAG: u64 = 0x5348_5546;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 64,
            max_epochs: 30,
            seed: 0,
        }
    }
}

impl OptimConfig {
    /// Learning rate 0.1, momentum 0.9, weight decay 1e-4.
    pub fn published() -> Self {
        Self {
            learning_rate: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            bail!(Argument, "learning rate must be positive, got {}", self.learning_rate);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            bail!(Argument, "momentum must lie in [0, 1), got {}", self.momentum);
        }
        if !(self.weight_decay >= 0.0) {
            bail!(Argument, "weight decay must be non-negative, got {}", self.weight_decay);
        }
        if self.batch_size < 2 {
            bail!(
                Argument,
                "batch size must be at least 2 for batch norm, got {}",
                self.batch_size
            );
        }
        if self.max_epochs == 0 {
            bail!(Argument, "max_epochs must be at least 1");
        }
        Ok(())
    }
}

/// One SGD step over every trainable parameter:
/// `g = grad + wd·p; v = m·v + g; p -= lr·v`, then gradients are cleared.
///
/// Only the update rule is checked here, so `lr = 0` is accepted.
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, cfg: &OptimConfig) -> Result<()> {
    params.take_grads()?;
    let (lr, m, wd) = (
        T::from_f64(cfg.learning_rate),
        T::from_f64(cfg.momentum),
        T::from_f64(cfg.weight_decay),
    );
    for p in params.iter_mut().filter(|p| p.trainable) {
        let (value, grad, vel) = (p.value.data_mut(), p.grad.data(), p.momentum.data_mut());
        for ((x, &g), v) in value.iter_mut().zip(grad).zip(vel.iter_mut()) {
            let g = g + wd * *x;
            *v = m * *v + g;
            *x -= lr * *v;
        }
    }
    params.zero_grad();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: f64,
    pub val_accuracy: f64,
    /// Mean training loss over the batches since the previous point.
    pub train_loss: f64,
}

/// Validation accuracy sampled every half epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainCurve {
    points: Vec<CurvePoint>,
}

impl TrainCurve {
    pub const STEP: f64 = 0.5;

    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a curve from `(epoch, val_accuracy, train_loss)` triples.
    pub fn from_points(points: impl IntoIterator<Item = CurvePoint>) -> Result<Self> {
        let mut c = Self::new();
        for p in points {
            c.push(p)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, p: CurvePoint) -> Result<()> {
        let expected = Self::STEP * (self.points.len() + 1) as f64;
        if p.epoch != expected {
            bail!(
                Argument,
                "curve point at epoch {} breaks the 0.5-epoch grid (expected {expected})",
                p.epoch
            );
        }
        if !(0.0..=1.0).contains(&p.val_accuracy) {
            bail!(Argument, "validation accuracy {} outside [0, 1]", p.val_accuracy);
        }
        self.points.push(p);
        Ok(())
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn best(&self) -> Option<&CurvePoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&CurvePoint>, p| match best {
                Some(b) if b.val_accuracy >= p.val_accuracy => Some(b),
                _ => Some(p),
            })
    }
}

/// First epoch fraction whose validation accuracy reaches `threshold`.
pub fn convergence_epoch(curve: &TrainCurve, threshold: f64) -> Option<f64> {
    curve
        .points
        .iter()
        .find(|p| p.val_accuracy >= threshold)
        .map(|p| p.epoch)
}

/// Fraction of `probs` on the right side of 0.5 (≥ 0.5 means positive).
pub fn accuracy<T: Real>(probs: &[T], labels: &[bool]) -> Result<f64> {
    if probs.is_empty() {
        bail!(Argument, "accuracy of an empty prediction set");
    }
    if probs.len() != labels.len() {
        bail!(Argument, "{} predictions for {} labels", probs.len(), labels.len());
    }
    let half = T::from_f64(0.5);
    let correct = probs.iter().zip(labels).filter(|(&p, &l)| (p >= half) == l).count();
    Ok(correct as f64 / probs.len() as f64)
}

/// Square 8-bit images with binary labels, all at one side length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    side: usize,
    pixels: Vec<u8>,
    labels: Vec<bool>,
}

impl ImageSet {
    pub fn new(side: usize) -> Self {
        Self {
            side,
            pixels: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, pixels: &[u8], label: bool) -> Result<()> {
        if pixels.len() != self.side * self.side {
            bail!(
                Shape,
                "image has {} pixels, set side {} needs {}",
                pixels.len(),
                self.side,
                self.side * self.side
            );
        }
        self.pixels.extend_from_slice(pixels);
        self.labels.push(label);
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.side * self.side;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Normalized `[len, 1, side, side]` batch of the given samples.
    pub fn batch<T: Real>(&self, indices: &[usize], norm: &NormStats) -> Result<Tensor<T>> {
        let n = self.side * self.side;
        let mut data = Vec::with_capacity(indices.len() * n);
        let lut: Vec<T> = (0..=255u8).map(|b| T::from_f64(norm.apply(b))).collect();
        for &i in indices {
            if i >= self.len() {
                bail!(Argument, "sample index {i} out of range for set of {}", self.len());
            }
            data.extend(self.image(i).iter().map(|&b| lut[b as usize]));
        }
        Tensor::from_vec(&[indices.len(), 1, self.side, self.side], data)
    }
}

/// Pixel mean and standard deviation after mapping bytes to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    #[inline]
    pub fn apply(&self, byte: u8) -> f64 {
        (f64::from(byte) / 255.0 - self.mean) / self.std
    }
}

/// Statistics over every pixel of `set`, from an exact byte histogram so the
/// result is independent of summation order.
pub fn compute_norm_stats(set: &ImageSet) -> Result<NormStats> {
    if set.is_empty() {
        bail!(Argument, "cannot compute normalization statistics of an empty split");
    }
    let mut hist = [0u64; 256];
    for &b in &set.pixels {
        hist[b as usize] += 1;
    }
    let total = set.pixels.len() as f64;
    let mean = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| c as f64 * (b as f64 / 255.0))
        .sum::<f64>()
        / total;
    let var = hist
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let d = b as f64 / 255.0 - mean;
            c as f64 * d * d
        })
        .sum::<f64>()
        / total;
    let std = libm::sqrt(var);
    if !(std > 0.0) {
        bail!(
            Argument,
            "pixel standard deviation is zero (constant images); cannot normalize"
        );
    }
    Ok(NormStats { mean, std })
}

/// Eval-mode probabilities for every sample of `set`.
pub fn predict_set<T: Real>(model: &Model<T>, set: &ImageSet, norm: &NormStats) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(set.len());
    let idx: Vec<usize> = (0..set.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        out.extend(model.predict(&set.batch(chunk, norm)?)?);
    }
    Ok(out)
}

pub fn evaluate_accuracy<T: Real>(model: &Model<T>, set: &ImageSet, norm: &NormStats) -> Result<f64> {
    accuracy(&predict_set(model, set, norm)?, set.labels())
}

/// Why a run stopped before `max_epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub epoch: usize,
    pub step: usize,
    pub message: String,
}

pub struct TrainOutcome<T> {
    pub curve: TrainCurve,
    /// Snapshot with the highest validation accuracy (earliest on ties).
    pub best: Model<T>,
    pub best_epoch: f64,
    pub diverged: Option<Divergence>,
    pub steps: usize,
}

/// One forward/backward/update on the given samples; returns the loss.
pub fn train_step<T: Real>(
    model: &mut Model<T>,
    set: &ImageSet,
    indices: &[usize],
    norm: &NormStats,
    cfg: &OptimConfig,
) -> Result<f64> {
    let x = set.batch::<T>(indices, norm)?;
    let targets: Vec<T> = indices
        .iter()
        .map(|&i| if set.labels[i] { T::one() } else { T::zero() })
        .collect();
    let mut tape = Tape::new();
    let xi = tape.constant(x)?;
    let z = model.forward(&mut tape, xi, Mode::Train)?;
    let (loss, _) = tape.sigmoid_bce(z, &targets)?;
    let value = tape.value(loss).item().as_f64();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss {value}")));
    }
    tape.backward(loss)?.write_params(model.params_mut());
    sgd_step(model.params_mut(), cfg)?;
    Ok(value)
}

/// Seeded mini-batch SGD with validation after each half epoch.
///
/// A non-finite loss or activation ends the run; the outcome then carries
/// the curve so far and a [`Divergence`] record instead of an error.
pub fn train<T: Real>(
    model: &mut Model<T>,
    train_set: &ImageSet,
    val_set: &ImageSet,
    cfg: &OptimConfig,
    norm: &NormStats,
    mut on_point: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let side = model.config().input_side;
    if train_set.side() != side || val_set.side() != side {
        bail!(
            Shape,
            "model side {side} but train/val images are {}/{} px",
            train_set.side(),
            val_set.side()
        );
    }
    if train_set.len() < 2 || val_set.is_empty() {
        bail!(Argument, "need at least 2 training and 1 validation samples");
    }
    let bs = cfg.batch_size.min(train_set.len());
    let batches = train_set.len() / bs + usize::from(train_set.len() % bs >= 2);
    let half = batches.div_ceil(2);

    let mut curve = TrainCurve::new();
    let mut best = model.clone();
    let mut best_acc = -1.0;
    let mut best_epoch = 0.0;
    let mut steps = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_TAG, epoch as u64));
        order.shuffle(&mut rng);
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);
        for b in 0..batches {
            let idx = &order[b * bs..((b + 1) * bs).min(order.len())];
            match train_step(model, train_set, idx, norm, cfg) {
                Ok(l) => {
                    loss_sum += l;
                    loss_count += 1;
                    steps += 1;
                }
                Err(Error::NonFinite(what)) => {
                    return Ok(TrainOutcome {
                        curve,
                        best,
                        best_epoch,
                        diverged: Some(Divergence {
                            epoch,
                            step: steps,
                            message: format!("non-finite value from {what}"),
                        }),
                        steps,
                    });
                }
                Err(e) => return Err(e),
            }
            if b + 1 == half || b + 1 == batches {
                let acc = evaluate_accuracy(model, val_set, norm)?;
                let point = CurvePoint {
                    epoch: curve.len() as f64 * TrainCurve::STEP + TrainCurve::STEP,
                    val_accuracy: acc,
                    train_loss: loss_sum / loss_count.max(1) as f64,
                };
                curve.push(point)?;
                on_point(&point);
                if acc > best_acc {
                    best_acc = acc;
                    best_epoch = point.epoch;
                    best = model.clone();
                }
                loss_sum = 0.0;
                loss_count = 0;
            }
        }
    }
    Ok(TrainOutcome {
        curve,
        best,
        best_epoch,
        diverged: None,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, BlockConfig, ModelConfig, RecurrenceSpec, SkipMode};
    use alloc::vec;
    use proptest::prelude::*;

    fn pt(epoch: f64, acc: f64) -> CurvePoint {
        CurvePoint {
            epoch,
            val_accuracy: acc,
            train_loss: 0.0,
        }
    }

    fn single_param(p: f64, g: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::from_vec(&[1], vec![p]).unwrap());
        s.get_mut(id).grad = Tensor::from_vec(&[1], vec![g]).unwrap();
        s.mark_grads_ready();
        s
    }

    fn cfg(lr: f64, m: f64, wd: f64) -> OptimConfig {
        OptimConfig {
            learning_rate: lr,
            momentum: m,
            weight_decay: wd,
            ..OptimConfig::default()
        }
    }

    #[test]
    fn sgd_one_step_closed_form() {
        let mut s = single_param(1.0, 0.5);
        sgd_step(&mut s, &cfg(0.1, 0.9, 0.0)).unwrap();
        let p = s.iter().next().unwrap().1;
        assert_eq!(p.momentum.data(), &[0.5]);
        assert_eq!(p.value.data(), &[0.95]);
        assert_eq!(p.grad.data(), &[0.0]);
        assert!(!s.grads_ready());
    }

    #[test]
    fn sgd_zero_lr_still_updates_momentum() {
        let mut s = single_param(1.0, 0.5);
        let mut c = cfg(0.1, 0.9, 0.0);
        c.learning_rate = 0.0;
        sgd_step(&mut s, &c).unwrap();
        let p = s.iter().next().unwrap().1;
        assert_eq!(p.value.data(), &[1.0]);
        assert_eq!(p.momentum.data(), &[0.5]);
    }

    #[test]
    fn sgd_decay_only_step() {
        let mut s = single_param(1.0, 0.0);
        sgd_step(&mut s, &cfg(0.1, 0.9, 1e-4)).unwrap();
        assert_eq!(s.iter().next().unwrap().1.value.data(), &[1.0 - 1e-5]);
    }

    #[test]
    fn sgd_second_step_uses_momentum() {
        let mut s = single_param(1.0, 0.5);
        let c = cfg(0.1, 0.9, 0.0);
        sgd_step(&mut s, &c).unwrap();
        let id = s.find("p").unwrap();
        s.get_mut(id).grad = Tensor::from_vec(&[1], vec![0.5]).unwrap();
        s.mark_grads_ready();
        sgd_step(&mut s, &c).unwrap();
        // v = 0.9·0.5 + 0.5 = 0.95; p = 0.95 − 0.095.
        assert!((s.get(id).value.data()[0] - 0.855).abs() < 1e-15);
    }

    #[test]
    fn sgd_without_gradients_is_state_error() {
        let mut s = ParamStore::<f64>::new();
        s.add("p", Tensor::zeros(&[2]));
        assert!(matches!(
            sgd_step(&mut s, &OptimConfig::default()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn sgd_skips_frozen_parameters() {
        let mut s = single_param(1.0, 0.5);
        let id = s.find("p").unwrap();
        s.get_mut(id).trainable = false;
        sgd_step(&mut s, &cfg(0.1, 0.9, 0.0)).unwrap();
        assert_eq!(s.get(id).value.data(), &[1.0]);
    }

    #[test]
    fn optim_config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        assert_eq!(OptimConfig::published().learning_rate, 0.1);
        assert_eq!(OptimConfig::published().momentum, 0.9);
        assert_eq!(OptimConfig::published().weight_decay, 1e-4);
        for bad in [
            cfg(0.0, 0.9, 0.0),
            cfg(0.1, 1.0, 0.0),
            cfg(0.1, 0.9, -1.0),
            cfg(f64::NAN, 0.9, 0.0),
        ] {
            assert!(matches!(bad.validate(), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn convergence_epoch_first_crossing() {
        let c = TrainCurve::from_points([pt(0.5, 0.60), pt(1.0, 0.88), pt(1.5, 0.91)]).unwrap();
        assert_eq!(convergence_epoch(&c, CE_THRESHOLD), Some(1.5));
        let never = TrainCurve::from_points([pt(0.5, 0.6), pt(1.0, 0.89)]).unwrap();
        assert_eq!(convergence_epoch(&never, CE_THRESHOLD), None);
        let immediate = TrainCurve::from_points([pt(0.5, 0.992), pt(1.0, 0.99)]).unwrap();
        assert_eq!(convergence_epoch(&immediate, CE_THRESHOLD), Some(0.5));
    }

    #[test]
    fn curve_enforces_half_epoch_grid() {
        let mut c = TrainCurve::new();
        c.push(pt(0.5, 0.5)).unwrap();
        assert!(c.push(pt(1.5, 0.5)).is_err());
        assert!(c.push(pt(1.0, 1.5)).is_err());
        c.push(pt(1.0, 0.7)).unwrap();
        assert_eq!(c.best().unwrap().epoch, 1.0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1.0; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!((accuracy(&[0.6, 0.4, 0.7], &[true, true, false]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[0.5f32], &[true]).unwrap(), 1.0);
        assert!(matches!(accuracy::<f64>(&[], &[]), Err(Error::Argument(_))));
        assert!(matches!(accuracy(&[0.5], &[true, false]), Err(Error::Argument(_))));
    }

    #[test]
    fn norm_stats_examples() {
        let mut white = ImageSet::new(2);
        white.push(&[255; 4], true).unwrap();
        assert!(matches!(compute_norm_stats(&white), Err(Error::Argument(_))));
        let mut half = ImageSet::new(2);
        half.push(&[0, 0, 255, 255], true).unwrap();
        let s = compute_norm_stats(&half).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.5));
        assert_eq!(compute_norm_stats(&half).unwrap(), s);
        assert!(matches!(compute_norm_stats(&ImageSet::new(2)), Err(Error::Argument(_))));
        assert_eq!(s.apply(255), 1.0);
        assert_eq!(s.apply(0), -1.0);
    }

    #[test]
    fn image_set_rejects_wrong_size() {
        let mut s = ImageSet::new(3);
        assert!(matches!(s.push(&[0; 4], true), Err(Error::Shape(_))));
    }

    fn tiny_model() -> Model<f32> {
        let cfg = ModelConfig {
            input_side: 8,
            stem_channels: 4,
            blocks: vec![BlockConfig {
                out_channels: 4,
                convs_per_pass: 1,
                skip: SkipMode::Residual,
                recur: RecurrenceSpec::SINGLE,
                downsample: true,
            }],
        };
        build_model(&cfg, 3).unwrap()
    }

    /// Positives have a bright upper half, negatives a bright lower half.
    fn toy_set(n: usize, seed: u64) -> ImageSet {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ImageSet::new(8);
        for i in 0..n {
            let pos = i % 2 == 0;
            let img: Vec<u8> = (0..64)
                .map(|p| {
                    let top = p < 32;
                    let base: u8 = if top == pos { 200 } else { 40 };
                    base.saturating_add(rng.gen_range(0..40))
                })
                .collect();
            s.push(&img, pos).unwrap();
        }
        s
    }

    #[test]
    fn one_epoch_gives_two_points_and_is_deterministic() {
        let (tr, va) = (toy_set(40, 1), toy_set(10, 2));
        let norm = compute_norm_stats(&tr).unwrap();
        let c = OptimConfig {
            batch_size: 8,
            max_epochs: 1,
            seed: 4,
            ..OptimConfig::default()
        };
        let mut seen = Vec::new();
        let mut m1 = tiny_model();
        let a = train(&mut m1, &tr, &va, &c, &norm, |p| seen.push(p.epoch)).unwrap();
        assert_eq!(seen, [0.5, 1.0]);
        let eps: Vec<f64> = a.curve.points().iter().map(|p| p.epoch).collect();
        assert_eq!(eps, [0.5, 1.0]);
        assert_eq!(a.steps, 5);
        let mut m2 = tiny_model();
        let b = train(&mut m2, &tr, &va, &c, &norm, |_| {}).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(m1.params(), m2.params());
    }

    #[test]
    fn toy_problem_is_learned_and_best_snapshot_kept() {
        let (tr, va) = (toy_set(64, 5), toy_set(32, 6));
        let norm = compute_norm_stats(&tr).unwrap();
        let c = OptimConfig {
            batch_size: 16,
            max_epochs: 6,
            seed: 1,
            learning_rate: 0.05,
            ..OptimConfig::default()
        };
        let mut m = tiny_model();
        let out = train(&mut m, &tr, &va, &c, &norm, |_| {}).unwrap();
        assert_eq!(out.curve.len(), 12);
        let best = out.curve.best().unwrap();
        assert_eq!(best.epoch, out.best_epoch);
        assert!(best.val_accuracy >= 0.9, "{:?}", out.curve);
        assert_eq!(evaluate_accuracy(&out.best, &va, &norm).unwrap(), best.val_accuracy);
    }

    #[test]
    fn divergence_is_recorded_not_raised() {
        let (tr, va) = (toy_set(32, 7), toy_set(8, 8));
        let norm = compute_norm_stats(&tr).unwrap();
        let mut m = tiny_model();
        let id = m.params().find("head.w").unwrap();
        m.params_mut()
            .get_mut(id)
            .value
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = f32::MAX);
        let c = OptimConfig {
            batch_size: 8,
            max_epochs: 2,
            ..OptimConfig::default()
        };
        let out = train(&mut m, &tr, &va, &c, &norm, |_| {}).unwrap();
        let d = out.diverged.expect("divergence recorded");
        assert_eq!((d.epoch, d.step), (0, 0));
        assert!(out.curve.is_empty());
    }

    #[test]
    fn mismatched_side_is_shape_error() {
        let mut m = tiny_model();
        let mut tr = ImageSet::new(4);
        tr.push(&[0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255], true)
            .unwrap();
        tr.push(&[255; 16], false).unwrap();
        let norm = compute_norm_stats(&tr).unwrap();
        let r = train(&mut m, &tr, &tr, &OptimConfig::default(), &norm, |_| {});
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn raising_threshold_never_lowers_ce(accs in proptest::collection::vec(0.0f64..=1.0, 1..40), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let c = TrainCurve::from_points(accs.iter().enumerate().map(|(i, &a)| pt(0.5 * (i + 1) as f64, a))).unwrap();
            match (convergence_epoch(&c, lo), convergence_epoch(&c, hi)) {
                (Some(a), Some(b)) => prop_assert!(b >= a),
                (None, Some(_)) => prop_assert!(false, "higher threshold crossed but lower did not"),
                _ => {}
            }
        }
    }
}
