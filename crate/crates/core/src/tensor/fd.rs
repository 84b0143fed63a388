//! Central finite differences, the oracle for every gradient check.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Fault, NodeId, Real, Tape, Tensor};
use crate::error::{bail, Result};

/// Absolute error below which an element counts as matching regardless of
/// its relative error (the true gradient is then effectively zero).
pub const ABS_FALLBACK: f64 = 1e-7;

/// `∂f/∂x` by `(f(x + εe_i) − f(x − εe_i)) / 2ε` for each coordinate.
pub fn finite_diff_grad<T: Real>(mut f: impl FnMut(&Tensor<T>) -> f64, x: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    if !(eps > 0.0) {
        bail!(Argument, "finite-difference step must be positive, got {eps}");
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = T::from_f64(orig.as_f64() + eps);
        let up = f(&probe);
        probe.data_mut()[i] = T::from_f64(orig.as_f64() - eps);
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.push(T::from_f64((up - down) / (2.0 * eps)));
    }
    Tensor::from_vec(x.shape(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradComparison {
    /// Largest `|a − n| / max(|a|, |n|)` over elements whose absolute error
    /// exceeds [`ABS_FALLBACK`].
    pub max_rel: f64,
    pub max_abs: f64,
    pub worst_index: usize,
}

impl GradComparison {
    pub fn merge(self, other: GradComparison) -> GradComparison {
        GradComparison {
            max_rel: self.max_rel.max(other.max_rel),
            max_abs: self.max_abs.max(other.max_abs),
            worst_index: if other.max_rel > self.max_rel {
                other.worst_index
            } else {
                self.worst_index
            },
        }
    }
}

pub fn compare_gradients<T: Real>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> Result<GradComparison> {
    if analytic.shape() != numeric.shape() {
        bail!(
            Shape,
            "gradient shapes differ: {:?} vs {:?}",
            analytic.shape(),
            numeric.shape()
        );
    }
    let mut c = GradComparison::default();
    for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let (a, n) = (a.as_f64(), n.as_f64());
        let abs = (a - n).abs();
        if !abs.is_finite() {
            return Ok(GradComparison {
                max_rel: f64::INFINITY,
                max_abs: f64::INFINITY,
                worst_index: i,
            });
        }
        c.max_abs = c.max_abs.max(abs);
        if abs > ABS_FALLBACK {
            let rel = abs / a.abs().max(n.abs());
            if rel > c.max_rel {
                c.max_rel = rel;
                c.worst_index = i;
            }
        }
    }
    Ok(c)
}

/// Graph builder for [`check_tape_gradients`]: records ops on the tape given
/// the input nodes and returns the output node.
pub type BuildFn<'a, T> = dyn Fn(&mut Tape<T>, &[NodeId]) -> Result<NodeId> + 'a;

/// Compares reverse-mode gradients of `Σ out ⊙ r` (fixed random `r`) with
/// respect to every input against central differences. A scalar output is
/// used as is.
pub fn check_tape_gradients<T: Real>(
    inputs: &[Tensor<T>],
    eps: f64,
    fault: Option<Fault>,
    build: &BuildFn<'_, T>,
) -> Result<GradComparison> {
    let probe_len = {
        let mut tape = Tape::new();
        let ids = record_inputs(&mut tape, inputs)?;
        let out = build(&mut tape, &ids)?;
        tape.value(out).len()
    };
    let weights: Vec<T> = if probe_len == 1 {
        alloc::vec![T::one()]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
        (0..probe_len).map(|_| T::from_f64(rng.gen_range(-1.0..1.0))).collect()
    };
    let eval = |xs: &[Tensor<T>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids = record_inputs(&mut tape, xs)?;
        let out = build(&mut tape, &ids)?;
        let s = tape.weighted_sum(out, &weights)?;
        Ok(tape.value(s).item().as_f64())
    };

    let mut tape = Tape::new().with_fault(fault);
    let ids = record_inputs(&mut tape, inputs)?;
    let out = build(&mut tape, &ids)?;
    let s = tape.weighted_sum(out, &weights)?;
    let grads = tape.backward(s)?;

    let mut total = GradComparison::default();
    for (k, id) in ids.iter().enumerate() {
        let analytic = grads
            .wrt(*id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        let mut failure = None;
        let numeric = finite_diff_grad(
            |x| {
                let mut xs = inputs.to_vec();
                xs[k] = x.clone();
                eval(&xs).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    f64::NAN
                })
            },
            &inputs[k],
            eps,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        total = total.merge(compare_gradients(&analytic, &numeric)?);
    }
    Ok(total)
}

fn record_inputs<T: Real>(tape: &mut Tape<T>, inputs: &[Tensor<T>]) -> Result<Vec<NodeId>> {
    inputs.iter().map(|x| tape.input(x.clone())).collect()
}
