use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, ConvGeom};
use super::{sigmoid, BnStats, ParamId, ParamStore, Real, Tensor};
use crate::error::{bail, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate backward-pass defects, used to prove the gradient checker
/// catches broken kernels.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drops the mean-gradient term of the batch-norm input gradient.
    BatchNormBackward,
}

enum Op<T> {
    Input,
    Constant,
    Param(ParamId),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        geom: ConvGeom,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Relu(NodeId),
    MaxPool2 {
        x: NodeId,
        argmax: Vec<u32>,
    },
    GlobalAvgPool(NodeId),
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Add(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Reshape(NodeId),
    SigmoidBce {
        logits: NodeId,
        probs: Vec<T>,
        targets: Vec<T>,
    },
    WeightedSum {
        x: NodeId,
        weights: Vec<T>,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Conv2d { .. } => "conv2d",
            Op::BatchNorm { .. } => "batchnorm2d",
            Op::Relu(_) => "relu",
            Op::MaxPool2 { .. } => "maxpool2",
            Op::GlobalAvgPool(_) => "global_avg_pool",
            Op::Dense { .. } => "dense",
            Op::Add(..) => "add",
            Op::Concat(..) => "concat_channels",
            Op::Reshape(_) => "reshape",
            Op::SigmoidBce { .. } => "sigmoid_bce",
            Op::WeightedSum { .. } => "weighted_sum",
        }
    }

    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Constant | Op::Param(_) => vec![],
            Op::Conv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b.iter().copied());
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Relu(x) | Op::GlobalAvgPool(x) | Op::Reshape(x) => vec![*x],
            Op::MaxPool2 { x, .. } => vec![*x],
            Op::Dense { x, w, b } => vec![*x, *w, *b],
            Op::Add(a, b) | Op::Concat(a, b) => vec![*a, *b],
            Op::SigmoidBce { logits, .. } => vec![*logits],
            Op::WeightedSum { x, .. } => vec![*x],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    /// Whether any input or parameter is upstream of this node.
    needs_grad: bool,
}

/// Records a forward computation for one backward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    checked: bool,
    consumed: bool,
    fault: Option<Fault>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of the leaves (inputs and parameters) of a tape.
pub struct Gradients<T> {
    leaves: Vec<Option<Tensor<T>>>,
    params: Vec<(ParamId, usize)>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor<T>> {
        self.leaves.get(node.0).and_then(Option::as_ref)
    }

    /// Overwrites every parameter gradient in `store`: contributions from all
    /// uses of a parameter are summed, parameters not on the path get zero.
    pub fn write_params(&self, store: &mut ParamStore<T>) {
        store.zero_grad();
        for &(pid, node) in &self.params {
            if let Some(g) = &self.leaves[node] {
                store.get_mut(pid).grad.add_assign(g);
            }
        }
        store.mark_grads_ready();
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            checked: true,
            consumed: false,
            fault: None,
        }
    }

    /// Disables the per-op non-finite scan.
    pub fn unchecked(mut self) -> Self {
        self.checked = false;
        self
    }

    #[doc(hidden)]
    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Result<NodeId> {
        if self.consumed {
            bail!(State, "tape already consumed by backward");
        }
        if self.checked && !value.all_finite() {
            return Err(Error::NonFinite(String::from(op.name())));
        }
        let needs_grad = match op {
            Op::Input | Op::Param(_) => true,
            Op::Constant => false,
            _ => op.inputs().iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Distance of the recorded forward pass from the nearest point where
    /// it stops being differentiable: the smallest `|x|` fed to a ReLU and the
    /// smallest gap between the two largest entries of a max-pool window
    /// (all-zero windows excluded). A ReLU whose input is non-negative by
    /// construction is locally the identity and is skipped. Finite-difference
    /// checks are only meaningful when the margin exceeds the perturbation
    /// they apply.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) if !self.non_negative(*x) => {
                    for v in self.value(*x).data() {
                        margin = margin.min(v.as_f64().abs());
                    }
                }
                Op::MaxPool2 { x, .. } => {
                    let t = self.value(*x);
                    let Ok((n, c, h, w)) = t.dims4() else { continue };
                    let d = t.data();
                    for plane in 0..n * c {
                        let base = plane * h * w;
                        for i in 0..h / 2 {
                            for j in 0..w / 2 {
                                let mut win = [0.0; 4];
                                for (k, (di, dj)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                                    win[k] = d[base + (2 * i + di) * w + 2 * j + dj].as_f64();
                                }
                                win.sort_by(|a, b| b.total_cmp(a));
                                if win[0] != 0.0 {
                                    margin = margin.min(win[0] - win[1]);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }

    fn non_negative(&self, id: NodeId) -> bool {
        match &self.nodes[id.0].op {
            Op::Relu(_) => true,
            Op::MaxPool2 { x, .. } | Op::GlobalAvgPool(x) | Op::Reshape(x) => self.non_negative(*x),
            Op::Add(a, b) | Op::Concat(a, b) => self.non_negative(*a) && self.non_negative(*b),
            _ => false,
        }
    }

    /// A leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn input(&mut self, value: Tensor<T>) -> Result<NodeId> {
        self.push(value, Op::Input)
    }

    /// A leaf that never receives a gradient (e.g. the image batch).
    pub fn constant(&mut self, value: Tensor<T>) -> Result<NodeId> {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<NodeId> {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    /// Cross-correlation of `x: [N,C,H,W]` with `w: [F,C,k,k]`, plus bias.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>, stride: usize, pad: usize) -> Result<NodeId> {
        let (n, c, h, wd) = self.value(x).dims4()?;
        let (f, wc, k, k2) = self.value(w).dims4()?;
        if wc != c || k != k2 || k % 2 == 0 || stride == 0 {
            bail!(
                Shape,
                "conv2d: kernel {:?} incompatible with input {:?} (need odd square kernel, matching channels)",
                self.value(w).shape(),
                self.value(x).shape()
            );
        }
        if h + 2 * pad < k
            || wd + 2 * pad < k
            || !(h + 2 * pad - k).is_multiple_of(stride)
            || !(wd + 2 * pad - k).is_multiple_of(stride)
        {
            bail!(
                Shape,
                "conv2d: output extent not integral for {h}x{wd}, k={k}, stride={stride}, pad={pad}"
            );
        }
        if let Some(b) = b {
            if self.value(b).shape() != [f] {
                bail!(Shape, "conv2d: bias shape {:?} != [{f}]", self.value(b).shape());
            }
        }
        let geom = ConvGeom {
            c,
            h,
            w: wd,
            f,
            k,
            stride,
            pad,
            ho: (h + 2 * pad - k) / stride + 1,
            wo: (wd + 2 * pad - k) / stride + 1,
        };
        let out = kernels::conv_forward(
            self.value(x).data(),
            n,
            &geom,
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let value = Tensor::from_vec(&[n, f, geom.ho, geom.wo], out)?;
        self.push(value, Op::Conv2d { x, w, b, geom })
    }

    /// Per-channel batch normalization followed by the affine `γ, β`.
    pub fn batchnorm2d(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, stats: BnStats<'_, T>) -> Result<NodeId> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            bail!(Shape, "batchnorm2d: affine parameters must have shape [{c}]");
        }
        let hw = h * w;
        let (mean, inv_std, batch_stats) = match stats {
            BnStats::Train(running) => {
                if n < 2 {
                    bail!(
                        Argument,
                        "batchnorm2d in train mode needs a batch of at least 2, got {n}"
                    );
                }
                if running.mean.len() != c {
                    bail!(
                        Shape,
                        "batchnorm2d: running stats for {} channels, input has {c}",
                        running.mean.len()
                    );
                }
                let (mu, var) = kernels::channel_moments(self.value(x).data(), n, c, hw);
                let m = (n * hw) as f64;
                let mom = running.momentum.as_f64();
                let eps = running.eps.as_f64();
                for ch in 0..c {
                    let unbiased = var[ch] * m / (m - 1.0);
                    running.mean[ch] = T::from_f64((1.0 - mom) * running.mean[ch].as_f64() + mom * mu[ch]);
                    running.var[ch] = T::from_f64((1.0 - mom) * running.var[ch].as_f64() + mom * unbiased);
                }
                let inv: Vec<T> = var.iter().map(|v| T::from_f64(1.0 / libm::sqrt(v + eps))).collect();
                (mu.into_iter().map(T::from_f64).collect::<Vec<T>>(), inv, true)
            }
            BnStats::Eval(running) => {
                if running.mean.len() != c {
                    bail!(
                        Shape,
                        "batchnorm2d: running stats for {} channels, input has {c}",
                        running.mean.len()
                    );
                }
                let inv = running
                    .var
                    .iter()
                    .map(|&v| T::one() / (v + running.eps).sqrt())
                    .collect();
                (running.mean.clone(), inv, false)
            }
        };
        let xv = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = Vec::with_capacity(xv.len());
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * hw;
                let (mu, is, gg, bb) = (mean[ch], inv_std[ch], g[ch], b[ch]);
                out.extend(xv[base..base + hw].iter().map(|&v| gg * ((v - mu) * is) + bb));
            }
        }
        let value = Tensor::from_vec(&[n, c, h, w], out)?;
        self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                batch_stats,
            },
        )
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(v, Op::Relu(x))
    }

    /// 2x2 max pooling with stride 2 (odd trailing rows/columns dropped).
    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if h < 2 || w < 2 {
            bail!(Shape, "maxpool2 needs spatial extent >= 2, got {h}x{w}");
        }
        let (out, argmax) = kernels::maxpool2(self.value(x).data(), n * c, h, w);
        let value = Tensor::from_vec(&[n, c, h / 2, w / 2], out)?;
        self.push(value, Op::MaxPool2 { x, argmax })
    }

    /// `[N,C,H,W] -> [N,C]` spatial mean.
    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, c, h, w) = self.value(x).dims4()?;
        let hw = h * w;
        let scale = T::one() / T::from_f64(hw as f64);
        let out = self
            .value(x)
            .data()
            .chunks_exact(hw)
            .map(|plane| plane.iter().fold(T::zero(), |a, &v| a + v) * scale)
            .collect();
        let value = Tensor::from_vec(&[n, c], out)?;
        self.push(value, Op::GlobalAvgPool(x))
    }

    /// `x: [N,D] · w: [D,E] + b: [E]`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, d) = self.value(x).dims2()?;
        let (wd, e) = self.value(w).dims2()?;
        if wd != d || self.value(b).shape() != [e] {
            bail!(
                Shape,
                "dense: x {:?}, w {:?}, b {:?} incompatible",
                self.value(x).shape(),
                self.value(w).shape(),
                self.value(b).shape()
            );
        }
        let mut out = vec![T::zero(); n * e];
        T::gemm(
            n,
            d,
            e,
            self.value(x).data(),
            false,
            self.value(w).data(),
            false,
            &mut out,
            false,
        );
        let bias = self.value(b).data();
        for row in out.chunks_exact_mut(e) {
            row.iter_mut().zip(bias).for_each(|(o, &bb)| *o += bb);
        }
        let value = Tensor::from_vec(&[n, e], out)?;
        self.push(value, Op::Dense { x, w, b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            bail!(Shape, "add: {:?} vs {:?}", self.value(a).shape(), self.value(b).shape());
        }
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Concatenates `[N,Ca,H,W]` and `[N,Cb,H,W]` along channels.
    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, ca, h, w) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if (n, h, w) != (nb, hb, wb) {
            bail!(
                Shape,
                "concat_channels: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            );
        }
        let (sa, sb) = (ca * h * w, cb * h * w);
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(n * (sa + sb));
        for i in 0..n {
            out.extend_from_slice(&da[i * sa..(i + 1) * sa]);
            out.extend_from_slice(&db[i * sb..(i + 1) * sb]);
        }
        let value = Tensor::from_vec(&[n, ca + cb, h, w], out)?;
        self.push(value, Op::Concat(a, b))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x).clone().reshaped(shape)?;
        self.push(v, Op::Reshape(x))
    }

    /// Mean binary cross-entropy of `σ(logits)` against binary `targets`, in
    /// the overflow-free form `max(z,0) − z·t + log(1+exp(−|z|))`. Returns the
    /// scalar loss node and the probabilities.
    pub fn sigmoid_bce(&mut self, logits: NodeId, targets: &[T]) -> Result<(NodeId, Vec<T>)> {
        let z = self.value(logits);
        if z.shape().len() != 1 || z.len() != targets.len() || z.is_empty() {
            bail!(
                Shape,
                "sigmoid_bce: logits {:?} vs {} targets",
                z.shape(),
                targets.len()
            );
        }
        if targets.iter().any(|&t| t != T::zero() && t != T::one()) {
            bail!(Argument, "sigmoid_bce targets must be 0 or 1");
        }
        let mut total = 0.0f64;
        for (&zi, &ti) in z.data().iter().zip(targets) {
            let (zf, tf) = (zi.as_f64(), ti.as_f64());
            total += zf.max(0.0) - zf * tf + libm::log1p(libm::exp(-zf.abs()));
        }
        let probs: Vec<T> = z.data().iter().map(|&v| sigmoid(v)).collect();
        let loss = Tensor::scalar(T::from_f64(total / targets.len() as f64));
        let node = self.push(
            loss,
            Op::SigmoidBce {
                logits,
                probs: probs.clone(),
                targets: targets.to_vec(),
            },
        )?;
        Ok((node, probs))
    }

    /// `Σ x ⊙ weights`, a scalar probe used by gradient checks.
    pub fn weighted_sum(&mut self, x: NodeId, weights: &[T]) -> Result<NodeId> {
        if self.value(x).len() != weights.len() {
            bail!(
                Shape,
                "weighted_sum: {} values vs {} weights",
                self.value(x).len(),
                weights.len()
            );
        }
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(weights)
            .fold(0.0f64, |a, (&v, &w)| a + v.as_f64() * w.as_f64());
        self.push(
            Tensor::scalar(T::from_f64(s)),
            Op::WeightedSum {
                x,
                weights: weights.to_vec(),
            },
        )
    }

    /// Reverse-mode sweep from the scalar `loss`. A tape supports exactly one
    /// backward pass; node values are released as the sweep passes them.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients<T>> {
        if self.consumed {
            bail!(State, "backward called twice on the same tape; run a new forward pass");
        }
        if loss.0 >= self.nodes.len() {
            bail!(Argument, "loss node {} not on this tape", loss.0);
        }
        if self.nodes[loss.0].value.len() != 1 {
            bail!(
                Argument,
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            );
        }
        self.consumed = true;
        let count = loss.0 + 1;
        let mut grads: Vec<Option<Tensor<T>>> = (0..count).map(|_| None).collect();
        let mut leaves: Vec<Option<Tensor<T>>> = (0..count).map(|_| None).collect();
        let mut params = Vec::new();
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), T::one()));

        for i in (0..count).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            for inp in self.nodes[i].op.inputs() {
                if inp.0 >= i {
                    bail!(Internal, "cycle detected: node {i} consumes node {}", inp.0);
                }
            }
            match &self.nodes[i].op {
                Op::Input => leaves[i] = Some(g),
                Op::Constant => {}
                Op::Param(pid) => {
                    params.push((*pid, i));
                    leaves[i] = Some(g);
                }
                op => {
                    for (inp, d) in self.op_backward(op, i, &g)? {
                        if self.nodes[inp.0].needs_grad {
                            accumulate(&mut grads[inp.0], d);
                        }
                    }
                }
            }
            if !matches!(self.nodes[i].op, Op::Input | Op::Constant | Op::Param(_)) {
                // Consumers of node i have all been processed.
                self.nodes[i].value = Tensor::zeros(&[0]);
            }
        }
        Ok(Gradients { leaves, params })
    }

    fn op_backward(&self, op: &Op<T>, me: usize, g: &Tensor<T>) -> Result<Vec<(NodeId, Tensor<T>)>> {
        let val = |id: NodeId| &self.nodes[id.0].value;
        let gd = g.data();
        let out = match op {
            Op::Input | Op::Constant | Op::Param(_) => vec![],
            Op::Conv2d { x, w, b, geom } => {
                let xv = val(*x);
                let n = xv.shape()[0];
                let need_dx = self.nodes[x.0].needs_grad;
                let (dx, dw, db) = kernels::conv_backward(xv.data(), n, geom, val(*w).data(), gd, b.is_some(), need_dx);
                let mut v = vec![(*w, Tensor::from_vec(val(*w).shape(), dw)?)];
                if let Some(dx) = dx {
                    v.push((*x, Tensor::from_vec(xv.shape(), dx)?));
                }
                if let (Some(b), Some(db)) = (b, db) {
                    v.push((*b, Tensor::from_vec(&[geom.f], db)?));
                }
                v
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                batch_stats,
            } => {
                let xv = val(*x);
                let (n, c, h, w) = xv.dims4()?;
                let hw = h * w;
                let m = T::from_f64((n * hw) as f64);
                let gam = val(*gamma).data();
                let xd = xv.data();
                let mut dx = vec![T::zero(); xd.len()];
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                for ch in 0..c {
                    let (mu, is) = (mean[ch], inv_std[ch]);
                    let (mut sum_dy, mut sum_dy_x) = (0.0f64, 0.0f64);
                    for i in 0..n {
                        let base = (i * c + ch) * hw;
                        let (s, d) = kernels::lane_sum_dot(&gd[base..base + hw], &xd[base..base + hw]);
                        sum_dy += s;
                        sum_dy_x += d;
                    }
                    let sum_dy_xhat = is.as_f64() * (sum_dy_x - mu.as_f64() * sum_dy);
                    dbeta[ch] = T::from_f64(sum_dy);
                    dgamma[ch] = T::from_f64(sum_dy_xhat);
                    let gi = gam[ch] * is;
                    if *batch_stats {
                        let mean_term = if self.fault == Some(Fault::BatchNormBackward) {
                            T::zero()
                        } else {
                            T::from_f64(sum_dy) / m
                        };
                        let xhat_term = T::from_f64(sum_dy_xhat) / m;
                        for i in 0..n {
                            let base = (i * c + ch) * hw;
                            for j in base..base + hw {
                                let xhat = (xd[j] - mu) * is;
                                dx[j] = gi * (gd[j] - mean_term - xhat * xhat_term);
                            }
                        }
                    } else {
                        for i in 0..n {
                            let base = (i * c + ch) * hw;
                            for j in base..base + hw {
                                dx[j] = gi * gd[j];
                            }
                        }
                    }
                }
                vec![
                    (*x, Tensor::from_vec(xv.shape(), dx)?),
                    (*gamma, Tensor::from_vec(&[c], dgamma)?),
                    (*beta, Tensor::from_vec(&[c], dbeta)?),
                ]
            }
            Op::Relu(x) => {
                let xv = val(*x);
                let dx = xv
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
                    .collect();
                vec![(*x, Tensor::from_vec(xv.shape(), dx)?)]
            }
            Op::MaxPool2 { x, argmax } => {
                let xv = val(*x);
                let (_, _, h, w) = xv.dims4()?;
                let per_plane = (h / 2) * (w / 2);
                let mut dx = vec![T::zero(); xv.len()];
                for (o, (&a, &d)) in argmax.iter().zip(gd).enumerate() {
                    let plane = o / per_plane;
                    dx[plane * h * w + a as usize] += d;
                }
                vec![(*x, Tensor::from_vec(xv.shape(), dx)?)]
            }
            Op::GlobalAvgPool(x) => {
                let xv = val(*x);
                let (_, _, h, w) = xv.dims4()?;
                let hw = h * w;
                let scale = T::one() / T::from_f64(hw as f64);
                let mut dx = Vec::with_capacity(xv.len());
                for &d in gd {
                    let v = d * scale;
                    dx.extend(core::iter::repeat_n(v, hw));
                }
                vec![(*x, Tensor::from_vec(xv.shape(), dx)?)]
            }
            Op::Dense { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let (n, d) = xv.dims2()?;
                let (_, e) = wv.dims2()?;
                let mut dx = vec![T::zero(); n * d];
                let mut dw = vec![T::zero(); d * e];
                T::gemm(n, e, d, gd, false, wv.data(), true, &mut dx, false);
                T::gemm(d, n, e, xv.data(), true, gd, false, &mut dw, false);
                let mut db = vec![T::zero(); e];
                for row in gd.chunks_exact(e) {
                    db.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                }
                vec![
                    (*x, Tensor::from_vec(&[n, d], dx)?),
                    (*w, Tensor::from_vec(&[d, e], dw)?),
                    (*b, Tensor::from_vec(&[e], db)?),
                ]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Concat(a, b) => {
                let (n, ca, h, w) = val(*a).dims4()?;
                let cb = val(*b).shape()[1];
                let (sa, sb) = (ca * h * w, cb * h * w);
                let mut da = Vec::with_capacity(n * sa);
                let mut db = Vec::with_capacity(n * sb);
                for chunk in gd.chunks_exact(sa + sb) {
                    da.extend_from_slice(&chunk[..sa]);
                    db.extend_from_slice(&chunk[sa..]);
                }
                vec![
                    (*a, Tensor::from_vec(val(*a).shape(), da)?),
                    (*b, Tensor::from_vec(val(*b).shape(), db)?),
                ]
            }
            Op::Reshape(x) => vec![(*x, g.clone().reshaped(val(*x).shape())?)],
            Op::SigmoidBce { logits, probs, targets } => {
                let up = g.item();
                let n = T::from_f64(targets.len() as f64);
                let dz = probs.iter().zip(targets).map(|(&p, &t)| (p - t) / n * up).collect();
                vec![(*logits, Tensor::from_vec(val(*logits).shape(), dz)?)]
            }
            Op::WeightedSum { x, weights } => {
                let up = g.item();
                let dx = weights.iter().map(|&w| w * up).collect();
                vec![(*x, Tensor::from_vec(val(*x).shape(), dx)?)]
            }
        };
        if self.checked {
            for (_, d) in &out {
                if !d.all_finite() {
                    return Err(Error::NonFinite(format!("{} backward (node {me})", op.name())));
                }
            }
        }
        Ok(out)
    }
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, d: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&d),
        None => *slot = Some(d),
    }
}
