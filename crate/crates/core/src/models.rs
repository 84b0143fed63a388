//! Block-grammar CNN family.
//!
//! A model is a stem (conv-bn-relu), a chain of blocks and a scalar head
//! (global average pool, dense to one logit). Each block is configured along
//! three axes: the skip mode, the number of recurrent timesteps and whether
//! those timesteps share weights. The eight named presets are the ablation
//! grid at toy scale.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::seed::derive_named;
use crate::tensor::{sigmoid, BnStats, Mode, NodeId, ParamId, ParamStore, Real, RunningStats, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkipMode {
    None,
    Residual,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurrenceSpec {
    pub timesteps: usize,
    pub share_weights: bool,
}

impl RecurrenceSpec {
    pub const SINGLE: RecurrenceSpec = RecurrenceSpec {
        timesteps: 1,
        share_weights: true,
    };

    /// Number of independent parameter sets the block instantiates.
    pub fn parameter_sets(&self) -> usize {
        if self.share_weights {
            1
        } else {
            self.timesteps
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub out_channels: usize,
    pub convs_per_pass: usize,
    pub skip: SkipMode,
    pub recur: RecurrenceSpec,
    pub downsample: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_side: usize,
    pub stem_channels: usize,
    pub blocks: Vec<BlockConfig>,
}

/// Convolutions per block pass in the named presets. With two, the deepest
/// features see a 76 px window, wider than the 64 px input, so the two shapes
/// can meet before pooling; with one the window is 40 px.
pub const PRESET_CONVS_PER_PASS: usize = 2;

pub const PRESET_NAMES: [&str; 8] = [
    "mini-plain",
    "mini-res",
    "mini-res-ws",
    "mini-dense",
    "mini-cor",
    "mini-cor-ws",
    "mini-cor-wr",
    "mini-cor-ws-wr",
];

impl ModelConfig {
    pub fn preset(name: &str) -> Result<ModelConfig> {
        let (skip, timesteps, share_weights) = match name {
            "mini-plain" | "mini-res-ws" => (SkipMode::None, 1, true),
            "mini-res" => (SkipMode::Residual, 1, true),
            "mini-dense" => (SkipMode::Dense, 1, true),
            "mini-cor" => (SkipMode::Residual, 3, true),
            "mini-cor-ws" => (SkipMode::None, 3, true),
            "mini-cor-wr" => (SkipMode::Residual, 3, false),
            "mini-cor-ws-wr" => (SkipMode::None, 3, false),
            _ => bail!(
                Config,
                "unknown preset {name:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            ),
        };
        let blocks = [16, 32, 64, 128]
            .into_iter()
            .map(|out_channels| BlockConfig {
                out_channels,
                convs_per_pass: PRESET_CONVS_PER_PASS,
                skip,
                recur: RecurrenceSpec {
                    timesteps,
                    share_weights,
                },
                downsample: true,
            })
            .collect();
        Ok(ModelConfig {
            input_side: 64,
            stem_channels: 16,
            blocks,
        })
    }

    /// Same architecture at a different input side. Parameter shapes do not
    /// depend on the side because the head pools globally.
    pub fn with_input_side(mut self, side: usize) -> ModelConfig {
        self.input_side = side;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            bail!(Config, "model needs at least one block");
        }
        if self.input_side == 0 || self.stem_channels == 0 {
            bail!(Config, "input_side and stem_channels must be positive");
        }
        let mut side = self.input_side;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.out_channels == 0 || b.convs_per_pass == 0 || b.recur.timesteps == 0 {
                bail!(
                    Config,
                    "block {i}: out_channels, convs_per_pass and timesteps must be >= 1"
                );
            }
            if b.downsample {
                if side < 2 {
                    bail!(Config, "block {i}: spatial side {side} too small to downsample");
                }
                side /= 2;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvBn {
    w: ParamId,
    gamma: ParamId,
    beta: ParamId,
    stat: usize,
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Debug, Clone)]
struct PassParams {
    convs: Vec<ConvBn>,
    reduce: Option<Linear>,
}

#[derive(Debug, Clone)]
struct Block {
    cfg: BlockConfig,
    /// 1x1 conv into `out_channels` before recurrent passes, when the
    /// channel count changes and timesteps > 1.
    entry: Option<Linear>,
    /// 1x1 shortcut projection for a single-pass residual block that
    /// changes channels.
    proj: Option<Linear>,
    /// One entry per timestep; shared recurrence repeats the same ids.
    passes: Vec<PassParams>,
}

/// A built network: parameters, batch-norm running statistics and the wiring
/// between them.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParamStore<T>,
    stats: Vec<RunningStats<T>>,
    stat_names: Vec<String>,
    stem: ConvBn,
    blocks: Vec<Block>,
    head: Linear,
}

struct Builder<T> {
    seed: u64,
    params: ParamStore<T>,
    stats: Vec<RunningStats<T>>,
    stat_names: Vec<String>,
}

impl<T: Real> Builder<T> {
    fn normal(&mut self, name: String, shape: &[usize], std: f64) -> ParamId {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_named(self.seed, &name));
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::from_f64(std * std_normal(&mut rng))).collect();
        self.params
            .add(name, Tensor::from_vec(shape, data).expect("shape product matches"))
    }

    fn constant(&mut self, name: String, shape: &[usize], v: f64) -> ParamId {
        self.params.add(name, Tensor::full(shape, T::from_f64(v)))
    }

    fn stat(&mut self, name: String, channels: usize) -> usize {
        self.stats.push(RunningStats::new(channels));
        self.stat_names.push(name);
        self.stats.len() - 1
    }

    /// Kaiming fan-in init for a conv feeding batch norm and ReLU. The conv
    /// has no bias: batch norm would cancel it.
    fn conv_bn(&mut self, prefix: &str, cin: usize, cout: usize, k: usize) -> ConvBn {
        let fan_in = (cin * k * k) as f64;
        ConvBn {
            w: self.normal(format!("{prefix}.w"), &[cout, cin, k, k], libm::sqrt(2.0 / fan_in)),
            gamma: self.constant(format!("{prefix}.bn.gamma"), &[cout], 1.0),
            beta: self.constant(format!("{prefix}.bn.beta"), &[cout], 0.0),
            stat: usize::MAX,
        }
    }

    fn pointwise(&mut self, prefix: &str, cin: usize, cout: usize, bias: bool) -> Linear {
        let w = self.normal(format!("{prefix}.w"), &[cout, cin, 1, 1], libm::sqrt(1.0 / cin as f64));
        let b = bias.then(|| self.constant(format!("{prefix}.b"), &[cout], 0.0));
        Linear { w, b }
    }
}

/// Box-Muller standard normal.
fn std_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

pub fn build_model<T: Real>(cfg: &ModelConfig, init_seed: u64) -> Result<Model<T>> {
    cfg.validate()?;
    let mut b = Builder {
        seed: init_seed,
        params: ParamStore::new(),
        stats: Vec::new(),
        stat_names: Vec::new(),
    };
    let mut stem = b.conv_bn("stem.conv", 1, cfg.stem_channels, 3);
    stem.stat = b.stat("stem.conv.bn".into(), cfg.stem_channels);

    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    let mut cin = cfg.stem_channels;
    for (bi, bc) in cfg.blocks.iter().enumerate() {
        let name = format!("block{}", bi + 1);
        let cout = bc.out_channels;
        let recurrent = bc.recur.timesteps > 1;
        let entry = (recurrent && cin != cout)
            .then(|| b.pointwise(&format!("{name}.entry"), cin, cout, bc.skip != SkipMode::None));
        let proj = (!recurrent && bc.skip == SkipMode::Residual && cin != cout)
            .then(|| b.pointwise(&format!("{name}.proj"), cin, cout, true));
        let pass_in = if recurrent { cout } else { cin };

        let mut sets = Vec::with_capacity(bc.recur.parameter_sets());
        for t in 0..bc.recur.parameter_sets() {
            let convs = (0..bc.convs_per_pass)
                .map(|j| {
                    b.conv_bn(
                        &format!("{name}.pass{t}.conv{j}"),
                        if j == 0 { pass_in } else { cout },
                        cout,
                        3,
                    )
                })
                .collect();
            let reduce = (bc.skip == SkipMode::Dense)
                .then(|| b.pointwise(&format!("{name}.pass{t}.reduce"), pass_in + cout, cout, true));
            sets.push(PassParams { convs, reduce });
        }
        let mut passes = Vec::with_capacity(bc.recur.timesteps);
        for t in 0..bc.recur.timesteps {
            let mut p = sets[t % sets.len()].clone();
            for (j, c) in p.convs.iter_mut().enumerate() {
                // Activation statistics differ per timestep even when the
                // weights are shared, so running stats are per timestep.
                c.stat = b.stat(format!("{name}.t{t}.conv{j}.bn"), cout);
            }
            passes.push(p);
        }
        blocks.push(Block {
            cfg: bc.clone(),
            entry,
            proj,
            passes,
        });
        cin = cout;
    }
    let head = Linear {
        w: b.normal("head.w".into(), &[cin, 1], libm::sqrt(1.0 / cin as f64)),
        b: Some(b.constant("head.b".into(), &[1], 0.0)),
    };
    Ok(Model {
        config: cfg.clone(),
        params: b.params,
        stats: b.stats,
        stat_names: b.stat_names,
        stem,
        blocks,
        head,
    })
}

enum Stats<'a, T> {
    Train(&'a mut [RunningStats<T>]),
    Eval(&'a [RunningStats<T>]),
}

impl<T> Stats<'_, T> {
    fn get(&mut self, i: usize) -> BnStats<'_, T> {
        match self {
            Stats::Train(s) => BnStats::Train(&mut s[i]),
            Stats::Eval(s) => BnStats::Eval(&s[i]),
        }
    }
}

struct Wiring<'a, T> {
    params: &'a ParamStore<T>,
    stats: Stats<'a, T>,
}

impl<T: Real> Wiring<'_, T> {
    fn conv_bn_relu(&mut self, tape: &mut Tape<T>, x: NodeId, c: &ConvBn) -> Result<NodeId> {
        let w = tape.param(self.params, c.w)?;
        let y = tape.conv2d(x, w, None, 1, 1)?;
        let g = tape.param(self.params, c.gamma)?;
        let b = tape.param(self.params, c.beta)?;
        let y = tape.batchnorm2d(y, g, b, self.stats.get(c.stat))?;
        tape.relu(y)
    }

    fn pointwise(&mut self, tape: &mut Tape<T>, x: NodeId, l: &Linear) -> Result<NodeId> {
        let w = tape.param(self.params, l.w)?;
        let b = l.b.map(|b| tape.param(self.params, b)).transpose()?;
        tape.conv2d(x, w, b, 1, 0)
    }

    fn pass(&mut self, tape: &mut Tape<T>, x: NodeId, block: &Block, t: usize) -> Result<NodeId> {
        let p = &block.passes[t];
        let mut f = x;
        for c in &p.convs {
            f = self.conv_bn_relu(tape, f, c)?;
        }
        match block.cfg.skip {
            SkipMode::None => Ok(f),
            SkipMode::Residual => {
                let short = match &block.proj {
                    Some(l) => self.pointwise(tape, x, l)?,
                    None => x,
                };
                let s = tape.add(short, f)?;
                tape.relu(s)
            }
            SkipMode::Dense => {
                let cat = tape.concat_channels(x, f)?;
                let reduce = p
                    .reduce
                    .as_ref()
                    .ok_or_else(|| Error::Internal("dense block without reduction".into()))?;
                self.pointwise(tape, cat, reduce)
            }
        }
    }

    fn run(&mut self, model: &Model<T>, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let mut h = self.conv_bn_relu(tape, x, &model.stem)?;
        for block in &model.blocks {
            if let Some(e) = &block.entry {
                h = self.pointwise(tape, h, e)?;
            }
            for t in 0..block.cfg.recur.timesteps {
                h = self.pass(tape, h, block, t)?;
            }
            if block.cfg.downsample {
                h = tape.maxpool2(h)?;
            }
        }
        let pooled = tape.global_avg_pool(h)?;
        let w = tape.param(self.params, model.head.w)?;
        let b = tape.param(self.params, model.head.b.expect("head has a bias"))?;
        let z = tape.dense(pooled, w, b)?;
        let n = tape.value(z).shape()[0];
        tape.reshape(z, &[n])
    }
}

impl<T: Real> Model<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn running_stats(&self) -> impl Iterator<Item = (&str, &RunningStats<T>)> {
        self.stat_names.iter().map(String::as_str).zip(&self.stats)
    }

    pub fn running_stats_mut(&mut self) -> impl Iterator<Item = (&str, &mut RunningStats<T>)> {
        self.stat_names.iter().map(String::as_str).zip(self.stats.iter_mut())
    }

    /// Count of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    fn check_input(&self, images: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = images.dims4()?;
        let s = self.config.input_side;
        if c != 1 || h != s || w != s {
            bail!(Shape, "model expects [N,1,{s},{s}] images, got {:?}", images.shape());
        }
        Ok(())
    }

    /// Records the network on `tape` and returns the `[N]` logits node. Train
    /// mode normalizes with batch statistics and updates the running ones.
    pub fn forward(&mut self, tape: &mut Tape<T>, images: NodeId, mode: Mode) -> Result<NodeId> {
        self.check_input(tape.value(images))?;
        let mut stats = core::mem::take(&mut self.stats);
        let out = {
            let mut w = Wiring {
                params: &self.params,
                stats: match mode {
                    Mode::Train => Stats::Train(&mut stats),
                    Mode::Eval => Stats::Eval(&stats),
                },
            };
            w.run(self, tape, images)
        };
        self.stats = stats;
        out
    }

    /// Eval-mode logits without touching model state.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Vec<T>> {
        self.check_input(images)?;
        let mut tape = Tape::new();
        let x = tape.input(images.clone())?;
        let mut w = Wiring {
            params: &self.params,
            stats: Stats::Eval(&self.stats),
        };
        let z = w.run(self, &mut tape, x)?;
        Ok(tape.value(z).data().to_vec())
    }

    /// `σ(logits)`; classify as positive when ≥ 0.5.
    pub fn predict(&self, images: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.logits(images)?.into_iter().map(sigmoid).collect())
    }

    /// Parameter ids read by timestep `t` of block `b` (0-based), in order.
    pub fn pass_param_ids(&self, b: usize, t: usize) -> Vec<ParamId> {
        let p = &self.blocks[b].passes[t];
        let mut ids = Vec::new();
        for c in &p.convs {
            ids.extend([c.w, c.gamma, c.beta]);
        }
        if let Some(r) = &p.reduce {
            ids.push(r.w);
            ids.extend(r.b);
        }
        ids
    }

    /// Copies every parameter value and running statistic whose name also
    /// exists in `src`. Returns how many tensors were copied.
    pub fn copy_matching_from(&mut self, src: &Model<T>) -> Result<usize> {
        let mut copied = 0;
        for p in self.params.iter_mut() {
            if let Some(id) = src.params.find(&p.name) {
                let v = &src.params.get(id).value;
                if v.shape() != p.value.shape() {
                    bail!(Shape, "parameter {}: {:?} vs {:?}", p.name, v.shape(), p.value.shape());
                }
                p.value = v.clone();
                copied += 1;
            }
        }
        for (name, s) in self.stat_names.iter().zip(self.stats.iter_mut()) {
            if let Some(i) = src.stat_names.iter().position(|n| n == name) {
                *s = src.stats[i].clone();
            }
        }
        Ok(copied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny(skip: SkipMode, timesteps: usize, share_weights: bool) -> ModelConfig {
        ModelConfig {
            input_side: 8,
            stem_channels: 3,
            blocks: vec![
                BlockConfig {
                    out_channels: 3,
                    convs_per_pass: 2,
                    skip,
                    recur: RecurrenceSpec {
                        timesteps,
                        share_weights,
                    },
                    downsample: true,
                },
                BlockConfig {
                    out_channels: 5,
                    convs_per_pass: 1,
                    skip,
                    recur: RecurrenceSpec {
                        timesteps,
                        share_weights,
                    },
                    downsample: false,
                },
            ],
        }
    }

    fn images(n: usize, side: usize, seed: u64) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec(
            &[n, 1, side, side],
            (0..n * side * side).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn train_logits(m: &mut Model<f32>, x: &Tensor<f32>) -> Vec<f32> {
        let mut tape = Tape::new();
        let xi = tape.input(x.clone()).unwrap();
        let z = m.forward(&mut tape, xi, Mode::Train).unwrap();
        tape.value(z).data().to_vec()
    }

    #[test]
    fn presets_validate_and_have_expected_shape() {
        for name in PRESET_NAMES {
            let cfg = ModelConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.input_side, 64);
            assert_eq!(cfg.stem_channels, 16);
            let chans: Vec<usize> = cfg.blocks.iter().map(|b| b.out_channels).collect();
            assert_eq!(chans, [16, 32, 64, 128]);
            assert!(cfg.blocks.iter().all(|b| b.downsample));
        }
        assert!(matches!(ModelConfig::preset("resnet-18"), Err(Error::Config(_))));
        assert_eq!(
            ModelConfig::preset("mini-res-ws").unwrap(),
            ModelConfig::preset("mini-plain").unwrap()
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny(SkipMode::None, 1, true);
        cfg.blocks.clear();
        assert!(matches!(build_model::<f32>(&cfg, 0), Err(Error::Config(_))));
        let mut cfg = tiny(SkipMode::None, 1, true);
        cfg.input_side = 1;
        assert!(matches!(build_model::<f32>(&cfg, 0), Err(Error::Config(_))));
        let mut cfg = tiny(SkipMode::None, 1, true);
        cfg.blocks[0].recur.timesteps = 0;
        assert!(matches!(build_model::<f32>(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn shared_recurrence_has_fewer_parameters() {
        let cor = build_model::<f32>(&ModelConfig::preset("mini-cor").unwrap(), 1).unwrap();
        let wr = build_model::<f32>(&ModelConfig::preset("mini-cor-wr").unwrap(), 1).unwrap();
        assert!(cor.num_params() < wr.num_params());
        let res = build_model::<f32>(&ModelConfig::preset("mini-res").unwrap(), 1).unwrap();
        assert_eq!(
            res.num_params(),
            build_model::<f32>(&ModelConfig::preset("mini-res").unwrap(), 99)
                .unwrap()
                .num_params()
        );
    }

    #[test]
    fn head_alone_counts_weights_plus_bias() {
        let mut store = ParamStore::<f32>::new();
        store.add("w", Tensor::zeros(&[8, 1]));
        store.add("b", Tensor::zeros(&[1]));
        assert_eq!(store.num_scalars(), 9);
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = ModelConfig::preset("mini-dense").unwrap();
        let a = build_model::<f32>(&cfg, 5).unwrap();
        let b = build_model::<f32>(&cfg, 5).unwrap();
        assert_eq!(a.params(), b.params());
        let c = build_model::<f32>(&cfg, 6).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn skip_removal_matches_plain_shapes() {
        let mut cfg = ModelConfig::preset("mini-res").unwrap();
        for b in &mut cfg.blocks {
            b.skip = SkipMode::None;
        }
        let a = build_model::<f32>(&cfg, 3).unwrap();
        let b = build_model::<f32>(&ModelConfig::preset("mini-plain").unwrap(), 3).unwrap();
        let shapes = |m: &Model<f32>| {
            m.params()
                .iter()
                .map(|(_, p)| (p.name.clone(), p.value.shape().to_vec()))
                .collect::<Vec<_>>()
        };
        assert_eq!(shapes(&a), shapes(&b));
    }

    #[test]
    fn output_is_one_logit_per_sample() {
        for (skip, t, share) in [
            (SkipMode::None, 1, true),
            (SkipMode::Residual, 1, true),
            (SkipMode::Dense, 1, true),
            (SkipMode::Residual, 3, true),
            (SkipMode::Dense, 2, false),
        ] {
            let mut m = build_model::<f32>(&tiny(skip, t, share), 1).unwrap();
            let x = images(3, 8, 2);
            assert_eq!(train_logits(&mut m, &x).len(), 3);
            assert_eq!(m.logits(&x).unwrap().len(), 3);
        }
    }

    #[test]
    fn wrong_input_side_is_shape_error() {
        let m = build_model::<f32>(&tiny(SkipMode::None, 1, true), 1).unwrap();
        assert!(matches!(m.logits(&images(2, 9, 0)), Err(Error::Shape(_))));
    }

    #[test]
    fn residual_with_dead_path_passes_shortcut() {
        let cfg = ModelConfig {
            input_side: 6,
            stem_channels: 3,
            blocks: vec![BlockConfig {
                out_channels: 3,
                convs_per_pass: 2,
                skip: SkipMode::Residual,
                recur: RecurrenceSpec::SINGLE,
                downsample: false,
            }],
        };
        let mut m = build_model::<f64>(&cfg, 4).unwrap();
        for id in m.pass_param_ids(0, 0) {
            let p = m.params_mut().get_mut(id);
            if p.name.ends_with(".w") || p.name.ends_with("gamma") {
                p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        // With F ≡ 0 the block is relu(stem output) = stem output, so the
        // network equals stem → pool → head.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::from_vec(&[2, 1, 6, 6], (0..72).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let got = m.logits(&x).unwrap();

        let mut tape = Tape::new();
        let xi = tape.input(x).unwrap();
        let mut w = Wiring {
            params: &m.params,
            stats: Stats::Eval(&m.stats),
        };
        let h = w.conv_bn_relu(&mut tape, xi, &m.stem).unwrap();
        let g = tape.global_avg_pool(h).unwrap();
        let hw = tape.param(&m.params, m.head.w).unwrap();
        let hb = tape.param(&m.params, m.head.b.unwrap()).unwrap();
        let z = tape.dense(g, hw, hb).unwrap();
        assert_eq!(tape.value(z).data(), &got[..]);
    }

    #[test]
    fn shared_passes_read_the_same_parameters() {
        let m = build_model::<f32>(&ModelConfig::preset("mini-cor").unwrap(), 1).unwrap();
        for b in 0..4 {
            assert_eq!(m.pass_param_ids(b, 0), m.pass_param_ids(b, 1));
            assert_eq!(m.pass_param_ids(b, 0), m.pass_param_ids(b, 2));
        }
        let wr = build_model::<f32>(&ModelConfig::preset("mini-cor-wr").unwrap(), 1).unwrap();
        for b in 0..4 {
            let sets: Vec<_> = (0..3).map(|t| wr.pass_param_ids(b, t)).collect();
            assert!(sets[0].iter().all(|id| !sets[1].contains(id) && !sets[2].contains(id)));
        }
    }

    #[test]
    fn mutating_a_shared_parameter_changes_every_pass() {
        let cfg = tiny(SkipMode::Residual, 3, true);
        let base = build_model::<f64>(&cfg, 2).unwrap();
        let x = images(2, 8, 3).cast();
        let before = base.logits(&x).unwrap();
        let mut m = base.clone();
        // Scale only block 1's conv weights, read in all three passes.
        let ids = m.pass_param_ids(0, 2);
        let p = m.params_mut().get_mut(ids[0]);
        p.value.data_mut().iter_mut().for_each(|v| *v *= 1.5);
        assert_ne!(m.logits(&x).unwrap(), before);
        assert_eq!(m.pass_param_ids(0, 0)[0], ids[0]);
    }

    #[test]
    fn weight_copied_unrolled_model_matches_shared() {
        let cor = build_model::<f32>(&ModelConfig::preset("mini-cor").unwrap().with_input_side(32), 11).unwrap();
        let mut wr = build_model::<f32>(&ModelConfig::preset("mini-cor-wr").unwrap().with_input_side(32), 12).unwrap();
        wr.copy_matching_from(&cor).unwrap();
        for b in 0..4 {
            for t in 1..3 {
                for (dst, src) in wr.pass_param_ids(b, t).into_iter().zip(cor.pass_param_ids(b, 0)) {
                    wr.params_mut().get_mut(dst).value = cor.params().get(src).value.clone();
                }
            }
        }
        let x = images(4, 32, 13);
        let a: Vec<u32> = cor.logits(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = wr.logits(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        let mut cor2 = cor.clone();
        let a: Vec<u32> = train_logits(&mut cor2, &x).iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = train_logits(&mut wr, &x).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_predict_is_deterministic_and_batch_independent() {
        let m = build_model::<f32>(&tiny(SkipMode::Dense, 2, true), 9).unwrap();
        let x = images(4, 8, 1);
        let p = m.predict(&x).unwrap();
        assert_eq!(p, m.predict(&x).unwrap());
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let single = Tensor::from_vec(&[1, 1, 8, 8], x.data()[..64].to_vec()).unwrap();
        assert_eq!(m.predict(&single).unwrap()[0], p[0]);
    }

    #[test]
    fn train_mode_updates_running_stats() {
        let mut m = build_model::<f32>(&tiny(SkipMode::Residual, 2, true), 9).unwrap();
        let before: Vec<_> = m.running_stats().map(|(_, s)| s.clone()).collect();
        train_logits(&mut m, &images(4, 8, 1));
        let after: Vec<_> = m.running_stats().map(|(_, s)| s.clone()).collect();
        assert!(before.iter().zip(&after).all(|(a, b)| a != b));
        let names: Vec<&str> = m.running_stats().map(|(n, _)| n).collect();
        assert!(names.contains(&"block1.t1.conv0.bn"));
    }

    #[test]
    fn every_parameter_receives_gradient_on_tiny_grammar() {
        for (skip, t, share) in [
            (SkipMode::None, 1, true),
            (SkipMode::Residual, 1, true),
            (SkipMode::Dense, 1, true),
            (SkipMode::Residual, 3, true),
            (SkipMode::None, 3, false),
            (SkipMode::Dense, 2, false),
        ] {
            let mut m = build_model::<f64>(&tiny(skip, t, share), 21).unwrap();
            let mut tape = Tape::new();
            let x = tape.input(images(4, 8, 22).cast()).unwrap();
            let z = m.forward(&mut tape, x, Mode::Train).unwrap();
            let (loss, _) = tape.sigmoid_bce(z, &[1.0, 0.0, 1.0, 0.0]).unwrap();
            tape.backward(loss).unwrap().write_params(m.params_mut());
            for (_, p) in m.params().iter() {
                assert!(
                    p.grad.sum_squares() > 0.0,
                    "{skip:?} T={t}: {} has zero gradient",
                    p.name
                );
            }
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ModelConfig::preset("mini-cor-ws-wr").unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"skip\":\"NONE\""));
        let back: ModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
