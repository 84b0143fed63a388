//! Command-line front end.
//!
//! Every command can read a JSON config file (`--config`); flags given on
//! the command line override values from the file. The fully resolved
//! config is written as `resolved_config.json` into the output directory
//! and can be passed back with `--config` to repeat the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use svrt_core::evalx::{self, XferModel};
use svrt_core::gradcheck::{self, GradcheckConfig};
use svrt_core::models::{build_model, Model, ModelConfig};
use svrt_core::problems::{ProblemId, ProblemParams, Split};
use svrt_core::tensor::Fault;
use svrt_core::training::{self, compute_norm_stats, convergence_epoch, OptimConfig, CE_THRESHOLD};

use crate::checkpoint;
use crate::dataset::{self, SplitCounts};
use crate::error::{Error, Result};
use crate::record::{self, RunRecord, CHECKPOINT_FILE, CURVE_FILE, RECORD_FILE};
use crate::report;

pub const CONFIG_VERSION: u32 = 1;
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

#[derive(Debug, Parser)]
#[command(name = "svrt", version, about = "Same-different visual reasoning benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a balanced dataset with provenance manifest.
    Gen(GenArgs),
    /// Re-verify every sample of a dataset.
    Verify(VerifyArgs),
    /// Train a preset model and write its run record and checkpoint.
    Train(TrainArgs),
    /// Zero-shot evaluation of trained runs on other problems' test splits.
    Xfer(XferArgs),
    /// Finite-difference gradient checks of every op and preset model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// p1, p5, p20 or p21.
    #[arg(long)]
    pub problem: Option<ProblemId>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Canvas side in pixels.
    #[arg(long)]
    pub canvas: Option<usize>,
    /// `paper`: 400k/100k/100k samples at 128 px. Explicit counts still win.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub config_version: u32,
    pub problem: Option<ProblemId>,
    pub counts: SplitCounts,
    pub seed: u64,
    pub canvas_side: usize,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            problem: None,
            counts: SplitCounts {
                train: 1000,
                val: 200,
                test: 200,
            },
            seed: 0,
            canvas_side: ProblemParams::default().canvas_side,
            out: None,
            jobs: 0,
        }
    }
}

impl GenConfig {
    pub fn resolve(a: &GenArgs) -> Result<Self> {
        let mut c: GenConfig = load_config(a.config.as_deref())?;
        match a.preset.as_deref() {
            None => {}
            Some("paper") => {
                c.counts = SplitCounts::full_scale();
                c.canvas_side = 128;
            }
            Some(p) => return Err(Error::Usage(format!("unknown gen preset '{p}' (expected 'paper')"))),
        }
        set(&mut c.problem, a.problem.map(Some));
        set(&mut c.counts.train, a.train);
        set(&mut c.counts.val, a.val);
        set(&mut c.counts.test, a.test);
        set(&mut c.seed, a.seed);
        set(&mut c.canvas_side, a.canvas);
        set(&mut c.out, a.out.clone().map(Some));
        set(&mut c.jobs, a.jobs);
        if c.problem.is_none() {
            return Err(Error::Usage("--problem is required".into()));
        }
        if c.out.is_none() {
            return Err(Error::Usage("--out is required".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Dataset directory or its manifest.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory produced by `gen`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model preset, e.g. mini-res.
    #[arg(long)]
    pub preset: Option<String>,
    /// Model input side; images are downscaled at load.
    #[arg(long)]
    pub side: Option<usize>,
    /// Optimizer base: `default` (lr 0.01) or `paper-optim` (lr 0.1).
    #[arg(long)]
    pub optim: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight initialization seed.
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loader and GEMM threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub config_version: u32,
    pub data: Option<PathBuf>,
    pub preset: String,
    pub side: usize,
    pub optim_base: String,
    pub optim: OptimConfig,
    pub init_seed: u64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            data: None,
            preset: "mini-res".into(),
            side: 64,
            optim_base: "default".into(),
            optim: OptimConfig::default(),
            init_seed: 0,
            out: None,
            jobs: 0,
        }
    }
}

impl TrainConfig {
    pub fn resolve(a: &TrainArgs) -> Result<Self> {
        let mut c: TrainConfig = load_config(a.config.as_deref())?;
        if let Some(base) = &a.optim {
            let o = match base.as_str() {
                "default" => OptimConfig::default(),
                "paper-optim" => OptimConfig::published(),
                other => {
                    return Err(Error::Usage(format!(
                        "unknown --optim '{other}' (expected default or paper-optim)"
                    )))
                }
            };
            c.optim.learning_rate = o.learning_rate;
            c.optim.momentum = o.momentum;
            c.optim.weight_decay = o.weight_decay;
            c.optim_base = base.clone();
        }
        set(&mut c.data, a.data.clone().map(Some));
        set(&mut c.preset, a.preset.clone());
        set(&mut c.side, a.side);
        set(&mut c.optim.learning_rate, a.lr);
        set(&mut c.optim.momentum, a.momentum);
        set(&mut c.optim.weight_decay, a.weight_decay);
        set(&mut c.optim.batch_size, a.batch);
        set(&mut c.optim.max_epochs, a.epochs);
        set(&mut c.optim.seed, a.seed);
        set(&mut c.init_seed, a.init_seed.or(a.seed));
        set(&mut c.out, a.out.clone().map(Some));
        set(&mut c.jobs, a.jobs);
        if c.data.is_none() {
            return Err(Error::Usage("--data is required".into()));
        }
        if c.out.is_none() {
            c.out = Some(PathBuf::from(format!("runs/{}", c.preset)));
        }
        c.optim.validate()?;
        ModelConfig::preset(&c.preset)?.with_input_side(c.side).validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct XferArgs {
    /// Run directories written by `train`.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Target datasets, one per problem (their test splits are used).
    #[arg(long, num_args = 1.., required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Input side for the preset-model checks.
    #[arg(long)]
    pub side: Option<usize>,
    /// Parameter coordinates probed per preset model.
    #[arg(long)]
    pub coords: Option<usize>,
    /// Inject a known-wrong backward to demonstrate detection: `bn-backward`.
    #[arg(long)]
    pub fault: Option<String>,
}

/// `Some` values overwrite `dst`.
fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn load_config<C: DeserializeOwned + Serialize + Default>(path: Option<&Path>) -> Result<C> {
    let Some(path) = path else { return Ok(C::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    match value.get("config_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(CONFIG_VERSION) => {}
        Some(v) => {
            return Err(Error::Usage(format!(
                "{}: unsupported config_version {v}",
                path.display()
            )))
        }
        None => return Err(Error::Usage(format!("{}: missing config_version", path.display()))),
    }
    // Missing fields fall back to defaults; unknown fields are rejected.
    let mut merged = serde_json::to_value(C::default()).expect("default serializes");
    merge_json(&mut merged, value);
    serde_json::from_value(merged).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn merge_json(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn write_resolved<C: Serialize>(dir: &Path, c: &C) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RESOLVED_CONFIG_FILE);
    let json = serde_json::to_string_pretty(c).expect("config serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&GenConfig::resolve(&a)?),
        Command::Verify(a) => cmd_verify(&a),
        Command::Train(a) => cmd_train(&TrainConfig::resolve(&a)?).map(|_| ()),
        Command::Xfer(a) => cmd_xfer(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    }
}

pub fn cmd_gen(c: &GenConfig) -> Result<()> {
    let out = c.out.as_deref().expect("resolved");
    let problem = c.problem.expect("resolved");
    let params = ProblemParams {
        canvas_side: c.canvas_side,
        ..ProblemParams::default()
    };
    let start = Instant::now();
    let m = dataset::gen_dataset(problem, c.counts, c.seed, &params, out, c.jobs)?;
    write_resolved(out, c)?;
    eprintln!(
        "generated {} {problem} samples in {:.1}s -> {}",
        m.records.len(),
        start.elapsed().as_secs_f64(),
        out.join(dataset::MANIFEST_FILE).display()
    );
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let m = dataset::read_manifest(&a.data)?;
    let report = dataset::verify_dataset(&m, a.jobs)?;
    for f in report.failures.iter().take(20) {
        eprintln!("FAIL {} sample {} ({}): {}", f.split, f.index, f.image_path, f.reason);
    }
    if report.passed() {
        println!("verified {} samples: all pass", report.checked);
        Ok(())
    } else {
        let first = &report.failures[0];
        Err(Error::Check(format!(
            "{} of {} samples failed verification; first: {} sample {}",
            report.failures.len(),
            report.checked,
            first.split,
            first.index
        )))
    }
}

/// Trains, evaluates the best snapshot on the test split and writes the run
/// directory. A diverged run is still recorded, then reported as an error.
pub fn cmd_train(c: &TrainConfig) -> Result<RunRecord> {
    let out = c.out.clone().expect("resolved");
    if c.jobs > 0 && std::env::var_os("MATMUL_NUM_THREADS").is_none() {
        std::env::set_var("MATMUL_NUM_THREADS", c.jobs.to_string());
    }
    let data = c.data.as_deref().expect("resolved");
    let m = dataset::read_manifest(data)?;
    let load = |split| dataset::with_jobs(c.jobs, || dataset::load_split(&m, split, c.side, None));
    let train_set = load(Split::Train)??;
    let val_set = load(Split::Val)??;
    let test_set = load(Split::Test)??;
    let norm = compute_norm_stats(&train_set)?;
    let cfg = ModelConfig::preset(&c.preset)?.with_input_side(c.side);
    let mut model = build_model::<f32>(&cfg, c.init_seed)?;
    write_resolved(&out, c)?;
    eprintln!(
        "training {} ({} params) on {} {}: {} train / {} val / {} test at {} px",
        c.preset,
        model.num_params(),
        m.header.problem,
        data.display(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        c.side
    );

    let start = Instant::now();
    let mut partial = svrt_core::training::TrainCurve::new();
    let curve_path = out.join(CURVE_FILE);
    let outcome = training::train(&mut model, &train_set, &val_set, &c.optim, &norm, |p| {
        eprintln!(
            "epoch {:>5.1}  val_acc {:.4}  train_loss {:.4}  ({:.0}s)",
            p.epoch,
            p.val_accuracy,
            p.train_loss,
            start.elapsed().as_secs_f64()
        );
        if partial.push(*p).is_ok() {
            let _ = fs::write(&curve_path, record::curve_csv(&partial));
        }
    })?;
    let final_test_accuracy = if test_set.is_empty() {
        None
    } else {
        Some(evalx::evaluate(&outcome.best, &test_set, &norm)?)
    };
    checkpoint::save(&outcome.best, &out.join(CHECKPOINT_FILE))?;
    let rec = RunRecord {
        problem: m.header.problem,
        preset: c.preset.clone(),
        optim: c.optim,
        convergence_epoch: convergence_epoch(&outcome.curve, CE_THRESHOLD),
        curve: outcome.curve,
        final_test_accuracy,
        checkpoint_path: CHECKPOINT_FILE.into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        norm,
        input_side: c.side,
        init_seed: c.init_seed,
        best_epoch: outcome.best_epoch,
        diverged: outcome.diverged,
    };
    fs::write(&curve_path, record::curve_csv(&rec.curve)).map_err(|e| Error::io(&curve_path, e))?;
    rec.save(&out.join(RECORD_FILE))?;
    eprintln!(
        "best val epoch {}  test_acc {}  -> {}",
        rec.best_epoch,
        rec.final_test_accuracy.map_or("n/a".into(), |a| format!("{a:.4}")),
        out.display()
    );
    if let Some(d) = &rec.diverged {
        return Err(Error::Diverged(format!(
            "epoch {} step {}: {}",
            d.epoch, d.step, d.message
        )));
    }
    Ok(rec)
}

/// A run directory that [`cmd_xfer`] could read.
pub struct LoadedRun {
    pub name: String,
    pub record: RunRecord,
    pub model: Option<Model<f32>>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let record = RunRecord::load(&dir.join(RECORD_FILE))?;
    let model = checkpoint::load::<f32>(&dir.join(&record.checkpoint_path)).ok();
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(LoadedRun { name, record, model })
}

pub fn cmd_xfer(a: &XferArgs) -> Result<()> {
    let runs = a.runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>>>()?;
    for r in runs.iter().filter(|r| r.model.is_none()) {
        eprintln!(
            "warning: run {} has no loadable checkpoint; its cells stay empty",
            r.name
        );
    }
    let manifests = a
        .data
        .iter()
        .map(|d| dataset::read_manifest(d))
        .collect::<Result<Vec<_>>>()?;
    let mut sides: Vec<usize> = runs.iter().map(|r| r.record.input_side).collect();
    sides.sort_unstable();
    sides.dedup();

    let mut rows = Vec::new();
    for side in sides {
        let sets = manifests
            .iter()
            .map(|m| dataset::with_jobs(a.jobs, || dataset::load_split(m, Split::Test, side, None))?)
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<(ProblemId, &svrt_core::training::ImageSet)> = manifests
            .iter()
            .zip(&sets)
            .map(|(m, s)| (m.header.problem, s))
            .collect();
        let models: Vec<(usize, XferModel<'_, f32>)> = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.record.input_side == side)
            .map(|(i, r)| {
                (
                    i,
                    XferModel {
                        run: r.name.clone(),
                        preset: r.record.preset.clone(),
                        train_problem: r.record.problem,
                        model: r.model.as_ref(),
                        norm: r.record.norm,
                    },
                )
            })
            .collect();
        let only: Vec<XferModel<'_, f32>> = models.iter().map(|(_, m)| m.clone()).collect();
        let part = dataset::with_jobs(a.jobs, || evalx::xfer_matrix(&only, &targets))??;
        rows.extend(models.iter().map(|(i, _)| *i).zip(part.rows));
    }
    rows.sort_by_key(|(i, _)| *i);
    let mut matrix = evalx::XferMatrix::new(manifests.iter().map(|m| m.header.problem).collect());
    for (_, r) in rows {
        matrix.push_row(r)?;
    }
    let records: Vec<(String, RunRecord)> = runs.into_iter().map(|r| (r.name, r.record)).collect();
    report::emit_report(&records, &matrix, &a.out)?;
    println!("{}", report::matrix_table(&matrix));
    for note in evalx::annotate(&matrix) {
        println!("note: {note}");
    }
    Ok(())
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    let mut cfg = GradcheckConfig::default();
    set(&mut cfg.model_side, a.side);
    set(&mut cfg.model_coords, a.coords);
    cfg.fault = match a.fault.as_deref() {
        None => None,
        Some("bn-backward") => Some(Fault::BatchNormBackward),
        Some(f) => return Err(Error::Usage(format!("unknown fault '{f}' (expected bn-backward)"))),
    };
    let start = Instant::now();
    let report = gradcheck::run_suite(&cfg)?;
    for r in &report.results {
        println!(
            "{:<4} {:<28} max_rel {:>9.2e}  tol {:.0e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.max_rel,
            r.tolerance
        );
    }
    println!(
        "{} checks in {:.1}s",
        report.results.len(),
        start.elapsed().as_secs_f64()
    );
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.name.as_str())
            .collect();
        Err(Error::Check(format!(
            "gradient check failed for: {}",
            failed.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("svrt").chain(args.iter().copied())).unwrap()
    }

    fn train_args(args: &[&str]) -> TrainArgs {
        match parse(&[&["train"], args].concat()).command {
            Command::Train(a) => a,
            _ => unreachable!(),
        }
    }

    fn gen_args(args: &[&str]) -> GenArgs {
        match parse(&[&["gen"], args].concat()).command {
            Command::Gen(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn full_scale_gen_preset_expands_counts_and_canvas() {
        let c = GenConfig::resolve(&gen_args(&["--problem", "p1", "--preset", "paper", "--out", "x"])).unwrap();
        assert_eq!(c.counts, SplitCounts::full_scale());
        assert_eq!(
            (c.counts.train, c.counts.val, c.counts.test),
            (400_000, 100_000, 100_000)
        );
        assert_eq!(c.canvas_side, 128);
        let c = GenConfig::resolve(&gen_args(&[
            "--problem",
            "p1",
            "--preset",
            "paper",
            "--train",
            "10",
            "--out",
            "x",
        ]))
        .unwrap();
        assert_eq!(c.counts.train, 10);
    }

    #[test]
    fn gen_requires_problem_and_out() {
        assert!(GenConfig::resolve(&gen_args(&["--out", "x"])).is_err());
        assert!(GenConfig::resolve(&gen_args(&["--problem", "p5"])).is_err());
        assert!(GenConfig::resolve(&gen_args(&["--problem", "p5", "--out", "x", "--preset", "huge"])).is_err());
    }

    #[test]
    fn published_optim_sets_its_hyperparameters() {
        let c = TrainConfig::resolve(&train_args(&["--data", "d", "--optim", "paper-optim"])).unwrap();
        assert_eq!(
            (c.optim.learning_rate, c.optim.momentum, c.optim.weight_decay),
            (0.1, 0.9, 1e-4)
        );
        let c = TrainConfig::resolve(&train_args(&["--data", "d", "--optim", "paper-optim", "--lr", "0.05"])).unwrap();
        assert_eq!(c.optim.learning_rate, 0.05);
    }

    #[test]
    fn train_defaults_and_validation() {
        let c = TrainConfig::resolve(&train_args(&["--data", "d", "--seed", "4"])).unwrap();
        assert_eq!(
            c.optim,
            OptimConfig {
                seed: 4,
                ..OptimConfig::default()
            }
        );
        assert_eq!((c.init_seed, c.side, c.preset.as_str()), (4, 64, "mini-res"));
        assert!(TrainConfig::resolve(&train_args(&[])).is_err());
        assert!(TrainConfig::resolve(&train_args(&["--data", "d", "--lr", "-1"])).is_err());
        assert!(TrainConfig::resolve(&train_args(&["--data", "d", "--preset", "resnet-9000"])).is_err());
    }

    #[test]
    fn flags_override_config_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"config_version":1,"preset":"mini-cor","optim":{"learning_rate":0.2,"max_epochs":3},"data":"from-file"}"#).unwrap();
        let p = path.to_str().unwrap();
        let c = TrainConfig::resolve(&train_args(&["--config", p, "--epochs", "5"])).unwrap();
        assert_eq!(c.preset, "mini-cor");
        assert_eq!(c.optim.learning_rate, 0.2);
        assert_eq!(c.optim.max_epochs, 5);
        assert_eq!(c.optim.momentum, 0.9);
        assert_eq!(c.data.as_deref(), Some(Path::new("from-file")));
    }

    #[test]
    fn config_version_and_unknown_fields_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let ps = p.to_str().unwrap();
        fs::write(&p, r#"{"data":"d"}"#).unwrap();
        assert!(TrainConfig::resolve(&train_args(&["--config", ps])).is_err());
        fs::write(&p, r#"{"config_version":2,"data":"d"}"#).unwrap();
        assert!(TrainConfig::resolve(&train_args(&["--config", ps])).is_err());
        fs::write(&p, r#"{"config_version":1,"data":"d","colour":"blue"}"#).unwrap();
        assert!(TrainConfig::resolve(&train_args(&["--config", ps])).is_err());
    }

    #[test]
    fn resolved_config_reproduces_itself() {
        let dir = tempfile::tempdir().unwrap();
        let c = TrainConfig::resolve(&train_args(&[
            "--data", "d", "--lr", "0.03", "--batch", "32", "--out", "o",
        ]))
        .unwrap();
        write_resolved(dir.path(), &c).unwrap();
        let p = dir.path().join(RESOLVED_CONFIG_FILE);
        let again = TrainConfig::resolve(&train_args(&["--config", p.to_str().unwrap()])).unwrap();
        assert_eq!(again, c);
    }
}
