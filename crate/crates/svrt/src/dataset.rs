//! On-disk datasets: parallel generation, manifest, loading and verification.
//!
//! Layout: `<out>/<problem>/<split>/<index>.pgm` plus `<out>/manifest.jsonl`,
//! whose first line is a [`ManifestHeader`] and every further line a
//! [`SampleRecord`], ordered train, val, test and by index within a split.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use svrt_core::contour::Pose;
use svrt_core::problems::{self, Label, ProblemId, ProblemParams, SampleMeta, Split, Verdict};
use svrt_core::raster::{self, ImageGray};
use svrt_core::training::ImageSet;

use crate::error::{Error, Result};
use crate::pgm;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// 400k / 100k / 100k.
    pub fn full_scale() -> Self {
        Self {
            train: 400_000,
            val: 100_000,
            test: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format_version: u32,
    pub problem: ProblemId,
    pub master_seed: u64,
    pub counts: SplitCounts,
    pub params: ProblemParams,
}

/// One manifest line. `image_path` is relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image_path: String,
    pub label: Label,
    pub problem: ProblemId,
    pub contour_seeds: Vec<u64>,
    pub poses: Vec<Pose>,
    pub canvas_side: usize,
}

impl SampleRecord {
    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            problem: self.problem,
            label: self.label,
            contour_seeds: self.contour_seeds.clone(),
            poses: self.poses.clone(),
            canvas_side: self.canvas_side,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
}

impl DatasetManifest {
    /// Records of `split`, in index order.
    pub fn split(&self, split: Split) -> &[SampleRecord] {
        let c = &self.header.counts;
        let (start, len) = match split {
            Split::Train => (0, c.train),
            Split::Val => (c.train, c.val),
            Split::Test => (c.train + c.val, c.test),
        };
        &self.records[start..start + len]
    }

    pub fn image_path(&self, rec: &SampleRecord) -> PathBuf {
        self.root.join(&rec.image_path)
    }
}

pub fn relative_image_path(problem: ProblemId, split: Split, index: usize) -> String {
    format!("{problem}/{split}/{index}.pgm")
}

/// Runs `f` on a pool of `jobs` threads (`0` = rayon's default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Generates every split in parallel and writes images plus manifest.
/// Output bytes depend only on `(problem, counts, master_seed, params)`.
pub fn gen_dataset(
    problem: ProblemId,
    counts: SplitCounts,
    master_seed: u64,
    params: &ProblemParams,
    out_dir: &Path,
    jobs: usize,
) -> Result<DatasetManifest> {
    for split in Split::ALL {
        if !counts.get(split).is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "{split} count {} is odd; every split must be even for exact balance",
                counts.get(split)
            )));
        }
    }
    params.validate()?;
    let mut records = Vec::with_capacity(counts.total());
    for split in Split::ALL {
        let dir = out_dir.join(problem.as_str()).join(split.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let n = counts.get(split);
        let part: Vec<Result<SampleRecord>> = with_jobs(jobs, || {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let label = problems::label_for_index(i as u64);
                    let seed = problems::sample_seed(master_seed, problem, split, i as u64);
                    let s = problems::gen_sample(problem, label, seed, params)?;
                    let rel = relative_image_path(problem, split, i);
                    pgm::write(&out_dir.join(&rel), &s.image)?;
                    Ok(SampleRecord {
                        image_path: rel,
                        label: s.meta.label,
                        problem,
                        contour_seeds: s.meta.contour_seeds,
                        poses: s.meta.poses,
                        canvas_side: s.meta.canvas_side,
                    })
                })
                .collect()
        })?;
        for r in part {
            records.push(r?);
        }
    }
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        header: ManifestHeader {
            format_version: FORMAT_VERSION,
            problem,
            master_seed,
            counts,
            params: params.clone(),
        },
        records,
    };
    write_manifest(&manifest)?;
    Ok(manifest)
}

pub fn write_manifest(m: &DatasetManifest) -> Result<()> {
    let path = m.root.join(MANIFEST_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    let line = serde_json::to_string(&m.header).expect("header serializes");
    writeln!(w, "{line}").map_err(io)?;
    for r in &m.records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads `<dir>/manifest.jsonl` (or `dir` itself if it is the manifest file).
pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let (root, path) = if dir.is_file() {
        (dir.parent().unwrap_or(Path::new(".")).to_path_buf(), dir.to_path_buf())
    } else {
        (dir.to_path_buf(), dir.join(MANIFEST_FILE))
    };
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let bad = |n: usize, msg: String| Error::format(&path, format!("line {}: {msg}", n + 1));
    let header: ManifestHeader = match lines.next() {
        Some((n, l)) => {
            serde_json::from_str(&l.map_err(|e| Error::io(&path, e))?).map_err(|e| bad(n, e.to_string()))?
        }
        None => return Err(Error::format(&path, "empty manifest")),
    };
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported format_version {}", header.format_version),
        ));
    }
    let mut records = Vec::with_capacity(header.counts.total());
    for (n, l) in lines {
        let l = l.map_err(|e| Error::io(&path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<SampleRecord>(&l).map_err(|e| bad(n, e.to_string()))?);
    }
    if records.len() != header.counts.total() {
        return Err(Error::format(
            &path,
            format!(
                "header announces {} samples, found {}",
                header.counts.total(),
                records.len()
            ),
        ));
    }
    Ok(DatasetManifest { root, header, records })
}

/// Loads `split` downscaled to `side` px. `shuffle` permutes the order with
/// a seeded shuffle; `None` keeps index order.
pub fn load_split(m: &DatasetManifest, split: Split, side: usize, shuffle: Option<u64>) -> Result<ImageSet> {
    let recs = m.split(split);
    let images: Vec<Result<ImageGray>> = recs
        .par_iter()
        .map(|r| {
            let img = pgm::read(&m.image_path(r))?;
            if img.width() == side && img.height() == side {
                Ok(img)
            } else {
                Ok(raster::downscale(&img, side)?)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..recs.len()).collect();
    if let Some(seed) = shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut set = ImageSet::new(side);
    let images = images.into_iter().collect::<Result<Vec<_>>>()?;
    for i in order {
        set.push(images[i].pixels(), recs[i].label == Label::Positive)?;
    }
    Ok(set)
}

/// A sample that failed verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyFailure {
    pub split: Split,
    pub index: usize,
    pub image_path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-verifies every sample (rule, placement and byte-exact image) and the
/// per-split balance. Unreadable or corrupt images count as failures.
pub fn verify_dataset(m: &DatasetManifest, jobs: usize) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for split in Split::ALL {
        let recs = m.split(split);
        let positives = recs.iter().filter(|r| r.label == Label::Positive).count();
        if positives * 2 != recs.len() {
            report.failures.push(VerifyFailure {
                split,
                index: 0,
                image_path: String::new(),
                reason: format!("unbalanced split: {positives} positive of {}", recs.len()),
            });
        }
        let fails: Vec<Option<VerifyFailure>> = with_jobs(jobs, || {
            recs.par_iter()
                .enumerate()
                .map(|(i, r)| {
                    verify_record(m, split, i, r).err().map(|reason| VerifyFailure {
                        split,
                        index: i,
                        image_path: r.image_path.clone(),
                        reason,
                    })
                })
                .collect()
        })?;
        report.failures.extend(fails.into_iter().flatten());
        report.checked += recs.len();
    }
    Ok(report)
}

fn verify_record(m: &DatasetManifest, split: Split, i: usize, r: &SampleRecord) -> std::result::Result<(), String> {
    if r.problem != m.header.problem {
        return Err(format!("problem {} in a {} dataset", r.problem, m.header.problem));
    }
    if r.image_path != relative_image_path(r.problem, split, i) {
        return Err(format!("unexpected image path {}", r.image_path));
    }
    let img = pgm::read(&m.image_path(r)).map_err(|e| e.to_string())?;
    match problems::verify_sample(&r.meta(), &img, &m.header.params) {
        Ok(Verdict::Pass) => Ok(()),
        Ok(Verdict::Fail(why)) => Err(why),
        Err(e) => Err(e.to_string()),
    }
}
