//! The four same-different rule engines.
//!
//! | problem | positive | negative | transforms |
//! |---------|----------|----------|------------|
//! | P1  | one contour twice | two distinct contours | translation |
//! | P5  | two contours, each twice | four distinct contours | translation |
//! | P20 | a contour and its mirror image | two distinct contours, one mirrored | translation + reflection |
//! | P21 | one contour twice | two distinct contours | translation, rotation, scale |
//!
//! Pose parameters are drawn from the same distribution in both classes, so
//! the label can only be recovered by comparing shapes. Every sample carries
//! the contour seeds and poses used to draw it, which lets
//! [`verify_sample`] rebuild it from scratch.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{bbox, congruence_residual, sample_contour, Contour, GenParams, Point2, Pose, TransformClass};
use crate::error::{bail, Error, Result};
use crate::raster::{brush_extent, pixel_of, rasterize, ImageGray};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    P1,
    P5,
    P20,
    P21,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [ProblemId::P1, ProblemId::P5, ProblemId::P20, ProblemId::P21];

    pub fn shape_count(self) -> usize {
        match self {
            ProblemId::P5 => 4,
            _ => 2,
        }
    }

    pub fn transform_class(self) -> TransformClass {
        match self {
            ProblemId::P1 | ProblemId::P5 => TransformClass::Translation,
            ProblemId::P20 => TransformClass::TranslationMirror,
            ProblemId::P21 => TransformClass::Similarity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::P1 => "p1",
            ProblemId::P5 => "p5",
            ProblemId::P20 => "p20",
            ProblemId::P21 => "p21",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_start_matches('p') {
            "1" => Ok(ProblemId::P1),
            "5" => Ok(ProblemId::P5),
            "20" => Ok(ProblemId::P20),
            "21" => Ok(ProblemId::P21),
            _ => Err(Error::Argument(format!(
                "unknown problem '{s}' (expected p1, p5, p20 or p21)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Binary training target: negative 0, positive 1.
    pub fn target(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

/// Generation knobs shared by all problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub canvas_side: usize,
    /// Pixel radius of a contour at pose scale 1.
    pub shape_radius_px: f64,
    pub border_px: usize,
    pub margin_px: usize,
    pub stroke_width: usize,
    pub placement_attempts: u32,
    /// Redraws allowed when a fresh contour is too close to an earlier one.
    pub distinct_attempts: u32,
    pub p21_scale_range: (f64, f64),
    pub same_threshold: f64,
    pub distinct_threshold: f64,
    pub contour: GenParams,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            canvas_side: 128,
            shape_radius_px: 18.0,
            border_px: 8,
            margin_px: 2,
            stroke_width: 1,
            placement_attempts: 1000,
            distinct_attempts: 100,
            p21_scale_range: (0.5, 1.4),
            same_threshold: 1e-3,
            distinct_threshold: 0.02,
            contour: GenParams::default(),
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        self.contour.validate()?;
        if self.canvas_side < 32 {
            bail!(Argument, "canvas side {} below 32", self.canvas_side);
        }
        if !(self.shape_radius_px > 0.0) || self.stroke_width == 0 {
            bail!(Argument, "shape radius and stroke width must be positive");
        }
        let (lo, hi) = self.p21_scale_range;
        if !(lo >= Pose::SCALE_RANGE.0 && lo <= hi && hi <= Pose::SCALE_RANGE.1) {
            bail!(
                Argument,
                "P21 scale range ({lo}, {hi}) must lie in the pose scale range"
            );
        }
        if !(self.same_threshold < self.distinct_threshold) {
            bail!(Argument, "same threshold must be below the distinct threshold");
        }
        if self.placement_attempts == 0 || self.distinct_attempts == 0 {
            bail!(Argument, "attempt budgets must be positive");
        }
        Ok(())
    }
}

/// Generative provenance of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub problem: ProblemId,
    pub label: Label,
    /// One seed per rendered shape; repeated seeds mean repeated contours.
    pub contour_seeds: Vec<u64>,
    pub poses: Vec<Pose>,
    pub canvas_side: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub meta: SampleMeta,
    pub image: ImageGray,
}

/// Outcome of re-verifying a sample. Corrupt inputs are reported as `Err`
/// by [`verify_sample`] instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Dataset split, also used as the seed-derivation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Argument(format!("unknown split '{s}'"))),
        }
    }
}

/// Seed of sample `index` in `split`. Independent of worker count and
/// generation order.
pub fn sample_seed(master_seed: u64, problem: ProblemId, split: Split, index: u64) -> u64 {
    let problem_tag = match problem {
        ProblemId::P1 => 1,
        ProblemId::P5 => 5,
        ProblemId::P20 => 20,
        ProblemId::P21 => 21,
    };
    seed::derive_seed(seed::combine(master_seed, problem_tag), split.tag(), index)
}

/// Label of sample `index`: even indices positive, odd negative, which
/// balances every even-sized split exactly.
pub fn label_for_index(index: u64) -> Label {
    if index.is_multiple_of(2) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Image-frame polyline of `contour` under `pose`.
pub fn posed_polyline(contour: &Contour, pose: &Pose, params: &ProblemParams) -> Vec<Point2> {
    pose.apply(&contour.scaled(params.shape_radius_px))
}

/// Inclusive pixel bounds touched when rendering `poly`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub min_x: i64,
    pub min_y: i64,
    pub max_x: i64,
    pub max_y: i64,
}

impl PixelBox {
    pub fn of(poly: &[Point2], stroke_width: usize) -> Option<Self> {
        let b = bbox(poly)?;
        let (lo, hi) = brush_extent(stroke_width);
        Some(Self {
            min_x: pixel_of(b.min_x) + lo,
            min_y: pixel_of(b.min_y) + lo,
            max_x: pixel_of(b.max_x) + hi,
            max_y: pixel_of(b.max_y) + hi,
        })
    }

    /// White pixels between the boxes along the better-separated axis
    /// (negative when they overlap on both axes).
    pub fn gap(&self, o: &PixelBox) -> i64 {
        let gx = (o.min_x - self.max_x - 1).max(self.min_x - o.max_x - 1);
        let gy = (o.min_y - self.max_y - 1).max(self.min_y - o.max_y - 1);
        gx.max(gy)
    }

    pub fn inside_border(&self, side: usize, border: usize) -> bool {
        let (lo, hi) = (border as i64, side as i64 - 1 - border as i64);
        self.min_x >= lo && self.min_y >= lo && self.max_x <= hi && self.max_y <= hi
    }
}

fn placement_ok(polys: &[Vec<Point2>], params: &ProblemParams) -> bool {
    let boxes: Vec<Option<PixelBox>> = polys.iter().map(|p| PixelBox::of(p, params.stroke_width)).collect();
    for (i, a) in boxes.iter().enumerate() {
        let Some(a) = a else { return false };
        if !a.inside_border(params.canvas_side, params.border_px) {
            return false;
        }
        for b in boxes[..i].iter().flatten() {
            if a.gap(b) < params.margin_px as i64 {
                return false;
            }
        }
    }
    true
}

/// Draws `count` contours that are pairwise distinct under `class`.
fn distinct_contours(
    rng: &mut ChaCha8Rng,
    count: usize,
    class: TransformClass,
    params: &ProblemParams,
) -> Result<Vec<Contour>> {
    let mut chosen: Vec<Contour> = Vec::with_capacity(count);
    let mut budget = params.distinct_attempts;
    while chosen.len() < count {
        if budget == 0 {
            bail!(Generation, "could not draw {count} mutually distinct contours");
        }
        budget -= 1;
        let Ok(c) = sample_contour(rng.next_u64(), &params.contour) else {
            continue;
        };
        let mut ok = true;
        for prev in &chosen {
            if congruence_residual(c.vertices(), prev.vertices(), class)? <= params.distinct_threshold {
                ok = false;
                break;
            }
        }
        if ok {
            chosen.push(c);
        }
    }
    Ok(chosen)
}

/// Generates one sample of `problem` with the requested label.
pub fn gen_sample(problem: ProblemId, label: Label, rng_seed: u64, params: &ProblemParams) -> Result<Sample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let class = problem.transform_class();
    let shapes: Vec<Contour> = match (problem, label) {
        (ProblemId::P5, Label::Positive) => {
            let c = distinct_contours(&mut rng, 2, class, params)?;
            alloc::vec![c[0].clone(), c[0].clone(), c[1].clone(), c[1].clone()]
        }
        (ProblemId::P5, Label::Negative) => distinct_contours(&mut rng, 4, class, params)?,
        (_, Label::Positive) => {
            let c = distinct_contours(&mut rng, 1, class, params)?;
            alloc::vec![c[0].clone(), c[0].clone()]
        }
        (_, Label::Negative) => distinct_contours(&mut rng, 2, class, params)?,
    };

    // Orientation, scale and reflection: identical distribution in both classes.
    let mut poses: Vec<Pose> = (0..shapes.len()).map(|_| Pose::identity()).collect();
    match problem {
        ProblemId::P1 | ProblemId::P5 => {}
        ProblemId::P20 => {
            let mirrored = rng.gen_range(0..2usize);
            poses[mirrored].mirror_axis = Some(rng.gen_range(0.0..PI));
        }
        ProblemId::P21 => {
            let (lo, hi) = params.p21_scale_range;
            for pose in &mut poses {
                pose.rotation = rng.gen_range(0.0..TAU);
                pose.scale = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
            }
        }
    }

    let (blo, bhi) = brush_extent(params.stroke_width);
    let side = params.canvas_side as f64;
    let border = params.border_px as f64;
    let anchored: Vec<Vec<Point2>> = shapes
        .iter()
        .zip(&poses)
        .map(|(c, p)| posed_polyline(c, p, params))
        .collect();
    let extents: Vec<_> = anchored
        .iter()
        .map(|p| bbox(p).expect("contours are non-empty"))
        .collect();
    for _ in 0..params.placement_attempts {
        for (pose, b) in poses.iter_mut().zip(&extents) {
            let lo_x = border - blo as f64 - b.min_x;
            let hi_x = side - border - bhi as f64 - b.max_x;
            let lo_y = border - blo as f64 - b.min_y;
            let hi_y = side - border - bhi as f64 - b.max_y;
            if !(lo_x < hi_x && lo_y < hi_y) {
                bail!(Generation, "shape does not fit inside the canvas border");
            }
            pose.translation = (rng.gen_range(lo_x..hi_x), rng.gen_range(lo_y..hi_y));
        }
        let placed: Vec<Vec<Point2>> = shapes
            .iter()
            .zip(&poses)
            .map(|(c, p)| posed_polyline(c, p, params))
            .collect();
        if placement_ok(&placed, params) {
            let image = rasterize(&placed, params.canvas_side, params.stroke_width)?;
            let meta = SampleMeta {
                problem,
                label,
                contour_seeds: shapes.iter().map(Contour::source_seed).collect(),
                poses,
                canvas_side: params.canvas_side,
            };
            return Ok(Sample { meta, image });
        }
    }
    Err(Error::Generation(format!(
        "{problem} sample {rng_seed:#x}: placement failed after {} attempts",
        params.placement_attempts
    )))
}

/// Rebuilds the image-frame polylines of a sample from its provenance.
pub fn reconstruct(meta: &SampleMeta, params: &ProblemParams) -> Result<Vec<Vec<Point2>>> {
    let mut cache: BTreeMap<u64, Contour> = BTreeMap::new();
    let mut out = Vec::with_capacity(meta.poses.len());
    for (&s, pose) in meta.contour_seeds.iter().zip(&meta.poses) {
        pose.validate()
            .map_err(|e| Error::Verification(format!("invalid pose: {e}")))?;
        if let alloc::collections::btree_map::Entry::Vacant(slot) = cache.entry(s) {
            let c = sample_contour(s, &params.contour)
                .map_err(|e| Error::Verification(format!("contour seed {s}: {e}")))?;
            slot.insert(c);
        }
        out.push(posed_polyline(&cache[&s], pose, params));
    }
    Ok(out)
}

fn pose_rule(problem: ProblemId, poses: &[Pose], params: &ProblemParams) -> Option<String> {
    let upright = |p: &Pose| p.rotation == 0.0 && p.scale == 1.0;
    match problem {
        ProblemId::P1 | ProblemId::P5 => poses
            .iter()
            .any(|p| !upright(p) || p.mirror_axis.is_some())
            .then(|| "shapes must keep orientation and scale, unmirrored".into()),
        ProblemId::P20 => {
            if poses.iter().any(|p| !upright(p)) {
                Some("P20 shapes must keep orientation and scale".into())
            } else if poses.iter().filter(|p| p.mirror_axis.is_some()).count() != 1 {
                Some("P20 needs exactly one mirrored shape".into())
            } else {
                None
            }
        }
        ProblemId::P21 => {
            let (lo, hi) = params.p21_scale_range;
            poses
                .iter()
                .any(|p| p.mirror_axis.is_some() || p.scale < lo || p.scale > hi)
                .then(|| "P21 shapes must be unmirrored with scale in range".into())
        }
    }
}

/// Checks the label against the congruence oracle on the rendered shapes.
fn rule_holds(
    problem: ProblemId,
    label: Label,
    polys: &[Vec<Point2>],
    params: &ProblemParams,
) -> Result<Option<String>> {
    let class = problem.transform_class();
    let same = |i: usize, j: usize| -> Result<bool> {
        Ok(congruence_residual(&polys[i], &polys[j], class)? < params.same_threshold)
    };
    let distinct = |i: usize, j: usize| -> Result<bool> {
        Ok(congruence_residual(&polys[i], &polys[j], class)? > params.distinct_threshold)
    };
    let verdict = match (problem, label) {
        (ProblemId::P5, Label::Positive) => {
            let pairings = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
            let mut found = false;
            for ((a, b), (c, d)) in pairings {
                if same(a, b)? && same(c, d)? && distinct(a, c)? {
                    found = true;
                    break;
                }
            }
            (!found).then(|| "no pairing into two identical pairs of distinct shapes".into())
        }
        (ProblemId::P5, Label::Negative) => {
            let mut all = true;
            'outer: for i in 0..4 {
                for j in (i + 1)..4 {
                    if !distinct(i, j)? {
                        all = false;
                        break 'outer;
                    }
                }
            }
            (!all).then(|| "negative P5 sample contains a repeated shape".into())
        }
        (_, Label::Positive) => (!same(0, 1)?).then(|| "positive shapes are not congruent".into()),
        (_, Label::Negative) => (!distinct(0, 1)?).then(|| "negative shapes are not distinct".into()),
    };
    Ok(verdict)
}

/// Re-derives a sample from its provenance and checks it end to end:
/// structure, byte-exact re-rendering, pose rules, placement invariants and
/// the label against the congruence oracle.
pub fn verify_sample(meta: &SampleMeta, image: &ImageGray, params: &ProblemParams) -> Result<Verdict> {
    let n = meta.problem.shape_count();
    if meta.contour_seeds.len() != n || meta.poses.len() != n {
        return Ok(Verdict::Fail(format!(
            "{} needs {n} shapes, record has {} seeds and {} poses",
            meta.problem,
            meta.contour_seeds.len(),
            meta.poses.len()
        )));
    }
    if meta.canvas_side != params.canvas_side {
        return Ok(Verdict::Fail("canvas side differs from generation params".into()));
    }
    if image.width() != meta.canvas_side || image.height() != meta.canvas_side {
        return Ok(Verdict::Fail(format!(
            "image is {}x{}, record says {}",
            image.width(),
            image.height(),
            meta.canvas_side
        )));
    }
    let polys = reconstruct(meta, params)?;
    match rasterize(&polys, params.canvas_side, params.stroke_width) {
        Ok(expected) if expected == *image => {}
        Ok(_) => return Ok(Verdict::Fail("re-rendered image differs from stored image".into())),
        Err(e) => return Ok(Verdict::Fail(format!("shapes cannot be rendered: {e}"))),
    }
    if let Some(why) = pose_rule(meta.problem, &meta.poses, params) {
        return Ok(Verdict::Fail(why));
    }
    if !placement_ok(&polys, params) {
        return Ok(Verdict::Fail("placement violates border or margin".into()));
    }
    Ok(match rule_holds(meta.problem, meta.label, &polys, params)? {
        Some(why) => Verdict::Fail(why),
        None => Verdict::Pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProblemParams {
        ProblemParams::default()
    }

    #[test]
    fn problem_ids_parse() {
        assert_eq!("p21".parse::<ProblemId>().unwrap(), ProblemId::P21);
        assert_eq!("P5".parse::<ProblemId>().unwrap(), ProblemId::P5);
        assert_eq!("1".parse::<ProblemId>().unwrap(), ProblemId::P1);
        assert!("p2".parse::<ProblemId>().is_err());
    }

    #[test]
    fn p1_positive_reuses_one_upright_contour() {
        let s = gen_sample(ProblemId::P1, Label::Positive, 17, &params()).unwrap();
        assert_eq!(s.meta.contour_seeds.len(), 2);
        assert_eq!(s.meta.contour_seeds[0], s.meta.contour_seeds[1]);
        for p in &s.meta.poses {
            assert_eq!((p.rotation, p.scale, p.mirror_axis), (0.0, 1.0, None));
        }
    }

    #[test]
    fn p5_positive_has_two_pairs() {
        let s = gen_sample(ProblemId::P5, Label::Positive, 3, &params()).unwrap();
        let seeds = &s.meta.contour_seeds;
        assert_eq!(seeds.len(), 4);
        let mut distinct: Vec<u64> = seeds.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 2);
        for d in distinct {
            assert_eq!(seeds.iter().filter(|&&x| x == d).count(), 2);
        }
    }

    #[test]
    fn p5_negative_has_four_distinct_contours() {
        let s = gen_sample(ProblemId::P5, Label::Negative, 3, &params()).unwrap();
        let mut seeds = s.meta.contour_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn p20_mirrors_exactly_one_shape_in_both_classes() {
        for label in [Label::Positive, Label::Negative] {
            let s = gen_sample(ProblemId::P20, label, 8, &params()).unwrap();
            assert_eq!(s.meta.poses.iter().filter(|p| p.mirror_axis.is_some()).count(), 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_sample(ProblemId::P21, Label::Negative, 5, &params()).unwrap();
        let b = gen_sample(ProblemId::P21, Label::Negative, 5, &params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fresh_samples_verify() {
        let p = params();
        for problem in ProblemId::ALL {
            for label in [Label::Positive, Label::Negative] {
                for seed in 0..5 {
                    let s = gen_sample(problem, label, seed, &p).unwrap();
                    assert_eq!(
                        verify_sample(&s.meta, &s.image, &p).unwrap(),
                        Verdict::Pass,
                        "{problem} {label:?} {seed}"
                    );
                    assert!(s.image.count_black() >= problem.shape_count());
                }
            }
        }
    }

    #[test]
    fn flipped_label_fails() {
        let p = params();
        for problem in ProblemId::ALL {
            let mut s = gen_sample(problem, Label::Positive, 1, &p).unwrap();
            s.meta.label = s.meta.label.flipped();
            assert!(!verify_sample(&s.meta, &s.image, &p).unwrap().passed(), "{problem}");
        }
    }

    #[test]
    fn perturbed_rotation_fails_on_image_mismatch() {
        let p = params();
        let mut s = gen_sample(ProblemId::P1, Label::Positive, 2, &p).unwrap();
        s.meta.poses[1].rotation = 0.3;
        let v = verify_sample(&s.meta, &s.image, &p).unwrap();
        assert_eq!(v, Verdict::Fail("re-rendered image differs from stored image".into()));
    }

    #[test]
    fn unreproducible_seed_is_a_verification_error() {
        let p = ProblemParams {
            contour: GenParams {
                control_points: (14, 14),
                radius_range: (0.01, 1.0),
                max_rejections: 1,
                ..GenParams::default()
            },
            ..params()
        };
        let bad_seed = (0..5000u64).find(|&s| sample_contour(s, &p.contour).is_err()).unwrap();
        let s = gen_sample(ProblemId::P1, Label::Positive, 4, &params()).unwrap();
        let mut meta = s.meta.clone();
        meta.contour_seeds = alloc::vec![bad_seed, bad_seed];
        assert!(matches!(
            verify_sample(&meta, &s.image, &p),
            Err(Error::Verification(_))
        ));
    }

    #[test]
    fn labels_alternate_and_seeds_differ_by_split() {
        assert_eq!(label_for_index(0), Label::Positive);
        assert_eq!(label_for_index(1), Label::Negative);
        let a = sample_seed(7, ProblemId::P1, Split::Train, 0);
        assert_ne!(a, sample_seed(7, ProblemId::P1, Split::Val, 0));
        assert_ne!(a, sample_seed(7, ProblemId::P5, Split::Train, 0));
    }
}
