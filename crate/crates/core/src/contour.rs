//! Random closed curves and the geometric transforms that define shape
//! identity.
//!
//! A [`Contour`] lives in a normalized shape frame: vertex centroid at the
//! origin and maximum vertex radius 1. Poses map it into image pixels in a
//! fixed order (mirror, rotate, scale, translate), and
//! [`congruence_residual`] is the oracle that decides whether two posed
//! polylines show the same shape under a given transform class.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::{PI, TAU};

use libm::{cos, sin, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y)
    }

    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    fn rotated(self, c: f64, s: f64) -> Point2 {
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// A closed, non-self-intersecting polyline in the normalized shape frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    vertices: Vec<Point2>,
    source_seed: u64,
}

impl Contour {
    pub const MIN_VERTICES: usize = 24;

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    /// Vertices multiplied by `factor` (shape frame to pixels).
    pub fn scaled(&self, factor: f64) -> Vec<Point2> {
        self.vertices
            .iter()
            .map(|p| Point2::new(p.x * factor, p.y * factor))
            .collect()
    }
}

/// Placement of a contour in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Image-frame offset in pixels.
    pub translation: (f64, f64),
    /// Radians in `[0, 2π)`.
    pub rotation: f64,
    pub scale: f64,
    /// Reflection axis through the shape centroid, radians in `[0, π)`.
    pub mirror_axis: Option<f64>,
}

impl Pose {
    pub const SCALE_RANGE: (f64, f64) = (0.3, 2.0);

    pub fn identity() -> Self {
        Self {
            translation: (0.0, 0.0),
            rotation: 0.0,
            scale: 1.0,
            mirror_axis: None,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            translation: (tx, ty),
            ..Self::identity()
        }
    }

    /// Builds a pose, wrapping the rotation into `[0, 2π)` and the mirror
    /// axis into `[0, π)`.
    pub fn new(translation: (f64, f64), rotation: f64, scale: f64, mirror_axis: Option<f64>) -> Result<Self> {
        let pose = Self {
            translation,
            rotation: wrap(rotation, TAU),
            scale,
            mirror_axis: mirror_axis.map(|a| wrap(a, PI)),
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::SCALE_RANGE;
        if !(self.scale >= lo && self.scale <= hi) {
            bail!(Argument, "pose scale {} outside [{lo}, {hi}]", self.scale);
        }
        if !(0.0..TAU).contains(&self.rotation) {
            bail!(Argument, "pose rotation {} outside [0, 2pi)", self.rotation);
        }
        if let Some(a) = self.mirror_axis {
            if !(0.0..PI).contains(&a) {
                bail!(Argument, "mirror axis {a} outside [0, pi)");
            }
        }
        if !self.translation.0.is_finite() || !self.translation.1.is_finite() {
            bail!(Argument, "non-finite translation");
        }
        Ok(())
    }

    /// Maps shape-frame points into the image frame.
    pub fn apply(&self, points: &[Point2]) -> Vec<Point2> {
        let (c, s) = (cos(self.rotation), sin(self.rotation));
        let reflect = self.mirror_axis.map(|a| (cos(2.0 * a), sin(2.0 * a)));
        points
            .iter()
            .map(|&p| {
                let p = match reflect {
                    Some((c2, s2)) => reflect_point(p, c2, s2),
                    None => p,
                };
                let p = p.rotated(c, s);
                Point2::new(
                    p.x * self.scale + self.translation.0,
                    p.y * self.scale + self.translation.1,
                )
            })
            .collect()
    }
}

fn wrap(v: f64, period: f64) -> f64 {
    let r = v % period;
    let r = if r < 0.0 { r + period } else { r };
    // `-tiny % period + period` can round up to `period` itself.
    if r >= period {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformClass {
    Translation,
    TranslationMirror,
    /// Translation, rotation and uniform scale.
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Inclusive range for the number of control points.
    pub control_points: (usize, usize),
    pub radius_range: (f64, f64),
    pub smoothing_subdivisions: usize,
    pub max_rejections: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            control_points: (6, 14),
            radius_range: (0.3, 1.0),
            smoothing_subdivisions: 4,
            max_rejections: 200,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.control_points;
        if lo < 4 || lo > hi {
            bail!(Argument, "control point range ({lo}, {hi}) invalid");
        }
        let (rlo, rhi) = self.radius_range;
        if !(rlo > 0.0 && rlo < rhi && rhi.is_finite()) {
            bail!(Argument, "radius range ({rlo}, {rhi}) invalid");
        }
        if self.smoothing_subdivisions < 4 {
            bail!(Argument, "smoothing_subdivisions must be >= 4");
        }
        if lo * self.smoothing_subdivisions < Contour::MIN_VERTICES {
            bail!(
                Argument,
                "{lo} control points x {} subdivisions gives fewer than {} vertices",
                self.smoothing_subdivisions,
                Contour::MIN_VERTICES
            );
        }
        if self.max_rejections == 0 {
            bail!(Argument, "max_rejections must be positive");
        }
        Ok(())
    }
}

/// Samples a random closed curve.
///
/// Control points sit at sorted random angles with random radii; a closed
/// uniform Catmull-Rom spline through them is sampled
/// `smoothing_subdivisions` times per span, normalized, and rejected if it
/// self-intersects.
pub fn sample_contour(rng_seed: u64, params: &GenParams) -> Result<Contour> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (klo, khi) = params.control_points;
    let (rlo, rhi) = params.radius_range;
    for _ in 0..params.max_rejections {
        let k = rng.gen_range(klo..=khi);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let control: Vec<Point2> = angles
            .iter()
            .map(|&a| {
                let r = rng.gen_range(rlo..rhi);
                Point2::new(r * cos(a), r * sin(a))
            })
            .collect();
        let Some(vertices) = normalize(catmull_rom_closed(&control, params.smoothing_subdivisions)) else {
            continue;
        };
        if !self_intersects(&vertices) {
            return Ok(Contour {
                vertices,
                source_seed: rng_seed,
            });
        }
    }
    Err(Error::Generation(format!(
        "contour seed {rng_seed}: {} candidates all self-intersected",
        params.max_rejections
    )))
}

fn catmull_rom_closed(ctrl: &[Point2], sub: usize) -> Vec<Point2> {
    let k = ctrl.len();
    let mut out = Vec::with_capacity(k * sub);
    for i in 0..k {
        let p0 = ctrl[(i + k - 1) % k];
        let p1 = ctrl[i];
        let p2 = ctrl[(i + 1) % k];
        let p3 = ctrl[(i + 2) % k];
        for j in 0..sub {
            let t = j as f64 / sub as f64;
            let (t2, t3) = (t * t, t * t * t);
            let f = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b
                    + (-a + c) * t
                    + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2
                    + (-a + 3.0 * b - 3.0 * c + d) * t3)
            };
            out.push(Point2::new(f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y)));
        }
    }
    out
}

/// Centers on the vertex centroid and scales to unit maximum radius.
fn normalize(mut pts: Vec<Point2>) -> Option<Vec<Point2>> {
    let c = centroid(&pts);
    for p in &mut pts {
        *p = p.sub(c);
    }
    let r = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if !(r > 1e-9) || !r.is_finite() {
        return None;
    }
    for p in &mut pts {
        p.x /= r;
        p.y /= r;
    }
    // Recenter: the division can leave a residual of a few ulps.
    let c = centroid(&pts);
    for p in &mut pts {
        *p = p.sub(c);
    }
    Some(pts)
}

/// Vertex centroid.
pub fn centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len().max(1) as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point2::new(sx / n, sy / n)
}

/// Places the contour in the image frame.
pub fn apply_pose(c: &Contour, pose: &Pose) -> Vec<Point2> {
    pose.apply(&c.vertices)
}

#[inline]
fn reflect_point(p: Point2, c2: f64, s2: f64) -> Point2 {
    Point2::new(p.x * c2 + p.y * s2, p.x * s2 - p.y * c2)
}

/// Reflects every vertex about the line through the origin at `axis_angle`.
pub fn mirror(c: &Contour, axis_angle: f64) -> Contour {
    let (c2, s2) = (cos(2.0 * axis_angle), sin(2.0 * axis_angle));
    Contour {
        vertices: c.vertices.iter().map(|&p| reflect_point(p, c2, s2)).collect(),
        source_seed: c.source_seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Tight axis-aligned bounds, `None` for an empty polyline.
pub fn bbox(pts: &[Point2]) -> Option<BBox> {
    let first = pts.first()?;
    Some(pts.iter().fold(
        BBox {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        },
        |b, p| BBox {
            min_x: b.min_x.min(p.x),
            min_y: b.min_y.min(p.y),
            max_x: b.max_x.max(p.x),
            max_y: b.max_y.max(p.y),
        },
    ))
}

#[inline]
fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[inline]
fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff two non-adjacent edges of the closed polyline intersect.
///
/// Edges are swept in order of their minimum x; only pairs whose x-extents
/// overlap are tested exactly.
pub fn self_intersects(pts: &[Point2]) -> bool {
    let n = pts.len();
    if n < 4 {
        return false;
    }
    let edge = |i: usize| (pts[i], pts[(i + 1) % n]);
    let mut order: Vec<(f64, f64, usize)> = (0..n)
        .map(|i| {
            let (a, b) = edge(i);
            (a.x.min(b.x), a.x.max(b.x), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let adjacent = |i: usize, j: usize| (i + 1) % n == j || (j + 1) % n == i;
    let mut active: Vec<(f64, usize)> = Vec::new();
    for &(lo, hi, i) in &order {
        active.retain(|&(ahi, _)| ahi >= lo);
        let (a, b) = edge(i);
        let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
        for &(_, j) in &active {
            if adjacent(i, j) {
                continue;
            }
            let (c, d) = edge(j);
            if c.y.max(d.y) < ylo || c.y.min(d.y) > yhi {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
        active.push((hi, i));
    }
    false
}

#[inline]
fn point_segment_dist2(p: Point2, a: Point2, b: Point2) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let (apx, apy) = (p.x - a.x, p.y - a.y);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx * dx + dy * dy
}

/// Mean distance from the points of `a` to the closed curve `b`.
pub fn mean_point_to_curve(a: &[Point2], b: &[Point2]) -> f64 {
    let n = b.len();
    let total: f64 = a
        .iter()
        .map(|&p| {
            let mut best = f64::INFINITY;
            for i in 0..n {
                let d = point_segment_dist2(p, b[i], b[(i + 1) % n]);
                if d < best {
                    best = d;
                }
            }
            sqrt(best)
        })
        .sum();
    total / a.len() as f64
}

const ROTATION_SCAN_STEPS: usize = 180;
const REFINE_CANDIDATES: usize = 3;
const GOLDEN_ITERS: usize = 60;

/// Minimal mean point-to-curve distance of `a` onto `b` over `class`,
/// expressed in units of `b`'s RMS radius so the same thresholds apply in
/// the shape frame and the image frame.
pub fn congruence_residual(a: &[Point2], b: &[Point2], class: TransformClass) -> Result<f64> {
    if a.len() < 3 || b.len() < 3 {
        bail!(
            Argument,
            "congruence_residual needs closed polylines with >= 3 vertices"
        );
    }
    let a0 = centered(a);
    let b0 = centered(b);
    let rms_b = rms_radius(&b0);
    if !(rms_b > 0.0) {
        bail!(Argument, "degenerate target polyline");
    }
    let raw = match class {
        TransformClass::Translation => mean_point_to_curve(&a0, &b0),
        TransformClass::Similarity => {
            let rms_a = rms_radius(&a0);
            if !(rms_a > 0.0) {
                bail!(Argument, "degenerate source polyline");
            }
            let s = rms_b / rms_a;
            let a1: Vec<Point2> = a0.iter().map(|p| Point2::new(p.x * s, p.y * s)).collect();
            best_over_angle(TAU, |phi| {
                let (c, sn) = (cos(phi), sin(phi));
                mean_rotated(&a1, &b0, c, sn, None)
            })
        }
        TransformClass::TranslationMirror => {
            let direct = mean_point_to_curve(&a0, &b0);
            let mirrored = best_over_angle(PI, |theta| {
                let (c2, s2) = (cos(2.0 * theta), sin(2.0 * theta));
                mean_rotated(&a0, &b0, 1.0, 0.0, Some((c2, s2)))
            });
            direct.min(mirrored)
        }
    };
    Ok(raw / rms_b)
}

fn centered(pts: &[Point2]) -> Vec<Point2> {
    let c = centroid(pts);
    pts.iter().map(|p| p.sub(c)).collect()
}

fn rms_radius(pts: &[Point2]) -> f64 {
    let s: f64 = pts.iter().map(|p| p.x * p.x + p.y * p.y).sum();
    sqrt(s / pts.len() as f64)
}

fn mean_rotated(a: &[Point2], b: &[Point2], c: f64, s: f64, reflect: Option<(f64, f64)>) -> f64 {
    let moved: Vec<Point2> = a
        .iter()
        .map(|&p| {
            let p = match reflect {
                Some((c2, s2)) => reflect_point(p, c2, s2),
                None => p,
            };
            p.rotated(c, s)
        })
        .collect();
    mean_point_to_curve(&moved, b)
}

/// Coarse scan of `f` over `[0, period)` followed by golden-section
/// refinement around the best few scan points.
fn best_over_angle(period: f64, f: impl Fn(f64) -> f64) -> f64 {
    let step = period / ROTATION_SCAN_STEPS as f64;
    let mut scan: Vec<(f64, f64)> = (0..ROTATION_SCAN_STEPS)
        .map(|i| {
            let t = i as f64 * step;
            (f(t), t)
        })
        .collect();
    scan.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let mut best = scan[0].0;
    for &(_, t0) in scan.iter().take(REFINE_CANDIDATES) {
        let (mut lo, mut hi) = (t0 - step, t0 + step);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..GOLDEN_ITERS {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = f(x2);
            }
        }
        best = best.min(f1).min(f2);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn brute_force_self_intersects(pts: &[Point2]) -> bool {
        let n = pts.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                    return true;
                }
            }
        }
        false
    }

    /// Contour that is symmetric about the x-axis by construction.
    fn symmetric_contour() -> Contour {
        let n = 48;
        let vertices = (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                let r = 0.6 + 0.25 * cos(3.0 * t) + 0.1 * cos(t);
                Point2::new(r * cos(t), r * sin(t))
            })
            .collect();
        Contour {
            vertices: normalize(vertices).unwrap(),
            source_seed: 0,
        }
    }

    #[test]
    fn sample_is_deterministic() {
        let p = GenParams::default();
        assert_eq!(sample_contour(42, &p).unwrap(), sample_contour(42, &p).unwrap());
    }

    #[test]
    fn sample_is_normalized() {
        let c = sample_contour(42, &GenParams::default()).unwrap();
        assert!(centroid(c.vertices()).norm() < 1e-9);
        let rmax = c.vertices().iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((rmax - 1.0).abs() < 1e-9);
        assert!(c.vertices().len() >= Contour::MIN_VERTICES);
        assert!(!self_intersects(c.vertices()));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = GenParams {
            control_points: (3, 3),
            ..GenParams::default()
        };
        assert!(matches!(sample_contour(1, &bad), Err(Error::Argument(_))));
    }

    #[test]
    fn exhausted_rejection_budget_is_a_generation_error() {
        let spiky = GenParams {
            control_points: (14, 14),
            radius_range: (0.01, 1.0),
            max_rejections: 1,
            ..GenParams::default()
        };
        let failed = (0..2000).find_map(|s| sample_contour(s, &spiky).err());
        assert!(matches!(failed, Some(Error::Generation(_))));
    }

    #[test]
    fn identity_pose_is_identity() {
        let c = sample_contour(3, &GenParams::default()).unwrap();
        let out = apply_pose(&c, &Pose::identity());
        for (a, b) in c.vertices().iter().zip(&out) {
            assert!((a.x - b.x).abs() <= 1e-12 && (a.y - b.y).abs() <= 1e-12);
        }
    }

    #[test]
    fn scale_doubles_radius() {
        let c = sample_contour(5, &GenParams::default()).unwrap();
        let pose = Pose::new((0.0, 0.0), 0.0, 2.0, None).unwrap();
        for (a, b) in c.vertices().iter().zip(apply_pose(&c, &pose)) {
            assert!((b.norm() - 2.0 * a.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let pose = Pose::new((0.0, 0.0), PI / 2.0, 1.0, None).unwrap();
        let out = pose.apply(&[Point2::new(1.0, 0.0)]);
        assert!(out[0].x.abs() < 1e-12 && (out[0].y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pose_application_order_is_mirror_rotate_scale_translate() {
        let pose = Pose::new((10.0, -3.0), PI / 2.0, 2.0, Some(0.0)).unwrap();
        // (1, 2) -> mirror x-axis (1, -2) -> rotate 90deg (2, 1) -> scale (4, 2) -> translate (14, -1)
        let out = pose.apply(&[Point2::new(1.0, 2.0)]);
        assert!((out[0].x - 14.0).abs() < 1e-12 && (out[0].y + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pose_rejects_out_of_range_scale() {
        assert!(Pose::new((0.0, 0.0), 0.0, 2.5, None).is_err());
        assert!(Pose::new((0.0, 0.0), 0.0, 0.2, None).is_err());
        let p = Pose::new((0.0, 0.0), -PI / 2.0, 1.0, Some(PI + 0.5)).unwrap();
        assert!((p.rotation - 1.5 * PI).abs() < 1e-12);
        assert!((p.mirror_axis.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mirror_about_x_axis_negates_y() {
        let c = Contour {
            vertices: vec![Point2::new(0.3, 0.7)],
            source_seed: 0,
        };
        let m = mirror(&c, 0.0);
        assert_eq!(m.vertices()[0], Point2::new(0.3, -0.7));
    }

    #[test]
    fn mirror_is_an_involution() {
        let c = sample_contour(11, &GenParams::default()).unwrap();
        let back = mirror(&mirror(&c, 1.1), 1.1);
        for (a, b) in c.vertices().iter().zip(back.vertices()) {
            assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_contour_is_its_own_mirror() {
        let c = symmetric_contour();
        let m = mirror(&c, 0.0);
        let r = congruence_residual(m.vertices(), c.vertices(), TransformClass::Translation).unwrap();
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn residual_of_identical_is_zero() {
        let c = sample_contour(9, &GenParams::default()).unwrap();
        let r = congruence_residual(c.vertices(), c.vertices(), TransformClass::Translation).unwrap();
        assert!(r < 1e-9);
    }

    #[test]
    fn residual_rejects_short_polylines() {
        let two = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        assert!(congruence_residual(&two, &square(), TransformClass::Translation).is_err());
        assert!(congruence_residual(&[], &square(), TransformClass::Similarity).is_err());
    }

    #[test]
    fn mirror_residual_recovers_any_axis() {
        let c = sample_contour(21, &GenParams::default()).unwrap();
        for k in 0..8 {
            let theta = 0.37 * k as f64;
            let m = mirror(&c, wrap(theta, PI));
            let r = congruence_residual(c.vertices(), m.vertices(), TransformClass::TranslationMirror).unwrap();
            assert!(r < 1e-3, "theta {theta}: residual {r}");
        }
    }

    #[test]
    fn translation_class_does_not_forgive_rotation() {
        let c = sample_contour(23, &GenParams::default()).unwrap();
        let rotated = Pose::new((5.0, 5.0), 0.8, 1.0, None).unwrap().apply(c.vertices());
        let t = congruence_residual(&rotated, c.vertices(), TransformClass::Translation).unwrap();
        let s = congruence_residual(&rotated, c.vertices(), TransformClass::Similarity).unwrap();
        assert!(t > 0.02, "translation residual {t}");
        assert!(s < 1e-3, "similarity residual {s}");
    }

    #[test]
    fn square_and_bowtie() {
        assert!(!self_intersects(&square()));
        let bowtie = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(self_intersects(&bowtie));
    }

    #[test]
    fn sweep_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut crossings = 0;
        for _ in 0..1000 {
            let n = rng.gen_range(3..12);
            let pts: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect();
            let expected = brute_force_self_intersects(&pts);
            crossings += usize::from(expected);
            assert_eq!(self_intersects(&pts), expected, "{pts:?}");
        }
        assert!(crossings > 100 && crossings < 1000);
    }

    #[test]
    fn bbox_cases() {
        let n = 360;
        let circle: Vec<Point2> = (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                Point2::new(cos(t), sin(t))
            })
            .collect();
        let b = bbox(&circle).unwrap();
        assert!((b.min_x + 1.0).abs() < 1e-3 && (b.max_x - 1.0).abs() < 1e-3);
        assert!((b.min_y + 1.0).abs() < 1e-3 && (b.max_y - 1.0).abs() < 1e-3);

        let p = bbox(&[Point2::new(2.0, 3.0)]).unwrap();
        assert_eq!((p.width(), p.height()), (0.0, 0.0));
        assert!(bbox(&[]).is_none());

        let c = sample_contour(4, &GenParams::default()).unwrap();
        let moved = apply_pose(&c, &Pose::translation(7.5, -2.0));
        let (b0, b1) = (bbox(c.vertices()).unwrap(), bbox(&moved).unwrap());
        assert!((b1.min_x - b0.min_x - 7.5).abs() < 1e-12);
        assert!((b1.max_y - b0.max_y + 2.0).abs() < 1e-12);
    }
}
