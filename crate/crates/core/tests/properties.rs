//! Property tests for the geometric, raster and generation invariants.

use proptest::prelude::*;
use svrt_core::contour::{
    apply_pose, centroid, congruence_residual, mirror, sample_contour, self_intersects, GenParams, Point2, Pose,
    TransformClass,
};
use svrt_core::problems::{gen_sample, label_for_index, verify_sample, Label, ProblemId, ProblemParams};
use svrt_core::raster::rasterize;

fn problem() -> impl Strategy<Value = ProblemId> {
    prop::sample::select(ProblemId::ALL.to_vec())
}

fn label() -> impl Strategy<Value = Label> {
    prop::bool::ANY.prop_map(|b| if b { Label::Positive } else { Label::Negative })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contours_are_deterministic_simple_and_normalized(seed in any::<u64>()) {
        let p = GenParams::default();
        let c = sample_contour(seed, &p).unwrap();
        prop_assert_eq!(&c, &sample_contour(seed, &p).unwrap());
        prop_assert!(!self_intersects(c.vertices()));
        prop_assert!(centroid(c.vertices()).norm() < 1e-9);
        let rmax = c.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!((rmax - 1.0).abs() < 1e-9);
    }

    #[test]
    fn similarity_poses_are_forgiven_by_the_similarity_oracle(
        seed in any::<u64>(),
        tx in -50.0..50.0f64,
        ty in -50.0..50.0f64,
        rot in 0.0..std::f64::consts::TAU,
        scale in 0.5..1.4f64,
    ) {
        let c = sample_contour(seed, &GenParams::default()).unwrap();
        let pose = Pose::new((tx, ty), rot, scale, None).unwrap();
        let moved = apply_pose(&c, &pose);
        let r = congruence_residual(&moved, c.vertices(), TransformClass::Similarity).unwrap();
        prop_assert!(r < 1e-3, "residual {}", r);
    }

    #[test]
    fn mirrors_are_forgiven_by_the_mirror_oracle(seed in any::<u64>(), theta in 0.0..std::f64::consts::PI) {
        let c = sample_contour(seed, &GenParams::default()).unwrap();
        let m = mirror(&c, theta);
        let r = congruence_residual(c.vertices(), m.vertices(), TransformClass::TranslationMirror).unwrap();
        prop_assert!(r < 1e-3, "residual {}", r);
    }

    #[test]
    fn identity_pose_is_identity(seed in any::<u64>()) {
        let c = sample_contour(seed, &GenParams::default()).unwrap();
        for (a, b) in apply_pose(&c, &Pose::identity()).iter().zip(c.vertices()) {
            prop_assert!((a.x - b.x).abs() <= 1e-12 && (a.y - b.y).abs() <= 1e-12);
        }
    }

    #[test]
    fn integer_translation_translates_black_pixels(
        seed in any::<u64>(),
        dx in -20i32..20,
        dy in -20i32..20,
    ) {
        let c = sample_contour(seed, &GenParams::default()).unwrap();
        let poly: Vec<Point2> = c.scaled(18.0).iter().map(|p| Point2::new(p.x + 64.3, p.y + 63.8)).collect();
        let moved: Vec<Point2> = poly.iter().map(|p| Point2::new(p.x + f64::from(dx), p.y + f64::from(dy))).collect();
        let a = rasterize(&[poly], 128, 1).unwrap();
        let b = rasterize(&[moved], 128, 1).unwrap();
        prop_assert_eq!(a.count_black(), b.count_black());
        for y in 0..128i32 {
            for x in 0..128i32 {
                let (x2, y2) = (x + dx, y + dy);
                if (0..128).contains(&x2) && (0..128).contains(&y2) {
                    prop_assert_eq!(a.get(x as usize, y as usize), b.get(x2 as usize, y2 as usize));
                }
            }
        }
    }

    #[test]
    fn generated_samples_verify_and_draw_every_shape(p in problem(), l in label(), seed in any::<u64>()) {
        let params = ProblemParams::default();
        let s = gen_sample(p, l, seed, &params).unwrap();
        prop_assert_eq!(s.meta.contour_seeds.len(), p.shape_count());
        prop_assert!(verify_sample(&s.meta, &s.image, &params).unwrap().passed());
        // Each shape is drawn separately; the union has at least one black
        // pixel per shape because shapes never touch.
        prop_assert!(s.image.count_black() >= p.shape_count());
        let mut flipped = s.meta.clone();
        flipped.label = l.flipped();
        prop_assert!(!verify_sample(&flipped, &s.image, &params).unwrap().passed());
    }

    #[test]
    fn every_even_prefix_is_balanced(half in 0u64..5000) {
        let pos = (0..2 * half).filter(|&i| label_for_index(i) == Label::Positive).count() as u64;
        prop_assert_eq!(pos, half);
    }
}
