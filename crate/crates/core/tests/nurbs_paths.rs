mod common;

use common::{basis_sum_eval, random_curve, simpson_length, simpson_param_at, unit_circle};
use omniflow::scene::{spiral_curve, PathKind};
use omniflow::{NurbsCurve, SequenceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn de_boor_matches_basis_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..100 {
        let curve = random_curve(&mut rng, k % 2 == 0);
        let mut ts: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
        ts.extend([0.0, 1.0]);
        ts.extend(curve.knots().iter().copied());
        for t in ts {
            let a = curve.eval(t).unwrap();
            let b = basis_sum_eval(&curve, t);
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()), "curve {k}, t={t}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn rational_circle_has_unit_radius() {
    let c = unit_circle();
    for i in 0..=1000 {
        let p = c.eval(i as f64 / 1000.0).unwrap();
        assert!((p.x.hypot(p.y) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn spiral_half_length_parameter_matches_quadrature() {
    let table = omniflow::ArcLengthTable::new(spiral_curve().unwrap());
    let curve = table.curve().clone();
    let total = table.total_length();
    let oracle_total = simpson_length(&curve, 0.0, 1.0, 1e-4);
    assert!((total - oracle_total).abs() < 1e-6, "{total} vs {oracle_total}");
    let t = table.param_at(total / 2.0).unwrap();
    let len = simpson_length(&curve, 0.0, t, 1e-4);
    assert!((len - total / 2.0).abs() < 1e-6, "{len} vs {}", total / 2.0);
}

#[test]
fn spiral_4_frame_30_position() {
    let seq = SequenceSpec::from_name("spiral-4").unwrap().build().unwrap();
    let curve = seq.path().curve().clone();
    let s = 4.0 * 30.0 / 24.0;
    let t = simpson_param_at(&curve, s, 1e-4);
    let expected = curve.eval(t).unwrap();
    let got = seq.cube_at(30).unwrap().center;
    assert!((got - expected).norm() < 1e-6, "{got:?} vs {expected:?}");
}

#[test]
fn per_frame_step_is_speed_over_fps_on_every_path() {
    for path in PathKind::ALL {
        for speed in [1.0, 2.0, 4.0] {
            let spec = SequenceSpec::new(path, speed, omniflow::TextureMode::PerFaceChecker);
            let seq = spec.build().unwrap();
            let table = seq.path().arc_length();
            let step = speed / 24.0;
            let mut prev_t = 0.0;
            for k in 0..seq.frame_count() {
                let c = seq.cube_at(k).unwrap().center;
                assert_eq!(c.z, 0.0);
                let t = table.param_at(spec.distance_at(k)).unwrap();
                if k > 0 {
                    let arc = simpson_length(table.curve(), prev_t, t, 1e-5);
                    assert!((arc - step).abs() < 1e-6, "{path}-{speed} frame {k}: {arc}");
                    if path != PathKind::Spiral {
                        let chord = (c - seq.cube_at(k - 1).unwrap().center).norm();
                        assert!((chord - step).abs() < 1e-6);
                    }
                }
                prev_t = t;
            }
        }
    }
}

#[test]
fn equal_weights_reduce_to_plain_b_spline() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let plain = random_curve(&mut rng, false);
        let scaled = NurbsCurve::new(
            plain.degree(),
            plain.control_points().to_vec(),
            vec![2.5; plain.control_points().len()],
            plain.knots().to_vec(),
        )
        .unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            assert!((plain.eval(t).unwrap() - scaled.eval(t).unwrap()).norm() < 1e-12);
            assert!((plain.eval(t).unwrap() - basis_sum_eval(&plain, t)).norm() < 1e-12);
        }
    }
}
