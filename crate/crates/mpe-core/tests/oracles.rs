//! Independent oracles: every production path checked here is compared
//! against a separately coded brute-force or closed-form computation.

mod common;

use common::*;
use mpe_core::{
    best_rigid_fit, normalize_clouds, p2_residual, point_force, rotation_error_deg, system_state,
    ForceParams, NnIndex, PointCloud, Quat, RigidTransform, Vec3,
};
use rand::Rng;

/// Brute-force nearest neighbor: ascending scan, strict improvement,
/// so ties resolve to the lowest index.
fn brute_force_nearest(points: &[Vec3], query: Vec3) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (j, &p) in points.iter().enumerate() {
        let d = query - p;
        let d_sq = d.dot(d);
        if d_sq < best.1 {
            best = (j, d_sq);
        }
    }
    (best.0, best.1)
}

#[test]
fn nn_index_agrees_with_brute_force_scan() {
    let mut r = rng(101);
    let cloud = random_cloud(&mut r, 200, 1.0);
    let index = NnIndex::build(&cloud);
    for _ in 0..1000 {
        let query = Vec3::new(
            r.gen_range(-1.2..1.2),
            r.gen_range(-1.2..1.2),
            r.gen_range(-1.2..1.2),
        );
        let (bi, bd) = brute_force_nearest(cloud.points(), query);
        let (ti, td) = index.nearest(query);
        assert_eq!(ti, bi);
        assert_eq!(td, bd, "distances must match exactly");
    }
}

#[test]
fn nn_index_agrees_on_gridded_tie_heavy_cloud() {
    // lattice points produce many exact ties
    let mut points = Vec::new();
    for x in 0..5 {
        for y in 0..5 {
            for z in 0..3 {
                points.push(Vec3::new(x as f64, y as f64, z as f64));
            }
        }
    }
    let cloud = PointCloud::new(points).unwrap();
    let index = NnIndex::build(&cloud);
    let mut r = rng(7);
    for _ in 0..500 {
        // queries snapped to half-integer coordinates sit exactly
        // between lattice points
        let snap = |v: f64| (v * 2.0).round() / 2.0;
        let query = Vec3::new(
            snap(r.gen_range(-0.5..4.5)),
            snap(r.gen_range(-0.5..4.5)),
            snap(r.gen_range(-0.5..2.5)),
        );
        let (bi, bd) = brute_force_nearest(cloud.points(), query);
        let (ti, td) = index.nearest(query);
        assert_eq!((ti, td), (bi, bd));
    }
}

/// Naive force summation, written independently of the production
/// implementation.
fn naive_point_force(x: Vec3, reference: &PointCloud, eps: f64, k: f64) -> Vec3 {
    let mut f = Vec3::ZERO;
    for (j, &y) in reference.points().iter().enumerate() {
        let dx = y.x - x.x;
        let dy = y.y - x.y;
        let dz = y.z - x.z;
        let d_sq = dx * dx + dy * dy + dz * dz;
        let d = d_sq.sqrt();
        if d < 1e-12 {
            continue;
        }
        let mag = reference.weight(j) * k / (d_sq + eps * eps);
        f += Vec3::new(dx / d, dy / d, dz / d) * mag;
    }
    f
}

#[test]
fn point_force_matches_naive_summation() {
    let mut r = rng(202);
    let reference = random_cloud(&mut r, 20, 0.8);
    let params = ForceParams {
        softening: 0.05,
        strength: 1.3,
    };
    for _ in 0..50 {
        let x = Vec3::new(
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        );
        let fast = point_force(x, &reference, &params);
        let slow = naive_point_force(x, &reference, params.softening, params.strength);
        assert!((fast - slow).norm() < 1e-12);
    }
}

#[test]
fn weighted_point_force_matches_naive_summation() {
    let mut r = rng(203);
    let base = random_cloud(&mut r, 15, 0.6);
    let weights: Vec<f64> = (0..15).map(|_| r.gen_range(0.2..3.0)).collect();
    let reference = PointCloud::with_weights(base.points().to_vec(), Some(weights)).unwrap();
    let params = ForceParams::default();
    let x = Vec3::new(0.1, -0.4, 0.3);
    let fast = point_force(x, &reference, &params);
    let slow = naive_point_force(x, &reference, params.softening, params.strength);
    assert!((fast - slow).norm() < 1e-12);
}

#[test]
fn energies_match_naive_double_loops() {
    let mut r = rng(303);
    let t_base = random_cloud(&mut r, 30, 0.7);
    let t_weights: Vec<f64> = (0..30).map(|_| r.gen_range(0.5..2.0)).collect();
    let template = PointCloud::with_weights(t_base.points().to_vec(), Some(t_weights)).unwrap();
    let r_base = random_cloud(&mut r, 40, 0.7);
    let r_weights: Vec<f64> = (0..40).map(|_| r.gen_range(0.5..2.0)).collect();
    let reference = PointCloud::with_weights(r_base.points().to_vec(), Some(r_weights)).unwrap();
    let params = ForceParams {
        softening: 0.02,
        strength: 0.9,
    };

    let state = system_state(&template, &reference, template.centroid(), &params).unwrap();

    let eps_sq = params.softening * params.softening;
    let mut pe = 0.0;
    for (i, &x) in template.points().iter().enumerate() {
        for (j, &y) in reference.points().iter().enumerate() {
            let d = y - x;
            pe -= template.weight(i) * reference.weight(j) * params.strength
                / (d.dot(d) + eps_sq);
        }
    }
    assert!((state.potential_energy - pe).abs() < 1e-12 * pe.abs());

    let mut p2 = 0.0;
    for &x in template.points() {
        let mut min_sq = f64::INFINITY;
        for &y in reference.points() {
            let d = y - x;
            min_sq = min_sq.min(d.dot(d));
        }
        p2 -= params.strength / (min_sq + eps_sq);
    }
    assert!((state.p2_energy - p2).abs() < 1e-12 * p2.abs());
}

#[test]
fn torque_two_term_form_equals_simplified_cross_sum() {
    let mut r = rng(404);
    let template = random_cloud(&mut r, 25, 0.5);
    let reference = random_cloud(&mut r, 35, 0.5);
    let params = ForceParams::default();
    let center = template.centroid();
    let state = system_state(&template, &reference, center, &params).unwrap();

    // simplified form: sum of v_i x F_i
    let mut simple = Vec3::ZERO;
    for (i, &x) in template.points().iter().enumerate() {
        let lever = x - center;
        let n = lever.norm();
        if n < 1e-12 {
            continue;
        }
        let v = lever * (1.0 / n);
        simple += v.cross(state.per_point_forces[i]);
    }
    assert!((state.torque - simple).norm() < 1e-12);
}

#[test]
fn rotation_error_matches_quaternion_angle() {
    let mut r = rng(505);
    for _ in 0..100 {
        let a = random_pose(&mut r, core::f64::consts::PI, 0.0);
        let b = random_pose(&mut r, core::f64::consts::PI, 0.0);
        let err = rotation_error_deg(&a, &b);
        // oracle: angle of the relative quaternion, 2 acos(|w|)
        let qa = Quat::from_matrix(&a.rotation);
        let qb = Quat::from_matrix(&b.rotation);
        let rel = qa * qb.conjugate();
        let oracle = rel.angle().to_degrees();
        assert!((err - oracle).abs() < 1e-6, "err {err} oracle {oracle}");
        assert!((0.0..=180.0).contains(&err));
    }
}

#[test]
fn compose_matches_two_step_application() {
    let mut r = rng(606);
    let cloud = random_cloud(&mut r, 10, 1.0);
    for _ in 0..20 {
        let a = random_pose(&mut r, 2.0, 1.0);
        let b = random_pose(&mut r, 2.0, 1.0);
        let composed = cloud.transformed(&a.compose(&b));
        let two_step = cloud.transformed(&b).transformed(&a);
        for (p, q) in composed.points().iter().zip(two_step.points()) {
            assert!((*p - *q).norm() < 1e-9);
        }
    }
}

#[test]
fn normalization_round_trips() {
    let mut r = rng(707);
    let template = random_cloud(&mut r, 40, 2.5);
    let reference = random_cloud(&mut r, 60, 3.0);
    let (t_n, _, record) = normalize_clouds(&template, &reference).unwrap();
    for (orig, n) in template.points().iter().zip(t_n.points()) {
        let back = record.denormalize_point(*n);
        assert!((back - *orig).norm() < 1e-9);
    }
    // pose round-trip: the rotation passes through untouched, the
    // translation within 1e-9
    let pose = random_pose(&mut r, 1.5, 2.0);
    let back = record.denormalize_pose(&record.normalize_pose(&pose));
    assert_eq!(pose.rotation, back.rotation);
    assert!((pose.translation - back.translation).norm() < 1e-9);
}

#[test]
fn denormalized_pose_acts_like_normalized_pose() {
    // denormalize(pose) applied in original units must equal
    // denormalizing the normalized-units image point-by-point
    let mut r = rng(708);
    let template = random_cloud(&mut r, 25, 1.5);
    let reference = random_cloud(&mut r, 25, 2.0);
    let (t_n, _, record) = normalize_clouds(&template, &reference).unwrap();
    let pose_n = random_pose(&mut r, 1.0, 0.5);
    let pose = record.denormalize_pose(&pose_n);
    for (orig, n) in template.points().iter().zip(t_n.points()) {
        let via_normalized = record.denormalize_point(pose_n.apply(*n));
        let direct = pose.apply(*orig);
        assert!((via_normalized - direct).norm() < 1e-9);
    }
}

#[test]
fn best_rigid_fit_beats_random_candidate_poses() {
    let mut r = rng(808);
    let gt = random_pose(&mut r, 1.2, 0.8);
    let base = random_cloud(&mut r, 60, 0.8);
    let pairs: Vec<(Vec3, Vec3)> = base
        .points()
        .iter()
        .map(|&p| {
            let noise = Vec3::new(gaussian(&mut r), gaussian(&mut r), gaussian(&mut r)) * 0.01;
            (p, gt.apply(p) + noise)
        })
        .collect();
    let fit = best_rigid_fit(&pairs).unwrap();

    let objective = |pose: &RigidTransform| -> f64 {
        pairs
            .iter()
            .map(|(a, b)| {
                let d = *b - pose.apply(*a);
                d.dot(d)
            })
            .sum()
    };
    let fit_residual = objective(&fit);
    for _ in 0..1000 {
        let candidate = random_pose(&mut r, 1.5, 1.0);
        assert!(fit_residual <= objective(&candidate) + 1e-15);
    }
}

#[test]
fn p2_residual_hand_checked_tail() {
    let params = ForceParams {
        softening: 0.01,
        strength: 1.0,
    };
    // far pair: residual magnitude below K / d^2
    let d: f64 = 1e6;
    let res = p2_residual(d * d, &params);
    assert!(res < 0.0);
    assert!(res.abs() < 1.0 / 1e12 + f64::EPSILON);
}
