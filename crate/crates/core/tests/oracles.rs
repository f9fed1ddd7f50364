use lanekit_core::assignment::hungarian;
use lanekit_core::bev::bev_iou;
use lanekit_core::chamfer::{directed_max, directed_mean, PointCloud};
use lanekit_core::gaussian::{kld, rotation_matrix, SegmentGaussian};
use lanekit_core::pointwise::{pair_cost, pointwise_match, resample_to_anchors, PointwiseConfig};
use lanekit_core::{CameraModel, Lane3D, Point3};
use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_na(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn random_gaussian(r: &mut ChaCha8Rng) -> SegmentGaussian {
    SegmentGaussian {
        mu: Point3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-0.5..0.5)),
        lambda_l: r.random_range(0.5..3.0),
        lambda_w: r.random_range(0.1..1.5),
        lambda_h: r.random_range(0.1..1.5),
        theta_x: r.random_range(-1.4..1.4),
        theta_z: r.random_range(-3.1..3.1),
        frame: Default::default(),
    }
}

/// KL between Gaussians via general inverse and determinants.
fn kl_reference(a: &SegmentGaussian, b: &SegmentGaussian) -> f64 {
    let sa = to_na(&a.covariance());
    let sb = to_na(&b.covariance());
    let sb_inv = sb.try_inverse().unwrap();
    let d = Vector3::new(b.mu.x - a.mu.x, b.mu.y - a.mu.y, b.mu.z - a.mu.z);
    0.5 * ((sb_inv * sa).trace() + (d.transpose() * sb_inv * d)[0] - 3.0 + (sb.determinant() / sa.determinant()).ln())
}

#[test]
fn rotation_is_yaw_after_pitch() {
    let mut r = rng(1);
    for _ in 0..2000 {
        let (tx, tz) = (r.random_range(-1.5..1.5), r.random_range(-3.1..3.1));
        let expected = Rotation3::from_axis_angle(&Vector3::z_axis(), tz) * Rotation3::from_axis_angle(&Vector3::x_axis(), tx);
        let got = to_na(&rotation_matrix(tx, tz));
        assert!((got - expected.matrix()).abs().max() < 1e-12);
        assert!((got.transpose() * got - Matrix3::identity()).abs().max() < 1e-12);
        assert!((got.determinant() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn covariance_spectrum() {
    let mut r = rng(2);
    for _ in 0..2000 {
        let g = random_gaussian(&mut r);
        let eig = SymmetricEigen::new(to_na(&g.covariance()));
        let mut got: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut want = g.variances().to_vec();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{got:?} {want:?}");
        }
        let prec = to_na(&g.precision()) * to_na(&g.covariance());
        assert!((prec - Matrix3::identity()).abs().max() < 1e-9);
    }
}

#[test]
fn closed_form_kl_matches_matrix_reference() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let (a, b) = (random_gaussian(&mut r), random_gaussian(&mut r));
        let got = kld(&a, &b).unwrap();
        let want = kl_reference(&a, &b);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} {want}");
        assert!(got >= 0.0);
    }
}

#[test]
fn closed_form_kl_matches_sampling() {
    let mut r = rng(4);
    for _ in 0..5 {
        let (a, b) = (random_gaussian(&mut r), random_gaussian(&mut r));
        let la = to_na(&a.covariance()).cholesky().unwrap().l();
        let sa_inv = to_na(&a.precision());
        let sb_inv = to_na(&b.precision());
        let log_norm = 0.5 * (to_na(&b.covariance()).determinant() / to_na(&a.covariance()).determinant()).ln();
        let ma = Vector3::new(a.mu.x, a.mu.y, a.mu.z);
        let mb = Vector3::new(b.mu.x, b.mu.y, b.mu.z);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = Vector3::from_fn(|_, _| StandardNormal.sample(&mut r));
            let x = ma + la * z;
            let (da, db) = (x - ma, x - mb);
            acc += log_norm - 0.5 * (da.transpose() * sa_inv * da)[0] + 0.5 * (db.transpose() * sb_inv * db)[0];
        }
        let mc = acc / n as f64;
        let exact = kld(&a, &b).unwrap();
        assert!((mc - exact).abs() <= 0.03 * exact + 0.01, "{mc} {exact}");
    }
}

fn random_lane(r: &mut ChaCha8Rng) -> Lane3D {
    let n = r.random_range(2..12);
    let mut y = r.random_range(0.0..10.0);
    let x0 = r.random_range(-5.0..5.0);
    let pts = (0..n)
        .map(|_| {
            y += r.random_range(0.5..8.0);
            Point3::new(x0 + r.random_range(-0.5..0.5), y, r.random_range(-0.3..0.3))
        })
        .collect();
    Lane3D::from_points(pts).unwrap()
}

fn brute_directed_mean(from: &[Point3], to: &[Point3]) -> f64 {
    let mut sum = 0.0;
    for &p in from {
        let mut best = f64::INFINITY;
        for &q in to {
            let (dx, dy, dz) = (q.x - p.x, q.y - p.y, q.z - p.z);
            let d = dx * dx + dy * dy + dz * dz;
            if d < best {
                best = d;
            }
        }
        sum += best.sqrt();
    }
    sum / from.len() as f64
}

fn brute_directed_max(from: &[Point3], to: &[Point3]) -> f64 {
    from.iter()
        .map(|p| to.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[test]
fn pruned_nearest_neighbour_is_bit_identical() {
    let mut r = rng(5);
    for _ in 0..300 {
        let g = PointCloud::from_lane(&random_lane(&mut r), 100).unwrap();
        let p = PointCloud::from_lane(&random_lane(&mut r), 100).unwrap();
        assert_eq!(directed_mean(&p, &g).to_bits(), brute_directed_mean(p.points(), g.points()).to_bits());
        assert_eq!(directed_mean(&g, &p).to_bits(), brute_directed_mean(g.points(), p.points()).to_bits());
        assert_eq!(directed_max(&g, &p), brute_directed_max(g.points(), p.points()));
    }
}

fn permutation_minimum(cost: &[Vec<f64>]) -> f64 {
    let (rows, cols) = (cost.len(), cost[0].len());
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, left: usize, acc: f64, best: &mut f64) {
        if left == 0 {
            *best = best.min(acc);
            return;
        }
        if row == cost.len() {
            return;
        }
        // a row may stay unassigned only while enough rows remain
        if cost.len() - row > left {
            go(cost, row + 1, used, left, acc, best);
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, left - 1, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cols], rows.min(cols), 0.0, &mut best);
    best
}

#[test]
fn hungarian_matches_exhaustive_search() {
    let mut r = rng(6);
    for trial in 0..600 {
        let rows = r.random_range(1..=6);
        let cols = r.random_range(1..=6);
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if trial % 3 == 0 { r.random_range(0..5) as f64 } else { r.random_range(0.0..10.0) })
                    .collect()
            })
            .collect();
        let m = hungarian(&cost).unwrap();
        let want = permutation_minimum(&cost);
        assert!((m.total_cost - want).abs() < 1e-9, "{cost:?}");
        let recomputed: f64 = m.pairs().map(|(i, j)| cost[i][j]).sum();
        assert!((recomputed - want).abs() < 1e-9);
        assert_eq!(m.pairs().count(), rows.min(cols));
    }
}

#[test]
fn pointwise_matching_matches_exhaustive_search() {
    let mut r = rng(7);
    let cfg = PointwiseConfig::default();
    for _ in 0..200 {
        let ng = r.random_range(1..=5);
        let np = r.random_range(1..=5);
        let gt: Vec<_> = (0..ng).map(|_| resample_to_anchors(&random_lane(&mut r), &cfg.y_anchors)).collect();
        let pred: Vec<_> = (0..np).map(|_| resample_to_anchors(&random_lane(&mut r), &cfg.y_anchors)).collect();
        let cost: Vec<Vec<f64>> = gt
            .iter()
            .map(|g| pred.iter().map(|p| pair_cost(g, p, &cfg).unwrap()).collect())
            .collect();
        let m = pointwise_match(&gt, &pred, &cfg).unwrap();
        assert!((m.total_cost - permutation_minimum(&cost)).abs() < 1e-9);
    }
}

#[test]
fn bev_iou_of_parallel_strips_matches_rectangle_overlap() {
    let line = |x: f64| Lane3D::from_points(vec![Point3::new(x, 0.0, 0.0), Point3::new(x, 60.0, 0.0)]).unwrap();
    let w = 0.3;
    for d in [0.0, 0.03, 0.07, 0.1, 0.15, 0.22, 0.29] {
        let exact = (w - d) / (w + d);
        let got = bev_iou(&line(0.0), &line(d), w, 0.01).unwrap();
        assert!((got - exact).abs() < 0.04, "d={d}: {got} vs {exact}");
    }
}

#[test]
fn projection_round_trip() {
    let mut r = rng(8);
    for _ in 0..200 {
        let cam = CameraModel {
            height: r.random_range(1.0..2.5),
            pitch: r.random_range(0.0..0.2),
            ..CameraModel::default()
        };
        let p = Point3::new(r.random_range(-10.0..10.0), r.random_range(3.0..100.0), 0.0);
        let (u, v) = cam.project(p).unwrap();
        let back = cam.unproject_to_ground(u, v).unwrap();
        assert!(back.distance(p) < 1e-6 * p.y.max(1.0));
        let (u2, v2) = cam.project(back).unwrap();
        assert!((u2 - u).abs() < 1e-6 && (v2 - v).abs() < 1e-6);
    }
}
