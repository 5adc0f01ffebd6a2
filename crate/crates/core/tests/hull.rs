use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wrenchlab::hull::{self, Hull};
use wrenchlab::linprog::{self, LinearProgram};
use wrenchlab::metrics;
use wrenchlab::oracle::random_force_closure_set;
use wrenchlab::WrenchSet;

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Facet planes of a 3-D point set from every point triple.
fn brute_force_planes(pts: &[Vec<f64>]) -> Vec<(Vector3<f64>, f64)> {
    let v: Vec<Vector3<f64>> = pts.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
    let mut planes: Vec<(Vector3<f64>, f64)> = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            for k in j + 1..v.len() {
                let n = (v[j] - v[i]).cross(&(v[k] - v[i]));
                if n.norm() < 1e-9 {
                    continue;
                }
                let n = n.normalize();
                let d: Vec<f64> = v.iter().map(|p| n.dot(&(p - v[i]))).collect();
                let (a, b) = if d.iter().all(|&x| x <= 1e-9) {
                    (n, n.dot(&v[i]))
                } else if d.iter().all(|&x| x >= -1e-9) {
                    (-n, -n.dot(&v[i]))
                } else {
                    continue;
                };
                if !planes.iter().any(|(q, c)| (q - a).norm() < 1e-7 && (c - b).abs() < 1e-7) {
                    planes.push((a, b));
                }
            }
        }
    }
    planes
}

#[test]
fn facets_match_brute_force_in_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let n = rng.random_range(5..14);
        let pts = gaussian_cloud(&mut rng, n, 3);
        let h = Hull::new(&pts).unwrap();
        let want = brute_force_planes(&pts);
        assert_eq!(h.facets.len(), want.len());
        for f in &h.facets {
            let a = Vector3::new(f.a[0], f.a[1], f.a[2]);
            assert!(want.iter().any(|(q, c)| (q - a).norm() < 1e-7 && (c - f.b).abs() < 1e-7));
        }
    }
}

fn primal_chebyshev(h: &Hull) -> f64 {
    let d = h.dim;
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let mut lp = LinearProgram::new(c);
    for k in 0..d {
        lp = lp.free(k);
    }
    for f in &h.facets {
        let mut row = f.a.clone();
        row.push(1.0);
        lp = lp.ub(row, f.b);
    }
    linprog::solve(&lp).unwrap().value
}

fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    g.qr().q()
}

#[test]
fn chebyshev_dual_matches_primal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let pts = gaussian_cloud(&mut rng, 16, 6);
        let h = Hull::new(&pts).unwrap();
        let (delta, center) = h.chebyshev().unwrap();
        assert!((delta - primal_chebyshev(&h)).abs() < 1e-9);
        for f in &h.facets {
            assert!(f.signed_distance(&center) <= -delta + 1e-9);
        }
    }
}

#[test]
fn translation_and_rotation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let pts = gaussian_cloud(&mut rng, 14, 6);
        let (delta, center) = hull::chebyshev(&pts).unwrap();

        let t: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&t).map(|(a, b)| a + b).collect()).collect();
        let (d2, c2) = hull::chebyshev(&moved).unwrap();
        assert!((delta - d2).abs() < 1e-9);
        // the center is unique only generically; compare through the facets
        let hm = Hull::new(&moved).unwrap();
        let ct: Vec<f64> = center.iter().zip(&t).map(|(a, b)| a + b).collect();
        assert!(hm.facets.iter().all(|f| f.signed_distance(&ct) <= -delta + 1e-8));
        assert!(hm.facets.iter().all(|f| f.signed_distance(&c2) <= -delta + 1e-8));

        let q = random_rotation(&mut rng, 6);
        let rotated: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| (&q * DVector::from_column_slice(p)).iter().copied().collect())
            .collect();
        let (d3, _) = hull::chebyshev(&rotated).unwrap();
        assert!((delta - d3).abs() < 1e-9, "{delta} vs {d3}");
    }
}

#[test]
fn membership_agrees_with_facets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut seen = [0usize; 2];
    for _ in 0..300 {
        let n = rng.random_range(8..16);
        let rows: Vec<[f64; 6]> = (0..n).map(|_| std::array::from_fn(|_| rng.sample(StandardNormal))).collect();
        let w = WrenchSet::from_arrays(&rows);
        let fc = hull::contains_origin(&w);
        let h = Hull::new(&w.to_points()).unwrap();
        assert_eq!(fc, h.facets.iter().all(|f| f.b >= -1e-9));
        seen[fc as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn chebyshev_radius_dominates_epsilon() {
    for seed in 0..50 {
        let w = random_force_closure_set(12, seed).unwrap();
        let eps = metrics::ferrari_canny(&w).unwrap();
        let delta = metrics::chebyshev_radius(&w).unwrap();
        assert!(delta >= eps - 1e-12);
    }
}

#[test]
fn cube_in_3d() {
    let mut pts = Vec::new();
    for i in 0..8 {
        pts.push(vec![(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
    }
    pts.push(vec![0.5, 0.5, 0.5]);
    let h = Hull::new(&pts).unwrap();
    assert_eq!(h.facets.len(), 6);
    assert!(h.facets.iter().all(|f| f.vertices.len() == 4));
    let (delta, c) = h.chebyshev().unwrap();
    assert!((delta - 0.5).abs() < 1e-12);
    assert!(c.iter().all(|v| (v - 0.5).abs() < 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_point_inside_every_facet(seed in any::<u64>(), n in 8usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = gaussian_cloud(&mut rng, n, 6);
        let h = Hull::new(&pts).unwrap();
        for f in &h.facets {
            prop_assert!((f.a.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
            prop_assert!(f.vertices.len() >= 6);
            for p in &pts {
                prop_assert!(f.signed_distance(p) <= 1e-9);
            }
        }
    }
}
