use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrenchlab::linprog;
use wrenchlab::oracle::{mc_force_closure, mc_gauss_polygon, random_sphere_grasp};
use wrenchlab::pong::*;
use wrenchlab::FrictionModel;

fn model() -> FrictionModel {
    FrictionModel::new(0.5, 4).unwrap()
}

fn random_polygon(rng: &mut ChaCha8Rng) -> Polygon2 {
    loop {
        let n = rng.random_range(3..9);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
        let p = Polygon2::hull(&pts);
        if p.len() >= 3 && p.area() > 0.05 {
            return p;
        }
    }
}

#[test]
fn gauss_polygon_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut misses = 0;
    for k in 0..20 {
        let p = random_polygon(&mut rng);
        let mu = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let sigma = [rng.random_range(0.2..1.2), rng.random_range(0.2..1.2)];
        let exact = gauss_polygon(&p, mu, sigma).unwrap();
        let mc = mc_gauss_polygon(&p, mu, sigma, 200_000, k).unwrap();
        if !mc.agrees(exact, 3.0) {
            misses += 1;
        }
        assert!(mc.agrees(exact, 5.0), "{exact} vs {:?}", mc);
    }
    assert!(misses <= 2);
}

#[test]
fn gauss_polygon_is_invariant_under_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let p = random_polygon(&mut rng);
        let base = gauss_polygon(&p, [0.1, -0.2], [0.7, 0.4]).unwrap();
        for s in 1..p.len() {
            let mut v = p.vertices.clone();
            v.rotate_left(s);
            let q = Polygon2::new(v).unwrap();
            assert!((gauss_polygon(&q, [0.1, -0.2], [0.7, 0.4]).unwrap() - base).abs() < 1e-13);
        }
        let rev = Polygon2 { vertices: p.vertices.iter().rev().copied().collect() };
        assert_eq!(gauss_polygon(&rev, [0.0; 2], [1.0; 2]), Err(PongError::Clockwise));
    }
}

#[test]
fn quadrature_has_converged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let p = random_polygon(&mut rng);
        let sigma = [rng.random_range(0.01..2.0), rng.random_range(0.01..2.0)];
        let a = gauss_polygon_with(&p, [0.0; 2], sigma, 32).unwrap();
        let b = gauss_polygon_with(&p, [0.0; 2], sigma, 64).unwrap();
        assert!((a - b).abs() < 1e-8);
    }
}

fn grasps(n: usize, seed: u64) -> Vec<Vec<wrenchlab::ContactSpec>> {
    (0..n as u64)
        .map(|k| random_sphere_grasp(3, 0.05, &model(), (0.001, 0.05), seed + k).unwrap())
        .collect()
}

#[test]
fn polygon_vertices_and_midpoints_are_included() {
    for g in grasps(5, 10) {
        let setup = PongSetup::new(&g, &model()).unwrap();
        for (i, f) in setup.polygons(&PongConfig::default()).unwrap().iter().enumerate() {
            let v = &f.polygon.vertices;
            for k in 0..v.len() {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                // shrink by a hair so the membership LP is not asked about the boundary itself
                let s = 1.0 - 1e-7;
                assert!(setup.inclusion_holds(i, [a[0] * s, a[1] * s]));
                assert!(setup.inclusion_holds(i, [(a[0] + b[0]) * 0.5 * s, (a[1] + b[1]) * 0.5 * s]));
            }
        }
    }
}

#[test]
fn more_directions_never_shrink_the_bound() {
    for g in grasps(6, 20) {
        let mut prev = 0.0;
        for n_dirs in [4, 8, 16, 32] {
            let l = l_fc(&g, &model(), &PongConfig { n_dirs, ..Default::default() }).unwrap().l_fc;
            assert!(l >= prev - 1e-6, "n_dirs {n_dirs}: {l} < {prev}");
            prev = l;
        }
    }
}

#[test]
fn joint_lp_equals_min_over_sides() {
    for g in grasps(10, 30) {
        let setup = PongSetup::new(&g, &model()).unwrap();
        for i in 0..setup.n_fingers() {
            for u in directions(8) {
                let tds = setup.side_images(i, &setup.direction(i, u));
                let split = vertex_theta(&setup.w_bar, &tds, f64::INFINITY).unwrap().theta;
                let joint = linprog::solve(&joint_vertex_lp(&setup.w_bar, &tds)).unwrap();
                assert!((joint.value - split).abs() <= 1e-9 * split.max(1.0));
            }
        }
    }
}

#[test]
fn batched_vertex_lps_match_sequential() {
    for g in grasps(3, 40) {
        let setup = PongSetup::new(&g, &model()).unwrap();
        let lps = setup.all_lps(&PongConfig::default());
        let batch = linprog::solve_batch(&lps);
        for (lp, b) in lps.iter().zip(&batch) {
            let s = linprog::solve(lp).unwrap();
            let b = b.as_ref().unwrap();
            assert_eq!(s.status, b.status);
            assert!((s.value - b.value).abs() <= 1e-12);
        }
    }
}

#[test]
fn bound_is_below_monte_carlo() {
    for (k, g) in grasps(6, 50).into_iter().enumerate() {
        let l = l_fc(&g, &model(), &PongConfig::default()).unwrap().l_fc;
        let mc = mc_force_closure(&g, &model(), 4000, k as u64).unwrap();
        assert!(l <= mc.p_hat + 3.0 * mc.std_err, "{l} vs {:?}", mc);
    }
}

/// Six directions avoid the diagonals, where two pyramid sides tie exactly.
/// Steps whose exit facet holds three wrenches of one finger hold the whole
/// pyramid and are dual degenerate, so part of each gradient is numerical.
#[test]
fn analytic_gradient_matches_full_differences() {
    let config = PongConfig { n_dirs: 6, ..Default::default() };
    let (mut steps, mut numeric) = (0, 0);
    for g in grasps(12, 60) {
        let kkt = l_fc_gradient(&g, &model(), &config).unwrap();
        if kkt.full_fd {
            continue;
        }
        let fd = l_fc_gradient(&g, &model(), &PongConfig { grad_mode: GradMode::FiniteDifference, ..config }).unwrap();
        let (a, b) = (kkt.flat(), fd.flat());
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err <= 1e-3 * scale, "err {err} scale {scale}");
        let setup = PongSetup::new(&g, &model()).unwrap();
        steps += setup.polygons(&config).unwrap().iter().map(|f| f.polygon.len()).sum::<usize>();
        numeric += kkt.fd_vertices;
    }
    assert!(numeric < steps, "{numeric} of {steps} steps numeric");
}

#[test]
fn non_closure_mean_gives_zero() {
    use nalgebra::Vector3;
    // every contact pushes the same way, so nothing balances the net force
    let c = [
        wrenchlab::ContactSpec::new(Vector3::new(0.05, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0), 0.01, 0.01).unwrap(),
        wrenchlab::ContactSpec::new(Vector3::new(0.05, 0.02, 0.0), Vector3::new(-1.0, 0.0, 0.0), 0.01, 0.01).unwrap(),
    ];
    let r = l_fc(&c, &model(), &PongConfig::default()).unwrap();
    assert!(!r.mean_force_closure);
    assert_eq!(r.l_fc, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_is_in_unit_interval(seed in any::<u64>(), mx in -3.0..3.0f64, my in -3.0..3.0f64, s1 in 1e-3..5.0f64, s2 in 1e-3..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_polygon(&mut rng);
        let v = gauss_polygon(&p, [mx, my], [s1, s2]).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        // shrinking toward an interior origin can only lose mass
        let shrunk = Polygon2::new(p.vertices.iter().map(|q| [q[0] * 0.5, q[1] * 0.5]).collect()).unwrap();
        let inner = gauss_polygon(&shrunk, [mx, my], [s1, s2]).unwrap();
        if p.contains([0.0, 0.0], 0.0) {
            prop_assert!(inner <= v + 1e-12);
        }
    }
}
