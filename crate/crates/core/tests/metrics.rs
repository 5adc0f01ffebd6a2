use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wrenchlab::hull::{contains_origin, contains_point};
use wrenchlab::metrics::*;
use wrenchlab::oracle::{ball_perturbation, cone_perturbation, random_force_closure_set};
use wrenchlab::WrenchSet;

fn cross_polytope(scale: f64) -> WrenchSet {
    let mut rows = Vec::new();
    for k in 0..6 {
        for s in [1.0, -1.0] {
            let mut r = [0.0; 6];
            r[k] = s * scale;
            rows.push(r);
        }
    }
    WrenchSet::from_arrays(&rows)
}

#[test]
fn cross_polytope_values() {
    let w = cross_polytope(1.0);
    let r6 = 1.0 / 6f64.sqrt();
    assert!((ferrari_canny(&w).unwrap() - r6).abs() < 1e-9);
    assert!((chebyshev_radius(&w).unwrap() - r6).abs() < 1e-9);
    assert!((min_weight(&w).unwrap().l_star - 1.0 / 12.0).abs() < 1e-9);
    assert!((min_weight_dual(&w).unwrap().phi_star - 1.0 / 12.0).abs() < 1e-9);
    let b = bound_check(&w).unwrap();
    assert!((b.lhs - 1.0 / (6.0 * 6f64.sqrt())).abs() < 1e-9 && b.holds);
    assert!((ferrari_canny(&cross_polytope(3.0)).unwrap() - 3.0 * r6).abs() < 1e-9);
}

#[test]
fn ordering_chain_and_duality() {
    for seed in 0..150 {
        let n_w = [8, 12, 16, 24][seed as usize % 4];
        let w = random_force_closure_set(n_w, seed).unwrap();
        let g = grasp_metrics(&w).unwrap();
        let (l, eps, delta) = (g.l_star.unwrap(), g.epsilon.unwrap(), g.delta.unwrap());
        assert!(l >= -1e-9 && l <= 1.0 / n_w as f64 + 1e-12);
        assert!(0.0 <= 2.0 * delta * l && 2.0 * delta * l <= eps + 1e-9);
        assert!(eps <= delta + 1e-12);
        let phi = min_weight_dual(&w).unwrap().phi_star;
        assert!((phi - l).abs() <= 1e-8, "seed {seed}: {phi} vs {l}");
    }
}

#[test]
fn lemma_pair_is_feasible_and_tight() {
    for seed in 0..60 {
        let w = random_force_closure_set(12, 1000 + seed).unwrap();
        let (a, b) = lemma_pair(&w).unwrap();
        let eps = ferrari_canny(&w).unwrap();
        assert_eq!(b, eps);
        assert!((a.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        for p in w.to_arrays() {
            let s: f64 = a.iter().zip(&p).map(|(x, y)| x * y).sum();
            assert!(s + b >= -1e-9);
        }
    }
}

/// ε·u stays in the hull for random unit u, and just beyond the nearest facet
/// the point leaves it.
#[test]
fn epsilon_matches_membership_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..10 {
        let w = random_force_closure_set(12, 500 + seed).unwrap();
        let pts = w.to_points();
        let eps = ferrari_canny(&w).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let p: Vec<f64> = u.iter().map(|v| v / n * eps * (1.0 - 1e-9)).collect();
            assert!(contains_point(&pts, &p));
        }
        let (a, _) = lemma_pair(&w).unwrap();
        let out: Vec<f64> = a.iter().map(|v| -v * (eps + 1e-6)).collect();
        assert!(!contains_point(&pts, &out));
    }
}

#[test]
fn l_star_sign_characterizes_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut seen = [0usize; 2];
    for _ in 0..300 {
        let n = rng.random_range(7..16);
        let rows: Vec<[f64; 6]> = (0..n).map(|_| std::array::from_fn(|_| rng.sample(StandardNormal))).collect();
        let w = WrenchSet::from_arrays(&rows);
        let fc = contains_origin(&w);
        let by_weight = matches!(min_weight(&w), Ok(m) if m.l_star >= -1e-9);
        assert_eq!(fc, by_weight);
        seen[fc as usize] += 1;
    }
    assert!(seen[0] > 20 && seen[1] > 20);
}

#[test]
fn containment_certificates_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..100 {
        let w_bar = random_force_closure_set([8, 12, 16, 24][seed as usize % 4], seed).unwrap();
        let w = cone_perturbation(&w_bar, &mut rng);
        let cert = certify_containment(&w_bar, &w).unwrap();
        assert!(cert.certified && cert.closure_confirmed);
        assert!(contains_origin(&w));
    }
}

#[test]
fn ball_certificates_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for seed in 0..100 {
        let w_bar = random_force_closure_set(12, 300 + seed).unwrap();
        let eps = ferrari_canny(&w_bar).unwrap();
        let w = ball_perturbation(&w_bar, eps, &mut rng);
        let cert = certify_ball(&w_bar, &w).unwrap();
        assert!(cert.certified && cert.closure_confirmed);
        assert!(contains_origin(&w));
    }
}

#[test]
fn ball_certificate_flags_large_moves() {
    let w_bar = cross_polytope(1.0);
    let eps = ferrari_canny(&w_bar).unwrap();
    let mut rows = w_bar.to_arrays();
    rows[3][0] += eps + 0.1;
    let cert = certify_ball(&w_bar, &WrenchSet::from_arrays(&rows)).unwrap();
    assert!(!cert.certified);
    assert!(!cert.per_wrench_ok[3]);
    assert!(cert.per_wrench_ok.iter().enumerate().all(|(l, ok)| *ok || l == 3));
    assert!(certify_ball(&w_bar, &w_bar).unwrap().certified);
}

#[test]
fn collapsed_set_is_certified() {
    let w_bar = random_force_closure_set(12, 42).unwrap();
    let zero = WrenchSet::from_arrays(&vec![[0.0; 6]; 12]);
    assert!(certify_containment(&w_bar, &zero).unwrap().certified);
    assert!(certify_containment(&w_bar, &w_bar).unwrap().certified);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_positively_homogeneous(seed in 0u64..10_000, c in 0.1f64..10.0) {
        let w = random_force_closure_set(12, seed).unwrap();
        let s = w.scaled(c);
        let (e1, e2) = (ferrari_canny(&w).unwrap(), ferrari_canny(&s).unwrap());
        prop_assert!((e2 - c * e1).abs() <= 1e-9 * c.max(1.0));
        let (d1, d2) = (chebyshev_radius(&w).unwrap(), chebyshev_radius(&s).unwrap());
        prop_assert!((d2 - c * d1).abs() <= 1e-9 * c.max(1.0));
        // the weights do not see the scale
        let (l1, l2) = (min_weight(&w).unwrap().l_star, min_weight(&s).unwrap().l_star);
        prop_assert!((l1 - l2).abs() <= 1e-9);
    }

    #[test]
    fn permuting_wrenches_changes_nothing(seed in 0u64..10_000) {
        let w = random_force_closure_set(10, seed).unwrap();
        let mut rows = w.to_arrays();
        rows.reverse();
        let p = WrenchSet::from_arrays(&rows);
        let (a, b) = (grasp_metrics(&w).unwrap(), grasp_metrics(&p).unwrap());
        prop_assert!((a.epsilon.unwrap() - b.epsilon.unwrap()).abs() < 1e-9);
        prop_assert!((a.l_star.unwrap() - b.l_star.unwrap()).abs() < 1e-9);
        prop_assert!((a.delta.unwrap() - b.delta.unwrap()).abs() < 1e-9);
    }
}
