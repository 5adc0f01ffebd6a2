use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrenchlab::surfaces::{harmonic_field, polar_field, Surface, UncertaintyField};
use wrenchlab::synth::*;

fn sphere() -> Surface {
    Surface::sphere(0.05)
}

fn constant() -> SynthProblem {
    SynthProblem::new(sphere(), UncertaintyField::Constant { sigma_sq: 0.02 })
}

#[test]
fn results_are_consistent() {
    for (problem, seed) in [(constant(), 1), (SynthProblem::new(sphere(), polar_field()), 2)] {
        let r = synthesize(&problem, seed, 40).unwrap();
        assert!(r.trace.len() <= r.iterations + 1);
        for w in r.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for p in r.points() {
            assert!(problem.surface.value(&p).abs() <= 1e-6);
        }
        let fresh = problem.objective_value(&r.points()).unwrap();
        assert!((fresh - r.objective_value).abs() <= 1e-9);
        assert_eq!(r.feasible, problem.constraints_hold(&r.points()));
    }
}

#[test]
fn synthesis_is_deterministic() {
    let p = SynthProblem::new(sphere(), harmonic_field());
    assert_eq!(synthesize(&p, 7, 10).unwrap(), synthesize(&p, 7, 10).unwrap());
}

#[test]
fn zero_iterations_returns_the_start() {
    let p = constant();
    let r = synthesize(&p, 3, 0).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.trace.len(), 1);
    assert!(!r.converged);
    assert!((p.merit(&r.points()).unwrap() - r.trace[0]).abs() <= 1e-12);
    assert!(r.objective_value > 0.0);
    // the longer run starts from the same sample
    let longer = synthesize(&p, 3, 5).unwrap();
    assert_eq!(longer.trace[0], r.trace[0]);
}

/// Rotations about `e_x` carry the deterministic tangent frames (and so the
/// friction pyramids) along with the contacts whenever `|n_x| <= 0.9`.
#[test]
fn constant_field_bound_is_rotation_invariant() {
    let p = constant();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for seed in 0..12 {
        let r = synthesize(&p, seed, 30).unwrap();
        let pts = r.points();
        if pts.iter().any(|x| (x.x / 0.05).abs() > 0.9) || r.objective_value == 0.0 {
            continue;
        }
        let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), rng.random_range(0.0..std::f64::consts::TAU));
        let moved: Vec<_> = pts.iter().map(|x| rot * x).collect();
        let l = p.objective_value(&moved).unwrap();
        assert!((l - r.objective_value).abs() <= 1e-6, "{l} vs {}", r.objective_value);
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn sweep_singleton_matches_synthesize() {
    let p = SynthProblem::new(sphere(), harmonic_field());
    let opts = SweepOptions { max_iters: 5, mc_samples: 2000 };
    let s = sweep(&p, 1, 21, &opts).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].seed, 21);
    assert_eq!(s[0].result.as_ref().unwrap(), &synthesize(&p, 21, 5).unwrap());
    assert!(s[0].mc.is_some() && s[0].metrics.is_some() && s[0].l_fc.is_some());
}

#[test]
fn sweeps_are_deterministic() {
    let p = SynthProblem::new(sphere(), harmonic_field());
    let opts = SweepOptions { max_iters: 3, mc_samples: 0 };
    let a = sweep(&p, 4, 100, &opts).unwrap();
    assert_eq!(a, sweep(&p, 4, 100, &opts).unwrap());
    assert!(a.iter().all(|r| r.mc.is_none()));
    assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![100, 101, 102, 103]);
    assert!(sweep(&p, 0, 0, &opts).is_err());
    assert!(sweep(&p, 1, 0, &SweepOptions { max_iters: 3, mc_samples: 10 }).is_err());
}

#[test]
fn min_weight_objective_ascends() {
    let mut p = constant();
    p.objective = Objective::MinWeight;
    let r = synthesize(&p, 4, 30).unwrap();
    assert!(r.objective_value >= r.trace[0] - 1e-12);
    assert!(r.objective_value > 0.0 && r.objective_value <= 1.0 + 1e-12);
}

#[test]
fn unreachable_separation_is_flagged() {
    let mut p = constant();
    p.min_separation = 0.5;
    let r = synthesize(&p, 5, 3).unwrap();
    assert!(!r.feasible);
}

#[test]
fn invalid_problems_are_rejected() {
    let mut p = constant();
    p.n_f = 1;
    assert!(matches!(synthesize(&p, 0, 1), Err(SynthError::InvalidProblem(_))));
    let mut p = constant();
    p.min_separation = 0.0;
    assert!(synthesize(&p, 0, 1).is_err());
}

#[test]
fn problem_json_round_trips() {
    let p = SynthProblem::new(sphere(), harmonic_field());
    let s = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<SynthProblem>(&s).unwrap(), p);
}
