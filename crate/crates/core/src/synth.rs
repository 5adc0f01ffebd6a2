//! Contact-point grasp synthesis on implicit surfaces.
//!
//! Contacts are the decision variables. Each iteration takes a central
//! difference gradient in the tangent plane of every contact, steps along it
//! with Armijo backtracking and projects the result back onto the surface. A
//! quadratic hinge penalises contact pairs closer than the separation floor.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::contains_origin;
use crate::metrics::{grasp_metrics, min_weight, GraspMetrics, MetricsError};
use crate::oracle::{mc_force_closure, McEstimate, OracleError};
use crate::pong::{l_fc, PongConfig, PongError};
use crate::surfaces::{contact_at, Surface, SurfaceError, UncertaintyField};
use crate::wrench::{basis_wrenches, tangent_basis, ContactSpec, FrictionModel, WrenchError};

pub const ARMIJO_C: f64 = 1e-4;
pub const SHRINK: f64 = 0.5;
/// Largest per-contact displacement of the first trial step, in metres.
pub const INITIAL_STEP: f64 = 1e-2;
pub const PENALTY_WEIGHT: f64 = 1e3;
pub const MAX_RESAMPLES: usize = 50;
pub const STEP_TOL: f64 = 1e-6;
pub const GAIN_TOL: f64 = 1e-8;
/// Central-difference step along the tangent plane, in metres.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no evaluable initial sample after {0} draws")]
    NoFeasibleSample(usize),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Wrench(#[from] WrenchError),
    #[error(transparent)]
    Pong(#[from] PongError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Lfc,
    /// The normalized min-weight metric `n_w ℓ*`.
    MinWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProblem {
    pub surface: Surface,
    pub field: UncertaintyField,
    pub n_f: usize,
    #[serde(default)]
    pub objective: Objective,
    /// Minimum pairwise contact distance in metres.
    pub min_separation: f64,
    /// Floor on `n_w ℓ*`; zero disables it.
    #[serde(default)]
    pub k_l: f64,
    pub friction: FrictionModel,
    #[serde(default)]
    pub pong: PongConfig,
}

impl SynthProblem {
    /// Three fingers on `surface` with `mu = 0.5`, four pyramid sides and a
    /// separation floor of 0.01 m.
    pub fn new(surface: Surface, field: UncertaintyField) -> Self {
        Self {
            surface,
            field,
            n_f: 3,
            objective: Objective::Lfc,
            min_separation: 0.01,
            k_l: 0.0,
            friction: FrictionModel { mu: 0.5, n_sides: 4 },
            pong: PongConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.surface.validate()?;
        self.field.validate()?;
        self.friction.validate()?;
        self.pong.validate()?;
        if self.n_f < 2 {
            return Err(SynthError::InvalidProblem("need at least two fingers".into()));
        }
        if !(self.min_separation > 0.0) {
            return Err(SynthError::InvalidProblem("separation must be positive".into()));
        }
        if !(self.k_l >= 0.0) {
            return Err(SynthError::InvalidProblem("k_l must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contacts(&self, points: &[Vector3<f64>]) -> Result<Vec<ContactSpec>, SynthError> {
        points.iter().map(|x| Ok(contact_at(&self.surface, &self.field, x)?)).collect()
    }

    /// Raw objective at `points` (no penalty).
    pub fn objective_value(&self, points: &[Vector3<f64>]) -> Result<f64, SynthError> {
        let contacts = self.contacts(points)?;
        match self.objective {
            Objective::Lfc => Ok(l_fc(&contacts, &self.friction, &self.pong)?.l_fc),
            Objective::MinWeight => normalized_l_star(&contacts, &self.friction),
        }
    }

    /// Separation hinge plus the `k_l` hinge, both quadratic.
    pub fn penalty(&self, points: &[Vector3<f64>]) -> Result<f64, SynthError> {
        let mut p = 0.0;
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                let short = self.min_separation - (points[a] - points[b]).norm();
                if short > 0.0 {
                    p += short * short;
                }
            }
        }
        if self.k_l > 0.0 {
            let l = normalized_l_star(&self.contacts(points)?, &self.friction).unwrap_or(-1.0);
            let short = self.k_l - l;
            if short > 0.0 {
                p += short * short;
            }
        }
        Ok(PENALTY_WEIGHT * p)
    }

    /// Objective minus penalty; the quantity the ascent increases.
    pub fn merit(&self, points: &[Vector3<f64>]) -> Result<f64, SynthError> {
        Ok(self.objective_value(points)? - self.penalty(points)?)
    }

    /// Whether the separation and `k_l` floors hold.
    pub fn constraints_hold(&self, points: &[Vector3<f64>]) -> bool {
        let sep = (0..points.len())
            .all(|a| (a + 1..points.len()).all(|b| (points[a] - points[b]).norm() >= self.min_separation));
        let floor = self.k_l <= 0.0
            || self.contacts(points).ok().and_then(|c| normalized_l_star(&c, &self.friction).ok()).is_some_and(|l| l >= self.k_l);
        sep && floor
    }
}

fn normalized_l_star(contacts: &[ContactSpec], model: &FrictionModel) -> Result<f64, SynthError> {
    let w = basis_wrenches(contacts, model, None)?;
    Ok(min_weight(&w)?.l_star * w.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResult {
    pub contacts: Vec<[f64; 3]>,
    /// Raw objective at `contacts`.
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Separation and quality floors hold at `contacts`.
    pub feasible: bool,
    /// Merit (objective minus penalty) at the start and after every accepted step.
    pub trace: Vec<f64>,
}

impl SynthResult {
    pub fn points(&self) -> Vec<Vector3<f64>> {
        self.contacts.iter().map(|p| Vector3::from(*p)).collect()
    }
}

fn initial_sample(problem: &SynthProblem, rng: &mut ChaCha8Rng) -> Result<(Vec<Vector3<f64>>, f64), SynthError> {
    for _ in 0..MAX_RESAMPLES {
        let pts: Result<Vec<_>, _> = (0..problem.n_f).map(|_| problem.surface.sample(rng)).collect();
        let pts = pts?;
        // a zero L_FC has zero gradient, so it is not a usable start
        match problem.merit(&pts) {
            Ok(m) if m.is_finite() && (problem.objective != Objective::Lfc || problem.objective_value(&pts)? > 0.0) => {
                return Ok((pts, m));
            }
            _ => continue,
        }
    }
    Err(SynthError::NoFeasibleSample(MAX_RESAMPLES))
}

/// Tangent-plane gradient of the merit at each contact, as a 3-vector.
fn merit_gradient(problem: &SynthProblem, pts: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>, SynthError> {
    let mut grad = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let n = problem.surface.outward_normal(&pts[i])?;
        let (t1, t2) = tangent_basis(&n)?;
        let mut g = Vector3::zeros();
        for t in [t1, t2] {
            let eval = |s: f64| -> Result<f64, SynthError> {
                let mut q = pts.to_vec();
                q[i] = problem.surface.project(&(pts[i] + t * s))?;
                problem.merit(&q)
            };
            g += t * ((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP));
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Projected gradient ascent on the merit from a seeded random start.
pub fn synthesize(problem: &SynthProblem, seed: u64, max_iters: usize) -> Result<SynthResult, SynthError> {
    problem.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pts, mut merit) = initial_sample(problem, &mut rng)?;
    let mut trace = vec![merit];
    let mut converged = false;
    let mut iterations = 0;
    let mut max_step = INITIAL_STEP;
    while iterations < max_iters {
        iterations += 1;
        let g = merit_gradient(problem, &pts)?;
        let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(gmax > 0.0) {
            converged = true;
            break;
        }
        let mut t = max_step / gmax;
        let accepted = loop {
            if t * gmax < STEP_TOL {
                break None;
            }
            let trial: Result<Vec<_>, _> = pts.iter().zip(&g).map(|(p, d)| problem.surface.project(&(p + d * t))).collect();
            if let Ok(trial) = trial {
                if let Ok(m) = problem.merit(&trial) {
                    let ascent: f64 = trial.iter().zip(&pts).zip(&g).map(|((q, p), d)| d.dot(&(q - p))).sum();
                    if m >= merit + ARMIJO_C * ascent.max(0.0) && m >= merit - 1e-12 {
                        break Some((trial, m, t));
                    }
                }
            }
            t *= SHRINK;
        };
        let Some((trial, m, t_ok)) = accepted else {
            converged = true;
            break;
        };
        let step = trial.iter().zip(&pts).map(|(q, p)| (q - p).norm_squared()).sum::<f64>().sqrt();
        let gain = m - merit;
        pts = trial;
        merit = m;
        trace.push(m);
        // the next search starts a little beyond the last accepted step
        max_step = (4.0 * t_ok * gmax).min(INITIAL_STEP);
        if step < STEP_TOL || gain < GAIN_TOL {
            converged = true;
            break;
        }
    }
    Ok(SynthResult {
        objective_value: problem.objective_value(&pts)?,
        feasible: problem.constraints_hold(&pts),
        contacts: pts.iter().map(|p| [p.x, p.y, p.z]).collect(),
        iterations,
        converged,
        trace,
    })
}

/// Per-grasp record of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub result: Result<SynthResult, String>,
    pub metrics: Option<GraspMetrics>,
    pub l_fc: Option<f64>,
    pub mc: Option<McEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub max_iters: usize,
    /// Monte Carlo samples per grasp; zero skips the estimate.
    pub mc_samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { max_iters: 200, mc_samples: 10_000 }
    }
}

/// Grasp `k` uses seed `seed + k`; failures are recorded and the sweep goes on.
pub fn sweep(problem: &SynthProblem, n_grasps: usize, seed: u64, opts: &SweepOptions) -> Result<Vec<SweepRecord>, SynthError> {
    problem.validate()?;
    if n_grasps == 0 {
        return Err(SynthError::InvalidProblem("n_grasps must be at least 1".into()));
    }
    if opts.mc_samples > 0 && opts.mc_samples < crate::oracle::MIN_SAMPLES {
        return Err(OracleError::TooFewSamples(opts.mc_samples).into());
    }
    Ok((0..n_grasps as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k);
            match synthesize(problem, s, opts.max_iters).and_then(|r| evaluate(problem, r, s, opts)) {
                Ok(rec) => rec,
                Err(e) => SweepRecord { seed: s, result: Err(e.to_string()), metrics: None, l_fc: None, mc: None },
            }
        })
        .collect())
}

fn evaluate(problem: &SynthProblem, r: SynthResult, seed: u64, opts: &SweepOptions) -> Result<SweepRecord, SynthError> {
    let contacts = problem.contacts(&r.points())?;
    let w = basis_wrenches(&contacts, &problem.friction, None)?;
    let metrics = grasp_metrics(&w)?;
    debug_assert_eq!(metrics.force_closure, contains_origin(&w));
    let l = l_fc(&contacts, &problem.friction, &problem.pong)?.l_fc;
    let mc = if opts.mc_samples > 0 {
        Some(mc_force_closure(&contacts, &problem.friction, opts.mc_samples, seed)?)
    } else {
        None
    };
    Ok(SweepRecord { seed, result: Ok(r), metrics: Some(metrics), l_fc: Some(l), mc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::polar_field;

    fn problem() -> SynthProblem {
        SynthProblem::new(Surface::sphere(0.05), polar_field())
    }

    #[test]
    fn zero_iterations_returns_start() {
        let p = problem();
        let r = synthesize(&p, 4, 0).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trace.len(), 1);
        assert!(!r.converged);
        assert!((p.objective_value(&r.points()).unwrap() - r.objective_value).abs() < 1e-15);
    }

    #[test]
    fn ascent_is_monotone_and_on_surface() {
        let p = problem();
        let r = synthesize(&p, 11, 6).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        for x in r.points() {
            assert!(p.surface.value(&x).abs() <= 1e-6);
        }
        assert!((p.objective_value(&r.points()).unwrap() - r.objective_value).abs() <= 1e-9);
    }

    #[test]
    fn penalty_counts_close_pairs() {
        let p = problem();
        let a = Vector3::new(0.05, 0.0, 0.0);
        let b = Vector3::new(0.0, 0.05, 0.0);
        assert_eq!(p.penalty(&[a, b]).unwrap(), 0.0);
        let c = p.surface.project(&(a + Vector3::new(0.0, 0.005, 0.0))).unwrap();
        assert!(p.penalty(&[a, c]).unwrap() > 0.0);
        assert!(!p.constraints_hold(&[a, c]));
    }

    #[test]
    fn invalid_problem() {
        let mut p = problem();
        p.n_f = 1;
        assert!(synthesize(&p, 0, 1).is_err());
    }
}
