use anyhow::Result;
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use wrenchlab::hull::contains_origin;
use wrenchlab::metrics::{certify_ball, certify_containment, ferrari_canny, grasp_metrics, min_weight, min_weight_dual};
use wrenchlab::oracle::{ball_perturbation, cone_perturbation, mc_force_closure, random_force_closure_set, random_sphere_grasp, stream_rng};
use wrenchlab::{l_fc, FrictionModel, PongConfig, WrenchSet};

use crate::input::SCHEMA;

/// Sizes cycled through by the random-set suites.
pub const SET_SIZES: [usize; 4] = [8, 12, 16, 24];
pub const BOUND_TOL: f64 = 1e-9;
pub const DUALITY_TOL: f64 = 1e-8;
pub const PONG_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Cone perturbations inside `-conv(W̄)` keep force closure.
    Containment,
    /// Perturbations no longer than ε keep force closure.
    Ball,
    /// `2δℓ* <= ε`.
    Bound,
    /// Min-weight primal and dual values agree.
    Duality,
    /// `L_FC` stays below the Monte Carlo estimate.
    Pong,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub theorem: Theorem,
    pub trials: usize,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

fn rows(w: &WrenchSet) -> Value {
    json!(w.to_arrays())
}

/// `Ok(None)` on a pass, `Ok(Some(details))` on a failure.
fn trial(theorem: Theorem, seed: u64, t: u64) -> Result<Option<Value>> {
    let s = seed.wrapping_add(t);
    let n_w = SET_SIZES[(t % SET_SIZES.len() as u64) as usize];
    Ok(match theorem {
        Theorem::Containment => {
            let w_bar = random_force_closure_set(n_w, s)?;
            let w = cone_perturbation(&w_bar, &mut stream_rng(seed, t));
            let cert = certify_containment(&w_bar, &w)?;
            let closed = contains_origin(&w);
            (!(cert.certified && cert.closure_confirmed && closed))
                .then(|| json!({ "trial": t, "w_bar": rows(&w_bar), "w": rows(&w), "certified": cert.certified, "closure": closed }))
        }
        Theorem::Ball => {
            let w_bar = random_force_closure_set(n_w, s)?;
            let eps = ferrari_canny(&w_bar)?;
            let w = ball_perturbation(&w_bar, eps, &mut stream_rng(seed, t));
            let cert = certify_ball(&w_bar, &w)?;
            let closed = contains_origin(&w);
            (!(cert.certified && cert.closure_confirmed && closed))
                .then(|| json!({ "trial": t, "w_bar": rows(&w_bar), "w": rows(&w), "epsilon": eps, "certified": cert.certified, "closure": closed }))
        }
        Theorem::Bound => {
            let w = random_force_closure_set(n_w, s)?;
            let m = grasp_metrics(&w)?;
            let (l, eps, delta) = (m.l_star.unwrap_or(f64::NAN), m.epsilon.unwrap_or(f64::NAN), m.delta.unwrap_or(f64::NAN));
            (!(2.0 * delta * l <= eps + BOUND_TOL))
                .then(|| json!({ "trial": t, "w": rows(&w), "l_star": l, "epsilon": eps, "delta": delta }))
        }
        Theorem::Duality => {
            let w = random_force_closure_set(n_w, s)?;
            let primal = min_weight(&w)?.l_star;
            let dual = min_weight_dual(&w)?.phi_star;
            (!((primal - dual).abs() <= DUALITY_TOL)).then(|| json!({ "trial": t, "w": rows(&w), "l_star": primal, "phi_star": dual }))
        }
        Theorem::Pong => {
            let model = FrictionModel::new(0.5, 4)?;
            let g = random_sphere_grasp(3, 0.05, &model, (0.001, 0.05), s)?;
            let l = l_fc(&g, &model, &PongConfig::default())?.l_fc;
            let mc = mc_force_closure(&g, &model, PONG_MC_SAMPLES, s)?;
            (l > mc.p_hat + 3.0 * mc.std_err).then(|| json!({ "trial": t, "contacts": g, "l_fc": l, "mc": mc }))
        }
    })
}

pub fn run(theorem: Theorem, trials: usize, seed: u64) -> Result<Summary> {
    let outcomes: Vec<Result<Option<Value>>> = (0..trials as u64).into_par_iter().map(|t| trial(theorem, seed, t)).collect();
    let mut failed = 0;
    let mut counterexample = None;
    for o in outcomes {
        if let Some(details) = o? {
            failed += 1;
            counterexample.get_or_insert(details);
        }
    }
    Ok(Summary { schema: SCHEMA, theorem, trials, seed, passed: trials - failed, failed, counterexample })
}
