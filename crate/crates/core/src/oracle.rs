//! Monte Carlo oracles and seeded random instance generators.
//!
//! Every sampler is driven by `ChaCha8Rng` keyed by the caller's seed. Samples
//! are drawn in fixed-size chunks and chunk `k` uses stream `k`, so the result
//! does not depend on how rayon splits the work.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::contains_origin;
use crate::pong::{finger_sigma, Polygon2};
use crate::wrench::{wrench_maps, wrenches_from_maps, ContactSpec, FrictionModel, Wrench, WrenchError, WrenchSet};

/// Smallest sample count accepted by the force-closure estimator.
pub const MIN_SAMPLES: usize = 1000;
/// Rejection budget of [`random_force_closure_set`].
pub const MAX_REJECTIONS: usize = 10_000;
const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no force-closure sample after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Wrench(#[from] WrenchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub n_samples: usize,
    pub std_err: f64,
}

impl McEstimate {
    pub fn from_count(hits: usize, n_samples: usize) -> Self {
        let p_hat = if n_samples == 0 { 0.0 } else { hits as f64 / n_samples as f64 };
        let std_err = if n_samples == 0 { 0.0 } else { (p_hat * (1.0 - p_hat) / n_samples as f64).sqrt() };
        Self { p_hat, n_samples, std_err }
    }

    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn agrees(&self, value: f64, k: f64) -> bool {
        (value - self.p_hat).abs() <= k * self.std_err
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counts `hit` over `n` draws, chunk `k` drawing from stream `k`.
fn count_hits<F>(n: usize, seed: u64, hit: F) -> usize
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).filter(|_| hit(&mut rng)).count()
        })
        .sum()
}

fn normal2(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Fraction of sampled normal perturbations under which the grasp is force
/// closure. Each finger draws `z ~ N(0, diag(σ1², σ2²))` (variances floored as
/// in `pong`), uses `n = n̄ + t1 z1 + t2 z2`, and keeps the mean wrench maps.
pub fn mc_force_closure(
    contacts: &[ContactSpec],
    model: &FrictionModel,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, OracleError> {
    if n_samples < MIN_SAMPLES {
        return Err(OracleError::TooFewSamples(n_samples));
    }
    if contacts.is_empty() {
        return Err(WrenchError::NoContacts.into());
    }
    let maps = wrench_maps(contacts, model)?;
    let sigmas: Vec<[f64; 2]> = contacts.iter().map(finger_sigma).collect();
    let hits = count_hits(n_samples, seed, |rng| {
        let normals: Vec<Vector3<f64>> = contacts
            .iter()
            .zip(&sigmas)
            .map(|(c, s)| {
                let z = normal2(rng);
                c.perturbed_normal([s[0] * z[0], s[1] * z[1]])
            })
            .collect();
        contains_origin(&wrenches_from_maps(&maps, contacts, model.n_sides, Some(&normals)))
    });
    Ok(McEstimate::from_count(hits, n_samples))
}

/// Monte Carlo estimate of `P[y ∈ poly]` for `y ~ N(mu, diag(sigma²))`.
pub fn mc_gauss_polygon(
    poly: &Polygon2,
    mu: [f64; 2],
    sigma: [f64; 2],
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, OracleError> {
    if !(sigma[0] >= 0.0 && sigma[1] >= 0.0) {
        return Err(OracleError::InvalidArgument("standard deviations must be non-negative".into()));
    }
    if poly.len() < 3 {
        return Ok(McEstimate::from_count(0, n_samples));
    }
    let hits = count_hits(n_samples, seed, |rng| {
        let z = normal2(rng);
        poly.contains([mu[0] + sigma[0] * z[0], mu[1] + sigma[1] * z[1]], 0.0)
    });
    Ok(McEstimate::from_count(hits, n_samples))
}

/// Seeded force-closure set of `n_w` standard normal points in R^6, together
/// with the number of clouds drawn to find it.
pub fn sample_force_closure_set(n_w: usize, seed: u64) -> Result<(WrenchSet, usize), OracleError> {
    if n_w < 7 {
        return Err(OracleError::InvalidArgument(format!("need at least 7 wrenches, got {n_w}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=MAX_REJECTIONS {
        let rows: Vec<[f64; 6]> = (0..n_w).map(|_| std::array::from_fn(|_| rng.sample(StandardNormal))).collect();
        let w = WrenchSet::from_arrays(&rows);
        if contains_origin(&w) {
            return Ok((w, attempt));
        }
    }
    Err(OracleError::Exhausted(MAX_REJECTIONS))
}

pub fn random_force_closure_set(n_w: usize, seed: u64) -> Result<WrenchSet, OracleError> {
    sample_force_closure_set(n_w, seed).map(|(w, _)| w)
}

/// Flat Dirichlet weights on the simplex.
pub fn random_convex_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Perturbs every wrench by a point of `-conv(W̄)` drawn with flat Dirichlet weights.
pub fn cone_perturbation<R: Rng>(w_bar: &WrenchSet, rng: &mut R) -> WrenchSet {
    let pts = w_bar.to_arrays();
    let rows: Vec<[f64; 6]> = pts
        .iter()
        .map(|w| {
            let alpha = random_convex_weights(rng, pts.len());
            std::array::from_fn(|k| w[k] - pts.iter().zip(&alpha).map(|(p, a)| a * p[k]).sum::<f64>())
        })
        .collect();
    WrenchSet::with_layout(rows.iter().map(|r| Wrench::from_array(*r)).collect(), w_bar.n_sides())
}

/// Perturbs every wrench by a uniform point of the closed ball of radius `r`.
pub fn ball_perturbation<R: Rng>(w_bar: &WrenchSet, r: f64, rng: &mut R) -> WrenchSet {
    w_bar.map(|w| {
        let d: [f64; 6] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let len = r * rng.random::<f64>().powf(1.0 / 6.0) / norm;
        let v = w.to_array();
        Wrench::from_array(std::array::from_fn(|k| v[k] + len * d[k]))
    })
}

/// Uniform point on the sphere of radius `r`.
pub fn random_sphere_point<R: Rng>(rng: &mut R, r: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if let Some(u) = v.try_normalize(1e-12) {
            return u * r;
        }
    }
}

/// Seeded `n_f`-finger grasp on a sphere of radius `r` with inward normals,
/// resampled until the mean grasp is force closure. Tangent variances are
/// drawn uniformly from `var_range`.
pub fn random_sphere_grasp(
    n_f: usize,
    r: f64,
    model: &FrictionModel,
    var_range: (f64, f64),
    seed: u64,
) -> Result<Vec<ContactSpec>, OracleError> {
    if n_f < 2 || !(r > 0.0) || !(0.0 <= var_range.0 && var_range.0 <= var_range.1) {
        return Err(OracleError::InvalidArgument("need n_f >= 2, r > 0 and 0 <= var_lo <= var_hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let mut contacts = Vec::with_capacity(n_f);
        for _ in 0..n_f {
            let x = random_sphere_point(&mut rng, r);
            let s1 = rng.random_range(var_range.0..=var_range.1);
            let s2 = rng.random_range(var_range.0..=var_range.1);
            contacts.push(ContactSpec::new(x, -x, s1, s2)?);
        }
        let w = crate::wrench::basis_wrenches(&contacts, model, None)?;
        if contains_origin(&w) {
            return Ok(contacts);
        }
    }
    Err(OracleError::Exhausted(MAX_REJECTIONS))
}
