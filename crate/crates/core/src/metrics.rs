//! Grasp quality metrics on a wrench set and the perturbation certificates
//! built on them.
//!
//! * `ℓ*` (min-weight): the largest `ℓ` such that the origin is a convex
//!   combination of the wrenches with every weight at least `ℓ`.
//! * `ε` (Ferrari-Canny): radius of the largest origin-centred ball in the hull.
//! * `δ` (Chebyshev): radius of the largest ball anywhere in the hull.
//!
//! For every force-closure set `0 <= 2δℓ* <= ε <= δ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hull::{self, Facet, Hull, HullError};
use crate::linprog::{self, LinearProgram, LpError, LpStatus};
use crate::wrench::WrenchSet;

/// Tolerance on `ℓ*` and on the ordering checks.
pub const METRIC_TOL: f64 = 1e-9;
/// Certificates whose slack is below this are flagged as marginal.
pub const MARGINAL_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty wrench set")]
    Empty,
    #[error("not force closure")]
    NotForceClosure,
    #[error("no inscribed ball")]
    NoInscribedBall,
    #[error("wrench sets differ in size ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinWeight {
    pub l_star: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinWeightDual {
    pub phi_star: f64,
    pub nu: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspMetrics {
    pub force_closure: bool,
    pub n_w: usize,
    /// `None` when the min-weight program is infeasible.
    pub l_star: Option<f64>,
    /// `n_w · ℓ*`, which lies in `[0, 1]` for force-closure sets.
    pub l_star_normalized: Option<f64>,
    /// `ℓ* / n_w`, the literal alternative normalization.
    pub l_star_per_wrench: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// `2δℓ* <= ε` (only evaluated for force-closure sets).
    pub bound_holds: Option<bool>,
    /// Facet enumeration used jittered input.
    pub hull_perturbed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    TheoremContainment,
    CorollaryBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCertificate {
    pub kind: CertificateKind,
    pub per_wrench_ok: Vec<bool>,
    pub certified: bool,
    /// Independent membership check on the perturbed set.
    pub closure_confirmed: bool,
    /// Some per-wrench slack is below [`MARGINAL_SLACK`].
    pub marginal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn non_empty(w: &WrenchSet) -> Result<(), MetricsError> {
    if w.is_empty() {
        Err(MetricsError::Empty)
    } else {
        Ok(())
    }
}

/// max ℓ  s.t.  Wα = p, 1'α = 1, α >= ℓ·1, written with α = β + ℓ·1, β >= 0.
fn weight_lp(points: &[[f64; 6]], p: &[f64; 6]) -> LinearProgram {
    let n = points.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut lp = LinearProgram::new(c).free(n);
    for k in 0..6 {
        let mut row: Vec<f64> = points.iter().map(|w| w[k]).collect();
        row.push(row.iter().sum());
        lp = lp.eq(row, p[k]);
    }
    let mut row = vec![1.0; n];
    row.push(n as f64);
    lp.eq(row, 1.0)
}

/// Largest uniform lower bound on convex weights representing `p`
/// (`None` if `p` is outside the affine hull).
fn weight_slack(points: &[[f64; 6]], p: &[f64; 6]) -> Result<Option<f64>, LpError> {
    let sol = linprog::solve(&weight_lp(points, p))?;
    Ok(match sol.status {
        LpStatus::Optimal => Some(sol.value),
        _ => None,
    })
}

pub fn min_weight(w: &WrenchSet) -> Result<MinWeight, MetricsError> {
    non_empty(w)?;
    let pts = w.to_arrays();
    let n = pts.len();
    let sol = linprog::solve(&weight_lp(&pts, &[0.0; 6]))?;
    match sol.status {
        LpStatus::Optimal => {
            let l = sol.z_star[n];
            Ok(MinWeight { l_star: l, alpha: sol.z_star[..n].iter().map(|b| b + l).collect() })
        }
        LpStatus::Infeasible => Err(MetricsError::NotForceClosure),
        s => Err(LpError::NotOptimal(s).into()),
    }
}

/// min φ  s.t.  ν'w_l + φ >= 0 for all l,  Σ_l (ν'w_l + φ) = 1.
pub fn min_weight_dual(w: &WrenchSet) -> Result<MinWeightDual, MetricsError> {
    non_empty(w)?;
    let pts = w.to_arrays();
    let n = pts.len();
    let mut c = vec![0.0; 7];
    c[6] = -1.0;
    let mut lp = LinearProgram::new(c);
    for k in 0..7 {
        lp = lp.free(k);
    }
    for p in &pts {
        let mut row: Vec<f64> = p.iter().map(|v| -v).collect();
        row.push(-1.0);
        lp = lp.ub(row, 0.0);
    }
    let mut row: Vec<f64> = (0..6).map(|k| pts.iter().map(|p| p[k]).sum()).collect();
    row.push(n as f64);
    lp = lp.eq(row, 1.0);
    let sol = linprog::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let mut nu = [0.0; 6];
            nu.copy_from_slice(&sol.z_star[..6]);
            Ok(MinWeightDual { phi_star: sol.z_star[6], nu })
        }
        // the dual is unbounded exactly when the primal is infeasible
        LpStatus::Unbounded | LpStatus::Infeasible => Err(MetricsError::NotForceClosure),
    }
}

fn hull_of(w: &WrenchSet) -> Result<Hull, MetricsError> {
    Ok(Hull::new(&w.to_points())?)
}

fn require_closure(w: &WrenchSet) -> Result<(), MetricsError> {
    if hull::contains_origin(w) {
        Ok(())
    } else {
        Err(MetricsError::NoInscribedBall)
    }
}

/// Facet closest to the origin, for a force-closure set.
fn nearest_facet(h: &Hull) -> Result<Facet, MetricsError> {
    let f = h.min_offset().ok_or(MetricsError::NoInscribedBall)?;
    Ok(Facet { b: f.b.max(0.0), ..f.clone() })
}

pub fn ferrari_canny(w: &WrenchSet) -> Result<f64, MetricsError> {
    non_empty(w)?;
    require_closure(w)?;
    Ok(nearest_facet(&hull_of(w)?)?.b)
}

/// Optimal `(a, b)` of `max b s.t. a'w_l + b >= 0, ‖a‖ = 1`, read off the
/// facet nearest the origin.
pub fn lemma_pair(w: &WrenchSet) -> Result<([f64; 6], f64), MetricsError> {
    non_empty(w)?;
    require_closure(w)?;
    let f = nearest_facet(&hull_of(w)?)?;
    let mut a = [0.0; 6];
    for (dst, src) in a.iter_mut().zip(&f.a) {
        *dst = -src;
    }
    Ok((a, f.b))
}

pub fn chebyshev_radius(w: &WrenchSet) -> Result<f64, MetricsError> {
    non_empty(w)?;
    Ok(hull_of(w)?.chebyshev()?.0)
}

pub fn grasp_metrics(w: &WrenchSet) -> Result<GraspMetrics, MetricsError> {
    non_empty(w)?;
    let n_w = w.len();
    let force_closure = hull::contains_origin(w);
    let l_star = match min_weight(w) {
        Ok(mw) => Some(mw.l_star),
        Err(MetricsError::NotForceClosure) => None,
        Err(e) => return Err(e),
    };
    let mut out = GraspMetrics {
        force_closure,
        n_w,
        l_star,
        l_star_normalized: l_star.map(|l| l * n_w as f64),
        l_star_per_wrench: l_star.map(|l| l / n_w as f64),
        epsilon: None,
        delta: None,
        bound_holds: None,
        hull_perturbed: false,
    };
    if !force_closure {
        return Ok(out);
    }
    let h = hull_of(w)?;
    let eps = nearest_facet(&h)?.b;
    let (delta, _) = h.chebyshev()?;
    out.epsilon = Some(eps);
    out.delta = Some(delta);
    out.hull_perturbed = h.perturbed;
    out.bound_holds = l_star.map(|l| 2.0 * delta * l <= eps + METRIC_TOL);
    Ok(out)
}

/// `(2δℓ*, ε, 2δℓ* <= ε + tol)` for a force-closure set.
pub fn bound_check(w: &WrenchSet) -> Result<BoundCheck, MetricsError> {
    non_empty(w)?;
    require_closure(w)?;
    let h = hull_of(w)?;
    let eps = nearest_facet(&h)?.b;
    let l = min_weight(w)?.l_star;
    let (delta, _) = h.chebyshev()?;
    let lhs = 2.0 * delta * l;
    Ok(BoundCheck { lhs, rhs: eps, holds: lhs <= eps + METRIC_TOL })
}

fn aligned(w_bar: &WrenchSet, w: &WrenchSet) -> Result<(), MetricsError> {
    non_empty(w_bar)?;
    if w_bar.len() != w.len() {
        return Err(MetricsError::LengthMismatch(w_bar.len(), w.len()));
    }
    Ok(())
}

/// Certificate that every `w_l - w̄_l` lies in `-conv(W̄)`, which implies
/// force closure of `W`.
pub fn certify_containment(w_bar: &WrenchSet, w: &WrenchSet) -> Result<ToleranceCertificate, MetricsError> {
    aligned(w_bar, w)?;
    let base = w_bar.to_arrays();
    let mut per_wrench_ok = Vec::with_capacity(w.len());
    let mut marginal = false;
    for (wb, wl) in base.iter().zip(w.to_arrays()) {
        // w_l - w̄_l ∈ -C  ⇔  w̄_l - w_l ∈ C
        let mut q = [0.0; 6];
        for k in 0..6 {
            q[k] = wb[k] - wl[k];
        }
        let slack = weight_slack(&base, &q)?;
        let ok = slack.is_some_and(|s| s >= -METRIC_TOL);
        marginal |= ok && slack.is_some_and(|s| s < MARGINAL_SLACK);
        per_wrench_ok.push(ok);
    }
    let certified = per_wrench_ok.iter().all(|&b| b);
    Ok(ToleranceCertificate {
        kind: CertificateKind::TheoremContainment,
        certified,
        closure_confirmed: hull::contains_origin(w),
        per_wrench_ok,
        marginal,
    })
}

/// Certificate that every `w_l` is within `ε(W̄)` of `w̄_l`.
pub fn certify_ball(w_bar: &WrenchSet, w: &WrenchSet) -> Result<ToleranceCertificate, MetricsError> {
    aligned(w_bar, w)?;
    let eps = ferrari_canny(w_bar).map_err(|e| match e {
        MetricsError::NoInscribedBall => MetricsError::NotForceClosure,
        e => e,
    })?;
    let tol = 1e-12 * eps.max(1.0);
    let mut marginal = false;
    let per_wrench_ok: Vec<bool> = w_bar
        .wrenches()
        .iter()
        .zip(w.wrenches())
        .map(|(wb, wl)| {
            let dist = (wl.to_vector() - wb.to_vector()).norm();
            let ok = dist <= eps + tol;
            marginal |= ok && eps - dist < MARGINAL_SLACK;
            ok
        })
        .collect();
    let certified = per_wrench_ok.iter().all(|&b| b);
    Ok(ToleranceCertificate {
        kind: CertificateKind::CorollaryBall,
        certified,
        closure_confirmed: hull::contains_origin(w),
        per_wrench_ok,
        marginal,
    })
}
