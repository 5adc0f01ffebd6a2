//! Dense linear programming for the small LPs that appear in grasp analysis.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    c'z
//! subject to  A_eq z  = b_eq
//!             A_ub z <= b_ub
//!             lo <= z <= hi        (either side may be infinite)
//! ```
//!
//! and solved with a two-phase tableau simplex (Dantzig pricing for a bounded
//! number of pivots, then Bland's rule). The final basis is re-factorized to
//! recover clean primal values and duals, which also feed [`sensitivity`].

mod simplex;
mod sensitivity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sensitivity::{sensitivity, LpPerturbation};

/// Primal feasibility tolerance.
pub const TOL_FEAS: f64 = 1e-9;
/// Duality-gap tolerance (relative to `max(1, |value|)`).
pub const TOL_GAP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("iteration limit ({0} pivots)")]
    IterationLimit(usize),
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("degenerate — gradient undefined")]
    Degenerate,
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(LpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// `maximize c'z` over `z >= 0` with no constraints yet.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn ub(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn bounds(mut self, var: usize, lo: f64, hi: f64) -> Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn free(self, var: usize) -> Self {
        self.bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.bounds.len() != n {
            return bad(format!("{} bounds for {} variables", self.bounds.len(), n));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return bad("row count does not match right-hand side".into());
        }
        if self.a_eq.iter().chain(self.a_ub.iter()).any(|r| r.len() != n) {
            return bad("constraint row length does not match variable count".into());
        }
        let finite = self
            .c
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_ub.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite coefficient".into());
        }
        for (k, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY || lo > hi {
                return bad(format!("invalid bounds for variable {k}: [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        dot(&self.c, z)
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let eq = self.a_eq.iter().zip(&self.b_eq).map(|(r, b)| (dot(r, z) - b).abs());
        let ub = self.a_ub.iter().zip(&self.b_ub).map(|(r, b)| (dot(r, z) - b).max(0.0));
        let bd = self.bounds.iter().zip(z).map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        eq.chain(ub).chain(bd).fold(0.0, f64::max)
    }
}

/// Multipliers of an optimal solution.
///
/// Signs follow the maximization convention: `eq[i] = dV/db_eq[i]`,
/// `ub[i] = dV/db_ub[i] >= 0`; `reduced = c - A_eq'eq - A_ub'ub` holds the
/// (net) bound multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LpDual {
    pub eq: Vec<f64>,
    pub ub: Vec<f64>,
    pub reduced: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z_star: Vec<f64>,
    pub value: f64,
    pub dual: LpDual,
    /// Basic columns of the internal standard form.
    pub basis: Vec<usize>,
    /// Some basic variable sits at (numerically) zero.
    pub primal_degenerate: bool,
    /// Some nonbasic reduced cost is (numerically) zero, so the optimum may not be unique.
    pub dual_degenerate: bool,
    pub iterations: usize,
}

impl LpSolution {
    fn non_optimal(status: LpStatus, iterations: usize) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            z_star: Vec::new(),
            value,
            dual: LpDual::default(),
            basis: Vec::new(),
            primal_degenerate: false,
            dual_degenerate: false,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn is_degenerate(&self) -> bool {
        self.primal_degenerate || self.dual_degenerate
    }

    /// Objective of the dual program evaluated at the stored multipliers.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let scale = lp.c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut obj = dot(&lp.b_eq, &self.dual.eq) + dot(&lp.b_ub, &self.dual.ub);
        for (r, &(lo, hi)) in self.dual.reduced.iter().zip(&lp.bounds) {
            if r.abs() <= 1e-12 * scale {
                continue;
            }
            if *r > 0.0 && hi.is_finite() {
                obj += r * hi;
            } else if *r < 0.0 && lo.is_finite() {
                obj += r * lo;
            }
        }
        obj
    }

    /// Largest complementary-slackness residual over inequality rows and bounds.
    pub fn complementarity(&self, lp: &LinearProgram) -> f64 {
        let rows = lp
            .a_ub
            .iter()
            .zip(&lp.b_ub)
            .zip(&self.dual.ub)
            .map(|((r, b), y)| (y * (b - dot(r, &self.z_star))).abs());
        let bounds = self.dual.reduced.iter().zip(&lp.bounds).zip(&self.z_star).map(|((r, &(lo, hi)), z)| {
            if *r > 0.0 && hi.is_finite() {
                (r * (hi - z)).abs()
            } else if *r < 0.0 && lo.is_finite() {
                (r * (z - lo)).abs()
            } else if lo.is_infinite() && hi.is_infinite() {
                r.abs()
            } else {
                0.0
            }
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_feas: f64,
    /// Reduced-cost threshold for optimality.
    pub tol_opt: f64,
    /// Smallest accepted pivot magnitude.
    pub tol_pivot: f64,
    /// Dantzig pivots allowed before switching to Bland's rule (None: 20·(m+n)).
    pub dantzig_budget: Option<usize>,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: TOL_FEAS,
            tol_opt: 1e-11,
            tol_pivot: 1e-9,
            dantzig_budget: None,
            max_iterations: 50_000,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    simplex::solve(lp, opts)
}

/// Solves independent LPs, possibly in parallel. Output order matches input order
/// and each element is exactly what [`solve`] returns for it.
pub fn solve_batch(lps: &[LinearProgram]) -> Vec<Result<LpSolution, LpError>> {
    lps.par_iter().map(solve).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
