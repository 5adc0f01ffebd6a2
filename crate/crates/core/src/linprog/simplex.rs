use nalgebra::{DMatrix, DVector};

use super::{dot, LinearProgram, LpDual, LpError, LpSolution, LpStatus, SolverOptions};

const DEGEN_TOL: f64 = 1e-9;
const DRIVE_OUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = lo + x
    Shift { lo: f64, col: usize },
    /// z = hi - x
    Reflect { hi: f64, col: usize },
    /// z = x+ - x-
    Split { pos: usize, neg: usize },
}

impl VarMap {
    fn offset(&self) -> f64 {
        match *self {
            VarMap::Shift { lo, .. } => lo,
            VarMap::Reflect { hi, .. } => hi,
            VarMap::Split { .. } => 0.0,
        }
    }
}

/// `A x = b, x >= 0, b >= 0` equivalent of a [`LinearProgram`].
struct Standard {
    m: usize,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    row_sign: Vec<f64>,
    n_eq: usize,
    n_ub: usize,
    map: Vec<VarMap>,
    mirror: Vec<Option<usize>>,
}

impl Standard {
    fn build(lp: &LinearProgram) -> Self {
        let mut cols = 0;
        let mut map = Vec::with_capacity(lp.n_vars());
        let mut boxed = Vec::new();
        for (k, &(lo, hi)) in lp.bounds.iter().enumerate() {
            let m = if lo.is_finite() {
                if hi.is_finite() {
                    boxed.push((k, cols, hi - lo));
                }
                VarMap::Shift { lo, col: cols }
            } else if hi.is_finite() {
                VarMap::Reflect { hi, col: cols }
            } else {
                cols += 1;
                VarMap::Split { pos: cols - 1, neg: cols }
            };
            cols += 1;
            map.push(m);
        }
        let n_struct = cols;
        let n_eq = lp.a_eq.len();
        let n_ub = lp.a_ub.len();
        let n = n_struct + n_ub + boxed.len();
        let m = n_eq + n_ub + boxed.len();
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];

        let mut c = vec![0.0; n];
        let mut mirror = vec![None; n];
        for (vm, &ck) in map.iter().zip(&lp.c) {
            match *vm {
                VarMap::Shift { col, .. } => c[col] = ck,
                VarMap::Reflect { col, .. } => c[col] = -ck,
                VarMap::Split { pos, neg } => {
                    c[pos] = ck;
                    c[neg] = -ck;
                    mirror[pos] = Some(neg);
                    mirror[neg] = Some(pos);
                }
            }
        }

        let fill = |row: &mut [f64], coeffs: &[f64]| -> f64 {
            let mut shift = 0.0;
            for (vm, &v) in map.iter().zip(coeffs) {
                shift += v * vm.offset();
                match *vm {
                    VarMap::Shift { col, .. } => row[col] = v,
                    VarMap::Reflect { col, .. } => row[col] = -v,
                    VarMap::Split { pos, neg } => {
                        row[pos] = v;
                        row[neg] = -v;
                    }
                }
            }
            shift
        };
        for (i, (r, rhs)) in lp.a_eq.iter().zip(&lp.b_eq).enumerate() {
            let shift = fill(&mut a[i * n..(i + 1) * n], r);
            b[i] = rhs - shift;
        }
        for (i, (r, rhs)) in lp.a_ub.iter().zip(&lp.b_ub).enumerate() {
            let row = n_eq + i;
            let shift = fill(&mut a[row * n..(row + 1) * n], r);
            a[row * n + n_struct + i] = 1.0;
            b[row] = rhs - shift;
        }
        for (t, &(_, col, width)) in boxed.iter().enumerate() {
            let row = n_eq + n_ub + t;
            a[row * n + col] = 1.0;
            a[row * n + n_struct + n_ub + t] = 1.0;
            b[row] = width;
        }

        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                row_sign[i] = -1.0;
                b[i] = -b[i];
                a[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = -*v);
            }
        }
        Self { m, n, a, b, c, row_sign, n_eq, n_ub, map, mirror }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            DVector::from_fn(self.m, |i, _| self.a[i * self.n + j])
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = 1.0;
            e
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.c[j]
        } else {
            0.0
        }
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    scratch: Vec<f64>,
}

impl Tableau {
    fn new(sf: &Standard) -> Self {
        let (m, n) = (sf.m, sf.n);
        let width = n + m + 1;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            t[i * width..i * width + n].copy_from_slice(&sf.a[i * n..(i + 1) * n]);
            t[i * width + n + i] = 1.0;
            t[i * width + width - 1] = sf.b[i];
        }
        Self {
            m,
            width,
            t,
            obj: vec![0.0; width],
            basis: (n..n + m).collect(),
            iterations: 0,
            scratch: vec![0.0; width],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.t[r * w + j];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.t[r * w + j] = 1.0;
        self.scratch.copy_from_slice(&self.t[r * w..(r + 1) * w]);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (x, p) in row.iter_mut().zip(&self.scratch) {
                *x -= f * p;
            }
            row[j] = 0.0;
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (x, p) in self.obj.iter_mut().zip(&self.scratch) {
                *x -= f * p;
            }
            self.obj[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Primal simplex on the current objective row; only columns `< n_enter` may enter.
    /// With `bounded` set the objective is known to be bounded, so a column with
    /// no pivot row is rounding noise and is skipped until the next pivot.
    fn iterate(&mut self, n_enter: usize, opts: &SolverOptions, budget: usize, ctol: f64, bounded: bool) -> Result<Outcome, LpError> {
        let rhs = self.width - 1;
        let mut skip = vec![false; n_enter];
        loop {
            let bland = self.iterations >= budget;
            let mut enter = None;
            let mut best = -ctol;
            for j in 0..n_enter {
                if skip[j] {
                    continue;
                }
                let d = self.obj[j];
                if d < -ctol {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return Ok(Outcome::Optimal);
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, j);
                if a <= opts.tol_pivot {
                    continue;
                }
                let ratio = self.at(i, rhs).max(0.0) / a;
                let tie = 1e-12 * (1.0 + best_ratio.abs());
                let take = match leave {
                    None => true,
                    Some(l) => ratio < best_ratio - tie || (ratio <= best_ratio + tie && self.basis[i] < self.basis[l]),
                };
                if take {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let Some(r) = leave else {
                if bounded {
                    skip[j] = true;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            if self.iterations >= opts.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            self.pivot(r, j);
            self.iterations += 1;
            skip.iter_mut().for_each(|s| *s = false);
        }
    }
}

pub(super) fn solve(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    let sf = Standard::build(lp);
    let (m, n) = (sf.m, sf.n);
    let mut tab = Tableau::new(&sf);
    let rhs = tab.width - 1;
    let budget = opts.dantzig_budget.unwrap_or(20 * (m + n));
    let bscale = sf.b.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    let cscale = sf.c.iter().fold(1.0_f64, |s, v| s.max(v.abs()));

    // Phase I: maximize -sum(artificials).
    for j in 0..n {
        tab.obj[j] = -(0..m).map(|i| tab.at(i, j)).sum::<f64>();
    }
    tab.obj[rhs] = -sf.b.iter().sum::<f64>();
    tab.iterate(n, opts, budget, opts.tol_opt * bscale, true)?;
    let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= n).map(|i| tab.rhs(i).max(0.0)).sum();
    if infeas > opts.tol_feas * bscale {
        return Ok(LpSolution::non_optimal(LpStatus::Infeasible, tab.iterations));
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            let v = tab.at(r, j).abs();
            if v > DRIVE_OUT_TOL && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        match best {
            Some((j, _)) => tab.pivot(r, j),
            None => {
                let w = tab.width;
                tab.t[r * w..r * w + n].iter_mut().for_each(|v| *v = 0.0);
                tab.t[r * w + rhs] = 0.0;
            }
        }
    }

    // Phase II.
    for j in 0..tab.width {
        let cb: f64 = (0..m).map(|i| sf.cost(tab.basis[i]) * tab.at(i, j)).sum();
        tab.obj[j] = if j == rhs { cb } else { cb - sf.cost(j) };
    }
    if let Outcome::Unbounded = tab.iterate(n, opts, budget, opts.tol_opt * cscale, false)? {
        return Ok(LpSolution::non_optimal(LpStatus::Unbounded, tab.iterations));
    }

    // Re-factorize the optimal basis.
    let mut x_b: Vec<f64> = (0..m).map(|i| tab.rhs(i)).collect();
    let mut y = vec![0.0; m];
    if m > 0 {
        let bmat = DMatrix::from_fn(m, m, |i, k| {
            let j = tab.basis[k];
            if j < n {
                sf.a[i * n + j]
            } else if j - n == i {
                1.0
            } else {
                0.0
            }
        });
        let c_b = DVector::from_fn(m, |k, _| sf.cost(tab.basis[k]));
        let b = DVector::from_column_slice(&sf.b);
        if let Some(sol) = bmat.clone().lu().solve(&b) {
            if sol.iter().all(|v| v.is_finite()) {
                x_b = sol.iter().copied().collect();
            }
        }
        match bmat.transpose().lu().solve(&c_b) {
            Some(sol) if sol.iter().all(|v| v.is_finite()) => y = sol.iter().copied().collect(),
            _ => {
                // fall back to the tableau: y_i = obj[artificial i]
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = tab.obj[n + i];
                }
            }
        }
    }
    for v in &mut x_b {
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let mut x = vec![0.0; n];
    let mut is_basic = vec![false; n + m];
    for (k, &j) in tab.basis.iter().enumerate() {
        is_basic[j] = true;
        if j < n {
            x[j] = x_b[k];
        }
    }
    let primal_degenerate = x_b.iter().any(|&v| v < DEGEN_TOL);
    let dual_degenerate = (0..n).any(|j| {
        if is_basic[j] || sf.mirror[j].is_some_and(|p| is_basic[p]) {
            return false;
        }
        let col = sf.column(j);
        let d = sf.c[j] - col.iter().zip(&y).map(|(a, yi)| a * yi).sum::<f64>();
        d > -DEGEN_TOL
    });

    let z_star: Vec<f64> = sf
        .map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shift { lo, col } => lo + x[col],
            VarMap::Reflect { hi, col } => hi - x[col],
            VarMap::Split { pos, neg } => x[pos] - x[neg],
        })
        .collect();

    let eq: Vec<f64> = (0..sf.n_eq).map(|i| y[i] * sf.row_sign[i]).collect();
    let ub: Vec<f64> = (0..sf.n_ub).map(|i| y[sf.n_eq + i] * sf.row_sign[sf.n_eq + i]).collect();
    let reduced: Vec<f64> = (0..lp.n_vars())
        .map(|k| {
            let e: f64 = lp.a_eq.iter().zip(&eq).map(|(r, y)| r[k] * y).sum();
            let u: f64 = lp.a_ub.iter().zip(&ub).map(|(r, y)| r[k] * y).sum();
            lp.c[k] - e - u
        })
        .collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: dot(&lp.c, &z_star),
        z_star,
        dual: LpDual { eq, ub, reduced },
        basis: tab.basis,
        primal_degenerate,
        dual_degenerate,
        iterations: tab.iterations,
    })
}
