//! Convex hulls of point sets in R^d (used with d = 6 for wrench spaces).
//!
//! Facets come from an incremental (beneath-beyond) construction with
//! simplicial faces. Near-degenerate inputs are retried on a jittered copy and
//! the result is marked `perturbed`; facet offsets are then re-fitted against
//! the original points so containment holds for the unperturbed input.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linprog::{self, LinearProgram, LpError, LpStatus};
use crate::wrench::WrenchSet;

/// Containment tolerance for facet checks.
pub const HULL_TOL: f64 = 1e-9;
const COND_TOL: f64 = 1e-10;
const JITTER: f64 = 1e-9;
const JITTER_SEED: u64 = 0x6a17_7e2d;
const JITTER_ATTEMPTS: u64 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("degenerate hull")]
    Degenerate,
    #[error("empty point set")]
    Empty,
    #[error("points have inconsistent dimension")]
    DimensionMismatch,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("hull construction failed numerically")]
    Numerical,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    /// Outward unit normal.
    pub a: Vec<f64>,
    /// Offset: the hull lies in `a'x <= b`.
    pub b: f64,
    /// Indices of input points on the facet hyperplane.
    pub vertices: Vec<usize>,
}

impl Facet {
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        dot(&self.a, p) - self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hull {
    pub dim: usize,
    pub facets: Vec<Facet>,
    /// The construction ran on a jittered copy of the input.
    pub perturbed: bool,
}

impl Hull {
    pub fn new(points: &[Vec<f64>]) -> Result<Self, HullError> {
        let dim = check_points(points)?;
        let scale = coord_scale(points);
        if scale == 0.0 {
            return Err(HullError::Degenerate);
        }
        initial_simplex(points, dim, scale)?;
        if let Ok(facets) = build(points, dim, scale) {
            if validate(&facets, points) {
                return Ok(Self { dim, facets: merge(facets, points), perturbed: false });
            }
        }
        for attempt in 0..JITTER_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(JITTER_SEED + attempt);
            let jittered: Vec<Vec<f64>> = points
                .iter()
                .map(|p| p.iter().map(|v| v + JITTER * scale * rng.random_range(-1.0..1.0)).collect())
                .collect();
            match build(&jittered, dim, scale) {
                Ok(facets) => {
                    let facets = refit(facets, points, dim);
                    if validate(&facets, points) {
                        return Ok(Self { dim, facets: merge(facets, points), perturbed: true });
                    }
                }
                Err(HullError::Degenerate) => return Err(HullError::Degenerate),
                Err(_) => {}
            }
        }
        Err(HullError::Numerical)
    }

    /// Whether `p` satisfies every facet inequality within `tol`.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.facets.iter().all(|f| f.signed_distance(p) <= tol)
    }

    /// Smallest facet offset, i.e. the distance from the origin to the boundary
    /// when the origin is inside (negative otherwise).
    pub fn min_offset(&self) -> Option<&Facet> {
        self.facets.iter().min_by(|x, y| x.b.total_cmp(&y.b))
    }

    /// Largest inscribed ball: `(radius, center)`.
    pub fn chebyshev(&self) -> Result<(f64, Vec<f64>), HullError> {
        // Dual of  max delta  s.t.  a_f'c + delta <= b_f:
        //   min sum b_f l_f  s.t.  sum l_f a_f = 0, sum l_f = 1, l >= 0.
        let d = self.dim;
        let nf = self.facets.len();
        let mut lp = LinearProgram::new(self.facets.iter().map(|f| -f.b).collect());
        for k in 0..d {
            lp = lp.eq(self.facets.iter().map(|f| f.a[k]).collect(), 0.0);
        }
        lp = lp.eq(vec![1.0; nf], 1.0);
        let sol = linprog::solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(HullError::Lp(LpError::NotOptimal(sol.status)));
        }
        let delta = -sol.value;
        if delta <= 0.0 {
            return Err(HullError::Degenerate);
        }
        let center = sol.dual.eq[..d].iter().map(|y| -y).collect();
        Ok((delta, center))
    }
}

pub fn facets(points: &[Vec<f64>]) -> Result<Vec<Facet>, HullError> {
    Ok(Hull::new(points)?.facets)
}

pub fn chebyshev(points: &[Vec<f64>]) -> Result<(f64, Vec<f64>), HullError> {
    Hull::new(points)?.chebyshev()
}

/// `p ∈ conv(points)` decided by a feasibility LP.
pub fn contains_point(points: &[Vec<f64>], p: &[f64]) -> bool {
    if points.is_empty() || points.iter().any(|q| q.len() != p.len()) {
        return false;
    }
    let n = points.len();
    let mut lp = LinearProgram::new(vec![0.0; n]);
    for k in 0..p.len() {
        lp = lp.eq(points.iter().map(|q| q[k]).collect(), p[k]);
    }
    lp = lp.eq(vec![1.0; n], 1.0);
    matches!(linprog::solve(&lp), Ok(sol) if sol.is_optimal())
}

/// Force-closure test: the origin lies in the convex hull of the wrenches.
pub fn contains_origin(w: &WrenchSet) -> bool {
    contains_point(&w.to_points(), &[0.0; 6])
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, HullError> {
    let dim = points.first().ok_or(HullError::Empty)?.len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(HullError::DimensionMismatch);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HullError::NonFinite);
    }
    if points.len() <= dim {
        return Err(HullError::Degenerate);
    }
    Ok(dim)
}

fn coord_scale(points: &[Vec<f64>]) -> f64 {
    points.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Unit vector orthogonal to the `d - 1` rows (each in R^d), via Gaussian
/// elimination with full pivoting. Also returns the smallest pivot relative to
/// the first one, as a conditioning measure.
fn null_vector(mut rows: Vec<Vec<f64>>, d: usize) -> (Vec<f64>, f64) {
    let r = rows.len();
    debug_assert_eq!(r + 1, d);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut first = 0.0;
    let mut worst = f64::INFINITY;
    for k in 0..r {
        let (mut bi, mut bj, mut bv) = (k, k, -1.0);
        for (i, row) in rows.iter().enumerate().skip(k) {
            for j in k..d {
                let v = row[perm[j]].abs();
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if k == 0 {
            first = bv;
        }
        worst = worst.min(if first > 0.0 { bv / first } else { 0.0 });
        if bv == 0.0 {
            return (vec![0.0; d], 0.0);
        }
        rows.swap(k, bi);
        perm.swap(k, bj);
        let pc = perm[k];
        let piv = rows[k][pc];
        for i in k + 1..r {
            let f = rows[i][pc] / piv;
            if f != 0.0 {
                for j in k..d {
                    let c = perm[j];
                    rows[i][c] -= f * rows[k][c];
                }
            }
        }
    }
    let mut x = vec![0.0; d];
    x[perm[d - 1]] = 1.0;
    for k in (0..r).rev() {
        let s: f64 = (k + 1..d).map(|j| rows[k][perm[j]] * x[perm[j]]).sum();
        x[perm[k]] = -s / rows[k][perm[k]];
    }
    let norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    (x, worst)
}

struct Face {
    verts: Vec<usize>,
    a: Vec<f64>,
    b: f64,
}

fn make_face(points: &[Vec<f64>], mut verts: Vec<usize>, interior: &[f64], d: usize) -> Result<Face, HullError> {
    verts.sort_unstable();
    let p0 = &points[verts[0]];
    let rows = verts[1..].iter().map(|&v| sub(&points[v], p0)).collect();
    let (mut a, cond) = null_vector(rows, d);
    if cond < COND_TOL || a.iter().any(|v| !v.is_finite()) {
        return Err(HullError::Numerical);
    }
    let mut b = dot(&a, p0);
    if dot(&a, interior) > b {
        a.iter_mut().for_each(|v| *v = -*v);
        b = -b;
    }
    Ok(Face { verts, a, b })
}

/// Greedy initial simplex: each new vertex is farthest from the affine span of
/// the previous ones.
fn initial_simplex(points: &[Vec<f64>], d: usize, scale: f64) -> Result<Vec<usize>, HullError> {
    let n = points.len();
    let centroid: Vec<f64> = (0..d).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
    let far = (0..n)
        .max_by(|&i, &j| {
            let di = dot(&sub(&points[i], &centroid), &sub(&points[i], &centroid));
            let dj = dot(&sub(&points[j], &centroid), &sub(&points[j], &centroid));
            di.total_cmp(&dj)
        })
        .ok_or(HullError::Empty)?;
    let mut chosen = vec![far];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let origin = points[far].clone();
    let residual = |p: &[f64], basis: &[Vec<f64>]| {
        let mut r = sub(p, &origin);
        for q in basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        r
    };
    for _ in 0..d {
        let mut best = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let r = residual(p, &basis);
            let dist = dot(&r, &r).sqrt();
            if dist > best.1 {
                best = (i, dist);
            }
        }
        if best.1 <= COND_TOL * scale {
            return Err(HullError::Degenerate);
        }
        let mut r = residual(&points[best.0], &basis);
        // second pass for orthogonality
        for q in &basis {
            let c = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let norm = dot(&r, &r).sqrt();
        r.iter_mut().for_each(|v| *v /= norm);
        basis.push(r);
        chosen.push(best.0);
    }
    Ok(chosen)
}

fn build(points: &[Vec<f64>], d: usize, scale: f64) -> Result<Vec<Facet>, HullError> {
    let simplex = initial_simplex(points, d, scale)?;
    let interior: Vec<f64> =
        (0..d).map(|k| simplex.iter().map(|&i| points[i][k]).sum::<f64>() / (d + 1) as f64).collect();
    let vis_tol = 0.1 * HULL_TOL * scale.max(1.0);

    let mut faces = Vec::with_capacity(2 * (d + 1));
    for skip in 0..=d {
        let verts = simplex.iter().enumerate().filter(|&(t, _)| t != skip).map(|(_, &v)| v).collect();
        faces.push(make_face(points, verts, &interior, d)?);
    }

    let mut order: Vec<(usize, f64)> = (0..points.len())
        .filter(|i| !simplex.contains(i))
        .map(|i| {
            let r = sub(&points[i], &interior);
            (i, dot(&r, &r))
        })
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let mut ridges: HashMap<Vec<usize>, usize> = HashMap::new();
    for (p, _) in order {
        let visible: Vec<bool> = faces.iter().map(|f| dot(&f.a, &points[p]) - f.b > vis_tol).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        ridges.clear();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for skip in 0..d {
                let ridge: Vec<usize> =
                    f.verts.iter().enumerate().filter(|&(t, _)| t != skip).map(|(_, &v)| v).collect();
                *ridges.entry(ridge).or_insert(0) += 1;
            }
        }
        let mut horizon: Vec<Vec<usize>> = ridges.drain().filter(|(_, c)| *c == 1).map(|(r, _)| r).collect();
        horizon.sort_unstable();
        let mut new_faces = Vec::with_capacity(horizon.len());
        for mut ridge in horizon {
            ridge.push(p);
            new_faces.push(make_face(points, ridge, &interior, d)?);
        }
        let mut keep = visible.iter();
        faces.retain(|_| !*keep.next().unwrap());
        faces.extend(new_faces);
    }

    Ok(faces.into_iter().map(|f| Facet { a: f.a, b: f.b, vertices: f.verts }).collect())
}

fn validate(facets: &[Facet], points: &[Vec<f64>]) -> bool {
    !facets.is_empty() && facets.iter().all(|f| points.iter().all(|p| f.signed_distance(p) <= HULL_TOL))
}

/// Re-fits facets found on jittered input to the original points.
fn refit(facets: Vec<Facet>, points: &[Vec<f64>], d: usize) -> Vec<Facet> {
    facets
        .into_iter()
        .map(|f| {
            let p0 = &points[f.vertices[0]];
            let rows = f.vertices[1..].iter().map(|&v| sub(&points[v], p0)).collect();
            let (mut a, cond) = null_vector(rows, d);
            if cond >= COND_TOL && a.iter().all(|v| v.is_finite()) {
                if dot(&a, &f.a) < 0.0 {
                    a.iter_mut().for_each(|v| *v = -*v);
                }
                let b = dot(&a, p0);
                if points.iter().all(|p| dot(&a, p) - b <= HULL_TOL) {
                    return Facet { a, b, vertices: f.vertices };
                }
            }
            let b = points.iter().map(|p| dot(&f.a, p)).fold(f64::NEG_INFINITY, f64::max);
            Facet { b, ..f }
        })
        .collect()
}

/// Collapses simplicial pieces lying on the same hyperplane and records every
/// input point on it.
fn merge(facets: Vec<Facet>, points: &[Vec<f64>]) -> Vec<Facet> {
    let mut out: Vec<Facet> = Vec::new();
    for f in facets {
        let same = |g: &Facet| {
            (g.b - f.b).abs() <= HULL_TOL && g.a.iter().zip(&f.a).all(|(x, y)| (x - y).abs() <= HULL_TOL)
        };
        if !out.iter().any(same) {
            out.push(f);
        }
    }
    for f in &mut out {
        f.vertices = (0..points.len()).filter(|&i| f.signed_distance(&points[i]).abs() <= HULL_TOL).collect();
    }
    out
}
