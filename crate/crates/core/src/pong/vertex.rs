use std::f64::consts::TAU;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{PongConfig, PongError, Polygon2};
use crate::hull;
use crate::linprog::{self, LinearProgram, LpError, LpSolution, LpStatus};
use crate::wrench::{wrench_maps, wrenches_from_maps, ContactSpec, FrictionModel, WrenchMap, WrenchSet};

/// Unit search directions in tangent coordinates, the first along `t1`.
pub fn directions(n_dirs: usize) -> Vec<[f64; 2]> {
    (0..n_dirs)
        .map(|k| {
            let a = TAU * k as f64 / n_dirs as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// `max θ  s.t.  θ·(T_j d) + W̄α = 0, 1'α = 1, α >= 0, θ >= 0`
/// over `z = (θ, α)`.
pub fn vertex_lp(w_bar: &WrenchSet, t_d: &Vector6<f64>) -> LinearProgram {
    joint_vertex_lp(w_bar, std::slice::from_ref(t_d))
}

/// All sides at once: `z = (θ, α_1, ..., α_J)` with one weight block per side.
pub fn joint_vertex_lp(w_bar: &WrenchSet, t_ds: &[Vector6<f64>]) -> LinearProgram {
    let pts = w_bar.to_arrays();
    let n_w = pts.len();
    let n = 1 + n_w * t_ds.len();
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    let mut lp = LinearProgram::new(c);
    for (j, td) in t_ds.iter().enumerate() {
        let off = 1 + j * n_w;
        for r in 0..6 {
            let mut row = vec![0.0; n];
            row[0] = td[r];
            for (l, p) in pts.iter().enumerate() {
                row[off + l] = p[r];
            }
            lp = lp.eq(row, 0.0);
        }
        let mut row = vec![0.0; n];
        row[off..off + n_w].iter_mut().for_each(|v| *v = 1.0);
        lp = lp.eq(row, 1.0);
    }
    lp
}

/// Step length read off a vertex-LP outcome: `(θ, clamped)`.
pub(crate) fn theta_of(res: &Result<LpSolution, LpError>, theta_max: f64) -> Result<(f64, bool), PongError> {
    let sol = res.as_ref().map_err(|e| e.clone())?;
    Ok(match sol.status {
        LpStatus::Optimal if sol.value > theta_max => (theta_max, true),
        LpStatus::Optimal => (sol.value.max(0.0), false),
        LpStatus::Infeasible => (0.0, false),
        LpStatus::Unbounded => (theta_max, true),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexTheta {
    pub theta: f64,
    pub per_side: Vec<f64>,
    /// Side attaining the minimum.
    pub active: usize,
    pub clamped: bool,
}

/// `θ = min_j θ_j`, each side solved as its own LP.
pub fn vertex_theta(w_bar: &WrenchSet, t_ds: &[Vector6<f64>], theta_max: f64) -> Result<VertexTheta, PongError> {
    let lps: Vec<_> = t_ds.iter().map(|td| vertex_lp(w_bar, td)).collect();
    let sols = linprog::solve_batch(&lps);
    collect_min(&sols, theta_max)
}

fn collect_min(sols: &[Result<LpSolution, LpError>], theta_max: f64) -> Result<VertexTheta, PongError> {
    let mut per_side = Vec::with_capacity(sols.len());
    let mut clamped = false;
    for s in sols {
        let (t, c) = theta_of(s, theta_max)?;
        per_side.push(t);
        clamped |= c;
    }
    let (active, theta) = per_side
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    Ok(VertexTheta { theta, per_side, active, clamped })
}

/// One finger's approximate force-closure polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerPolygon {
    pub polygon: Polygon2,
    pub thetas: Vec<f64>,
    /// Per direction, the vertex-LP side attaining the minimum.
    pub active: Vec<usize>,
    /// Per direction, the second-smallest side value minus the smallest.
    pub gaps: Vec<f64>,
    /// Direction index behind each polygon vertex.
    pub vertex_dirs: Vec<usize>,
    pub clamped: bool,
}

/// Mean-normal data shared by every vertex LP of a grasp.
#[derive(Debug, Clone)]
pub struct PongSetup {
    pub contacts: Vec<ContactSpec>,
    pub model: FrictionModel,
    pub maps: Vec<WrenchMap>,
    pub w_bar: WrenchSet,
    pub mean_force_closure: bool,
}

impl PongSetup {
    pub fn new(contacts: &[ContactSpec], model: &FrictionModel) -> Result<Self, PongError> {
        model.validate()?;
        if contacts.is_empty() {
            return Err(crate::wrench::WrenchError::NoContacts.into());
        }
        for c in contacts {
            c.validate()?;
        }
        let maps = wrench_maps(contacts, model)?;
        let w_bar = wrenches_from_maps(&maps, contacts, model.n_sides, None);
        let mean_force_closure = hull::contains_origin(&w_bar);
        Ok(Self { contacts: contacts.to_vec(), model: *model, maps, w_bar, mean_force_closure })
    }

    pub fn n_fingers(&self) -> usize {
        self.contacts.len()
    }

    pub fn map(&self, i: usize, j: usize) -> &WrenchMap {
        &self.maps[i * self.model.n_sides + j]
    }

    /// Tangent direction `t1 u1 + t2 u2` of finger `i`.
    pub fn direction(&self, i: usize, u: [f64; 2]) -> Vector3<f64> {
        let c = &self.contacts[i];
        c.t1 * u[0] + c.t2 * u[1]
    }

    pub fn side_images(&self, i: usize, d: &Vector3<f64>) -> Vec<Vector6<f64>> {
        (0..self.model.n_sides).map(|j| self.map(i, j) * d).collect()
    }

    /// Vertex LPs of every (finger, direction, side), in that nesting order.
    pub fn all_lps(&self, config: &PongConfig) -> Vec<LinearProgram> {
        let dirs = directions(config.n_dirs);
        let mut lps = Vec::with_capacity(self.n_fingers() * dirs.len() * self.model.n_sides);
        for i in 0..self.n_fingers() {
            for u in &dirs {
                for td in self.side_images(i, &self.direction(i, *u)) {
                    lps.push(vertex_lp(&self.w_bar, &td));
                }
            }
        }
        lps
    }

    pub fn polygons(&self, config: &PongConfig) -> Result<Vec<FingerPolygon>, PongError> {
        Ok(self.polygons_with_solutions(config)?.0)
    }

    /// Polygons plus the raw vertex-LP solutions (indexed as in [`Self::all_lps`]).
    pub(crate) fn polygons_with_solutions(
        &self,
        config: &PongConfig,
    ) -> Result<(Vec<FingerPolygon>, Vec<Result<LpSolution, LpError>>), PongError> {
        config.validate()?;
        let dirs = directions(config.n_dirs);
        let n_s = self.model.n_sides;
        if !self.mean_force_closure {
            let fingers = (0..self.n_fingers())
                .map(|_| FingerPolygon {
                    polygon: Polygon2::hull(&vec![[0.0, 0.0]; dirs.len()]),
                    thetas: vec![0.0; dirs.len()],
                    active: vec![0; dirs.len()],
                    gaps: vec![0.0; dirs.len()],
                    vertex_dirs: vec![0],
                    clamped: false,
                })
                .collect();
            return Ok((fingers, Vec::new()));
        }
        let sols = linprog::solve_batch(&self.all_lps(config));
        let mut fingers = Vec::with_capacity(self.n_fingers());
        for i in 0..self.n_fingers() {
            let mut thetas = Vec::with_capacity(dirs.len());
            let mut active = Vec::with_capacity(dirs.len());
            let mut gaps = Vec::with_capacity(dirs.len());
            let mut clamped = false;
            for k in 0..dirs.len() {
                let base = (i * dirs.len() + k) * n_s;
                let vt = collect_min(&sols[base..base + n_s], config.theta_max)?;
                let mut sorted = vt.per_side.clone();
                sorted.sort_by(f64::total_cmp);
                gaps.push(if sorted.len() > 1 { sorted[1] - sorted[0] } else { f64::INFINITY });
                thetas.push(vt.theta);
                active.push(vt.active);
                clamped |= vt.clamped;
            }
            let points: Vec<[f64; 2]> = thetas.iter().zip(&dirs).map(|(t, u)| [t * u[0], t * u[1]]).collect();
            let (polygon, vertex_dirs) = Polygon2::hull_indexed(&points);
            fingers.push(FingerPolygon { polygon, thetas, active, gaps, vertex_dirs, clamped });
        }
        Ok((fingers, sols))
    }

    /// Whether the tangent perturbation `z` of finger `i` keeps every perturbed
    /// wrench of that finger inside `-conv(W̄)`, checked by membership LPs.
    pub fn inclusion_holds(&self, i: usize, z: [f64; 2]) -> bool {
        let pts = self.w_bar.to_points();
        let dn = self.direction(i, z);
        (0..self.model.n_sides).all(|j| {
            let dw = self.map(i, j) * dn;
            let neg: Vec<f64> = dw.iter().map(|v| -v).collect();
            hull::contains_point(&pts, &neg)
        })
    }
}

pub fn fc_polygons(
    contacts: &[ContactSpec],
    model: &FrictionModel,
    config: &PongConfig,
) -> Result<Vec<FingerPolygon>, PongError> {
    PongSetup::new(contacts, model)?.polygons(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tripod() -> Vec<ContactSpec> {
        (0..3)
            .map(|i| {
                let a = TAU * i as f64 / 3.0;
                let x = Vector3::new(a.cos(), a.sin(), 0.0);
                ContactSpec::new(x, -x, 0.01, 0.01).unwrap()
            })
            .collect()
    }

    #[test]
    fn directions_start_on_first_axis() {
        let d = directions(4);
        assert_eq!(d[0], [1.0, 0.0]);
        assert!((d[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn joint_equals_min_over_sides() {
        let model = FrictionModel::new(0.5, 4).unwrap();
        let setup = PongSetup::new(&tripod(), &model).unwrap();
        assert!(setup.mean_force_closure);
        for (k, u) in directions(5).into_iter().enumerate() {
            let tds = setup.side_images(k % 3, &setup.direction(k % 3, u));
            let split = vertex_theta(&setup.w_bar, &tds, 10.0).unwrap();
            let joint = linprog::solve(&joint_vertex_lp(&setup.w_bar, &tds)).unwrap();
            assert!((joint.value - split.theta).abs() < 1e-9);
            assert!(split.theta > 0.0);
        }
    }

    #[test]
    fn polygons_are_feasible_and_contain_origin() {
        let model = FrictionModel::new(0.5, 4).unwrap();
        let setup = PongSetup::new(&tripod(), &model).unwrap();
        let config = PongConfig { n_dirs: 6, ..Default::default() };
        for (i, f) in setup.polygons(&config).unwrap().iter().enumerate() {
            assert!(f.polygon.contains([0.0, 0.0], 0.0));
            assert!(f.polygon.is_convex(1e-12));
            let n = f.polygon.len();
            for m in 0..n {
                let (a, b) = (f.polygon.vertices[m], f.polygon.vertices[(m + 1) % n]);
                assert!(setup.inclusion_holds(i, a));
                assert!(setup.inclusion_holds(i, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]));
            }
            // slightly beyond a vertex the inclusion fails
            let v = f.polygon.vertices[0];
            assert!(!setup.inclusion_holds(i, [v[0] * 1.01, v[1] * 1.01]));
        }
    }

    #[test]
    fn not_force_closure_gives_zero_steps() {
        let model = FrictionModel::new(0.2, 4).unwrap();
        let x = Vector3::new(1.0, 0.0, 0.0);
        let contacts = vec![ContactSpec::new(x, -x, 0.01, 0.01).unwrap()];
        let setup = PongSetup::new(&contacts, &model).unwrap();
        assert!(!setup.mean_force_closure);
        let f = &setup.polygons(&PongConfig::default()).unwrap()[0];
        assert!(f.thetas.iter().all(|&t| t == 0.0));
        assert_eq!(f.polygon.area(), 0.0);
    }
}
