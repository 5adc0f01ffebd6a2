//! Gradient of `L_FC` with respect to contact positions and mean normals.
//!
//! Normals are parameterized by a tangent tilt `n̄ -> normalize(n̄ + δ)` with
//! `δ = a·t1 + b·t2`, the tangent frame being carried along by the minimal
//! rotation (see [`ContactSpec::tilted`]). The chain is
//! polygon mass -> vertex steps θ -> wrench data, where the last link is the
//! envelope derivative of each active vertex LP. Steps whose LP is degenerate,
//! tied across sides, zero or capped are differentiated numerically instead.

use std::f64::consts::TAU;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::vertex::{directions, vertex_lp, vertex_theta, PongSetup};
use super::{finger_sigma, gauss_polygon_grad, l_fc, GradMode, PongConfig, PongError};
use crate::linprog::{sensitivity, LpError, LpPerturbation};
use crate::wrench::{tangent_basis, tangent_basis_derivative, ContactSpec, FrictionModel};

const FD_STEP: f64 = 1e-6;
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PongGradient {
    pub l_fc: f64,
    /// `∂L/∂x^i`.
    pub dx: Vec<[f64; 3]>,
    /// `∂L/∂(a, b)` for the tilt `δ = a·t1 + b·t2` of each mean normal.
    pub dn: Vec<[f64; 2]>,
    /// Some part of the gradient came from finite differences.
    pub fallback: bool,
    /// Vertex steps that were differentiated numerically.
    pub fd_vertices: usize,
    /// The whole gradient came from finite differences.
    pub full_fd: bool,
    /// Smallest gap between the two best sides over contributing vertex steps.
    pub min_side_gap: f64,
}

impl PongGradient {
    /// Flattened as `(x^1, a^1, b^1, x^2, ...)`.
    pub fn flat(&self) -> Vec<f64> {
        self.dx.iter().zip(&self.dn).flat_map(|(x, n)| x.iter().chain(n.iter()).copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    X(usize),
    N(usize),
}

const PARAMS: [Param; 5] = [Param::X(0), Param::X(1), Param::X(2), Param::N(0), Param::N(1)];

fn perturbed(contacts: &[ContactSpec], finger: usize, param: Param, h: f64) -> Result<Vec<ContactSpec>, PongError> {
    let mut out = contacts.to_vec();
    let c = &mut out[finger];
    match param {
        Param::X(a) => c.x[a] += h,
        Param::N(b) => {
            let t = if b == 0 { c.t1 } else { c.t2 };
            *c = c.tilted(&(t * h))?;
        }
    }
    Ok(out)
}

fn store(grad: &mut PongGradient, finger: usize, param: Param, v: f64) {
    match param {
        Param::X(a) => grad.dx[finger][a] += v,
        Param::N(b) => grad.dn[finger][b] += v,
    }
}

pub fn l_fc_gradient(
    contacts: &[ContactSpec],
    model: &FrictionModel,
    config: &PongConfig,
) -> Result<PongGradient, PongError> {
    config.validate()?;
    match config.grad_mode {
        GradMode::FiniteDifference => full_differences(contacts, model, config),
        GradMode::ImplicitKkt => implicit(contacts, model, config),
    }
}

fn empty(n_f: usize, l: f64) -> PongGradient {
    PongGradient {
        l_fc: l,
        dx: vec![[0.0; 3]; n_f],
        dn: vec![[0.0; 2]; n_f],
        fallback: false,
        fd_vertices: 0,
        full_fd: false,
        min_side_gap: f64::INFINITY,
    }
}

fn full_differences(contacts: &[ContactSpec], model: &FrictionModel, config: &PongConfig) -> Result<PongGradient, PongError> {
    let mut g = empty(contacts.len(), l_fc(contacts, model, config)?.l_fc);
    for i in 0..contacts.len() {
        for p in PARAMS {
            let hi = l_fc(&perturbed(contacts, i, p, FD_STEP)?, model, config)?.l_fc;
            let lo = l_fc(&perturbed(contacts, i, p, -FD_STEP)?, model, config)?.l_fc;
            store(&mut g, i, p, (hi - lo) / (2.0 * FD_STEP));
        }
    }
    g.fallback = true;
    g.full_fd = true;
    Ok(g)
}

/// Derivatives of the vertex-LP data for finger `i`, direction `d`, side `j`
/// with respect to one parameter of finger `p`: `(∂(T_j d), ∂w̄_l for l in p)`.
fn lp_data_derivative(
    setup: &PongSetup,
    i: usize,
    j: usize,
    d: &Vector3<f64>,
    p: usize,
    param: Param,
) -> (Vector6<f64>, Vec<Vector6<f64>>) {
    let mu = setup.model.mu;
    let n_s = setup.model.n_sides;
    let c = &setup.contacts[p];
    let stack = |f: Vector3<f64>, tau: Vector3<f64>| Vector6::new(f.x, f.y, f.z, tau.x, tau.y, tau.z);
    let phi = |j: usize| TAU * j as f64 / n_s as f64;
    let mut dtd = Vector6::zeros();
    let mut dw = Vec::with_capacity(n_s);
    match param {
        Param::X(a) => {
            let e = Vector3::ith(a, 1.0);
            if p == i {
                let td = setup.map(i, j) * d;
                dtd = stack(Vector3::zeros(), e.cross(&td.fixed_rows::<3>(0).into_owned()));
            }
            for jj in 0..n_s {
                let f = setup.w_bar.get(p * n_s + jj).f;
                dw.push(stack(Vector3::zeros(), e.cross(&f)));
            }
        }
        Param::N(b) => {
            let delta = if b == 0 { c.t1 } else { c.t2 };
            let n = c.n_bar;
            let (t1, t2) = tangent_basis(&n).expect("validated normal");
            let (dt1, dt2) = tangent_basis_derivative(&n, &delta);
            let gen = |jj: usize| (t1 * phi(jj).cos() + t2 * phi(jj).sin(), dt1 * phi(jj).cos() + dt2 * phi(jj).sin());
            if p == i {
                let (g, dg) = gen(j);
                let dd = -n * delta.dot(d);
                let df = dd + (g.cross(&dd) + dg.cross(d)) * mu;
                dtd = stack(df, c.x.cross(&df));
            }
            for jj in 0..n_s {
                let (g, dg) = gen(jj);
                let df = delta + (dg.cross(&n) + g.cross(&delta)) * mu;
                dw.push(stack(df, c.x.cross(&df)));
            }
        }
    }
    (dtd, dw)
}

fn perturbation(n_w: usize, p: usize, n_s: usize, dtd: &Vector6<f64>, dw: &[Vector6<f64>]) -> LpPerturbation {
    let mut a_eq = vec![vec![0.0; 1 + n_w]; 7];
    for r in 0..6 {
        a_eq[r][0] = dtd[r];
        for (jj, w) in dw.iter().enumerate() {
            a_eq[r][1 + p * n_s + jj] = w[r];
        }
    }
    LpPerturbation { a_eq, ..Default::default() }
}

fn theta_at(contacts: &[ContactSpec], model: &FrictionModel, config: &PongConfig, i: usize, u: [f64; 2]) -> Result<f64, PongError> {
    let s = PongSetup::new(contacts, model)?;
    if !s.mean_force_closure {
        return Ok(0.0);
    }
    Ok(vertex_theta(&s.w_bar, &s.side_images(i, &s.direction(i, u)), config.theta_max)?.theta)
}

fn implicit(contacts: &[ContactSpec], model: &FrictionModel, config: &PongConfig) -> Result<PongGradient, PongError> {
    let setup = PongSetup::new(contacts, model)?;
    if !setup.mean_force_closure {
        return full_differences(contacts, model, config);
    }
    let (fingers, sols) = setup.polygons_with_solutions(config)?;
    let n_f = contacts.len();
    let n_s = model.n_sides;
    let n_w = setup.w_bar.len();
    let dirs = directions(config.n_dirs);

    let mut masses = Vec::with_capacity(n_f);
    let mut vgrads = Vec::with_capacity(n_f);
    for (c, f) in contacts.iter().zip(&fingers) {
        let (m, g) = gauss_polygon_grad(&f.polygon, [0.0, 0.0], finger_sigma(c), config.quad_nodes)?;
        masses.push(m);
        vgrads.push(g);
    }
    let others = |i: usize| masses.iter().enumerate().filter(|&(q, _)| q != i).map(|(_, m)| m).product::<f64>();
    let mut grad = empty(n_f, masses.iter().product());

    for (i, f) in fingers.iter().enumerate() {
        let rest = others(i);
        let scale = f.polygon.vertices.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (k, u) in dirs.iter().enumerate() {
            let theta = f.thetas[k];
            let point = [theta * u[0], theta * u[1]];
            let weight = match f.vertex_dirs.iter().position(|&kk| kk == k) {
                Some(m) => rest * (vgrads[i][m][0] * u[0] + vgrads[i][m][1] * u[1]),
                None if f.polygon.contains(point, -1e-9 * scale * scale) => 0.0,
                // on the boundary without being a vertex: the mass is not differentiable in θ
                None => return full_differences(contacts, model, config),
            };
            if weight == 0.0 {
                continue;
            }
            let gap = f.gaps[k];
            grad.min_side_gap = grad.min_side_gap.min(gap);
            let j = f.active[k];
            let sol = &sols[(i * dirs.len() + k) * n_s + j];
            let analytic = theta > 1e-12 && theta < config.theta_max && gap > TIE_TOL * theta.max(1.0);
            let d = setup.direction(i, *u);
            let mut dthetas = Vec::with_capacity(n_f * PARAMS.len());
            let mut ok = analytic;
            if analytic {
                let sol = sol.as_ref().map_err(Clone::clone)?;
                let lp = vertex_lp(&setup.w_bar, &(setup.map(i, j) * d));
                'params: for p in 0..n_f {
                    for param in PARAMS {
                        let (dtd, dw) = lp_data_derivative(&setup, i, j, &d, p, param);
                        match sensitivity(&lp, sol, &perturbation(n_w, p, n_s, &dtd, &dw)) {
                            Ok(v) => dthetas.push((p, param, v)),
                            Err(LpError::Degenerate) => {
                                ok = false;
                                break 'params;
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
            if !ok {
                dthetas.clear();
                grad.fallback = true;
                grad.fd_vertices += 1;
                for p in 0..n_f {
                    for param in PARAMS {
                        let hi = theta_at(&perturbed(contacts, p, param, FD_STEP)?, model, config, i, *u)?;
                        let lo = theta_at(&perturbed(contacts, p, param, -FD_STEP)?, model, config, i, *u)?;
                        dthetas.push((p, param, (hi - lo) / (2.0 * FD_STEP)));
                    }
                }
            }
            for (p, param, v) in dthetas {
                store(&mut grad, p, param, weight * v);
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grasp() -> Vec<ContactSpec> {
        let pts = [[1.0, 0.1, 0.2], [-0.6, 0.8, -0.1], [-0.5, -0.8, 0.3]];
        pts.iter()
            .enumerate()
            .map(|(i, p)| {
                let x = Vector3::new(p[0], p[1], p[2]).normalize() * 0.05;
                ContactSpec::new(x, -x.normalize(), 0.02 + 0.01 * i as f64, 0.03).unwrap()
            })
            .collect()
    }

    #[test]
    fn analytic_matches_differences() {
        let model = FrictionModel::new(0.5, 4).unwrap();
        let config = PongConfig::default();
        let a = l_fc_gradient(&grasp(), &model, &config).unwrap();
        let fd = l_fc_gradient(&grasp(), &model, &PongConfig { grad_mode: GradMode::FiniteDifference, ..config }).unwrap();
        assert!(a.l_fc > 0.0);
        assert!(!a.full_fd);
        let (ga, gf) = (a.flat(), fd.flat());
        let scale = gf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in ga.iter().zip(&gf) {
            assert!((x - y).abs() <= 1e-4 * scale, "{x} vs {y} (scale {scale})");
        }
    }
}
