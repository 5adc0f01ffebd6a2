//! Probabilistic force closure (PONG).
//!
//! Each finger's mean normal is perturbed in its tangent plane by a Gaussian
//! `z ~ N(0, diag(σ1², σ2²))`. For every finger we find a polygon `A^i` of
//! tangent perturbations that keep each perturbed basis wrench inside
//! `-conv(W̄)`; the product of the Gaussian masses of these polygons, `L_FC`,
//! lower-bounds the probability of force closure.

mod gauss;
mod gradient;
mod vertex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linprog::LpError;
use crate::wrench::{ContactSpec, FrictionModel, WrenchError};

pub use gauss::{gauss_legendre, gauss_polygon, gauss_polygon_grad, gauss_polygon_with};
pub use gradient::{l_fc_gradient, PongGradient};
pub use vertex::{directions, fc_polygons, joint_vertex_lp, vertex_lp, vertex_theta, FingerPolygon, PongSetup, VertexTheta};

/// Variances below this are raised to it before integration.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PongError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("polygon is clockwise")]
    Clockwise,
    #[error("polygon is not convex")]
    NotConvex,
    #[error("standard deviations must be positive")]
    NonPositiveSigma,
    #[error(transparent)]
    Wrench(#[from] WrenchError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GradMode {
    #[default]
    ImplicitKkt,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PongConfig {
    pub n_dirs: usize,
    pub quad_nodes: usize,
    pub grad_mode: GradMode,
    /// Cap applied to unbounded or huge vertex steps.
    pub theta_max: f64,
}

impl Default for PongConfig {
    fn default() -> Self {
        Self { n_dirs: 8, quad_nodes: 32, grad_mode: GradMode::ImplicitKkt, theta_max: 10.0 }
    }
}

impl PongConfig {
    pub fn validate(&self) -> Result<(), PongError> {
        if self.n_dirs < 3 {
            return Err(PongError::InvalidConfig("n_dirs must be at least 3".into()));
        }
        if self.quad_nodes < 8 {
            return Err(PongError::InvalidConfig("quad_nodes must be at least 8".into()));
        }
        if !(self.theta_max > 0.0) {
            return Err(PongError::InvalidConfig("theta_max must be positive".into()));
        }
        Ok(())
    }
}

/// Counterclockwise planar polygon in tangent-plane coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon2 {
    pub vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Polygon2 {
    /// Checks orientation and convexity.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self, PongError> {
        let p = Self { vertices };
        if p.signed_area() < -1e-15 {
            return Err(PongError::Clockwise);
        }
        if !p.is_convex(1e-9) {
            return Err(PongError::NotConvex);
        }
        Ok(p)
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new() }
    }

    /// Convex hull of `points` (counterclockwise, collinear points dropped),
    /// together with the index of the input point behind each vertex.
    pub fn hull_indexed(points: &[[f64; 2]]) -> (Self, Vec<usize>) {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])));
        idx.dedup_by(|a, b| points[*a] == points[*b]);
        if idx.len() < 3 {
            return (Self { vertices: idx.iter().map(|&i| points[i]).collect() }, idx);
        }
        let scale = points.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = 1e-14 * scale * scale;
        let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
        for pass in 0..2 {
            let start = chain.len();
            let order: Box<dyn Iterator<Item = &usize>> =
                if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
            for &i in order {
                while chain.len() >= start + 2 {
                    let n = chain.len();
                    if cross(points[chain[n - 2]], points[chain[n - 1]], points[i]) <= tol {
                        chain.pop();
                    } else {
                        break;
                    }
                }
                chain.push(i);
            }
            chain.pop();
        }
        let poly = Self { vertices: chain.iter().map(|&i| points[i]).collect() };
        (poly, chain)
    }

    pub fn hull(points: &[[f64; 2]]) -> Self {
        Self::hull_indexed(points).0
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|m| {
                let (a, b) = (self.vertices[m], self.vertices[(m + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        (0..n).all(|m| cross(self.vertices[m], self.vertices[(m + 1) % n], self.vertices[(m + 2) % n]) >= -tol)
    }

    /// Point-in-convex-polygon test with tolerance `tol` on edge cross products.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|m| cross(self.vertices[m], self.vertices[(m + 1) % n], p) >= -tol)
    }
}

/// Result of evaluating `L_FC` on a grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PongReport {
    pub l_fc: f64,
    pub per_finger: Vec<f64>,
    pub polygons: Vec<Polygon2>,
    /// Step lengths per finger and direction.
    pub thetas: Vec<Vec<f64>>,
    pub mean_force_closure: bool,
    /// Some vertex step was capped at `theta_max`.
    pub clamped: bool,
}

pub(crate) fn finger_sigma(c: &ContactSpec) -> [f64; 2] {
    [c.sigma1_sq.max(VARIANCE_FLOOR).sqrt(), c.sigma2_sq.max(VARIANCE_FLOOR).sqrt()]
}

/// `L_FC`: product over fingers of the Gaussian mass of each finger's polygon.
pub fn l_fc(contacts: &[ContactSpec], model: &FrictionModel, config: &PongConfig) -> Result<PongReport, PongError> {
    config.validate()?;
    let setup = PongSetup::new(contacts, model)?;
    let fingers = setup.polygons(config)?;
    let mean_force_closure = setup.mean_force_closure;
    let mut per_finger = Vec::with_capacity(fingers.len());
    for (c, f) in contacts.iter().zip(&fingers) {
        per_finger.push(if f.polygon.len() < 3 {
            0.0
        } else {
            gauss_polygon_with(&f.polygon, [0.0, 0.0], finger_sigma(c), config.quad_nodes)?
        });
    }
    Ok(PongReport {
        l_fc: per_finger.iter().product(),
        per_finger,
        clamped: fingers.iter().any(|f| f.clamped),
        thetas: fingers.iter().map(|f| f.thetas.clone()).collect(),
        polygons: fingers.into_iter().map(|f| f.polygon).collect(),
        mean_force_closure,
    })
}
