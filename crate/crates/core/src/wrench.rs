//! Friction pyramids and basis wrenches.
//!
//! A contact at point `x` with (possibly perturbed) normal `n` produces one basis
//! force per pyramid edge, `f_j = n + mu * (g_j x n)`, where the generators `g_j`
//! are unit vectors orthogonal to the *mean* normal. Each force induces the wrench
//! `(f_j, x x f_j)`. Because the generators are fixed by the mean normal, every
//! basis wrench is a linear function `T_j * n` of the normal.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit-length tolerance for normals and frames.
pub const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WrenchError {
    #[error("degenerate normal")]
    DegenerateNormal,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid friction model: {0}")]
    InvalidFriction(String),
    #[error("invalid contact: {0}")]
    InvalidContact(String),
    #[error("expected {expected} perturbed normals, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty contact list")]
    NoContacts,
}

/// 6×3 map taking a contact normal to one basis wrench.
pub type WrenchMap = SMatrix<f64, 6, 3>;

/// A force/torque pair, ordered `(f, tau)` everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub f: Vector3<f64>,
    pub tau: Vector3<f64>,
}

impl Wrench {
    pub fn new(f: Vector3<f64>, tau: Vector3<f64>) -> Self {
        Self { f, tau }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            f: Vector3::new(v[0], v[1], v[2]),
            tau: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::from_array([v[0], v[1], v[2], v[3], v[4], v[5]])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.f.x, self.f.y, self.f.z, self.tau.x, self.tau.y, self.tau.z]
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.to_array())
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Contact point with its mean inward normal, tangent frame and tangent-plane
/// variances of the random normal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactSpec {
    pub x: Vector3<f64>,
    pub n_bar: Vector3<f64>,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

impl ContactSpec {
    /// Contact whose tangent frame is the deterministic completion of `n_bar`.
    pub fn new(x: Vector3<f64>, n_bar: Vector3<f64>, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self, WrenchError> {
        let n = n_bar.try_normalize(f64::MIN_POSITIVE).ok_or(WrenchError::DegenerateNormal)?;
        let (t1, t2) = tangent_basis(&n)?;
        let c = Self { x, n_bar: n, t1, t2, sigma1_sq, sigma2_sq };
        c.validate()?;
        Ok(c)
    }

    /// Contact with no normal uncertainty.
    pub fn deterministic(x: Vector3<f64>, n_bar: Vector3<f64>) -> Result<Self, WrenchError> {
        Self::new(x, n_bar, 0.0, 0.0)
    }

    pub fn with_frame(
        x: Vector3<f64>,
        n_bar: Vector3<f64>,
        t1: Vector3<f64>,
        t2: Vector3<f64>,
        sigma1_sq: f64,
        sigma2_sq: f64,
    ) -> Result<Self, WrenchError> {
        let c = Self { x, n_bar, t1, t2, sigma1_sq, sigma2_sq };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), WrenchError> {
        let all = [self.x, self.n_bar, self.t1, self.t2];
        if all.iter().any(|v| !v.iter().all(|c| c.is_finite()))
            || !self.sigma1_sq.is_finite()
            || !self.sigma2_sq.is_finite()
        {
            return Err(WrenchError::NonFinite);
        }
        if (self.n_bar.norm() - 1.0).abs() > FRAME_TOL {
            return Err(WrenchError::InvalidContact("mean normal is not unit length".into()));
        }
        let frame = Matrix3::from_columns(&[self.t1, self.t2, self.n_bar]);
        let gram = frame.transpose() * frame;
        if (gram - Matrix3::identity()).amax() > FRAME_TOL {
            return Err(WrenchError::InvalidContact("tangent frame is not orthonormal".into()));
        }
        if self.sigma1_sq < 0.0 || self.sigma2_sq < 0.0 {
            return Err(WrenchError::InvalidContact("negative variance".into()));
        }
        Ok(())
    }

    /// The 3×2 tangent basis `[t1 t2]`.
    pub fn tangent_matrix(&self) -> SMatrix<f64, 3, 2> {
        SMatrix::<f64, 3, 2>::from_columns(&[self.t1, self.t2])
    }

    /// Normal `n_bar + t1 z1 + t2 z2` for a tangent-plane perturbation `z`.
    pub fn perturbed_normal(&self, z: [f64; 2]) -> Vector3<f64> {
        self.n_bar + self.t1 * z[0] + self.t2 * z[1]
    }

    /// Rotates the mean normal towards `n_bar + delta` by the minimal rotation and
    /// carries the tangent frame along with it. `delta` is projected onto the
    /// tangent plane first.
    pub fn tilted(&self, delta: &Vector3<f64>) -> Result<Self, WrenchError> {
        let delta_t = delta - self.n_bar * self.n_bar.dot(delta);
        let target = (self.n_bar + delta_t).try_normalize(f64::MIN_POSITIVE).ok_or(WrenchError::DegenerateNormal)?;
        let rot = minimal_rotation(&self.n_bar, &target);
        let mut c = *self;
        c.n_bar = target;
        c.t1 = rot * self.t1;
        c.t2 = rot * self.t2;
        Ok(c)
    }
}

/// Rotation matrix taking unit vector `a` onto unit vector `b` about `a x b`.
pub fn minimal_rotation(a: &Vector3<f64>, b: &Vector3<f64>) -> Matrix3<f64> {
    let v = a.cross(b);
    let c = a.dot(b);
    let k = hat(&v);
    if c <= -1.0 + 1e-15 {
        // antiparallel; any half-turn about an axis orthogonal to `a`
        let (t1, _) = tangent_basis(a).expect("unit vector");
        return 2.0 * t1 * t1.transpose() - Matrix3::identity();
    }
    Matrix3::identity() + k + k * k / (1.0 + c)
}

/// Friction coefficient and pyramid side count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionModel {
    pub mu: f64,
    pub n_sides: usize,
}

impl FrictionModel {
    pub fn new(mu: f64, n_sides: usize) -> Result<Self, WrenchError> {
        let m = Self { mu, n_sides };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), WrenchError> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(WrenchError::InvalidFriction(format!("mu must be positive, got {}", self.mu)));
        }
        if self.n_sides < 3 {
            return Err(WrenchError::InvalidFriction(format!("need at least 3 pyramid sides, got {}", self.n_sides)));
        }
        Ok(())
    }
}

/// Ordered basis wrenches of a grasp, laid out finger-major: `l = i * n_s + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrenchSet {
    wrenches: Vec<Wrench>,
    n_sides: usize,
}

impl WrenchSet {
    /// Wraps raw wrenches; treated as one "finger" per wrench for indexing.
    pub fn from_wrenches(wrenches: Vec<Wrench>) -> Self {
        Self { wrenches, n_sides: 1 }
    }

    pub fn from_arrays(rows: &[[f64; 6]]) -> Self {
        Self::from_wrenches(rows.iter().map(|r| Wrench::from_array(*r)).collect())
    }

    pub fn with_layout(wrenches: Vec<Wrench>, n_sides: usize) -> Self {
        assert!(n_sides > 0 && wrenches.len() % n_sides == 0, "wrench count must be a multiple of n_sides");
        Self { wrenches, n_sides }
    }

    pub fn len(&self) -> usize {
        self.wrenches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wrenches.is_empty()
    }

    pub fn n_sides(&self) -> usize {
        self.n_sides
    }

    pub fn n_fingers(&self) -> usize {
        self.wrenches.len() / self.n_sides
    }

    pub fn wrenches(&self) -> &[Wrench] {
        &self.wrenches
    }

    pub fn get(&self, l: usize) -> &Wrench {
        &self.wrenches[l]
    }

    pub fn flat_index(&self, finger: usize, side: usize) -> usize {
        flatten_index(finger, side, self.n_sides)
    }

    pub fn to_arrays(&self) -> Vec<[f64; 6]> {
        self.wrenches.iter().map(Wrench::to_array).collect()
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.wrenches.iter().map(|w| w.to_array().to_vec()).collect()
    }

    pub fn map(&self, f: impl FnMut(&Wrench) -> Wrench) -> Self {
        Self { wrenches: self.wrenches.iter().map(f).collect(), n_sides: self.n_sides }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|w| Wrench::new(w.f * c, w.tau * c))
    }
}

pub fn flatten_index(finger: usize, side: usize, n_sides: usize) -> usize {
    finger * n_sides + side
}

pub fn unflatten_index(l: usize, n_sides: usize) -> (usize, usize) {
    (l / n_sides, l % n_sides)
}

/// The wedge (cross-product) matrix: `hat(a) * b == a x b`.
pub fn hat(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Right-handed orthonormal completion of a unit normal.
///
/// The helper axis is `e_x`, or `e_y` when `|n_x| > 0.9`; `t1` is the helper with
/// its normal component removed and `t2 = n x t1`.
pub fn tangent_basis(n_bar: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>), WrenchError> {
    if !n_bar.iter().all(|c| c.is_finite()) {
        return Err(WrenchError::NonFinite);
    }
    let norm = n_bar.norm();
    if norm < 1e-12 {
        return Err(WrenchError::DegenerateNormal);
    }
    let n = n_bar / norm;
    let helper = tangent_helper(&n);
    let t1 = (helper - n * helper.dot(&n)).normalize();
    let t2 = n.cross(&t1);
    Ok((t1, t2))
}

pub(crate) fn tangent_helper(n: &Vector3<f64>) -> Vector3<f64> {
    if n.x.abs() > 0.9 {
        Vector3::y()
    } else {
        Vector3::x()
    }
}

/// Directional derivative of [`tangent_basis`] at unit `n` along tangent `delta`.
pub(crate) fn tangent_basis_derivative(n: &Vector3<f64>, delta: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = tangent_helper(n);
    let u = helper - n * helper.dot(n);
    let un = u.norm();
    let t1 = u / un;
    let du = -n * helper.dot(delta) - delta * helper.dot(n);
    let dt1 = (du - t1 * t1.dot(&du)) / un;
    let dt2 = delta.cross(&t1) + n.cross(&dt1);
    (dt1, dt2)
}

/// `n_sides` unit generators orthogonal to `n`, spaced by `2π / n_sides`, the first
/// aligned with `tangent_basis(n).0`.
pub fn generators(n: &Vector3<f64>, n_sides: usize) -> Result<Vec<Vector3<f64>>, WrenchError> {
    let (t1, t2) = tangent_basis(n)?;
    Ok(generator_angles(n_sides)
        .map(|phi| t1 * phi.cos() + t2 * phi.sin())
        .collect())
}

pub(crate) fn generator_angles(n_sides: usize) -> impl Iterator<Item = f64> {
    (0..n_sides).map(move |j| TAU * j as f64 / n_sides as f64)
}

/// The map `T_j = [I + mu*hat(g); hat(x)(I + mu*hat(g))]`.
pub fn wrench_map(x: &Vector3<f64>, g: &Vector3<f64>, mu: f64) -> Result<WrenchMap, WrenchError> {
    if !x.iter().chain(g.iter()).all(|c| c.is_finite()) || !mu.is_finite() {
        return Err(WrenchError::NonFinite);
    }
    let force = Matrix3::identity() + hat(g) * mu;
    let torque = hat(x) * force;
    let mut t = WrenchMap::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&force);
    t.fixed_view_mut::<3, 3>(3, 0).copy_from(&torque);
    Ok(t)
}

/// All wrench maps of a grasp, indexed like the wrench set.
pub fn wrench_maps(contacts: &[ContactSpec], model: &FrictionModel) -> Result<Vec<WrenchMap>, WrenchError> {
    // mu = 0 is accepted here (the pyramid collapses onto the normal)
    if !(model.mu >= 0.0) || model.n_sides < 3 {
        model.validate()?;
    }
    let mut maps = Vec::with_capacity(contacts.len() * model.n_sides);
    for c in contacts {
        for g in generators(&c.n_bar, model.n_sides)? {
            maps.push(wrench_map(&c.x, &g, model.mu)?);
        }
    }
    Ok(maps)
}

/// Basis wrenches `w_j^i = T_j^i n^i`. Generators always come from the mean
/// normals; `normals`, when given, replaces `n^i` (one per contact).
pub fn basis_wrenches(
    contacts: &[ContactSpec],
    model: &FrictionModel,
    normals: Option<&[Vector3<f64>]>,
) -> Result<WrenchSet, WrenchError> {
    if contacts.is_empty() {
        return Err(WrenchError::NoContacts);
    }
    if let Some(ns) = normals {
        if ns.len() != contacts.len() {
            return Err(WrenchError::LengthMismatch { expected: contacts.len(), got: ns.len() });
        }
    }
    let maps = wrench_maps(contacts, model)?;
    Ok(wrenches_from_maps(&maps, contacts, model.n_sides, normals))
}

pub(crate) fn wrenches_from_maps(
    maps: &[WrenchMap],
    contacts: &[ContactSpec],
    n_sides: usize,
    normals: Option<&[Vector3<f64>]>,
) -> WrenchSet {
    let wrenches = maps
        .iter()
        .enumerate()
        .map(|(l, t)| {
            let i = l / n_sides;
            let n = normals.map_or(contacts[i].n_bar, |ns| ns[i]);
            Wrench::from_vector(&(t * n))
        })
        .collect();
    WrenchSet::with_layout(wrenches, n_sides)
}
