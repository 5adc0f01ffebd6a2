//! Implicit surfaces `s(x) = 0` (negative inside) and fields of tangent-plane
//! normal uncertainty over them.

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::random_sphere_point;
use crate::pong::VARIANCE_FLOOR;
use crate::wrench::{tangent_basis, ContactSpec, WrenchError};

/// Residual `|s|` at which projection stops.
pub const PROJECT_TOL: f64 = 1e-10;
pub const PROJECT_MAX_ITERS: usize = 50;
/// Largest `|s|` accepted as "on the surface" without projecting.
pub const ON_SURFACE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("singular point")]
    SingularPoint,
    #[error("projection did not converge (|s| = {0:e})")]
    NotConverged(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("log argument {0} <= 1 gives a non-positive variance")]
    NonPositiveVariance(f64),
    #[error(transparent)]
    Wrench(#[from] WrenchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    /// `s = |x - center| - radius`.
    Sphere { center: [f64; 3], radius: f64 },
    /// `s = normal·x - offset` with `normal` unit and pointing out of the body.
    Plane { normal: [f64; 3], offset: f64 },
    /// `s = sqrt(Σ ((x_k - c_k)/a_k)²) - 1`.
    Ellipsoid { center: [f64; 3], radii: [f64; 3] },
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

impl Surface {
    pub fn sphere(radius: f64) -> Self {
        Self::Sphere { center: [0.0; 3], radius }
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let ok = match *self {
            Self::Sphere { center, radius } => center.iter().all(|c| c.is_finite()) && radius > 0.0 && radius.is_finite(),
            Self::Plane { normal, offset } => {
                offset.is_finite() && normal.iter().all(|c| c.is_finite()) && (v3(normal).norm() - 1.0).abs() < 1e-9
            }
            Self::Ellipsoid { center, radii } => {
                center.iter().all(|c| c.is_finite()) && radii.iter().all(|a| *a > 0.0 && a.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SurfaceError::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        match *self {
            Self::Sphere { center, radius } => (x - v3(center)).norm() - radius,
            Self::Plane { normal, offset } => v3(normal).dot(x) - offset,
            Self::Ellipsoid { center, radii } => {
                let u = (x - v3(center)).component_div(&v3(radii));
                u.norm() - 1.0
            }
        }
    }

    pub fn grad(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            Self::Sphere { center, .. } => {
                let d = x - v3(center);
                let r = d.norm();
                if r == 0.0 {
                    Vector3::zeros()
                } else {
                    d / r
                }
            }
            Self::Plane { normal, .. } => v3(normal),
            Self::Ellipsoid { center, radii } => {
                let a = v3(radii);
                let u = (x - v3(center)).component_div(&a);
                let q = u.norm();
                if q == 0.0 {
                    Vector3::zeros()
                } else {
                    u.component_div(&a) / q
                }
            }
        }
    }

    pub fn hess(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        match *self {
            Self::Sphere { center, .. } => {
                let d = x - v3(center);
                let r = d.norm();
                if r == 0.0 {
                    return Matrix3::zeros();
                }
                let e = d / r;
                (Matrix3::identity() - e * e.transpose()) / r
            }
            Self::Plane { .. } => Matrix3::zeros(),
            Self::Ellipsoid { center, radii } => {
                let a = v3(radii);
                let inv2 = Matrix3::from_diagonal(&a.map(|v| 1.0 / (v * v)));
                let d = x - v3(center);
                let q = d.component_div(&a).norm();
                if q == 0.0 {
                    return Matrix3::zeros();
                }
                let g = inv2 * d;
                inv2 / q - g * g.transpose() / (q * q * q)
            }
        }
    }

    /// Damped Newton iteration `x <- x - t s ∇s/|∇s|²`, halving `t` until `|s|`
    /// decreases.
    pub fn project(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, SurfaceError> {
        let mut p = *x;
        let mut s = self.value(&p);
        for _ in 0..PROJECT_MAX_ITERS {
            if s.abs() <= PROJECT_TOL {
                return Ok(p);
            }
            let g = self.grad(&p);
            let gg = g.norm_squared();
            if !(gg > 1e-24) {
                return Err(SurfaceError::SingularPoint);
            }
            let step = g * (s / gg);
            let mut t = 1.0;
            loop {
                let q = p - step * t;
                let sq = self.value(&q);
                if sq.abs() < s.abs() || t < 1e-6 {
                    p = q;
                    s = sq;
                    break;
                }
                t *= 0.5;
            }
        }
        if s.abs() <= PROJECT_TOL {
            Ok(p)
        } else {
            Err(SurfaceError::NotConverged(s.abs()))
        }
    }

    /// Random surface point. Uniform on spheres; ellipsoids use the radial image
    /// of a uniform direction; planes use a uniform point of the unit disk around
    /// the foot of the origin.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vector3<f64>, SurfaceError> {
        match *self {
            Self::Sphere { center, radius } => Ok(v3(center) + random_sphere_point(rng, radius)),
            Self::Plane { normal, offset } => {
                let n = v3(normal);
                let (t1, t2) = tangent_basis(&n)?;
                let r = rng.random::<f64>().sqrt();
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                Ok(n * offset + (t1 * phi.cos() + t2 * phi.sin()) * r)
            }
            Self::Ellipsoid { center, radii } => {
                let d = random_sphere_point(rng, 1.0);
                let u = d.component_mul(&v3(radii));
                let q = u.component_div(&v3(radii)).norm();
                self.project(&(v3(center) + u / q))
            }
        }
    }

    /// Outward unit normal `∇s/|∇s|`.
    pub fn outward_normal(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, SurfaceError> {
        self.grad(x).try_normalize(1e-12).ok_or(SurfaceError::SingularPoint)
    }
}

/// Principal curvatures (`|kappa1| >= |kappa2|`) and directions at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub kappa1: f64,
    pub kappa2: f64,
    pub v1: Vector3<f64>,
    pub v2: Vector3<f64>,
}

/// Eigenpairs of `S = -(I - N Nᵀ) ∇²s / |∇s|` on the tangent plane, with
/// `N = ∇s/|∇s|`. A sphere of radius `r` gives `κ = -1/r`. `v2 = n̄ x v1` for the
/// inward normal `n̄ = -N`, so `(v1, v2, n̄)` is right-handed.
pub fn shape_operator(surface: &Surface, x: &Vector3<f64>) -> Result<Curvature, SurfaceError> {
    let g = surface.grad(x);
    let gn = g.norm();
    if !(gn > 1e-12) {
        return Err(SurfaceError::SingularPoint);
    }
    let n = g / gn;
    let h = surface.hess(x);
    let (e1, e2) = tangent_basis(&n)?;
    // (I - N Nᵀ) drops out once both sides are tangent
    let m = Matrix2::new(
        e1.dot(&(h * e1)),
        e1.dot(&(h * e2)),
        e2.dot(&(h * e1)),
        e2.dot(&(h * e2)),
    ) * (-1.0 / gn);
    let m = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let (a, b) = if eig.eigenvalues[0].abs() >= eig.eigenvalues[1].abs() { (0, 1) } else { (1, 0) };
    let v1 = (e1 * eig.eigenvectors[(0, a)] + e2 * eig.eigenvectors[(1, a)]).normalize();
    let v2 = (-n).cross(&v1);
    Ok(Curvature { kappa1: eig.eigenvalues[a], kappa2: eig.eigenvalues[b], v1, v2 })
}

/// Tangent-plane variance model over a surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UncertaintyField {
    /// The same variance everywhere.
    Constant { sigma_sq: f64 },
    /// Isotropic `coef · x₃²`; the toy field uses `coef = 100`.
    Polar { coef: f64 },
    /// Isotropic `scale · exp(Re Y₄²(x/|x|))`; the toy field uses `scale = 0.01`.
    SphericalHarmonic { scale: f64 },
    /// `σ_m² = log(k_curv |κ_m| + h)` along the principal directions.
    Curvature { k_curv: f64, h: f64 },
}

pub fn polar_field() -> UncertaintyField {
    UncertaintyField::Polar { coef: 100.0 }
}

pub fn harmonic_field() -> UncertaintyField {
    UncertaintyField::SphericalHarmonic { scale: 0.01 }
}

pub fn curvature_field(k_curv: f64, h: f64) -> Result<UncertaintyField, SurfaceError> {
    let f = UncertaintyField::Curvature { k_curv, h };
    f.validate()?;
    Ok(f)
}

/// `Re Y₄²` with the complex orthonormal normalization,
/// `(3/8) sqrt(5/2π) (x² - y²)(7z² - r²) / r⁴`, evaluated in Cartesian form so
/// the poles need no special case.
pub fn re_y42(x: &Vector3<f64>) -> f64 {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return 0.0;
    }
    let c = 3.0 / 8.0 * (5.0 / (2.0 * std::f64::consts::PI)).sqrt();
    c * (x.x * x.x - x.y * x.y) * (7.0 * x.z * x.z - r2) / (r2 * r2)
}

impl UncertaintyField {
    pub fn validate(&self) -> Result<(), SurfaceError> {
        let ok = match *self {
            Self::Constant { sigma_sq } => sigma_sq >= 0.0 && sigma_sq.is_finite(),
            Self::Polar { coef } => coef >= 0.0 && coef.is_finite(),
            Self::SphericalHarmonic { scale } => scale >= 0.0 && scale.is_finite(),
            Self::Curvature { k_curv, h } => k_curv > 0.0 && h > 0.0 && k_curv.is_finite() && h.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SurfaceError::InvalidParameter(format!("{self:?}")))
        }
    }

    fn raw(&self, surface: &Surface, x: &Vector3<f64>) -> Result<([f64; 2], Option<Curvature>), SurfaceError> {
        Ok(match *self {
            Self::Constant { sigma_sq } => ([sigma_sq; 2], None),
            Self::Polar { coef } => ([coef * x.z * x.z; 2], None),
            Self::SphericalHarmonic { scale } => ([scale * re_y42(x).exp(); 2], None),
            Self::Curvature { k_curv, h } => {
                let c = shape_operator(surface, x)?;
                let mut v = [0.0; 2];
                for (m, k) in [c.kappa1, c.kappa2].into_iter().enumerate() {
                    let arg = k_curv * k.abs() + h;
                    if arg <= 1.0 {
                        return Err(SurfaceError::NonPositiveVariance(arg));
                    }
                    v[m] = arg.ln();
                }
                (v, Some(c))
            }
        })
    }

    /// Tangent variances at `x`, floored at [`VARIANCE_FLOOR`].
    pub fn variances(&self, surface: &Surface, x: &Vector3<f64>) -> Result<[f64; 2], SurfaceError> {
        let (v, _) = self.raw(surface, x)?;
        Ok(v.map(|s| s.max(VARIANCE_FLOOR)))
    }

    /// Mean of the two floored variances.
    pub fn mean_variance(&self, surface: &Surface, x: &Vector3<f64>) -> Result<f64, SurfaceError> {
        let v = self.variances(surface, x)?;
        Ok(0.5 * (v[0] + v[1]))
    }
}

/// Contact at the surface point nearest `x` (projected when `|s(x)| > 1e-6`),
/// with inward mean normal `-∇s/|∇s|` and the field's frame and variances.
pub fn contact_at(surface: &Surface, field: &UncertaintyField, x: &Vector3<f64>) -> Result<ContactSpec, SurfaceError> {
    surface.validate()?;
    field.validate()?;
    let p = if surface.value(x).abs() > ON_SURFACE_TOL { surface.project(x)? } else { *x };
    let n_bar = -surface.outward_normal(&p)?;
    let (v, curv) = field.raw(surface, &p)?;
    let [s1, s2] = v.map(|s| s.max(VARIANCE_FLOOR));
    Ok(match curv {
        Some(c) => ContactSpec::with_frame(p, n_bar, c.v1, c.v2, s1, s2)?,
        None => ContactSpec::new(p, n_bar, s1, s2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ellipsoid() -> Surface {
        Surface::Ellipsoid { center: [0.01, -0.02, 0.0], radii: [0.05, 0.03, 0.08] }
    }

    #[test]
    fn sphere_contact_points_inward() {
        let s = Surface::sphere(0.05);
        let c = contact_at(&s, &polar_field(), &Vector3::new(0.0, 0.0, 0.05)).unwrap();
        assert!((c.n_bar - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!((c.sigma1_sq - 0.25).abs() < 1e-15);
    }

    #[test]
    fn polar_field_floored_at_equator() {
        let s = Surface::sphere(0.05);
        let c = contact_at(&s, &polar_field(), &Vector3::new(0.05, 0.0, 0.0)).unwrap();
        assert_eq!(c.sigma1_sq, VARIANCE_FLOOR);
        assert_eq!(c.sigma2_sq, VARIANCE_FLOOR);
    }

    #[test]
    fn sphere_curvature() {
        for r in [0.05, 1.0, 3.0] {
            let s = Surface::sphere(r);
            let c = shape_operator(&s, &Vector3::new(0.3, -0.5, 0.2).normalize().scale(r)).unwrap();
            assert!((c.kappa1 + 1.0 / r).abs() < 1e-12 && (c.kappa2 + 1.0 / r).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_curvature_at_axis() {
        // at (a, 0, 0) the principal curvatures are -a/b² and -a/c²
        let s = Surface::Ellipsoid { center: [0.0; 3], radii: [1.0, 2.0, 3.0] };
        let c = shape_operator(&s, &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((c.kappa1 + 0.25).abs() < 1e-12, "{}", c.kappa1);
        assert!((c.kappa2 + 1.0 / 9.0).abs() < 1e-12, "{}", c.kappa2);
        assert!(c.v1.y.abs() > 1.0 - 1e-12);
    }

    #[test]
    fn plane_has_zero_curvature() {
        let s = Surface::Plane { normal: [0.0, 0.0, 1.0], offset: 0.0 };
        let c = shape_operator(&s, &Vector3::new(0.3, 0.1, 0.0)).unwrap();
        assert_eq!((c.kappa1, c.kappa2), (0.0, 0.0));
        let f = curvature_field(0.5, 2.0).unwrap();
        let v = f.variances(&s, &Vector3::new(-1.0, 2.0, 0.0)).unwrap();
        assert!((v[0] - 2f64.ln()).abs() < 1e-15 && (v[1] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn harmonic_values() {
        let p = Vector3::new(0.0, 0.0, 0.05);
        assert_eq!(re_y42(&p), 0.0);
        assert_eq!(re_y42(&-p), 0.0);
        let x = Vector3::new(0.02, 0.01, 0.03);
        let rot = Vector3::new(-x.x, -x.y, x.z);
        assert!((re_y42(&x) - re_y42(&rot)).abs() < 1e-15);
        // equator along x: (3/8) sqrt(5/2π) · 1 · (-1)
        let want = -3.0 / 8.0 * (5.0 / (2.0 * std::f64::consts::PI)).sqrt();
        assert!((re_y42(&Vector3::x()) - want).abs() < 1e-15);
    }

    #[test]
    fn curvature_log_argument_checked() {
        let f = UncertaintyField::Curvature { k_curv: 0.01, h: 0.5 };
        let e = f.variances(&Surface::sphere(1.0), &Vector3::z()).unwrap_err();
        assert!(matches!(e, SurfaceError::NonPositiveVariance(_)));
        assert!(curvature_field(0.0, 2.0).is_err());
    }

    #[test]
    fn singular_gradient() {
        let s = Surface::sphere(1.0);
        assert_eq!(shape_operator(&s, &Vector3::zeros()).unwrap_err(), SurfaceError::SingularPoint);
    }

    #[test]
    fn projection_lands_on_surface() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in [Surface::sphere(0.05), ellipsoid()] {
            for _ in 0..50 {
                let x = Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                let p = s.project(&x).unwrap();
                assert!(s.value(&p).abs() <= PROJECT_TOL);
                assert!((s.project(&p).unwrap() - p).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn curvature_frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = curvature_field(0.01, std::f64::consts::E).unwrap();
        for _ in 0..20 {
            let x = ellipsoid().sample(&mut rng).unwrap();
            let c = contact_at(&ellipsoid(), &f, &x).unwrap();
            assert!(c.t1.dot(&c.n_bar).abs() < 1e-9 && c.t2.dot(&c.n_bar).abs() < 1e-9);
            assert!((c.t1.cross(&c.t2) - c.n_bar).norm() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = ellipsoid();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"kind\":\"ellipsoid\""));
        assert_eq!(serde_json::from_str::<Surface>(&j).unwrap(), s);
        let f: UncertaintyField = serde_json::from_str(r#"{"kind":"polar","coef":100.0}"#).unwrap();
        assert_eq!(f, polar_field());
    }
}
