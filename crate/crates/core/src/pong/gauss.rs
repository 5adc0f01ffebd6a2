//! Gaussian mass of a polygon by Green's theorem.
//!
//! With `Σ = diag(σ1², σ2²)` the density is the `y1`-derivative of
//! `F(y) = exp(-(y2-μ2)²/2σ2²) erf((y1-μ1)/σ1√2) / (2σ2√(2π))`, so the mass is
//! `∮ F dy2`, a sum of one-dimensional edge integrals. Each edge is split at
//! the points where either coordinate crosses `μ ± {0, 3, 9}σ`, and every piece
//! gets a Gauss-Legendre rule, which keeps narrow Gaussians resolved.

use std::f64::consts::PI;

use libm::erf;

use super::{PongError, Polygon2};

const WINDOW: [f64; 5] = [-9.0, -3.0, 0.0, 3.0, 9.0];
/// Beyond this many standard deviations the integrand is treated as zero.
const CUTOFF: f64 = 9.0;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = (1.0 - x) / 2.0;
        nodes[n - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[n - 1 - i] = w / 2.0;
    }
    (nodes, weights)
}

fn check(poly: &Polygon2, sigma: [f64; 2]) -> Result<bool, PongError> {
    if !(sigma[0] > 0.0 && sigma[1] > 0.0) || !sigma.iter().all(|s| s.is_finite()) {
        return Err(PongError::NonPositiveSigma);
    }
    if poly.len() < 3 {
        return Ok(false);
    }
    let area = poly.signed_area();
    let scale = poly.vertices.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if area < -1e-15 * scale * scale {
        return Err(PongError::Clockwise);
    }
    Ok(area > 1e-300)
}

/// Parameter values in `(0, 1)` where the edge `a -> b` crosses a window line,
/// plus the endpoints.
fn breakpoints(a: [f64; 2], b: [f64; 2], mu: [f64; 2], sigma: [f64; 2]) -> Vec<f64> {
    let mut r = vec![0.0, 1.0];
    for c in 0..2 {
        let d = b[c] - a[c];
        if d == 0.0 {
            continue;
        }
        for w in WINDOW {
            let t = (mu[c] + w * sigma[c] - a[c]) / d;
            if t > 0.0 && t < 1.0 {
                r.push(t);
            }
        }
    }
    r.sort_by(f64::total_cmp);
    r.dedup();
    r
}

/// Whether a segment piece is far outside the window in some coordinate.
fn negligible(p: [f64; 2], q: [f64; 2], mu: [f64; 2], sigma: [f64; 2], coords: &[usize]) -> bool {
    coords.iter().any(|&c| {
        let (lo, hi) = ((p[c] - mu[c]) / sigma[c], (q[c] - mu[c]) / sigma[c]);
        lo.min(hi) >= CUTOFF || lo.max(hi) <= -CUTOFF
    })
}

fn lerp(a: [f64; 2], b: [f64; 2], r: f64) -> [f64; 2] {
    [(1.0 - r) * a[0] + r * b[0], (1.0 - r) * a[1] + r * b[1]]
}

/// Visits `(r, weight)` quadrature points along edge `a -> b`, skipping pieces
/// where the factor in the `coords` directions vanishes.
fn edge_rule(
    a: [f64; 2],
    b: [f64; 2],
    mu: [f64; 2],
    sigma: [f64; 2],
    rule: &(Vec<f64>, Vec<f64>),
    coords: &[usize],
    mut visit: impl FnMut(f64, f64),
) {
    let br = breakpoints(a, b, mu, sigma);
    for piece in br.windows(2) {
        let (r0, r1) = (piece[0], piece[1]);
        if negligible(lerp(a, b, r0), lerp(a, b, r1), mu, sigma, coords) {
            continue;
        }
        let h = r1 - r0;
        for (t, w) in rule.0.iter().zip(&rule.1) {
            visit(r0 + h * t, h * w);
        }
    }
}

pub fn gauss_polygon(poly: &Polygon2, mu: [f64; 2], sigma: [f64; 2]) -> Result<f64, PongError> {
    gauss_polygon_with(poly, mu, sigma, 32)
}

/// Probability that `N(mu, diag(sigma²))` falls in the counterclockwise polygon.
pub fn gauss_polygon_with(poly: &Polygon2, mu: [f64; 2], sigma: [f64; 2], quad_nodes: usize) -> Result<f64, PongError> {
    if !check(poly, sigma)? {
        return Ok(0.0);
    }
    let rule = gauss_legendre(quad_nodes);
    let n = poly.len();
    let mut total = 0.0;
    for m in 0..n {
        let (a, b) = (poly.vertices[m], poly.vertices[(m + 1) % n]);
        let d = b[1] - a[1];
        if d == 0.0 {
            continue;
        }
        let mut s = 0.0;
        // the erf factor saturates instead of vanishing, so only y2 may be cut
        edge_rule(a, b, mu, sigma, &rule, &[1], |r, w| {
            let y = lerp(a, b, r);
            let u2 = (y[1] - mu[1]) / sigma[1];
            s += w * (-0.5 * u2 * u2).exp() * erf((y[0] - mu[0]) / (sigma[0] * std::f64::consts::SQRT_2));
        });
        total += d * s;
    }
    let p = total / (sigma[1] * (8.0 * PI).sqrt());
    Ok(p.clamp(0.0, 1.0))
}

/// Probability together with its gradient with respect to each vertex.
///
/// Moving vertex `a` of edge `a -> b = (E, D)` sweeps the edge with velocity
/// `(1 - r)·δa`, so the rate is `∫ p(y(r)) (1 - r) dr · (D, -E)`.
pub fn gauss_polygon_grad(
    poly: &Polygon2,
    mu: [f64; 2],
    sigma: [f64; 2],
    quad_nodes: usize,
) -> Result<(f64, Vec<[f64; 2]>), PongError> {
    let p = gauss_polygon_with(poly, mu, sigma, quad_nodes)?;
    let n = poly.len();
    let mut grad = vec![[0.0; 2]; n];
    if n < 3 || poly.area() <= 1e-300 {
        return Ok((p, grad));
    }
    let rule = gauss_legendre(quad_nodes);
    let norm = 1.0 / (2.0 * PI * sigma[0] * sigma[1]);
    for m in 0..n {
        let mb = (m + 1) % n;
        let (a, b) = (poly.vertices[m], poly.vertices[mb]);
        let (e, d) = (b[0] - a[0], b[1] - a[1]);
        let (mut ia, mut ib) = (0.0, 0.0);
        edge_rule(a, b, mu, sigma, &rule, &[0, 1], |r, w| {
            let y = lerp(a, b, r);
            let u = [(y[0] - mu[0]) / sigma[0], (y[1] - mu[1]) / sigma[1]];
            let f = norm * (-0.5 * (u[0] * u[0] + u[1] * u[1])).exp();
            ia += w * f * (1.0 - r);
            ib += w * f * r;
        });
        grad[m][0] += ia * d;
        grad[m][1] -= ia * e;
        grad[mb][0] += ib * d;
        grad[mb][1] -= ib * e;
    }
    Ok((p, grad))
}
