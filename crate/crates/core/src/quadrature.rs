//! One-dimensional rules and the spherical shell rules built on them.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::Vec3;

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the Legendre recurrence, starting
/// from the Chebyshev-like guess `cos(pi (i + 3/4) / (n + 1/2))`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| half * wi).collect(),
    )
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Quadrature over the unit sphere S^{N-1} for N = 2 or 3.
#[derive(Debug, Clone)]
pub struct ShellQuadrature {
    pub dim: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl ShellQuadrature {
    /// Uniform trapezoid rule on the circle with `n` nodes at
    /// `(k + ½)·2π/n`, so no node lies on a coordinate axis.
    pub fn circle(n: usize) -> Result<Self> {
        if n < 3 {
            return invalid("circle rule needs at least 3 nodes");
        }
        let w = 2.0 * PI / n as f64;
        let nodes = (0..n)
            .map(|k| {
                let t = w * (k as f64 + 0.5);
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
        Ok(Self {
            dim: 2,
            n_theta: n,
            n_phi: 1,
            nodes,
            weights: vec![w; n],
        })
    }

    /// Gauss-Legendre in cos(theta) times the offset trapezoid rule in phi.
    pub fn sphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 3 {
            return invalid("sphere rule needs n_theta >= 2 and n_phi >= 3");
        }
        let (z, wz) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (zi, wi) in z.iter().zip(&wz) {
            let s = (1.0 - zi * zi).max(0.0).sqrt();
            for k in 0..n_phi {
                let p = dphi * (k as f64 + 0.5);
                nodes.push([s * p.cos(), s * p.sin(), *zi]);
                weights.push(wi * dphi);
            }
        }
        Ok(Self {
            dim: 3,
            n_theta,
            n_phi,
            nodes,
            weights,
        })
    }

    /// The default rule for a dimension: `n` angular nodes per direction.
    pub fn for_dim(dim: usize, n: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(n),
            3 => Self::sphere(n, n),
            _ => invalid(format!(
                "shell quadrature is defined for N = 2, 3 (got {dim})"
            )),
        }
    }

    pub fn area(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Angular resolution in radians.
    pub fn angular_step(&self) -> f64 {
        match self.dim {
            2 => 2.0 * PI / self.n_theta as f64,
            _ => (PI / self.n_theta as f64).max(2.0 * PI / self.n_phi as f64),
        }
    }
}

/// Area of the unit sphere S^{N-1}.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// Volume of the unit ball in R^N.
pub fn ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

/// Fixed-order pairwise summation; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
