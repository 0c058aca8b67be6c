//! Surfaces from spherical support data.
//!
//! A positive function `g` on S² determines the map
//! `X(n) = g(n)·n + ∇_{S²} g(n)`, whose differential is the Weingarten matrix
//! `W = ∇²g + g·I` in an orthonormal frame. Principal radii are the
//! eigenvalues of `W`; `tr W = Δ_{S²} g + 2g` vanishes for minimal surfaces.
//!
//! Frame: `e_θ`, `e_φ` (unit vectors along increasing θ and φ). Raw Hessian
//! entries depend on this choice; eigenvalues, trace, determinant and the
//! fundamental form invariants do not.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::spherical::SphericalFunction;
use crate::Vec3;

/// Determinant threshold below which Gauss curvature is reported undefined.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphericalDerivatives {
    /// `(g_θ, g_φ / sinθ)`.
    pub gradient: [f64; 2],
    /// Orthonormal-frame Hessian `[[h11, h12], [h12, h22]]` (frame dependent).
    pub hessian: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceSample {
    pub n: Vec3,
    #[serde(rename = "X")]
    pub x: Vec3,
    /// First fundamental form of `X` in the pulled-back orthonormal frame,
    /// from the Weingarten matrix.
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub radii: (f64, f64),
    /// `None` when `|det W| ≤ SINGULAR_TOL`.
    pub gauss_k: Option<f64>,
    pub mean_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalForm {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub conformality_defect: f64,
    pub branch_point: bool,
}

fn require_sphere(g: &SphericalFunction) -> Result<()> {
    if g.sphere_dim != 2 {
        return invalid("support geometry needs a function on S²");
    }
    Ok(())
}

pub fn unit_normal(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn frame(theta: f64, phi: f64) -> (Vec3, Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (
        [st * cp, st * sp, ct],
        [ct * cp, ct * sp, -st],
        [-sp, cp, 0.0],
    )
}

/// Central-difference derivatives at node `(j, k)`; needs `1 ≤ j ≤ n_theta−2`.
pub fn spherical_derivatives(
    g: &SphericalFunction,
    j: usize,
    k: usize,
) -> Result<SphericalDerivatives> {
    require_sphere(g)?;
    if j == 0 || j + 1 >= g.n_theta {
        return Err(Error::InsufficientStencil { row: j });
    }
    let np = g.n_phi;
    let (kp, km) = ((k + 1) % np, (k + np - 1) % np);
    let (dt, dp) = (g.d_theta(), g.d_phi());
    let c = g.at(j, k);
    let g_t = (g.at(j + 1, k) - g.at(j - 1, k)) / (2.0 * dt);
    let g_p = (g.at(j, kp) - g.at(j, km)) / (2.0 * dp);
    let g_tt = (g.at(j + 1, k) - 2.0 * c + g.at(j - 1, k)) / (dt * dt);
    let g_pp = (g.at(j, kp) - 2.0 * c + g.at(j, km)) / (dp * dp);
    let g_tp =
        (g.at(j + 1, kp) - g.at(j + 1, km) - g.at(j - 1, kp) + g.at(j - 1, km)) / (4.0 * dt * dp);
    let t = g.theta(j);
    let (s, co) = t.sin_cos();
    let cot = co / s;
    let h11 = g_tt;
    let h12 = (g_tp - cot * g_p) / s;
    let h22 = g_pp / (s * s) + cot * g_t;
    Ok(SphericalDerivatives {
        gradient: [g_t, g_p / s],
        hessian: [[h11, h12], [h12, h22]],
    })
}

/// `X(n) = g·n + ∇_{S²} g` at node `(j, k)`.
pub fn immersion_x(g: &SphericalFunction, j: usize, k: usize) -> Result<Vec3> {
    let d = spherical_derivatives(g, j, k)?;
    let (n, et, ep) = frame(g.theta(j), g.phi(k));
    let v = g.at(j, k);
    Ok([
        v * n[0] + d.gradient[0] * et[0] + d.gradient[1] * ep[0],
        v * n[1] + d.gradient[0] * et[1] + d.gradient[1] * ep[1],
        v * n[2] + d.gradient[0] * et[2] + d.gradient[1] * ep[2],
    ])
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(a: f64, b: f64, d: f64) -> (f64, f64) {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (m - r, m + r)
}

/// The Weingarten matrix `∇²g + g·I` at node `(j, k)`.
pub fn weingarten(g: &SphericalFunction, j: usize, k: usize) -> Result<[[f64; 2]; 2]> {
    let d = spherical_derivatives(g, j, k)?;
    let v = g.at(j, k);
    Ok([
        [d.hessian[0][0] + v, d.hessian[0][1]],
        [d.hessian[1][0], d.hessian[1][1] + v],
    ])
}

pub fn curvature_report(g: &SphericalFunction, j: usize, k: usize) -> Result<SurfaceSample> {
    let w = weingarten(g, j, k)?;
    let x = immersion_x(g, j, k)?;
    let (a, b, d) = (w[0][0], w[0][1], w[1][1]);
    let radii = sym2_eigenvalues(a, b, d);
    let det = a * d - b * b;
    Ok(SurfaceSample {
        n: unit_normal(g.theta(j), g.phi(k)),
        x,
        e: a * a + b * b,
        f: a * b + b * d,
        g: b * b + d * d,
        radii,
        gauss_k: (det.abs() > SINGULAR_TOL).then(|| 1.0 / det),
        mean_residual: a + d,
    })
}

/// Branch-point threshold on `max(E, G)`: the larger of `1e-10·s²` and the
/// squared truncation scale `(Δθ²·s)²`, with `s = max |g|`.
pub fn branch_threshold(g: &SphericalFunction) -> f64 {
    let s = g
        .values
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let dt = g.d_theta().max(g.d_phi());
    (1e-10 * s * s).max((dt * dt * s).powi(2))
}

/// First fundamental form from central differences of `X` over the one-ring
/// of `(j, k)`; needs `2 ≤ j ≤ n_theta−3`.
pub fn fundamental_form(g: &SphericalFunction, j: usize, k: usize) -> Result<FundamentalForm> {
    fundamental_form_with(g, j, k, branch_threshold(g))
}

/// [`fundamental_form`] with a precomputed [`branch_threshold`].
pub fn fundamental_form_with(
    g: &SphericalFunction,
    j: usize,
    k: usize,
    threshold: f64,
) -> Result<FundamentalForm> {
    require_sphere(g)?;
    if j < 2 || j + 2 >= g.n_theta {
        return Err(Error::InsufficientStencil { row: j });
    }
    let np = g.n_phi;
    let xu_p = immersion_x(g, j + 1, k)?;
    let xu_m = immersion_x(g, j - 1, k)?;
    let xv_p = immersion_x(g, j, (k + 1) % np)?;
    let xv_m = immersion_x(g, j, (k + np - 1) % np)?;
    let s = g.theta(j).sin();
    let (dt, dp) = (g.d_theta(), g.d_phi());
    let mut xu = [0.0; 3];
    let mut xv = [0.0; 3];
    for a in 0..3 {
        xu[a] = (xu_p[a] - xu_m[a]) / (2.0 * dt);
        xv[a] = (xv_p[a] - xv_m[a]) / (2.0 * dp * s);
    }
    let e = crate::field::dot(&xu, &xu);
    let f = crate::field::dot(&xu, &xv);
    let gg = crate::field::dot(&xv, &xv);
    let thr = threshold;
    let branch = e.max(gg) < thr;
    let denom = e.max(gg).max(thr);
    Ok(FundamentalForm {
        e,
        f,
        g: gg,
        conformality_defect: (e - gg).abs().max(f.abs()) / denom,
        branch_point: branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactSample {
    pub j: usize,
    pub k: usize,
    /// Location of the support boundary along the extrapolation direction.
    pub theta: f64,
    pub phi: f64,
    pub cos_alpha: f64,
    pub angle: f64,
    /// `|X|` extrapolated to the support boundary.
    pub x_norm: f64,
}

/// Support nodes (`g > 0`, with a full one-ring) that have a θ- or
/// φ-neighbor outside the support.
pub fn support_boundary_nodes(g: &SphericalFunction) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if g.sphere_dim != 2 {
        return out;
    }
    let np = g.n_phi;
    for j in 1..g.n_theta.saturating_sub(1) {
        for k in 0..np {
            if g.at(j, k) <= 0.0 {
                continue;
            }
            let outside = g.at(j - 1, k) <= 0.0
                || g.at(j + 1, k) <= 0.0
                || g.at(j, (k + 1) % np) <= 0.0
                || g.at(j, (k + np - 1) % np) <= 0.0;
            if outside {
                out.push((j, k));
            }
        }
    }
    out
}

/// Quadratic through `(0, q0), (1, q1), (2, q2)` evaluated at `s`.
fn quad_extrapolate(q0: f64, q1: f64, q2: f64, s: f64) -> f64 {
    q0 + s * (-1.5 * q0 + 2.0 * q1 - 0.5 * q2) + 0.5 * s * s * (q0 - 2.0 * q1 + q2)
}

/// Contact angle between the surface and the sphere of radius `√(2M)` at
/// each boundary node: `cos α = (n·X)/√(2M)` extrapolated to the zero of `g`.
///
/// Each node must satisfy `|g| ≤ boundary_tol`.
pub fn contact_angle(
    g: &SphericalFunction,
    boundary: &[(usize, usize)],
    mass: f64,
    boundary_tol: f64,
) -> Result<Vec<ContactSample>> {
    require_sphere(g)?;
    if !(mass > 0.0) {
        return invalid("mass must be positive");
    }
    let radius = (2.0 * mass).sqrt();
    let np = g.n_phi;
    boundary
        .par_iter()
        .map(|&(j, k)| {
            let v = g.at(j, k);
            if v.abs() > boundary_tol {
                return Err(Error::InvalidBoundary(format!(
                    "node ({j}, {k}) has g = {v:.3e}, beyond the boundary tolerance {boundary_tol:.3e}"
                )));
            }
            // inward steps (dj, dk) away from the outside neighbour
            let (dj, dk): (isize, isize) = if j >= 1 && g.at(j - 1, k) <= 0.0 {
                (1, 0)
            } else if j + 1 < g.n_theta && g.at(j + 1, k) <= 0.0 {
                (-1, 0)
            } else if g.at(j, (k + np - 1) % np) <= 0.0 {
                (0, 1)
            } else if g.at(j, (k + 1) % np) <= 0.0 {
                (0, -1)
            } else {
                return Err(Error::InvalidBoundary(format!(
                    "node ({j}, {k}) has no neighbour outside the support"
                )));
            };
            let node = |step: isize| -> Result<(usize, usize)> {
                let jj = j as isize + dj * step;
                if jj < 0 || jj as usize >= g.n_theta {
                    return Err(Error::InsufficientStencil { row: j });
                }
                let kk = (k as isize + dk * step).rem_euclid(np as isize) as usize;
                Ok((jj as usize, kk))
            };
            let (oj, ok) = node(-1)?;
            let outside = g.at(oj, ok);
            // fraction of a step from (j, k) toward the outside neighbour
            let frac = v / (v - outside);
            let s = -frac;
            let mut nx = [0.0; 3];
            let mut xn = [0.0; 3];
            for step in 0..3 {
                let (jj, kk) = node(step as isize)?;
                let x = immersion_x(g, jj, kk)?;
                let n = unit_normal(g.theta(jj), g.phi(kk));
                nx[step] = crate::field::dot(&n, &x);
                xn[step] = crate::field::norm(&x);
            }
            let cos_alpha = (quad_extrapolate(nx[0], nx[1], nx[2], s) / radius).clamp(-1.0, 1.0);
            let (theta, phi) = if dj != 0 {
                (g.theta(j) - (dj as f64) * frac * g.d_theta(), g.phi(k))
            } else {
                (g.theta(j), g.phi(k) - (dk as f64) * frac * g.d_phi())
            };
            Ok(ContactSample {
                j,
                k,
                theta,
                phi,
                cos_alpha,
                angle: cos_alpha.acos(),
                x_norm: quad_extrapolate(xn[0], xn[1], xn[2], s),
            })
        })
        .collect()
}

/// Default boundary tolerance: a node next to the zero set of `g` is within
/// one step of it and `|∇g| ≤ √(2M)`.
pub fn default_boundary_tol(g: &SphericalFunction, mass: f64) -> f64 {
    2.0 * g.d_theta().max(g.d_phi()) * (2.0 * mass).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{catenoid_g, catenoid_slope, catenoid_theta0, CATENOID_MASS};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn catenoid(nt: usize, np: usize) -> SphericalFunction {
        SphericalFunction::sphere_from_fn(nt, np, |t, _| catenoid_g(t).unwrap().0).unwrap()
    }

    #[test]
    fn constant_function_is_a_round_sphere() {
        let g = SphericalFunction::sphere_from_fn(16, 32, |_, _| 2.0).unwrap();
        let d = spherical_derivatives(&g, 5, 3).unwrap();
        assert_eq!(d.gradient, [0.0, 0.0]);
        let r = curvature_report(&g, 5, 3).unwrap();
        assert!((r.radii.0 - 2.0).abs() < 1e-12 && (r.radii.1 - 2.0).abs() < 1e-12);
        assert!((r.gauss_k.unwrap() - 0.25).abs() < 1e-12);
        let x = immersion_x(&g, 5, 3).unwrap();
        let n = unit_normal(g.theta(5), g.phi(3));
        for a in 0..3 {
            assert!((x[a] - 2.0 * n[a]).abs() < 1e-14);
        }
        let ff = fundamental_form(&g, 5, 3).unwrap();
        assert!(ff.conformality_defect < 1e-12);
        assert!(ff.f.abs() < 1e-12);
        assert!((ff.e - 4.0).abs() < 4.0 * g.d_theta().powi(2));
        assert!(matches!(
            spherical_derivatives(&g, 0, 0),
            Err(Error::InsufficientStencil { row: 0 })
        ));
    }

    #[test]
    fn linear_functions_are_annihilated() {
        let g = SphericalFunction::sphere_from_fn(64, 128, |t, _| t.cos()).unwrap();
        let w = weingarten(&g, 20, 7).unwrap();
        for row in w {
            for v in row {
                assert!(v.abs() < 1e-3, "{v}");
            }
        }
        let p = [0.3, -0.2, 0.5];
        let h = SphericalFunction::sphere_from_fn(64, 128, |t, f| {
            let n = unit_normal(t, f);
            n[0] * p[0] + n[1] * p[1] + n[2] * p[2]
        })
        .unwrap();
        let x = immersion_x(&h, 30, 40).unwrap();
        for a in 0..3 {
            assert!((x[a] - p[a]).abs() < 1e-3);
        }
        assert!(fundamental_form(&h, 30, 40).unwrap().branch_point);
    }

    #[test]
    fn second_harmonic_is_an_eigenfunction() {
        let g =
            SphericalFunction::sphere_from_fn(64, 128, |t, _| 3.0 * t.cos().powi(2) - 1.0).unwrap();
        for j in [10, 20, 40] {
            let d = spherical_derivatives(&g, j, 5).unwrap();
            let lap = d.hessian[0][0] + d.hessian[1][1];
            assert!(
                (lap + 6.0 * g.at(j, 5)).abs() < 10.0 * g.d_theta().powi(2),
                "{lap}"
            );
        }
    }

    #[test]
    fn catenoid_equator_radii() {
        let g = catenoid(129, 256);
        let j = 64;
        assert!((g.theta(j) - FRAC_PI_2).abs() < 1e-12);
        let r = curvature_report(&g, j, 0).unwrap();
        let want = 2.0 / catenoid_slope();
        assert!(
            (r.radii.0 + want).abs() < 1e-3 && (r.radii.1 - want).abs() < 1e-3,
            "{:?}",
            r.radii
        );
        assert!((r.radii.0 + r.radii.1 - r.mean_residual).abs() < 1e-12);
    }

    #[test]
    fn catenoid_contact_angle_is_right() {
        let g = catenoid(128, 256);
        let b = support_boundary_nodes(&g);
        assert_eq!(b.len(), 2 * 256);
        let tol = default_boundary_tol(&g, CATENOID_MASS);
        let c = contact_angle(&g, &b, CATENOID_MASS, tol).unwrap();
        let t0 = catenoid_theta0();
        for s in &c {
            assert!((s.angle - FRAC_PI_2).abs() < 1e-2);
            assert!((s.x_norm - 1.0).abs() < 1e-3, "{}", s.x_norm);
            let target = if s.theta < FRAC_PI_2 { t0 } else { PI - t0 };
            assert!((s.theta - target).abs() < g.d_theta());
        }
    }

    #[test]
    fn nonzero_boundary_is_rejected() {
        let g = SphericalFunction::sphere_from_fn(32, 64, |t, _| if t < 1.0 { 0.5 } else { -0.5 })
            .unwrap();
        let b = support_boundary_nodes(&g);
        assert!(!b.is_empty());
        assert!(matches!(
            contact_angle(&g, &b, 0.5, 0.1),
            Err(Error::InvalidBoundary(_))
        ));
    }
}
