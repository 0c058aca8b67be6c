//! Closed-form reference solutions.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{GridSpec, Probe, ScalarField};
use crate::mollifier::{check_eps, BetaProfile};
use crate::quadrature::gauss_legendre;
use crate::Vec3;

/// Degree-one homogeneous reference solutions. Planar solutions vary along
/// `x₁`; the catenoid is axisymmetric about `x₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ExactKind {
    HalfPlane { mass: f64 },
    Wedge { alpha: f64 },
    TwoPlane { alpha: f64, beta: f64 },
    Catenoid,
    Constant { c: f64 },
}

impl ExactKind {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            ExactKind::HalfPlane { mass } if !(mass > 0.0) => invalid("half_plane needs M > 0"),
            ExactKind::Wedge { alpha } if !(alpha > 0.0) => invalid("wedge needs α > 0"),
            ExactKind::TwoPlane { alpha, beta } if !(alpha > 0.0 && beta > 0.0) => {
                invalid("two_plane needs α, β > 0")
            }
            ExactKind::Catenoid if dim != 3 => {
                invalid("the catenoid solution is three-dimensional")
            }
            ExactKind::Constant { c } if !c.is_finite() => invalid("constant must be finite"),
            _ => Ok(()),
        }
    }

    /// Value and gradient at `x`.
    pub fn eval(&self, x: &Vec3) -> (f64, Vec3) {
        match *self {
            ExactKind::HalfPlane { mass } => {
                let a = (2.0 * mass).sqrt();
                if x[0] > 0.0 {
                    (a * x[0], [a, 0.0, 0.0])
                } else {
                    (0.0, [0.0; 3])
                }
            }
            ExactKind::Wedge { alpha } => (alpha * x[0].abs(), [alpha * x[0].signum(), 0.0, 0.0]),
            ExactKind::TwoPlane { alpha, beta } => {
                if x[0] > 0.0 {
                    (alpha * x[0], [alpha, 0.0, 0.0])
                } else {
                    (beta * x[0], [beta, 0.0, 0.0])
                }
            }
            ExactKind::Constant { c } => (c, [0.0; 3]),
            ExactKind::Catenoid => catenoid_eval(x),
        }
    }

    /// The mass for which this solution satisfies the free-boundary
    /// condition, when it is determined by the solution itself.
    pub fn natural_mass(&self) -> Option<f64> {
        match *self {
            ExactKind::HalfPlane { mass } => Some(mass),
            ExactKind::TwoPlane { alpha, beta } => Some(0.5 * (alpha * alpha - beta * beta)),
            ExactKind::Catenoid => Some(CATENOID_MASS),
            _ => None,
        }
    }
}

/// Mass implied by the unit boundary gradient of the normalized catenoid.
pub const CATENOID_MASS: f64 = 0.5;

/// An exact solution viewed as a [`Probe`].
#[derive(Debug, Clone, Copy)]
pub struct ExactField {
    pub kind: ExactKind,
    pub dim: usize,
}

impl ExactField {
    pub fn new(kind: ExactKind, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid("dimension must be 1, 2 or 3");
        }
        kind.validate(dim)?;
        Ok(Self { kind, dim })
    }
}

impl Probe for ExactField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        Ok(self.kind.eval(x))
    }
}

/// Samples `kind` at every node of a box grid.
pub fn make_exact_field(kind: ExactKind, grid: GridSpec) -> Result<ScalarField> {
    grid.validate()?;
    kind.validate(grid.dim())?;
    ScalarField::from_fn_box(grid, |x| kind.eval(x).0)
}

/// Samples `kind` on the nodes of a ball domain.
pub fn make_exact_field_ball(
    kind: ExactKind,
    grid: GridSpec,
    center: Vec<f64>,
    radius: f64,
) -> Result<ScalarField> {
    grid.validate()?;
    kind.validate(grid.dim())?;
    ScalarField::from_fn_ball(grid, center, radius, |x| kind.eval(x).0)
}

const POLE_GUARD: f64 = 1e-8;

fn pole_check(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Pole(theta));
    }
    Ok(theta.clamp(POLE_GUARD, PI - POLE_GUARD))
}

/// `log(tan²(θ/2))`.
fn log_tan2_half(theta: f64) -> f64 {
    2.0 * (theta * 0.5).tan().ln()
}

/// `f(θ) = 2 + cosθ·log(tan²(θ/2))` and its first derivative.
pub fn catenoid_f(theta: f64) -> Result<(f64, f64)> {
    let t = pole_check(theta)?;
    let (s, c) = t.sin_cos();
    let l = log_tan2_half(t);
    Ok((2.0 + c * l, -s * l + 2.0 * c / s))
}

/// `f''(θ) = −cosθ·log(tan²(θ/2)) − 2 − 2/sin²θ`.
pub fn catenoid_f2(theta: f64) -> Result<f64> {
    let t = pole_check(theta)?;
    let (s, c) = t.sin_cos();
    Ok(-c * log_tan2_half(t) - 2.0 - 2.0 / (s * s))
}

/// Residual of `f'' + cotθ·f' + 2f = 0`.
pub fn catenoid_ode_residual(theta: f64) -> Result<f64> {
    let (f, f1) = catenoid_f(theta)?;
    let f2 = catenoid_f2(theta)?;
    let t = theta.clamp(POLE_GUARD, PI - POLE_GUARD);
    Ok(f2 + f1 * t.cos() / t.sin() + 2.0 * f)
}

/// The zero of `f` in `(0, π/2)`, by bisection on `(0.1, π/2 − 0.1)`.
pub fn catenoid_theta0() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let f = |t: f64| catenoid_f(t).expect("bracket avoids the poles").0;
        let (mut lo, mut hi) = (0.1, FRAC_PI_2 - 0.1);
        debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if f(lo).abs() <= f(hi).abs() {
            lo
        } else {
            hi
        }
    })
}

/// `f'(θ₀)`, the normalizing slope of the catenoid solution.
pub fn catenoid_slope() -> f64 {
    catenoid_f(catenoid_theta0()).expect("θ₀ is interior").1
}

/// Normalized spherical part `g = f/f'(θ₀)` and its first two θ-derivatives,
/// without clipping at zero.
pub fn catenoid_g(theta: f64) -> Result<(f64, f64, f64)> {
    let k = catenoid_slope();
    let (f, f1) = catenoid_f(theta)?;
    let f2 = catenoid_f2(theta)?;
    Ok((f / k, f1 / k, f2 / k))
}

/// `u(x) = |x|·max(g(θ), 0)` with θ measured from the `x₃` axis.
fn catenoid_eval(x: &Vec3) -> (f64, Vec3) {
    let rho = x[0].hypot(x[1]);
    let r = rho.hypot(x[2]);
    if rho == 0.0 || r == 0.0 {
        return (0.0, [0.0; 3]);
    }
    let theta = rho.atan2(x[2]);
    let (g, g1, _) = match catenoid_g(theta) {
        Ok(v) => v,
        Err(_) => return (0.0, [0.0; 3]),
    };
    if g <= 0.0 {
        return (0.0, [0.0; 3]);
    }
    let (st, ct) = (rho / r, x[2] / r);
    let (cp, sp) = (x[0] / rho, x[1] / rho);
    let n = [st * cp, st * sp, ct];
    let e_theta = [ct * cp, ct * sp, -st];
    (
        r * g,
        [
            g * n[0] + g1 * e_theta[0],
            g * n[1] + g1 * e_theta[1],
            g * n[2] + g1 * e_theta[2],
        ],
    )
}

/// Max `|H(θ + π/2) − f(θ)|` over `thetas`, where
/// `H(α) = −(a/2)·sinα·log(((1 + sinα)/cosα)²) + a`.
pub fn catenoid_support_identity(thetas: &[f64], a: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in thetas {
        let (f, _) = catenoid_f(t)?;
        let alpha = t + FRAC_PI_2;
        let (sa, ca) = alpha.sin_cos();
        let q = (1.0 + sa) / ca;
        let h = -0.5 * a * sa * (q * q).ln() + a;
        worst = worst.max((h - f).abs());
    }
    Ok(worst)
}

/// The one-dimensional travelling profile: the increasing solution of
/// `u'' = β_ε(u)` with `u → 0` as `x → 0⁺`, from the first integral
/// `u' = √(2B(u/ε))`.
///
/// The degenerate start is regularized by placing `u = δ·ε` at `x = 0`.
/// Inside the layer `u = δε·e^w`, which removes the logarithmic
/// singularity of `dx/du` and leaves a smooth integrand in `w`.
#[derive(Debug, Clone)]
pub struct Profile1d {
    profile: BetaProfile,
    eps: f64,
    delta: f64,
    knots_w: Vec<f64>,
    knots_x: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

pub const PROFILE_DELTA: f64 = 1e-6;
const PROFILE_PANELS: usize = 400;

impl Profile1d {
    pub fn new(profile: &BetaProfile, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let delta = PROFILE_DELTA;
        let w_end = (1.0 / delta).ln();
        let gl = gauss_legendre(16);
        let mut p = Self {
            profile: profile.clone(),
            eps,
            delta,
            knots_w: Vec::with_capacity(PROFILE_PANELS + 1),
            knots_x: Vec::with_capacity(PROFILE_PANELS + 1),
            gl,
        };
        let mut x = 0.0;
        p.knots_w.push(0.0);
        p.knots_x.push(0.0);
        for k in 0..PROFILE_PANELS {
            let a = w_end * k as f64 / PROFILE_PANELS as f64;
            let b = w_end * (k + 1) as f64 / PROFILE_PANELS as f64;
            x += p.panel(a, b);
            p.knots_w.push(b);
            p.knots_x.push(x);
        }
        if !x.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "profile '{}' has a non-integrable first integral near 0",
                profile.name()
            )));
        }
        Ok(p)
    }

    /// `dx/dw` at `u = δε·e^w`.
    fn integrand(&self, w: f64) -> f64 {
        let t = self.delta * w.exp();
        self.eps * t / (2.0 * self.profile.primitive(t)).sqrt()
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        let (xs, ws) = &self.gl;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in xs.iter().zip(ws) {
            s += w * self.integrand(mid + half * x);
        }
        s * half
    }

    /// Position where the profile reaches `u = ε`.
    pub fn layer_width(&self) -> f64 {
        *self.knots_x.last().expect("knots")
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Far-field slope `√(2M)`.
    pub fn outer_slope(&self) -> f64 {
        (2.0 * self.profile.mass()).sqrt()
    }

    /// `u(x)`; zero for `x < 0`, linear with slope `√(2M)` past the layer.
    pub fn value(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let xe = self.layer_width();
        if x >= xe {
            return self.eps + self.outer_slope() * (x - xe);
        }
        let k = match self
            .knots_x
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite knots"))
        {
            Ok(k) => return self.delta * self.eps * self.knots_w[k].exp(),
            Err(k) => k - 1,
        };
        let (w0, w1) = (self.knots_w[k], self.knots_w[k + 1]);
        let x0 = self.knots_x[k];
        let x1 = self.knots_x[k + 1];
        let mut w = w0 + (w1 - w0) * (x - x0) / (x1 - x0);
        let (mut lo, mut hi) = (w0, w1);
        for _ in 0..60 {
            let fw = x0 + self.panel(w0, w) - x;
            if fw > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let mut next = w - fw / self.integrand(w);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - w).abs() <= 1e-15 * (1.0 + w.abs()) {
                w = next;
                break;
            }
            w = next;
        }
        self.delta * self.eps * w.exp()
    }

    /// `u'(x) = √(2B(u/ε))`.
    pub fn slope(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        (2.0 * self.profile.primitive(self.value(x) / self.eps)).sqrt()
    }
}

/// Single-point form of [`Profile1d::value`].
pub fn profile_1d(profile: &BetaProfile, eps: f64, x: f64) -> Result<f64> {
    Ok(Profile1d::new(profile, eps)?.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_examples() {
        let hp = ExactKind::HalfPlane { mass: 1.0 };
        assert!((hp.eval(&[0.3, 0.1, 0.0]).0 - 2f64.sqrt() * 0.3).abs() < 1e-15);
        let w = ExactKind::Wedge { alpha: 0.5 };
        assert!((w.eval(&[-0.2, 0.7, 0.0]).0 - 0.1).abs() < 1e-15);
        assert!(ExactKind::TwoPlane {
            alpha: 1.0,
            beta: 0.0
        }
        .validate(2)
        .is_err());
        assert!(ExactKind::Wedge { alpha: -1.0 }.validate(2).is_err());
        assert!(ExactKind::Catenoid.validate(2).is_err());
    }

    #[test]
    fn catenoid_f_examples() {
        let (f, f1) = catenoid_f(FRAC_PI_2).unwrap();
        assert!((f - 2.0).abs() < 1e-15 && f1.abs() < 1e-15);
        assert!((catenoid_f2(FRAC_PI_2).unwrap() + 4.0).abs() < 1e-14);
        for t in [0.2, 0.7, 1.3] {
            let a = catenoid_f(t).unwrap().0;
            let b = catenoid_f(PI - t).unwrap().0;
            assert!((a - b).abs() < 1e-13);
        }
        assert!(matches!(catenoid_f(0.0), Err(Error::Pole(_))));
        assert!(matches!(catenoid_f(PI), Err(Error::Pole(_))));
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        for t in [0.3, 0.9, 2.0] {
            let h = 1e-5;
            let fd = (catenoid_f(t + h).unwrap().0 - catenoid_f(t - h).unwrap().0) / (2.0 * h);
            assert!((fd - catenoid_f(t).unwrap().1).abs() < 1e-8);
            let fd2 = (catenoid_f(t + h).unwrap().1 - catenoid_f(t - h).unwrap().1) / (2.0 * h);
            assert!((fd2 - catenoid_f2(t).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn theta0_is_a_bracketed_root() {
        let t0 = catenoid_theta0();
        assert!(t0 > 0.0 && t0 < FRAC_PI_2);
        assert!(catenoid_f(t0).unwrap().0.abs() < 1e-12);
        assert!(catenoid_f(t0 - 1e-3).unwrap().0 < 0.0);
        assert!(catenoid_f(t0 + 1e-3).unwrap().0 > 0.0);
        assert!((t0 - 0.5857).abs() < 1e-3);
        assert!((catenoid_slope() - 4.34).abs() < 1e-2);
    }

    #[test]
    fn catenoid_equator_value() {
        let (u, _) = ExactKind::Catenoid.eval(&[1.0, 0.0, 0.0]);
        assert!((u - 2.0 / catenoid_slope()).abs() < 1e-14);
        assert!((u - 0.4608).abs() < 1e-3);
    }

    #[test]
    fn catenoid_gradient_matches_finite_differences() {
        let x = [0.3, -0.4, 0.2];
        let (_, g) = ExactKind::Catenoid.eval(&x);
        let h = 1e-6;
        for a in 0..3 {
            let mut p = x;
            let mut m = x;
            p[a] += h;
            m[a] -= h;
            let fd = (ExactKind::Catenoid.eval(&p).0 - ExactKind::Catenoid.eval(&m).0) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7, "axis {a}: {fd} vs {}", g[a]);
        }
    }

    #[test]
    fn support_identity_holds_only_for_a_equal_two() {
        let thetas: Vec<f64> = (0..1000)
            .map(|k| 0.1 + (PI - 0.2) * k as f64 / 999.0)
            .collect();
        assert!(catenoid_support_identity(&thetas, 2.0).unwrap() <= 1e-12);
        assert!(catenoid_support_identity(&thetas, 1.0).unwrap() >= 0.5);
        assert!(catenoid_support_identity(&[0.0], 2.0).is_err());
    }

    #[test]
    fn profile_1d_is_zero_at_the_origin_and_linear_outside() {
        let p = Profile1d::new(&BetaProfile::polynomial(), 0.02).unwrap();
        assert!(p.value(0.0) <= 1e-6 * 0.02 + 1e-18);
        assert_eq!(p.value(-0.5), 0.0);
        let xe = p.layer_width();
        let slope = (p.value(xe + 0.3) - p.value(xe + 0.1)) / 0.2;
        assert!((slope - 2f64.sqrt()).abs() < 1e-12);
        assert!((p.value(xe) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn profile_1d_rejects_non_integrable_profiles() {
        assert!(Profile1d::new(&BetaProfile::smooth(), 0.02).is_err());
        assert!(Profile1d::new(&BetaProfile::polynomial(), 0.0).is_err());
    }
}
