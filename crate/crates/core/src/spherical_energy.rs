//! Shell functionals: the monotone quantities `S_ε(r)`, `S(r)` and the
//! two-phase product `Φ(r)`.
//!
//! For a field `u` on the sphere `∂B_r(x₀)` write `u_r` for the radial
//! derivative and `∇_σ u / r` for the tangential gradient. The integrand of
//! `S_ε` over the unit sphere is
//!
//! ```text
//! 2B(u/ε) + |∇_σ u|²/r² − (N−1)·u²/r² − (u_r − u/r)²
//! ```
//!
//! and `S` replaces `2B(u/ε)` by `2M·χ{u>0}`. The tangential term is computed
//! as `|∇u|² − u_r²` from the interpolated gradient.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{axpy, dot, to_vec3, Probe, ScalarField};
use crate::mollifier::{check_eps, BetaProfile};
use crate::quadrature::{gauss_legendre, gauss_legendre_on, pairwise_sum, ShellQuadrature};
use crate::Vec3;

/// Which of the two functionals to tabulate.
#[derive(Debug, Clone, Copy)]
pub enum EnergyMode<'a> {
    Eps { profile: &'a BetaProfile, eps: f64 },
    Limit { mass: f64 },
}

impl EnergyMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EnergyMode::Eps { .. } => "eps",
            EnergyMode::Limit { .. } => "limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `values[k+1] − values[k]`.
    pub defects: Vec<f64>,
}

impl EnergyProfile {
    /// The monotonicity defect: the smallest successive difference.
    pub fn min_defect(&self) -> f64 {
        self.defects.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_shell<P: Probe + ?Sized>(field: &P, quad: &ShellQuadrature, r: f64) -> Result<()> {
    if !(2..=3).contains(&field.dim()) {
        return invalid(format!(
            "shell functionals need N = 2 or 3 (got {})",
            field.dim()
        ));
    }
    if quad.dim != field.dim() {
        return invalid("shell quadrature dimension does not match the field");
    }
    if !(r > 0.0 && r.is_finite()) {
        return invalid("radius must be positive");
    }
    Ok(())
}

/// Integrates `term(u, u_r, |∇u|², σ)` over `∂B_r(center)` with respect to
/// the unit-sphere measure.
fn shell_integral<P, F>(
    field: &P,
    center: &Vec3,
    r: f64,
    quad: &ShellQuadrature,
    term: F,
) -> Result<f64>
where
    P: Probe + ?Sized,
    F: Fn(f64, f64, f64, &Vec3) -> f64 + Sync,
{
    let terms: Result<Vec<f64>> = quad
        .nodes
        .par_iter()
        .zip(&quad.weights)
        .map(|(sigma, w)| {
            let x = axpy(center, r, sigma);
            let (u, g) = field.sample(&x)?;
            let ur = dot(&g, sigma);
            let g2 = dot(&g, &g);
            Ok(w * term(u, ur, g2, sigma))
        })
        .collect();
    Ok(pairwise_sum(&terms?))
}

fn geometric_part(dim: usize, r: f64, u: f64, ur: f64, g2: f64) -> f64 {
    let tangential = (g2 - ur * ur).max(0.0);
    let q = ur - u / r;
    tangential - (dim as f64 - 1.0) * u * u / (r * r) - q * q
}

/// `S_ε(r)` about `center`.
pub fn spruck_s_eps<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    r: f64,
    profile: &BetaProfile,
    eps: f64,
    quad: &ShellQuadrature,
) -> Result<f64> {
    check_eps(eps)?;
    check_shell(field, quad, r)?;
    let c = to_vec3(center)?;
    let dim = field.dim();
    shell_integral(field, &c, r, quad, |u, ur, g2, _| {
        2.0 * profile.primitive(u / eps) + geometric_part(dim, r, u, ur, g2)
    })
}

/// `S(r)` about `center`, with `χ{u>0}` from the interpolated sign.
pub fn spruck_s_limit<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    r: f64,
    mass: f64,
    quad: &ShellQuadrature,
) -> Result<f64> {
    if !(mass > 0.0) {
        return invalid("mass must be positive");
    }
    check_shell(field, quad, r)?;
    let c = to_vec3(center)?;
    let dim = field.dim();
    shell_integral(field, &c, r, quad, |u, ur, g2, _| {
        let chi = if u > 0.0 { 1.0 } else { 0.0 };
        2.0 * mass * chi + geometric_part(dim, r, u, ur, g2)
    })
}

/// Tabulates the chosen functional over ascending radii.
pub fn monotonicity_profile<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    radii: &[f64],
    mode: EnergyMode<'_>,
    quad: &ShellQuadrature,
) -> Result<EnergyProfile> {
    if radii.len() < 2 {
        return invalid("monotonicity profile needs at least two radii");
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radii must be strictly increasing");
    }
    let values = radii
        .iter()
        .map(|&r| match mode {
            EnergyMode::Eps { profile, eps } => spruck_s_eps(field, center, r, profile, eps, quad),
            EnergyMode::Limit { mass } => spruck_s_limit(field, center, r, mass, quad),
        })
        .collect::<Result<Vec<f64>>>()?;
    let defects = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(EnergyProfile {
        center: center.to_vec(),
        radii: radii.to_vec(),
        values,
        defects,
    })
}

/// The right-hand side of the log-radial identity for solutions:
///
/// ```text
/// S_ε(r₂) − S_ε(r₁) = ∫_{r₁}^{r₂} ∫ [2N(u_r − u/r)² + 2β(u/ε)·u/ε] dσ dr/r
/// ```
///
/// integrated with `n_radial` Gauss points in `log r`. Comparing it with the
/// difference of [`spruck_s_eps`] values checks both routes independently.
pub fn spruck_identity_rhs<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    r1: f64,
    r2: f64,
    profile: &BetaProfile,
    eps: f64,
    quad: &ShellQuadrature,
    n_radial: usize,
) -> Result<f64> {
    check_eps(eps)?;
    if !(0.0 < r1 && r1 < r2) {
        return invalid("radii must satisfy 0 < r1 < r2");
    }
    check_shell(field, quad, r2)?;
    let c = to_vec3(center)?;
    let n = field.dim() as f64;
    let (ts, ws) = gauss_legendre_on(n_radial.max(2), r1.ln(), r2.ln());
    let mut parts = Vec::with_capacity(ts.len());
    for (t, w) in ts.iter().zip(&ws) {
        let r = t.exp();
        let s = shell_integral(field, &c, r, quad, |u, ur, _, _| {
            let q = ur - u / r;
            2.0 * n * q * q + 2.0 * profile.beta(u / eps) * (u / eps)
        })?;
        parts.push(w * s);
    }
    Ok(pairwise_sum(&parts))
}

/// `∫_{r₁}^{r₂} ∫ (u_r − u/r)² dσ dr/r`, by Gauss-Legendre in `log r`.
pub fn log_radial_deviation<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    r1: f64,
    r2: f64,
    quad: &ShellQuadrature,
    n_radial: usize,
) -> Result<f64> {
    if !(0.0 < r1 && r1 < r2) {
        return Err(Error::InvalidParameter(format!(
            "radii must satisfy 0 < r1 < r2 (got {r1}, {r2})"
        )));
    }
    check_shell(field, quad, r2)?;
    let c = to_vec3(center)?;
    let (ts, ws) = gauss_legendre_on(n_radial.max(2), r1.ln(), r2.ln());
    let mut parts = Vec::with_capacity(ts.len());
    for (t, w) in ts.iter().zip(&ws) {
        let r = t.exp();
        let s = shell_integral(field, &c, r, quad, |u, ur, _, _| {
            let q = ur - u / r;
            q * q
        })?;
        parts.push(w * s);
    }
    Ok(pairwise_sum(&parts))
}

/// `Φ(r) = r⁻⁴ · ∫_{B_r} |∇u|²/|x|^{N−2} · ∫_{B_r} |∇v|²/|x|^{N−2}`.
///
/// Gradients are those of the multilinear interpolant in each cell, integrated
/// with a tensor Gauss rule restricted to the ball; cells cut by the sphere
/// are bisected and integrated along clipped chords. Cells containing the
/// center use the cell-averaged kernel.
pub fn acf_phi(u: &ScalarField, v: &ScalarField, center: &[f64], r: f64) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::InvalidPair);
    }
    if !(2..=3).contains(&u.dim()) {
        return invalid("the two-phase functional needs N = 2 or 3");
    }
    if !(r > 0.0) {
        return invalid("radius must be positive");
    }
    let c = to_vec3(center)?;
    let iu = kernel_dirichlet(u, &c, r)?;
    let iv = kernel_dirichlet(v, &c, r)?;
    Ok(iu * iv / r.powi(4))
}

/// `∫_{B_r(c)} |∇u|² |x − c|^{2−N} dx` over multilinear cells.
fn kernel_dirichlet(field: &ScalarField, c: &Vec3, r: f64) -> Result<f64> {
    let d = field.dim();
    let h = field.h();
    let grid = &field.grid;
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..d {
        let s0 = ((c[a] - r - grid.origin[a]) / h).floor();
        let s1 = ((c[a] + r - grid.origin[a]) / h).ceil();
        if s0 < 0.0 || s1 > (grid.shape[a] - 1) as f64 {
            return Err(Error::OutOfDomain(format!(
                "ball of radius {r} leaves the grid"
            )));
        }
        lo[a] = s0 as usize;
        hi[a] = s1 as usize;
    }
    let (gx, gw) = gauss_legendre(2);
    let clip = {
        let (ox, ow) = gauss_legendre(CLIP_OUTER);
        let (ix, iw) = gauss_legendre(CLIP_INNER);
        (ox, ow, ix, iw)
    };
    let cells: Vec<[usize; 3]> = {
        let mut out = Vec::new();
        let kz = if d == 3 { hi[2] - lo[2] } else { 1 };
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in 0..kz {
                    out.push([i, j, lo[2] + k]);
                }
            }
        }
        out
    };
    let strides = grid.strides();
    let terms: Result<Vec<f64>> = cells
        .par_iter()
        .map(|cell| {
            let mut corners = [0.0; 8];
            for (bits, slot) in corners.iter_mut().enumerate().take(1 << d) {
                let mut idx = 0;
                for a in 0..d {
                    idx += (cell[a] + ((bits >> a) & 1)) * strides[a];
                }
                let val = field.values[idx];
                if !field.is_active(idx) || !val.is_finite() {
                    return Err(Error::OutOfDomain("ball touches exterior nodes".into()));
                }
                *slot = val;
            }
            let base: Vec<f64> = (0..d)
                .map(|a| grid.origin[a] + cell[a] as f64 * h)
                .collect();
            let contains_center =
                (0..d).all(|a| c[a] >= base[a] - 1e-12 * h && c[a] <= base[a] + h + 1e-12 * h);
            let avg_kernel = if contains_center && d == 3 {
                Some(cell_average_inverse_distance(&base, h, c))
            } else {
                None
            };
            let cell = CutCell {
                corners: &corners,
                base: &base,
                h,
                d,
                c,
                r,
                avg_kernel,
                gx: &gx,
                gw: &gw,
                clip: &clip,
            };
            let depth = if d == 2 { CUT_DEPTH_2D } else { CUT_DEPTH_3D };
            let acc = cell.integrate([0.0; 3], 1.0, depth);
            Ok(acc)
        })
        .collect();
    Ok(pairwise_sum(&terms?))
}

const CUT_DEPTH_2D: u32 = 3;
const CUT_DEPTH_3D: u32 = 1;
const CLIP_OUTER: usize = 8;
const CLIP_INNER: usize = 3;

/// One grid cell of the kernel integral. Sub-boxes cut by the sphere are
/// bisected, then integrated along chords clipped to the ball.
struct CutCell<'a> {
    corners: &'a [f64; 8],
    base: &'a [f64],
    h: f64,
    d: usize,
    c: &'a Vec3,
    r: f64,
    avg_kernel: Option<f64>,
    gx: &'a [f64],
    gw: &'a [f64],
    /// Outer and inner Gauss rules for clipped sub-boxes.
    clip: &'a (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>),
}

impl CutCell<'_> {
    /// Integral over the sub-box `lo + [0, size]^d` in cell coordinates.
    fn integrate(&self, lo: [f64; 3], size: f64, depth: u32) -> f64 {
        let (d, h) = (self.d, self.h);
        let (mut near, mut far) = (0.0, 0.0);
        for a in 0..d {
            let x0 = self.base[a] + lo[a] * h - self.c[a];
            let x1 = x0 + size * h;
            let n = if x0 > 0.0 {
                x0
            } else if x1 < 0.0 {
                -x1
            } else {
                0.0
            };
            near += n * n;
            far += x0.abs().max(x1.abs()).powi(2);
        }
        if near.sqrt() >= self.r {
            return 0.0;
        }
        if far.sqrt() > self.r && depth > 0 {
            let half = 0.5 * size;
            let mut acc = 0.0;
            for child in 0..1usize << d {
                let mut l = lo;
                for (a, la) in l.iter_mut().enumerate().take(d) {
                    *la += half * ((child >> a) & 1) as f64;
                }
                acc += self.integrate(l, half, depth - 1);
            }
            return acc;
        }
        if far.sqrt() <= self.r {
            return self.gauss_box(lo, size);
        }
        self.clipped_box(lo, size)
    }

    fn point(&self, s: &[f64; 3], x: &Vec3) -> f64 {
        let c = self.c;
        let g = multilinear_gradient(self.corners, s, self.d, self.h);
        let kern = match (self.d, self.avg_kernel) {
            (2, _) => 1.0,
            (_, Some(k)) => k,
            _ => {
                1.0 / ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt()
            }
        };
        kern * dot(&g, &g)
    }

    /// Tensor Gauss rule on a sub-box inside the ball.
    fn gauss_box(&self, lo: [f64; 3], size: f64) -> f64 {
        let (d, h) = (self.d, self.h);
        let mut acc = 0.0;
        for p in 0..1usize << d {
            let mut s = [0.5; 3];
            let mut x = [0.0; 3];
            let mut w = 1.0;
            for a in 0..d {
                let q = (p >> a) & 1;
                s[a] = lo[a] + size * 0.5 * (1.0 + self.gx[q]);
                w *= 0.5 * self.gw[q] * size * h;
                x[a] = self.base[a] + s[a] * h;
            }
            acc += w * self.point(&s, &x);
        }
        acc
    }

    /// Sub-box cut by the sphere: Gauss points across the other axes and,
    /// along the axis closest to the sphere normal, the chord inside the ball.
    fn clipped_box(&self, lo: [f64; 3], size: f64) -> f64 {
        let (d, h) = (self.d, self.h);
        let offset = |a: usize| (self.base[a] + (lo[a] + 0.5 * size) * h - self.c[a]).abs();
        let clip_axis = (0..d)
            .max_by(|&a, &b| offset(a).total_cmp(&offset(b)))
            .unwrap_or(0);
        let outer: Vec<usize> = (0..d).filter(|&a| a != clip_axis).collect();
        let (ox, ow) = (&self.clip.0, &self.clip.1);
        let (ix, iw) = (&self.clip.2, &self.clip.3);
        // In 2D the outer interval is split where the circle crosses the
        // clip-axis faces, leaving a smooth chord length on each piece.
        let mut pieces = vec![(lo[outer[0]], lo[outer[0]] + size)];
        if d == 2 {
            let a = outer[0];
            let a0 = self.base[clip_axis] + lo[clip_axis] * h;
            let mut cuts = vec![lo[a], lo[a] + size];
            for face in [a0, a0 + size * h] {
                let rad = self.r * self.r - (face - self.c[clip_axis]).powi(2);
                if rad > 0.0 {
                    for x in [self.c[a] - rad.sqrt(), self.c[a] + rad.sqrt()] {
                        let sx = (x - self.base[a]) / h;
                        if sx > lo[a] && sx < lo[a] + size {
                            cuts.push(sx);
                        }
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            pieces = cuts.windows(2).map(|w| (w[0], w[1])).collect();
        }
        let n_outer = CLIP_OUTER.pow(outer.len() as u32);
        let mut acc = 0.0;
        for &(p0, p1) in &pieces {
            for p in 0..n_outer {
                let mut s = [0.5; 3];
                let mut x = [0.0; 3];
                let mut w = 1.0;
                let mut rest = self.r * self.r;
                let mut q = p;
                for (i, &a) in outer.iter().enumerate() {
                    let k = q % CLIP_OUTER;
                    q /= CLIP_OUTER;
                    let (s0, len) = if i == 0 { (p0, p1 - p0) } else { (lo[a], size) };
                    s[a] = s0 + len * 0.5 * (1.0 + ox[k]);
                    w *= 0.5 * ow[k] * len * h;
                    x[a] = self.base[a] + s[a] * h;
                    rest -= (x[a] - self.c[a]).powi(2);
                }
                if rest <= 0.0 {
                    continue;
                }
                let half = rest.sqrt();
                let a0 = self.base[clip_axis] + lo[clip_axis] * h;
                let z0 = a0.max(self.c[clip_axis] - half);
                let z1 = (a0 + size * h).min(self.c[clip_axis] + half);
                if z1 <= z0 {
                    continue;
                }
                for (t, wt) in ix.iter().zip(iw) {
                    x[clip_axis] = z0 + 0.5 * (1.0 + t) * (z1 - z0);
                    s[clip_axis] = (x[clip_axis] - self.base[clip_axis]) / h;
                    acc += w * 0.5 * wt * (z1 - z0) * self.point(&s, &x);
                }
            }
        }
        acc
    }
}

fn multilinear_gradient(corners: &[f64; 8], s: &[f64; 3], d: usize, h: f64) -> Vec3 {
    let mut g = [0.0; 3];
    for (bits, val) in corners.iter().enumerate().take(1 << d) {
        for a in 0..d {
            let mut w = 1.0;
            for b in 0..d {
                let bit = (bits >> b) & 1;
                if b == a {
                    w *= if bit == 1 { 1.0 } else { -1.0 };
                } else {
                    w *= if bit == 1 { s[b] } else { 1.0 - s[b] };
                }
            }
            g[a] += w * val / h;
        }
    }
    g
}

/// Mean of `1/|x − c|` over the cube `[base, base + h]³` containing `c`.
///
/// The cube is split at `c` into boxes with a corner at `c`; each box is a
/// union of three pyramids with apex `c`, and a pyramid over a face at
/// distance `δ` contributes `(δ/2)·∫_face dA/|y|`.
fn cell_average_inverse_distance(base: &[f64], h: f64, c: &Vec3) -> f64 {
    let (gx, gw) = gauss_legendre(12);
    let mut total = 0.0;
    for oct in 0..8 {
        let mut ext = [0.0; 3];
        for a in 0..3 {
            ext[a] = if (oct >> a) & 1 == 1 {
                base[a] + h - c[a]
            } else {
                c[a] - base[a]
            }
            .max(0.0);
        }
        if ext.iter().any(|e| *e <= 0.0) {
            continue;
        }
        for a in 0..3 {
            let (b1, b2) = ((a + 1) % 3, (a + 2) % 3);
            let delta = ext[a];
            let mut face = 0.0;
            for (x1, w1) in gx.iter().zip(&gw) {
                let y1 = 0.5 * (1.0 + x1) * ext[b1];
                for (x2, w2) in gx.iter().zip(&gw) {
                    let y2 = 0.5 * (1.0 + x2) * ext[b2];
                    face += 0.25 * w1 * w2 * ext[b1] * ext[b2]
                        / (delta * delta + y1 * y1 + y2 * y2).sqrt();
                }
            }
            total += 0.5 * delta * face;
        }
    }
    total / (h * h * h)
}
