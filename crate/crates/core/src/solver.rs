//! Nonlinear relaxation for `Δu = β_ε(u)` and the diagnostics evaluated on
//! its solutions.
//!
//! The discrete problem is the 3/5/7-point Laplacian on the interior nodes of
//! a [`ScalarField`], with the field's Dirichlet nodes held fixed. Each visit
//! to a node solves the scalar equation
//! `c·u + h²·β_ε(u) = Σ neighbors` (with `c = 2N`) exactly, then applies
//! over-relaxation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{NodeKind, ScalarField};
use crate::mollifier::{check_eps, BetaProfile};
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    RedBlack,
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stopping tolerance on the discrete L∞ residual. `None` selects
    /// `1e-8 / h²`.
    pub tol_residual: Option<f64>,
    /// Maximum number of sweeps per ε level.
    pub max_iterations: usize,
    pub sweep: Sweep,
    /// Descending ε values solved before the target ε, each warm-starting
    /// the next.
    pub continuation: Option<Vec<f64>>,
    /// Over-relaxation factor in (0, 2). `None` selects
    /// `2 / (1 + sin(π h / D))` with D the largest grid extent.
    pub omega: Option<f64>,
    /// Sweeps between residual evaluations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_residual: None,
            max_iterations: 200_000,
            sweep: Sweep::RedBlack,
            continuation: None,
            omega: None,
            check_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol_residual {
            if !(t > 0.0) {
                return invalid("tol_residual must be positive");
            }
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be positive");
        }
        if self.check_every == 0 {
            return invalid("check_every must be positive");
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return invalid("omega must lie in (0, 2)");
            }
        }
        if let Some(ladder) = &self.continuation {
            validate_ladder(ladder)?;
        }
        Ok(())
    }

    pub fn tolerance_for(&self, h: f64) -> f64 {
        self.tol_residual.unwrap_or(1e-8 / (h * h))
    }
}

pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return invalid("ε ladder is empty");
    }
    if ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return invalid("ε ladder entries must be positive");
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("ε ladder must be strictly decreasing");
    }
    Ok(())
}

/// Iteration statistics of the last ε level of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub sweeps: usize,
    pub residual: f64,
    pub omega: f64,
}

struct Stencil {
    strides: Vec<usize>,
    colors: [Vec<usize>; 2],
    order: Vec<usize>,
    c: f64,
    h2: f64,
}

impl Stencil {
    fn new(field: &ScalarField) -> Self {
        let strides = field.grid.strides();
        let mut colors = [Vec::new(), Vec::new()];
        let mut order = Vec::new();
        for i in 0..field.len() {
            if field.mask[i] == NodeKind::Interior {
                let m = field.grid.multi_index(i);
                let parity = (m[0] + m[1] + m[2]) % 2;
                colors[parity].push(i);
                order.push(i);
            }
        }
        let h = field.grid.spacing;
        Self {
            c: 2.0 * field.dim() as f64,
            h2: h * h,
            strides,
            colors,
            order,
        }
    }

    #[inline]
    fn neighbor_sum(&self, u: &[f64], i: usize) -> f64 {
        let mut s = 0.0;
        for st in &self.strides {
            s += u[i - st] + u[i + st];
        }
        s
    }
}

/// Solves `c·u + h²·β_ε(u) = s` for `u`, starting Newton from `guess`.
///
/// Every root lies in `[0, s/c]` when `0 < s/c < ε`; otherwise the β term
/// vanishes at `s/c` and that is the root.
pub(crate) fn local_solve(
    profile: &BetaProfile,
    eps: f64,
    c: f64,
    h2: f64,
    s: f64,
    guess: f64,
) -> f64 {
    let hi = s / c;
    if hi <= 0.0 || hi >= eps {
        return hi;
    }
    let g = |u: f64| c * u + h2 * profile.beta_eps_unchecked(u, eps) - s;
    let mut lo = 0.0;
    let mut up = hi;
    let mut u = guess.clamp(lo, up);
    for _ in 0..100 {
        let gu = g(u);
        if gu == 0.0 {
            return u;
        }
        if gu > 0.0 {
            up = u;
        } else {
            lo = u;
        }
        let d = c + h2 * profile.beta_eps_prime_unchecked(u, eps);
        let newton = u - gu / d;
        let next = if d > 0.0 && newton > lo && newton < up {
            newton
        } else {
            0.5 * (lo + up)
        };
        if (next - u).abs() <= 1e-16 * eps.max(u.abs()) || up - lo <= 1e-16 * eps {
            return next;
        }
        u = next;
    }
    u
}

fn check_boundary(field: &ScalarField) -> Result<()> {
    if field.interior_count() == 0 {
        return Err(Error::InvalidDomain("field has no interior nodes".into()));
    }
    for (v, m) in field.values.iter().zip(&field.mask) {
        if *m == NodeKind::Dirichlet && !v.is_finite() {
            return Err(Error::InvalidDomain(
                "boundary trace is not finite on every Dirichlet node".into(),
            ));
        }
    }
    Ok(())
}

fn default_omega(field: &ScalarField) -> f64 {
    let h = field.grid.spacing;
    let extent = (0..field.dim())
        .map(|a| field.grid.upper(a) - field.grid.origin[a])
        .fold(0.0, f64::max);
    2.0 / (1.0 + (std::f64::consts::PI * h / extent).sin())
}

/// Solves the discrete problem at `eps`, warm-started along the
/// configured ε ladder.
///
/// The pointwise equation has a single root when `2N/h²` exceeds
/// `sup|β_ε'|`, i.e. `h < ε·√(2N / sup|β'|)` (`0.82ε` in 2D for the
/// polynomial bump). Coarser grids can stall and end in a convergence error.
pub fn solve_peps(
    boundary: &ScalarField,
    profile: &BetaProfile,
    eps: f64,
    config: &SolverConfig,
) -> Result<ScalarField> {
    solve_peps_with_stats(boundary, profile, eps, config).map(|(f, _)| f)
}

pub fn solve_peps_with_stats(
    boundary: &ScalarField,
    profile: &BetaProfile,
    eps: f64,
    config: &SolverConfig,
) -> Result<(ScalarField, SolveStats)> {
    check_eps(eps)?;
    config.validate()?;
    let mut levels: Vec<f64> = config
        .continuation
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|e| *e > eps)
        .collect();
    levels.push(eps);
    let mut field = boundary.clone();
    let mut stats = None;
    for e in levels {
        let s = relax(&mut field, profile, e, config)?;
        stats = Some(s);
    }
    Ok((field, stats.expect("at least one level")))
}

/// Solves at every ε of a strictly decreasing ladder, warm-starting each
/// level from the previous one. Returns one field per ladder entry.
pub fn solve_ladder(
    boundary: &ScalarField,
    profile: &BetaProfile,
    ladder: &[f64],
    config: &SolverConfig,
) -> Result<Vec<ScalarField>> {
    validate_ladder(ladder)?;
    config.validate()?;
    let mut field = boundary.clone();
    let mut out = Vec::with_capacity(ladder.len());
    for &e in ladder {
        relax(&mut field, profile, e, config)?;
        out.push(field.clone());
    }
    Ok(out)
}

fn relax(
    field: &mut ScalarField,
    profile: &BetaProfile,
    eps: f64,
    config: &SolverConfig,
) -> Result<SolveStats> {
    check_boundary(field)?;
    let st = Stencil::new(field);
    for &i in &st.order {
        if !field.values[i].is_finite() {
            field.values[i] = 0.0;
        }
    }
    let omega = config.omega.unwrap_or_else(|| default_omega(field));
    let tol = config.tolerance_for(field.grid.spacing);
    field.eps = Some(eps);

    let update = |u: &[f64], i: usize| -> f64 {
        let s = st.neighbor_sum(u, i);
        let old = u[i];
        let star = local_solve(profile, eps, st.c, st.h2, s, old);
        old + omega * (star - old)
    };

    let mut buf: Vec<f64> = Vec::new();
    let mut res = residual_with(&st, field, profile, eps);
    if res <= tol {
        return Ok(SolveStats {
            sweeps: 0,
            residual: res,
            omega,
        });
    }
    let mut sweeps = 0;
    while sweeps < config.max_iterations {
        match config.sweep {
            Sweep::Lexicographic => {
                for &i in &st.order {
                    let v = update(&field.values, i);
                    field.values[i] = v;
                }
            }
            Sweep::RedBlack => {
                for color in &st.colors {
                    let u = &field.values;
                    color
                        .par_iter()
                        .with_min_len(1024)
                        .map(|&i| update(u, i))
                        .collect_into_vec(&mut buf);
                    for (&i, v) in color.iter().zip(&buf) {
                        field.values[i] = *v;
                    }
                }
            }
        }
        sweeps += 1;
        if sweeps % config.check_every == 0 || sweeps == config.max_iterations {
            res = residual_with(&st, field, profile, eps);
            if !res.is_finite() {
                break;
            }
            if res <= tol {
                return Ok(SolveStats {
                    sweeps,
                    residual: res,
                    omega,
                });
            }
        }
    }
    Err(Error::Convergence {
        iterations: sweeps,
        residual: res,
    })
}

fn residual_with(st: &Stencil, field: &ScalarField, profile: &BetaProfile, eps: f64) -> f64 {
    let u = &field.values;
    st.order
        .par_iter()
        .with_min_len(4096)
        .map(|&i| {
            let lap = (st.neighbor_sum(u, i) - st.c * u[i]) / st.h2;
            (lap - profile.beta_eps_unchecked(u[i], eps)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Discrete L∞ norm of `Δ_h u − β_ε(u)` over interior nodes.
pub fn residual(field: &ScalarField, profile: &BetaProfile, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if field.interior_count() == 0 {
        return Err(Error::InvalidDomain("field has no interior nodes".into()));
    }
    Ok(residual_with(&Stencil::new(field), field, profile, eps))
}

/// Quadrature weight of a node: `h^N` on interior nodes, trapezoid factors on
/// the frame of a box domain, zero on embedded Dirichlet and exterior nodes.
fn node_weight(field: &ScalarField, i: usize) -> f64 {
    let hn = field.h().powi(field.dim() as i32);
    match field.mask[i] {
        NodeKind::Interior => hn,
        NodeKind::Exterior => 0.0,
        NodeKind::Dirichlet => {
            let m = field.grid.multi_index(i);
            let mut w = hn;
            let mut on_frame = false;
            for a in 0..field.dim() {
                if m[a] == 0 || m[a] + 1 == field.grid.shape[a] {
                    w *= 0.5;
                    on_frame = true;
                }
            }
            if on_frame && matches!(field.domain, crate::field::Domain::Box) {
                w
            } else {
                0.0
            }
        }
    }
}

/// `J_ε = ∫ |∇_h u|²/2 + B(u/ε)` over the masked domain.
pub fn energy_j(field: &ScalarField, profile: &BetaProfile, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let terms: Vec<f64> = (0..field.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let w = node_weight(field, i);
            if w == 0.0 {
                return 0.0;
            }
            let g = field.node_gradient(i);
            let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            w * (0.5 * g2 + profile.primitive(field.values[i] / eps))
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Residual of the domain-variation identity for the direction `e₁`:
/// `∫ (|∇u|²/2 + B(u/ε)) ∂₁φ − ∫ Σ_k ∂_k u ∂₁u ∂_k φ`.
///
/// `phi` must live on the same grid and vanish within two cells of every
/// non-interior node.
pub fn domain_variation_residual(
    field: &ScalarField,
    profile: &BetaProfile,
    eps: f64,
    phi: &ScalarField,
) -> Result<f64> {
    check_eps(eps)?;
    if !field.grid.same_geometry(&phi.grid) {
        return Err(Error::InvalidTestFunction(
            "test function lives on a different grid".into(),
        ));
    }
    let margin = boundary_margin(field, 2);
    for i in 0..phi.len() {
        let v = phi.values[i];
        if margin[i] && v != 0.0 && !v.is_nan() {
            return Err(Error::InvalidTestFunction(
                "test function is not zero within two cells of the boundary".into(),
            ));
        }
    }
    let hn = field.h().powi(field.dim() as i32);
    let terms: Vec<f64> = (0..field.len())
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            if margin[i] || field.mask[i] != NodeKind::Interior {
                return 0.0;
            }
            let gu = field.node_gradient(i);
            let gp = phi.node_gradient(i);
            let g2 = gu[0] * gu[0] + gu[1] * gu[1] + gu[2] * gu[2];
            let lagr = 0.5 * g2 + profile.primitive(field.values[i] / eps);
            let stress = (gu[0] * gp[0] + gu[1] * gp[1] + gu[2] * gp[2]) * gu[0];
            hn * (lagr * gp[0] - stress)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Nodes within `cells` index steps (in every axis) of a non-interior node,
/// by separable dilation along each axis.
fn boundary_margin(field: &ScalarField, cells: usize) -> Vec<bool> {
    let grid = &field.grid;
    let strides = grid.strides();
    let mut near: Vec<bool> = field
        .mask
        .iter()
        .map(|m| *m != NodeKind::Interior)
        .collect();
    for a in 0..grid.dim() {
        let n = grid.shape[a];
        let st = strides[a];
        let prev = near.clone();
        for (i, out) in near.iter_mut().enumerate() {
            let m = grid.multi_index(i)[a];
            let lo = m.saturating_sub(cells);
            let hi = (m + cells).min(n - 1);
            *out = (lo..=hi).any(|k| prev[i + k * st - m * st]);
        }
    }
    near
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn disk(h: f64, f: impl Fn(&crate::Vec3) -> f64) -> ScalarField {
        let g = GridSpec::for_ball(2, 1.0, h).unwrap();
        ScalarField::from_fn_ball(g, vec![0.0, 0.0], 1.0, f).unwrap()
    }

    #[test]
    fn local_solve_satisfies_the_scalar_equation() {
        let p = BetaProfile::polynomial();
        let (c, h2, eps) = (4.0, 1e-3, 0.1);
        for s in [0.01, 0.1, 0.2, 0.39] {
            let u = local_solve(&p, eps, c, h2, s, 0.0);
            let g = c * u + h2 * p.beta_eps_unchecked(u, eps) - s;
            assert!(g.abs() < 1e-13, "s={s} u={u} g={g}");
        }
        assert_eq!(local_solve(&p, eps, c, h2, -0.4, 0.0), -0.1);
    }

    #[test]
    fn constant_negative_data_is_a_fixed_point() {
        let f = disk(1.0 / 16.0, |_| -0.3);
        let p = BetaProfile::polynomial();
        let u = solve_peps(&f, &p, 0.1, &SolverConfig::default()).unwrap();
        for (v, m) in u.values.iter().zip(&u.mask) {
            if *m != NodeKind::Exterior {
                assert!((v + 0.3).abs() < 1e-14);
            }
        }
        assert_eq!(energy_j(&u, &p, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn saturated_affine_data_is_reproduced() {
        let mut f = disk(1.0 / 32.0, |x| 2.0 + x[0]);
        for (v, m) in f.values.iter_mut().zip(&f.mask) {
            if *m == NodeKind::Interior {
                *v = 0.0;
            }
        }
        let p = BetaProfile::polynomial();
        let cfg = SolverConfig {
            tol_residual: Some(1e-10),
            ..Default::default()
        };
        let u = solve_peps(&f, &p, 0.5, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..u.len() {
            if u.mask[i] == NodeKind::Interior {
                let x = u.grid.node_position(i);
                worst = worst.max((u.values[i] - 2.0 - x[0]).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn stencil_is_exact_on_affine_and_quadratic_fields() {
        let p = BetaProfile::polynomial();
        let f = disk(0.05, |x| x[0] + 2.0);
        assert!(residual(&f, &p, 0.5).unwrap() <= 1e-12);
        let q = disk(0.05, |x| x[0] * x[0] - 5.0);
        assert!((residual(&q, &p, 0.5).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn non_descending_ladder_is_rejected() {
        let cfg = SolverConfig {
            continuation: Some(vec![0.1, 0.2]),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn nonconvergence_reports_the_last_residual() {
        let f = disk(1.0 / 32.0, |x| 1.0 + x[0]);
        let mut f = f;
        for (v, m) in f.values.iter_mut().zip(&f.mask) {
            if *m == NodeKind::Interior {
                *v = 0.0;
            }
        }
        let cfg = SolverConfig {
            max_iterations: 3,
            check_every: 1,
            ..Default::default()
        };
        match solve_peps(&f, &BetaProfile::polynomial(), 0.1, &cfg) {
            Err(Error::Convergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn domain_variation_requires_compact_support() {
        let p = BetaProfile::polynomial();
        let f = disk(0.05, |x| x[0] + 2.0);
        let phi = disk(0.05, |_| 1.0);
        assert!(matches!(
            domain_variation_residual(&f, &p, 0.5, &phi),
            Err(Error::InvalidTestFunction(_))
        ));
        let bump = disk(0.05, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (1.0 - r2 / 0.25).max(0.0).powi(3)
        });
        let r = domain_variation_residual(&f, &p, 0.5, &bump).unwrap();
        assert!(r.abs() < 1e-10, "{r}");
    }

    #[test]
    fn lexicographic_sweeps_are_bit_reproducible() {
        let f = disk(1.0 / 16.0, |x| std::f64::consts::SQRT_2 * x[0].max(0.0));
        let p = BetaProfile::polynomial();
        let cfg = SolverConfig {
            sweep: Sweep::Lexicographic,
            ..Default::default()
        };
        let a = solve_peps(&f, &p, 0.2, &cfg).unwrap();
        let b = solve_peps(&f, &p, 0.2, &cfg).unwrap();
        let bits = |u: &ScalarField| u.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
