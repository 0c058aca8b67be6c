//! Blow-up rescalings, free-boundary extraction and density labels, and the
//! classification of two-dimensional blow-up traces.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{axpy, to_vec3, GridSpec, Probe, ScalarField};
use crate::quadrature::{ball_volume, gauss_legendre_on, pairwise_sum, ShellQuadrature};
use crate::spherical::SphericalFunction;
use crate::spherical_energy::log_radial_deviation;
use crate::Vec3;

/// `u(center + ρx)/ρ` resampled onto `out`.
pub fn rescale<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    rho: f64,
    out: &GridSpec,
) -> Result<ScalarField> {
    if !(rho > 0.0) {
        return invalid("blow-up scale must be positive");
    }
    out.validate()?;
    if out.dim() != field.dim() {
        return invalid("output grid dimension does not match the field");
    }
    let c = to_vec3(center)?;
    let values = (0..out.len())
        .into_par_iter()
        .map(|i| {
            let x = out.node_position(i);
            field.value(&axpy(&c, rho, &x)).map(|v| v / rho)
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::on_box(out.clone(), values)
}

/// `∫_{r₁}^{r₂} ∫ (∂_r u − u/r)² dσ dr/r` about `center`.
pub fn homogeneity_deviation<P: Probe + ?Sized>(
    field: &P,
    center: &[f64],
    r1: f64,
    r2: f64,
    quad: &ShellQuadrature,
) -> Result<f64> {
    if !(r1 < r2) {
        return Err(Error::InvalidParameter(format!(
            "homogeneity window needs r1 < r2 (got {r1}, {r2})"
        )));
    }
    log_radial_deviation(field, center, r1, r2, quad, 16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityLabel {
    HalfDensity,
    FullDensity,
    Degenerate,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundarySet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<DensityLabel>,
    /// Extrapolated density of `{u > 0}`; `None` before labeling or when the
    /// balls leave the field.
    pub densities: Vec<Option<f64>>,
}

impl FreeBoundarySet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, label: DensityLabel) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }
}

/// Transitions of `u` across `level_tol` along every grid edge, located by
/// linear interpolation.
pub fn extract_free_boundary(field: &ScalarField, level_tol: f64) -> FreeBoundarySet {
    let grid = &field.grid;
    let strides = grid.strides();
    let d = grid.dim();
    let h = grid.spacing;
    let mut points = Vec::new();
    for i in 0..field.len() {
        if !field.is_active(i) {
            continue;
        }
        let m = grid.multi_index(i);
        let ua = field.values[i];
        for a in 0..d {
            if m[a] + 1 >= grid.shape[a] {
                continue;
            }
            let j = i + strides[a];
            if !field.is_active(j) {
                continue;
            }
            let ub = field.values[j];
            if (ua > level_tol) == (ub > level_tol) {
                continue;
            }
            let t = ((level_tol - ua) / (ub - ua)).clamp(0.0, 1.0);
            let mut p = grid.node_position(i).to_vec();
            p.truncate(d);
            p[a] += t * h;
            points.push(p);
        }
    }
    let n = points.len();
    FreeBoundarySet {
        dim: d,
        points,
        labels: vec![DensityLabel::Unknown; n],
        densities: vec![None; n],
    }
}

/// Tensor product of a radial Gauss rule and a shell rule on `B_1`.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub dim: usize,
    radial: (Vec<f64>, Vec<f64>),
    shell: ShellQuadrature,
}

impl BallRule {
    pub fn new(dim: usize, n_radial: usize, n_angular: usize) -> Result<Self> {
        let shell = match dim {
            2 => ShellQuadrature::circle(n_angular)?,
            3 => ShellQuadrature::sphere(n_angular, 2 * n_angular)?,
            _ => return invalid("ball rules are defined for N = 2, 3"),
        };
        Ok(Self {
            dim,
            radial: gauss_legendre_on(n_radial.max(2), 0.0, 1.0),
            shell,
        })
    }

    pub fn for_dim(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::new(2, 24, 512),
            _ => Self::new(dim, 24, 192),
        }
    }

    /// Mean of `f(u)` over `B_r(c)`.
    fn mean<P: Probe + ?Sized, F: Fn(f64) -> f64 + Sync>(
        &self,
        field: &P,
        c: &Vec3,
        r: f64,
        f: F,
    ) -> Result<f64> {
        let n = self.dim as i32;
        let parts = self
            .radial
            .0
            .par_iter()
            .zip(&self.radial.1)
            .map(|(s, w)| {
                let rho = s * r;
                let mut terms = Vec::with_capacity(self.shell.nodes.len());
                for (sig, ws) in self.shell.nodes.iter().zip(&self.shell.weights) {
                    terms.push(ws * f(field.value(&axpy(c, rho, sig))?));
                }
                Ok(w * s.powi(n - 1) * pairwise_sum(&terms))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(pairwise_sum(&parts) / ball_volume(self.dim))
    }

    /// Largest sampled `u` over the rule's nodes in `B_r(c)`.
    fn max<P: Probe + ?Sized>(&self, field: &P, c: &Vec3, r: f64) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for s in self.radial.0.iter().chain(std::iter::once(&1.0)) {
            for sig in &self.shell.nodes {
                best = best.max(field.value(&axpy(c, s * r, sig))?);
            }
        }
        Ok(best)
    }
}

fn check_descending(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return invalid("radius ladder is empty");
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return invalid("radii must be positive");
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("radius ladder must be strictly descending");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    /// Extrapolated density, clamped to [0, 1].
    pub value: f64,
    /// `(r, |{u>0} ∩ B_r| / |B_r|)` for every radius of the ladder.
    pub ladder: Vec<(f64, f64)>,
}

/// Density of `{u > 0}` at `point`, extrapolated from the two finest radii
/// assuming `Θ(r) = Θ + c·r`.
pub fn lebesgue_density<P: Probe + ?Sized>(
    field: &P,
    point: &[f64],
    radii: &[f64],
) -> Result<DensityEstimate> {
    lebesgue_density_with(field, point, radii, &BallRule::for_dim(field.dim())?)
}

pub fn lebesgue_density_with<P: Probe + ?Sized>(
    field: &P,
    point: &[f64],
    radii: &[f64],
    rule: &BallRule,
) -> Result<DensityEstimate> {
    check_descending(radii)?;
    let c = to_vec3(point)?;
    let ladder = radii
        .iter()
        .map(|&r| {
            Ok((
                r,
                rule.mean(field, &c, r, |u| if u > 0.0 { 1.0 } else { 0.0 })?,
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let value = match ladder.len() {
        1 => ladder[0].1,
        n => {
            let (ra, ta) = ladder[n - 2];
            let (rb, tb) = ladder[n - 1];
            (ra * tb - rb * ta) / (ra - rb)
        }
    };
    Ok(DensityEstimate {
        value: value.clamp(0.0, 1.0),
        ladder,
    })
}

/// `min_r (1/r)·⨍_{B_r(point)} u⁺` over the ladder.
pub fn nondegeneracy_indicator<P: Probe + ?Sized>(
    field: &P,
    point: &[f64],
    radii: &[f64],
) -> Result<f64> {
    nondegeneracy_indicator_with(field, point, radii, &BallRule::for_dim(field.dim())?)
}

pub fn nondegeneracy_indicator_with<P: Probe + ?Sized>(
    field: &P,
    point: &[f64],
    radii: &[f64],
    rule: &BallRule,
) -> Result<f64> {
    check_descending(radii)?;
    let c = to_vec3(point)?;
    let mut best = f64::INFINITY;
    for &r in radii {
        best = best.min(rule.mean(field, &c, r, |u| u.max(0.0))? / r);
    }
    Ok(best)
}

/// Sampled `sup_{B_r(point)} u`, a lower bound for the true supremum.
pub fn ball_sup<P: Probe + ?Sized>(field: &P, point: &[f64], r: f64) -> Result<f64> {
    let rule = BallRule::for_dim(field.dim())?;
    rule.max(field, &to_vec3(point)?, r)
}

/// `r^{1−N} ∫_{∂B_r(point)} u dS`, i.e. `r` times the unit-sphere integral of
/// `u(point + rσ)/r`.
pub fn scaled_sphere_integral<P: Probe + ?Sized>(
    field: &P,
    point: &[f64],
    r: f64,
    quad: &ShellQuadrature,
) -> Result<f64> {
    let c = to_vec3(point)?;
    let terms = quad
        .nodes
        .par_iter()
        .zip(&quad.weights)
        .map(|(s, w)| Ok(w * field.value(&axpy(&c, r, s))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BlowupVariant {
    Zero,
    HalfPlane { alpha: f64 },
    Wedge { alpha: f64 },
    TwoPlane { alpha: f64, beta: f64 },
    Unclassified,
}

/// A fitted arc `a·cosθ + b·sinθ` on one sign component of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcFit {
    /// +1 for a positivity arc, −1 for a negativity arc.
    pub sign: i8,
    pub amplitude: f64,
    /// Direction of the arc's midpoint.
    pub center: f64,
    pub length: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupClass {
    pub variant: BlowupVariant,
    pub fit_residual: f64,
    pub normal: Option<[f64; 2]>,
    pub arcs: Vec<ArcFit>,
}

fn wrap(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Classifies the unit-circle trace of a degree-one blow-up.
///
/// Sign components of `g` are split into arcs (also at interior touching
/// zeros), each arc is fitted by `a·cosθ + b·sinθ`, and the sign pattern of
/// arcs of length π selects the variant.
pub fn classify_blowup_2d(g: &SphericalFunction, mass: f64, tol: f64) -> Result<BlowupClass> {
    if g.sphere_dim != 1 {
        return invalid("two-dimensional classification needs a function on S¹");
    }
    if !(mass > 0.0) || !(tol > 0.0) {
        return invalid("mass and tolerance must be positive");
    }
    let n = g.n_phi;
    let dth = g.d_phi();
    let slope_cap = (2.0 * mass).sqrt();
    let dead = tol * slope_cap;
    let vals = &g.values;
    let peak = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sign = |v: f64| -> i8 {
        if v > dead {
            1
        } else if v < -dead {
            -1
        } else {
            0
        }
    };
    let signs: Vec<i8> = vals.iter().map(|v| sign(*v)).collect();
    if signs.iter().all(|s| *s == 0) {
        return Ok(BlowupClass {
            variant: BlowupVariant::Zero,
            fit_residual: peak,
            normal: None,
            arcs: Vec::new(),
        });
    }

    let runs = split_runs(vals, &signs, dth);
    let mut arcs = Vec::with_capacity(runs.len());
    for (s, idx) in &runs {
        arcs.push(fit_arc(vals, idx, *s, dth));
    }
    let mut outside: f64 = 0.0;
    for k in 0..n {
        if signs[k] == 0 {
            outside = outside.max(vals[k].abs());
        }
    }
    let fit_residual = arcs.iter().fold(outside, |m, a| m.max(a.residual));

    let ang_tol = 2.5 * dth;
    let arcs_ok = arcs.iter().all(|a| (a.length - PI).abs() <= ang_tol)
        && fit_residual <= 10.0 * tol * slope_cap.max(peak);
    let pos: Vec<&ArcFit> = arcs.iter().filter(|a| a.sign > 0).collect();
    let neg: Vec<&ArcFit> = arcs.iter().filter(|a| a.sign < 0).collect();
    let antipodal =
        |a: &ArcFit, b: &ArcFit| (wrap(a.center - b.center).abs() - PI).abs() <= ang_tol;
    let dir = |t: f64| Some([t.cos(), t.sin()]);

    let (variant, normal) = if !arcs_ok {
        (BlowupVariant::Unclassified, None)
    } else {
        match (pos.len(), neg.len()) {
            (1, 0) if (pos[0].amplitude - slope_cap).abs() <= tol => (
                BlowupVariant::HalfPlane {
                    alpha: pos[0].amplitude,
                },
                dir(pos[0].center),
            ),
            (2, 0)
                if antipodal(pos[0], pos[1])
                    && (pos[0].amplitude - pos[1].amplitude).abs() <= tol
                    && 0.5 * (pos[0].amplitude + pos[1].amplitude) <= slope_cap + tol =>
            {
                (
                    BlowupVariant::Wedge {
                        alpha: 0.5 * (pos[0].amplitude + pos[1].amplitude),
                    },
                    dir(pos[0].center),
                )
            }
            (1, 1) if antipodal(pos[0], neg[0]) => {
                let (a, b) = (pos[0].amplitude, neg[0].amplitude);
                if (a * a - b * b - 2.0 * mass).abs() <= tol {
                    (
                        BlowupVariant::TwoPlane { alpha: a, beta: b },
                        dir(pos[0].center),
                    )
                } else {
                    (BlowupVariant::Unclassified, None)
                }
            }
            _ => (BlowupVariant::Unclassified, None),
        }
    };
    Ok(BlowupClass {
        variant,
        fit_residual,
        normal,
        arcs,
    })
}

/// Circular runs of equal nonzero sign, further split at interior local
/// minima of `|g|` that lie within one angular step of zero.
fn split_runs(vals: &[f64], signs: &[i8], dth: f64) -> Vec<(i8, Vec<usize>)> {
    let n = vals.len();
    // start at a sign change so no run wraps past index 0 unseen
    let start = (0..n).find(|&k| signs[k] != signs[(k + n - 1) % n]);
    let mut runs: Vec<(i8, Vec<usize>)> = Vec::new();
    match start {
        None => runs.push((signs[0], (0..n).collect())),
        Some(s0) => {
            let mut cur: Vec<usize> = Vec::new();
            let mut cur_sign = signs[s0];
            for step in 0..n {
                let k = (s0 + step) % n;
                if signs[k] != cur_sign {
                    if cur_sign != 0 {
                        runs.push((cur_sign, std::mem::take(&mut cur)));
                    }
                    cur.clear();
                    cur_sign = signs[k];
                }
                cur.push(k);
            }
            if cur_sign != 0 {
                runs.push((cur_sign, cur));
            }
        }
    }
    let full_circle = start.is_none();
    let mut out = Vec::new();
    for (s, idx) in runs {
        let m = idx.len();
        let peak = idx.iter().fold(0.0_f64, |a, &k| a.max(vals[k].abs()));
        let touch = peak * dth.sin() * 1.01;
        let abs = |p: usize| vals[idx[p % m]].abs();
        let mut cuts: Vec<usize> = (0..m)
            .filter(|&p| {
                let interior = full_circle || (p > 0 && p + 1 < m);
                interior && abs(p) <= touch && abs(p) <= abs(p + m - 1) && abs(p) <= abs(p + 1)
            })
            .collect();
        cuts.dedup_by(|b, a| *b == *a + 1);
        if cuts.is_empty() {
            out.push((s, idx));
            continue;
        }
        if full_circle {
            for w in 0..cuts.len() {
                let a = cuts[w];
                let b = if w + 1 < cuts.len() {
                    cuts[w + 1]
                } else {
                    cuts[0] + m
                };
                out.push((s, (a..=b).map(|p| idx[p % m]).collect()));
            }
        } else {
            let mut a = 0;
            for &c in &cuts {
                out.push((s, idx[a..=c].to_vec()));
                a = c;
            }
            out.push((s, idx[a..].to_vec()));
        }
    }
    out
}

fn fit_arc(vals: &[f64], idx: &[usize], sign: i8, dth: f64) -> ArcFit {
    let n = vals.len();
    let theta = |k: usize| k as f64 * dth;
    let (mut scc, mut scs, mut sss, mut sgc, mut sgs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &k in idx {
        let (s, c) = theta(k).sin_cos();
        scc += c * c;
        scs += c * s;
        sss += s * s;
        sgc += vals[k] * c;
        sgs += vals[k] * s;
    }
    let det = scc * sss - scs * scs;
    let (a, b) = if det.abs() > 1e-300 {
        ((sgc * sss - sgs * scs) / det, (sgs * scc - sgc * scs) / det)
    } else {
        (0.0, 0.0)
    };
    let fitted = |t: f64| a * t.cos() + b * t.sin();
    let residual = idx
        .iter()
        .fold(0.0_f64, |m, &k| m.max((vals[k] - fitted(theta(k))).abs()));
    let amp = a.hypot(b);
    let mut center = b.atan2(a);
    if sign < 0 {
        center = wrap(center + PI);
    }
    // each end extends from its outermost sample to the zero of the local
    // linearization, by at most 1.5 steps
    let extension = |k: usize| {
        let t = theta(k);
        let slope = (-a * t.sin() + b * t.cos()).abs();
        if slope > 1e-300 {
            (vals[k].abs() / slope).min(1.5 * dth)
        } else {
            0.0
        }
    };
    let length = if idx.len() == n {
        2.0 * PI
    } else {
        (idx.len() - 1) as f64 * dth + extension(idx[0]) + extension(idx[idx.len() - 1])
    };
    ArcFit {
        sign,
        amplitude: amp,
        center,
        length,
        residual,
    }
}

/// Assigns density labels to extracted points.
///
/// A point is degenerate when the non-degeneracy indicator on the two finest
/// radii falls below `0.05·√(2M)`; otherwise it is half density when
/// `|Θ − ½| ≤ half_tol` and full density when `Θ ≥ 1 − half_tol`.
pub fn label_density_sets<P: Probe + ?Sized>(
    fb: &FreeBoundarySet,
    field: &P,
    radii: &[f64],
    half_tol: f64,
    mass: f64,
) -> Result<FreeBoundarySet> {
    check_descending(radii)?;
    if !(mass > 0.0) || !(half_tol >= 0.0) {
        return invalid("mass must be positive and half_tol nonnegative");
    }
    let rule = BallRule::for_dim(field.dim())?;
    let finest = &radii[radii.len().saturating_sub(2)..];
    let threshold = 0.05 * (2.0 * mass).sqrt();
    let results: Vec<(DensityLabel, Option<f64>)> = fb
        .points
        .par_iter()
        .map(|p| {
            let nd = match nondegeneracy_indicator_with(field, p, finest, &rule) {
                Ok(v) => v,
                Err(_) => return (DensityLabel::Unknown, None),
            };
            let theta = lebesgue_density_with(field, p, radii, &rule)
                .ok()
                .map(|d| d.value);
            let label = if nd < threshold {
                DensityLabel::Degenerate
            } else {
                match theta {
                    Some(t) if (t - 0.5).abs() <= half_tol => DensityLabel::HalfDensity,
                    Some(t) if t >= 1.0 - half_tol => DensityLabel::FullDensity,
                    _ => DensityLabel::Unknown,
                }
            };
            (label, theta)
        })
        .collect();
    let mut out = fb.clone();
    for (k, (label, theta)) in results.into_iter().enumerate() {
        out.labels[k] = label;
        out.densities[k] = theta;
    }
    Ok(out)
}
