//! Uniform Cartesian grids, node masks and the sampled scalar field.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// Geometry of a uniform grid: node counts per axis, step and origin node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
}

impl GridSpec {
    pub fn new(shape: Vec<usize>, spacing: f64, origin: Vec<f64>) -> Result<Self> {
        let g = Self {
            shape,
            spacing,
            origin,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering `[-half_width, half_width]^dim` with step `h`, with a
    /// node at the origin.
    pub fn centered(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(half_width > 0.0) {
            return invalid("grid step and half width must be positive");
        }
        let k = (half_width / h).round() as usize;
        Self::new(vec![2 * k + 1; dim], h, vec![-(k as f64) * h; dim])
    }

    /// Grid for a ball of radius `radius` about the origin, with one node
    /// layer beyond the ball for Dirichlet data and one exterior margin.
    pub fn for_ball(dim: usize, radius: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(radius > 0.0) {
            return invalid("grid step and radius must be positive");
        }
        let k = (radius / h).ceil() as usize + 2;
        Self::new(vec![2 * k + 1; dim], h, vec![-(k as f64) * h; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.shape.len();
        if !(1..=3).contains(&d) {
            return invalid(format!("grid dimension must be 1, 2 or 3 (got {d})"));
        }
        if self.origin.len() != d {
            return invalid("origin length does not match grid dimension");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return invalid("grid spacing must be positive");
        }
        if self.shape.iter().any(|n| *n < 2) {
            return invalid("every axis needs at least two nodes");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn index(&self, ijk: &[usize]) -> usize {
        let s = self.strides();
        ijk.iter().zip(&s).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let s = self.strides();
        for a in 0..self.dim() {
            out[a] = idx / s[a];
            idx %= s[a];
        }
        out
    }

    pub fn node_position(&self, idx: usize) -> Vec3 {
        let m = self.multi_index(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.origin[a] + m[a] as f64 * self.spacing;
        }
        x
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + (self.shape[axis] - 1) as f64 * self.spacing
    }

    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        self.shape == other.shape && self.spacing == other.spacing && self.origin == other.origin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    Dirichlet,
    Exterior,
}

/// How the node mask was generated; persisted so files round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Outer frame nodes carry Dirichlet data, all others are unknowns.
    Box,
    /// Nodes strictly inside the ball are unknowns; the first exterior layer
    /// carries Dirichlet data.
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<NodeKind>,
    pub domain: Domain,
    pub eps: Option<f64>,
}

impl ScalarField {
    /// Field on a box domain; frame nodes are Dirichlet nodes.
    pub fn on_box(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        let mask = box_mask(&grid);
        Self::assemble(grid, values, mask, Domain::Box)
    }

    pub fn from_fn_box<F: Fn(&Vec3) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        grid.validate()?;
        let values = (0..grid.len()).map(|i| f(&grid.node_position(i))).collect();
        Self::on_box(grid, values)
    }

    /// Field on a ball domain. Exterior nodes are set to NaN regardless of
    /// the supplied values.
    pub fn on_ball(
        grid: GridSpec,
        center: Vec<f64>,
        radius: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        if center.len() != grid.dim() {
            return invalid("ball center has the wrong dimension");
        }
        let mask = ball_mask(&grid, &center, radius)?;
        let mut f = Self::assemble(grid, values, mask, Domain::Ball { center, radius })?;
        for (v, m) in f.values.iter_mut().zip(&f.mask) {
            if *m == NodeKind::Exterior {
                *v = f64::NAN;
            }
        }
        Ok(f)
    }

    pub fn from_fn_ball<F: Fn(&Vec3) -> f64>(
        grid: GridSpec,
        center: Vec<f64>,
        radius: f64,
        f: F,
    ) -> Result<Self> {
        grid.validate()?;
        let values = (0..grid.len()).map(|i| f(&grid.node_position(i))).collect();
        Self::on_ball(grid, center, radius, values)
    }

    /// Rebuilds the mask for a stored domain description.
    pub fn with_domain(grid: GridSpec, values: Vec<f64>, domain: Domain) -> Result<Self> {
        match domain {
            Domain::Box => Self::on_box(grid, values),
            Domain::Ball { center, radius } => Self::on_ball(grid, center, radius, values),
        }
    }

    fn assemble(
        grid: GridSpec,
        values: Vec<f64>,
        mask: Vec<NodeKind>,
        domain: Domain,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidDomain(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            mask,
            domain,
            eps: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn h(&self) -> f64 {
        self.grid.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.mask
            .iter()
            .filter(|m| **m == NodeKind::Interior)
            .count()
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.mask[idx] != NodeKind::Exterior
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid.same_geometry(&other.grid) && self.mask == other.mask
    }

    /// Replaces node values with `f(x)` on every non-exterior node.
    pub fn map_positions<F: Fn(&Vec3) -> f64>(&mut self, f: F) {
        for i in 0..self.values.len() {
            if self.is_active(i) {
                self.values[i] = f(&self.grid.node_position(i));
            }
        }
    }

    /// Node gradient: central differences where both neighbors are active,
    /// one-sided at the mask edge, zero along an axis with no active neighbor.
    pub fn node_gradient(&self, idx: usize) -> Vec3 {
        let mut g = [0.0; 3];
        let h = self.grid.spacing;
        let m = self.grid.multi_index(idx);
        let strides = self.grid.strides();
        let u0 = self.values[idx];
        for a in 0..self.dim() {
            let s = strides[a];
            let lo = (m[a] > 0 && self.is_active(idx - s)).then(|| self.values[idx - s]);
            let hi = (m[a] + 1 < self.grid.shape[a] && self.is_active(idx + s))
                .then(|| self.values[idx + s]);
            g[a] = match (lo, hi) {
                (Some(l), Some(r)) => (r - l) / (2.0 * h),
                (None, Some(r)) => (r - u0) / h,
                (Some(l), None) => (u0 - l) / h,
                (None, None) => 0.0,
            };
        }
        g
    }

    /// Multilinear interpolation of values and node gradients at `x`.
    pub fn interpolate(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        let d = self.dim();
        let h = self.grid.spacing;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..d {
            let s = (x[a] - self.grid.origin[a]) / h;
            let n = self.grid.shape[a];
            if !(s >= -1e-9 && s <= (n - 1) as f64 + 1e-9) {
                return Err(Error::OutOfDomain(format!("{:?} leaves the grid", &x[..d])));
            }
            let i = (s.floor().max(0.0) as usize).min(n - 2);
            base[a] = i;
            frac[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let strides = self.grid.strides();
        let mut value = 0.0;
        let mut grad = [0.0; 3];
        for corner in 0..(1usize << d) {
            let mut idx = 0;
            let mut w = 1.0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx += (base[a] + bit) * strides[a];
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            if !self.is_active(idx) {
                return Err(Error::OutOfDomain(format!(
                    "{:?} touches exterior nodes",
                    &x[..d]
                )));
            }
            value += w * self.values[idx];
            let g = self.node_gradient(idx);
            for a in 0..d {
                grad[a] += w * g[a];
            }
        }
        Ok((value, grad))
    }

    /// Value-only multilinear interpolation.
    pub fn interpolate_value(&self, x: &Vec3) -> Result<f64> {
        let d = self.dim();
        let h = self.grid.spacing;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..d {
            let s = (x[a] - self.grid.origin[a]) / h;
            let n = self.grid.shape[a];
            if !(s >= -1e-9 && s <= (n - 1) as f64 + 1e-9) {
                return Err(Error::OutOfDomain(format!("{:?} leaves the grid", &x[..d])));
            }
            let i = (s.floor().max(0.0) as usize).min(n - 2);
            base[a] = i;
            frac[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        let strides = self.grid.strides();
        let mut value = 0.0;
        for corner in 0..(1usize << d) {
            let mut idx = 0;
            let mut w = 1.0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx += (base[a] + bit) * strides[a];
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            if !self.is_active(idx) {
                return Err(Error::OutOfDomain(format!(
                    "{:?} touches exterior nodes",
                    &x[..d]
                )));
            }
            value += w * self.values[idx];
        }
        Ok(value)
    }

    /// max |grad u| over interior nodes selected by `keep`.
    pub fn max_gradient_where<F: Fn(usize, &Vec3, f64) -> bool>(&self, keep: F) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            if self.mask[i] != NodeKind::Interior {
                continue;
            }
            let x = self.grid.node_position(i);
            if keep(i, &x, self.values[i]) {
                best = best.max(norm(&self.node_gradient(i)));
            }
        }
        best
    }
}

fn box_mask(grid: &GridSpec) -> Vec<NodeKind> {
    (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            let edge = (0..grid.dim()).any(|a| m[a] == 0 || m[a] + 1 == grid.shape[a]);
            if edge {
                NodeKind::Dirichlet
            } else {
                NodeKind::Interior
            }
        })
        .collect()
}

fn ball_mask(grid: &GridSpec, center: &[f64], radius: f64) -> Result<Vec<NodeKind>> {
    if !(radius > 0.0) {
        return invalid("ball radius must be positive");
    }
    let d = grid.dim();
    let inside: Vec<bool> = (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            let x = grid.node_position(i);
            let on_frame = (0..d).any(|a| m[a] == 0 || m[a] + 1 == grid.shape[a]);
            let r2: f64 = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum();
            !on_frame && r2 < radius * radius
        })
        .collect();
    let strides = grid.strides();
    let mut mask = vec![NodeKind::Exterior; grid.len()];
    for i in 0..grid.len() {
        if inside[i] {
            mask[i] = NodeKind::Interior;
            continue;
        }
        let m = grid.multi_index(i);
        let touches = (0..d).any(|a| {
            (m[a] > 0 && inside[i - strides[a]])
                || (m[a] + 1 < grid.shape[a] && inside[i + strides[a]])
        });
        if touches {
            mask[i] = NodeKind::Dirichlet;
        }
    }
    if !mask.contains(&NodeKind::Interior) {
        return Err(Error::InvalidDomain("ball contains no grid nodes".into()));
    }
    Ok(mask)
}

/// Point-sampling access to a scalar field and its gradient.
///
/// Implemented by interpolated grid fields and by closed-form reference
/// solutions, so that shell and ball functionals can be evaluated on both.
pub trait Probe: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, x: &Vec3) -> Result<(f64, Vec3)>;
    fn value(&self, x: &Vec3) -> Result<f64> {
        Ok(self.sample(x)?.0)
    }
    /// Grid step when the probe is backed by a grid.
    fn resolution(&self) -> Option<f64> {
        None
    }
}

impl Probe for ScalarField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn sample(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        self.interpolate(x)
    }
    fn value(&self, x: &Vec3) -> Result<f64> {
        self.interpolate_value(x)
    }
    fn resolution(&self) -> Option<f64> {
        Some(self.grid.spacing)
    }
}

/// A closed-form field given by value and gradient closures.
pub struct FnProbe<F>
where
    F: Fn(&Vec3) -> (f64, Vec3) + Sync,
{
    dim: usize,
    f: F,
}

impl<F> FnProbe<F>
where
    F: Fn(&Vec3) -> (f64, Vec3) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Probe for FnProbe<F>
where
    F: Fn(&Vec3) -> (f64, Vec3) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn sample(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        Ok((self.f)(x))
    }
}

pub fn to_vec3(x: &[f64]) -> Result<Vec3> {
    if x.is_empty() || x.len() > 3 {
        return invalid(format!(
            "expected a point with 1..=3 coordinates, got {}",
            x.len()
        ));
    }
    let mut p = [0.0; 3];
    p[..x.len()].copy_from_slice(x);
    Ok(p)
}

pub fn norm(x: &Vec3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn axpy(center: &Vec3, r: f64, dir: &Vec3) -> Vec3 {
    [
        center[0] + r * dir[0],
        center[1] + r * dir[1],
        center[2] + r * dir[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_indexing_round_trips() {
        let g = GridSpec::new(vec![3, 4, 5], 0.5, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.strides(), vec![20, 5, 1]);
        let idx = g.index(&[2, 1, 3]);
        assert_eq!(g.multi_index(idx), [2, 1, 3]);
        assert_eq!(g.node_position(idx), [1.0, 1.5, 3.5]);
    }

    #[test]
    fn ball_mask_has_dirichlet_shell() {
        let g = GridSpec::for_ball(2, 1.0, 0.1).unwrap();
        let f = ScalarField::on_ball(g, vec![0.0, 0.0], 1.0, vec![0.0; 25 * 25]).unwrap();
        let strides = f.grid.strides();
        for i in 0..f.len() {
            if f.mask[i] == NodeKind::Interior {
                for s in &strides {
                    assert_ne!(f.mask[i - s], NodeKind::Exterior);
                    assert_ne!(f.mask[i + s], NodeKind::Exterior);
                }
            } else if f.mask[i] == NodeKind::Exterior {
                assert!(f.values[i].is_nan());
            }
        }
    }

    #[test]
    fn ball_touching_the_frame_uses_frame_nodes_as_dirichlet() {
        let g = GridSpec::centered(2, 1.0, 0.1).unwrap();
        let f = ScalarField::on_ball(g, vec![0.0, 0.0], 1.0, vec![0.0; 21 * 21]).unwrap();
        let edge = f.grid.index(&[0, 10]);
        assert_eq!(f.mask[edge], NodeKind::Dirichlet);
        let tiny = ScalarField::on_ball(
            GridSpec::centered(2, 1.0, 0.1).unwrap(),
            vec![0.0, 0.0],
            0.01,
            vec![0.0; 21 * 21],
        );
        assert!(tiny.is_ok());
        let none = ScalarField::on_ball(
            GridSpec::centered(2, 1.0, 0.1).unwrap(),
            vec![0.05, 0.05],
            0.01,
            vec![0.0; 21 * 21],
        );
        assert!(matches!(none, Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn interpolation_is_exact_on_affine_fields() {
        let g = GridSpec::centered(3, 1.0, 0.25).unwrap();
        let f = ScalarField::from_fn_box(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2]).unwrap();
        let (v, grad) = f.interpolate(&[0.13, -0.41, 0.77]).unwrap();
        assert!((v - (1.0 + 0.26 + 0.41 + 0.385)).abs() < 1e-13);
        assert!((grad[0] - 2.0).abs() < 1e-13);
        assert!((grad[1] + 1.0).abs() < 1e-13);
        assert!((grad[2] - 0.5).abs() < 1e-13);
        assert!(f.interpolate(&[1.5, 0.0, 0.0]).is_err());
    }
}
