//! Samples of a function on S¹ or S².

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{to_vec3, Probe};

/// A function on the unit circle or sphere, sampled on a uniform grid.
///
/// On S² the grid is the shifted latitude-longitude grid
/// `θ_j = (j + ½)·π/n_theta`, `φ_k = 2πk/n_phi`, which never touches a pole.
/// On S¹ `n_theta` is 1 and the samples sit at `φ_k = 2πk/n_phi`.
/// Values are stored row-major in `(j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalFunction {
    pub sphere_dim: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

impl SphericalFunction {
    pub fn circle(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return invalid("a circle function needs at least 3 samples");
        }
        Self::check_finite(&values)?;
        Ok(Self {
            sphere_dim: 1,
            n_theta: 1,
            n_phi: values.len(),
            values,
        })
    }

    pub fn circle_from_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        Self::circle((0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect())
    }

    pub fn sphere(n_theta: usize, n_phi: usize, values: Vec<f64>) -> Result<Self> {
        if n_theta < 3 || n_phi < 3 {
            return invalid("a sphere function needs n_theta, n_phi >= 3");
        }
        if values.len() != n_theta * n_phi {
            return invalid(format!(
                "expected {} samples for a {n_theta}x{n_phi} grid, got {}",
                n_theta * n_phi,
                values.len()
            ));
        }
        Self::check_finite(&values)?;
        Ok(Self {
            sphere_dim: 2,
            n_theta,
            n_phi,
            values,
        })
    }

    pub fn sphere_from_fn<F: Fn(f64, f64) -> f64>(
        n_theta: usize,
        n_phi: usize,
        f: F,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_theta * n_phi);
        for j in 0..n_theta {
            let t = (j as f64 + 0.5) * PI / n_theta as f64;
            for k in 0..n_phi {
                values.push(f(t, 2.0 * PI * k as f64 / n_phi as f64));
            }
        }
        Self::sphere(n_theta, n_phi, values)
    }

    /// The trace `u(c + r·σ)/r` of a field on the sphere of radius `r`.
    pub fn from_probe<P: Probe + ?Sized>(
        probe: &P,
        center: &[f64],
        radius: f64,
        n_theta: usize,
        n_phi: usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return invalid("trace radius must be positive");
        }
        let c = to_vec3(center)?;
        match probe.dim() {
            2 => {
                let vals = (0..n_phi)
                    .map(|k| {
                        let a = 2.0 * PI * k as f64 / n_phi as f64;
                        let x = [c[0] + radius * a.cos(), c[1] + radius * a.sin(), 0.0];
                        probe.value(&x).map(|v| v / radius)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::circle(vals)
            }
            3 => {
                let mut vals = Vec::with_capacity(n_theta * n_phi);
                for j in 0..n_theta {
                    let t = (j as f64 + 0.5) * PI / n_theta as f64;
                    for k in 0..n_phi {
                        let p = 2.0 * PI * k as f64 / n_phi as f64;
                        let n = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
                        let x = [
                            c[0] + radius * n[0],
                            c[1] + radius * n[1],
                            c[2] + radius * n[2],
                        ];
                        vals.push(probe.value(&x)? / radius);
                    }
                }
                Self::sphere(n_theta, n_phi, vals)
            }
            d => invalid(format!("traces need a 2D or 3D field (got {d})")),
        }
    }

    fn check_finite(values: &[f64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "spherical samples must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn d_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.d_theta()
    }

    pub fn phi(&self, k: usize) -> f64 {
        k as f64 * self.d_phi()
    }

    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_phi + k % self.n_phi]
    }

    /// Nodes with `g > 0`.
    pub fn support_mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v > 0.0).collect()
    }

    /// Parses `θ,φ,g` rows (one header row) on a complete shifted grid.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::Format(format!("line {}: expected θ,φ,g", ln + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))
            };
            rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
        }
        if rows.is_empty() {
            return Err(Error::Format("no samples".into()));
        }
        let thetas = distinct(rows.iter().map(|r| r.0));
        let phis = distinct(rows.iter().map(|r| r.1));
        let (nt, np) = (thetas.len(), phis.len());
        if nt * np != rows.len() {
            return Err(Error::Format(
                "samples do not form a complete θ×φ grid".into(),
            ));
        }
        let mut values = vec![f64::NAN; nt * np];
        for (t, p, g) in rows {
            let j = ((t / (PI / nt as f64)) - 0.5).round();
            let k = (p / (2.0 * PI / np as f64)).round();
            if j < 0.0 || k < 0.0 || j as usize >= nt || k as usize >= np {
                return Err(Error::Format("sample lies off the shifted grid".into()));
            }
            values[j as usize * np + k as usize] = g;
        }
        Self::sphere(nt, np, values)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,g\n");
        for j in 0..self.n_theta {
            for k in 0..self.n_phi {
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e}\n",
                    self.theta(j),
                    self.phi(k),
                    self.at(j, k)
                ));
            }
        }
        out
    }
}

fn distinct(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}
