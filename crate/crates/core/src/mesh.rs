//! Triangulation of the support region of a spherical function and its image
//! under `X`, with topology and curvature summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spherical::SphericalFunction;
use crate::support_geometry::{
    branch_threshold, contact_angle, curvature_report, default_boundary_tol, fundamental_form_with,
    immersion_x, support_boundary_nodes,
};
use crate::Vec3;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// Zero-based vertex indices.
    pub faces: Vec<[usize; 3]>,
    /// Grid node `(j, k)` of every vertex.
    pub nodes: Vec<(usize, usize)>,
}

impl Mesh {
    pub fn euler_characteristic(&self) -> i64 {
        let edges = self.edge_use();
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    fn edge_use(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Connected components of the edges used by exactly one face.
    pub fn boundary_loops(&self) -> usize {
        let boundary: Vec<(usize, usize)> = self
            .edge_use()
            .into_iter()
            .filter(|(_, n)| *n == 1)
            .map(|(e, _)| e)
            .collect();
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            let mut c = x;
            while p[&c] != r {
                let next = p[&c];
                p.insert(c, r);
                c = next;
            }
            r
        }
        for &(a, b) in &boundary {
            parent.entry(a).or_insert(a);
            parent.entry(b).or_insert(b);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra, rb);
            }
        }
        let keys: Vec<usize> = parent.keys().copied().collect();
        let roots: BTreeSet<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
        roots.len()
    }

    /// Wavefront OBJ text; coordinates carry 17 significant digits.
    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(64 * (self.vertices.len() + self.faces.len()));
        s.push_str("# support-function surface\n");
        for v in &self.vertices {
            s.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        s
    }
}

/// Triangulates the image of the support `{g > 0}`.
///
/// Vertices are the support nodes with a full one-ring (rows `1..n_theta−1`)
/// in row-major order. Every grid quad with four support corners gives two
/// triangles; a fully supported first or last row is closed by a fan.
pub fn export_mesh(g: &SphericalFunction) -> Result<Mesh> {
    if g.sphere_dim != 2 {
        return Err(Error::InvalidParameter(
            "meshes need a function on S²".into(),
        ));
    }
    let (nt, np) = (g.n_theta, g.n_phi);
    let mut index = vec![usize::MAX; nt * np];
    let mut vertices = Vec::new();
    let mut nodes = Vec::new();
    for j in 1..nt - 1 {
        for k in 0..np {
            if g.at(j, k) > 0.0 {
                index[j * np + k] = vertices.len();
                vertices.push(immersion_x(g, j, k)?);
                nodes.push((j, k));
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::EmptySurface);
    }
    let id = |j: usize, k: usize| index[j * np + k % np];
    let mut faces = Vec::new();
    for j in 1..nt.saturating_sub(2) {
        for k in 0..np {
            let (a, b, c, d) = (id(j, k), id(j + 1, k), id(j + 1, k + 1), id(j, k + 1));
            if [a, b, c, d].contains(&usize::MAX) {
                continue;
            }
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let caps: &[(usize, bool)] = if nt > 3 {
        &[(1, false), (nt - 2, true)]
    } else {
        &[]
    };
    for &(j, forward) in caps {
        if (0..np).all(|k| id(j, k) != usize::MAX) {
            for k in 1..np - 1 {
                let (a, b, c) = (id(j, 0), id(j, k), id(j, k + 1));
                faces.push(if forward { [a, b, c] } else { [a, c, b] });
            }
        }
    }
    Ok(Mesh {
        vertices,
        faces,
        nodes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct XNormStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub n_theta: usize,
    pub n_phi: usize,
    pub vertices: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
    pub max_mean_residual: f64,
    pub max_conformality_defect: f64,
    pub branch_points: usize,
    /// `min X·n = min g` over the support nodes.
    pub min_support_value: f64,
    pub max_x_norm: f64,
    pub boundary_x_norm: Option<XNormStats>,
    pub max_contact_angle_error: Option<f64>,
}

/// Curvature and topology summary of the support-region surface.
///
/// Residuals and defects are taken over support nodes whose stencils stay
/// inside the support.
pub fn surface_summary(g: &SphericalFunction, mesh: &Mesh, mass: f64) -> Result<SurfaceSummary> {
    let (nt, np) = (g.n_theta, g.n_phi);
    let inside = |j: usize, k: usize| j < nt && g.at(j, k) > 0.0;
    let mut max_res: f64 = 0.0;
    let mut max_def: f64 = 0.0;
    let mut branch = 0;
    let mut min_g = f64::INFINITY;
    let mut max_x: f64 = 0.0;
    let threshold = branch_threshold(g);
    for &(j, k) in &mesh.nodes {
        min_g = min_g.min(g.at(j, k));
        let rep = curvature_report(g, j, k)?;
        max_x = max_x.max(crate::field::norm(&rep.x));
        let ring = inside(j - 1, k)
            && inside(j + 1, k)
            && inside(j, (k + 1) % np)
            && inside(j, (k + np - 1) % np);
        if ring {
            max_res = max_res.max(rep.mean_residual.abs());
        }
        if j >= 2 && j + 2 < nt && ring {
            let wide = inside(j - 2, k)
                && inside(j + 2, k)
                && inside(j + 1, (k + 1) % np)
                && inside(j - 1, (k + 1) % np)
                && inside(j + 1, (k + np - 1) % np)
                && inside(j - 1, (k + np - 1) % np);
            if wide {
                let ff = fundamental_form_with(g, j, k, threshold)?;
                max_def = max_def.max(ff.conformality_defect);
                if ff.branch_point {
                    branch += 1;
                }
            }
        }
    }
    let boundary: Vec<(usize, usize)> = support_boundary_nodes(g)
        .into_iter()
        .filter(|(j, _)| *j >= 3 && j + 3 < nt)
        .collect();
    let (bstats, angle_err) = if boundary.is_empty() {
        (None, None)
    } else {
        let c = contact_angle(g, &boundary, mass, default_boundary_tol(g, mass))?;
        let norms: Vec<f64> = c.iter().map(|s| s.x_norm).collect();
        let stats = XNormStats {
            count: norms.len(),
            min: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: norms.iter().sum::<f64>() / norms.len() as f64,
        };
        let err = c
            .iter()
            .map(|s| (s.angle - std::f64::consts::FRAC_PI_2).abs())
            .fold(0.0, f64::max);
        (Some(stats), Some(err))
    };
    Ok(SurfaceSummary {
        n_theta: nt,
        n_phi: np,
        vertices: mesh.vertices.len(),
        faces: mesh.faces.len(),
        euler_characteristic: mesh.euler_characteristic(),
        boundary_loops: mesh.boundary_loops(),
        max_mean_residual: max_res,
        max_conformality_defect: max_def,
        branch_points: branch,
        min_support_value: min_g,
        max_x_norm: max_x,
        boundary_x_norm: bstats,
        max_contact_angle_error: angle_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::catenoid_g;

    #[test]
    fn full_sphere_is_closed() {
        let g = SphericalFunction::sphere_from_fn(16, 32, |_, _| 1.5).unwrap();
        let m = export_mesh(&g).unwrap();
        assert_eq!(m.vertices.len(), 14 * 32);
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.boundary_loops(), 0);
    }

    #[test]
    fn catenoid_is_ring_type() {
        let g =
            SphericalFunction::sphere_from_fn(64, 128, |t, _| catenoid_g(t).unwrap().0).unwrap();
        let m = export_mesh(&g).unwrap();
        let masked = (1..63)
            .flat_map(|j| (0..128).map(move |k| (j, k)))
            .filter(|&(j, k)| g.at(j, k) > 0.0)
            .count();
        assert_eq!(m.vertices.len(), masked);
        assert_eq!(m.euler_characteristic(), 0);
        assert_eq!(m.boundary_loops(), 2);
        let obj = m.to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), masked);
    }

    #[test]
    fn empty_support_is_an_error() {
        let g = SphericalFunction::sphere_from_fn(8, 16, |_, _| -1.0).unwrap();
        assert!(matches!(export_mesh(&g), Err(Error::EmptySurface)));
    }
}
