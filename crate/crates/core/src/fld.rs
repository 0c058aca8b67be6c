//! FLD persistence: a JSON meta file plus a raw little-endian f64 payload.
//!
//! `u.fld` holds the metadata and names its payload, by default `u.fld.raw`
//! in the same directory. Exterior nodes are stored as NaN.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Domain, GridSpec, NodeKind, ScalarField};
use crate::mollifier::BetaProfile;

pub const FLD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FldMeta {
    pub version: u32,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub eps: Option<f64>,
    pub profile: Option<String>,
    #[serde(default = "unit_scale")]
    pub profile_scale: f64,
    #[serde(rename = "M")]
    pub mass: Option<f64>,
    pub raw: String,
    pub domain: Domain,
}

fn unit_scale() -> f64 {
    1.0
}

fn raw_path(meta_path: &Path, raw: &str) -> PathBuf {
    match meta_path.parent() {
        Some(dir) => dir.join(raw),
        None => PathBuf::from(raw),
    }
}

pub fn write_fld(
    path: &Path,
    field: &ScalarField,
    profile: Option<&BetaProfile>,
) -> Result<FldMeta> {
    let raw = format!(
        "{}.raw",
        path.file_name()
            .ok_or_else(|| Error::InvalidParameter(format!(
                "'{}' is not a file path",
                path.display()
            )))?
            .to_string_lossy()
    );
    let meta = FldMeta {
        version: FLD_VERSION,
        dim: field.dim(),
        shape: field.grid.shape.clone(),
        spacing: field.grid.spacing,
        origin: field.grid.origin.clone(),
        eps: field.eps,
        profile: profile.map(|p| p.name().to_string()),
        profile_scale: profile.map_or(1.0, BetaProfile::scale),
        mass: profile.map(BetaProfile::mass),
        raw: raw.clone(),
        domain: field.domain.clone(),
    };
    let mut bytes = Vec::with_capacity(8 * field.len());
    for (v, m) in field.values.iter().zip(&field.mask) {
        let v = if *m == NodeKind::Exterior {
            f64::NAN
        } else {
            *v
        };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(raw_path(path, &raw), bytes)?;
    fs::write(path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

pub fn read_fld(path: &Path) -> Result<(ScalarField, FldMeta)> {
    let meta: FldMeta = serde_json::from_str(&fs::read_to_string(path)?)?;
    if meta.version != FLD_VERSION {
        return Err(Error::Format(format!(
            "unsupported FLD version {}",
            meta.version
        )));
    }
    if meta.shape.len() != meta.dim {
        return Err(Error::Format("shape length does not match dim".into()));
    }
    let grid = GridSpec::new(meta.shape.clone(), meta.spacing, meta.origin.clone())?;
    let bytes = fs::read(raw_path(path, &meta.raw))?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            8 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut field = ScalarField::with_domain(grid, values, meta.domain.clone())?;
    if field
        .values
        .iter()
        .zip(&field.mask)
        .any(|(v, m)| *m != NodeKind::Exterior && !v.is_finite())
    {
        return Err(Error::Format("non-finite value at an active node".into()));
    }
    field.eps = meta.eps;
    Ok((field, meta))
}

/// Rebuilds the profile recorded in the meta file, if any.
pub fn meta_profile(meta: &FldMeta) -> Result<Option<BetaProfile>> {
    match meta.profile.as_deref() {
        None => Ok(None),
        Some("poly") => BetaProfile::polynomial_scaled(meta.profile_scale).map(Some),
        Some("smooth") => BetaProfile::smooth_scaled(meta.profile_scale).map(Some),
        Some(other) => Err(Error::InvalidProfile(format!(
            "profile '{other}' cannot be rebuilt from an FLD file"
        ))),
    }
}
