//! The reaction profile beta, its primitive B and the eps-scaled family
//! `beta_eps(t) = beta(t / eps) / eps`.
//!
//! Every profile is nonnegative and supported in [0, 1]. The primitive is
//! clamped: `B(s) = 0` for `s <= 0` and `B(s) = M` for `s >= 1`.

use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre_on;

/// Number of Hermite panels used to tabulate the primitive of the smooth bump.
const SMOOTH_PANELS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `6 t (1 - t)` on [0, 1], unit mass, C^1 at the support ends.
    PolynomialBump,
    /// Normalized `exp(-1 / (t (1 - t)))`, C-infinity, unit mass.
    SmoothBump,
    /// Piecewise-linear interpolation of `(t, beta)` samples covering [0, 1].
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone)]
pub struct BetaProfile {
    kind: ProfileKind,
    scale: f64,
    /// Cumulative primitive at sample points (tabulated) or Hermite knots (smooth).
    primitive: Arc<Vec<f64>>,
    mass: f64,
    sup: f64,
}

impl BetaProfile {
    pub fn polynomial() -> Self {
        Self::polynomial_scaled(1.0).expect("unit scale is valid")
    }

    pub fn polynomial_scaled(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        Ok(Self {
            kind: ProfileKind::PolynomialBump,
            scale,
            primitive: Arc::new(Vec::new()),
            mass: scale,
            sup: 1.5 * scale,
        })
    }

    pub fn smooth() -> Self {
        Self::smooth_scaled(1.0).expect("unit scale is valid")
    }

    pub fn smooth_scaled(scale: f64) -> Result<Self> {
        check_scale(scale)?;
        let norm = smooth_normalization();
        // panel-wise Gauss-Legendre primitive at the Hermite knots
        let dx = 1.0 / SMOOTH_PANELS as f64;
        let mut primitive = Vec::with_capacity(SMOOTH_PANELS + 1);
        let mut acc = 0.0;
        primitive.push(0.0);
        for p in 0..SMOOTH_PANELS {
            let (x, w) = gauss_legendre_on(8, p as f64 * dx, (p + 1) as f64 * dx);
            acc += x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * raw_smooth(*x))
                .sum::<f64>()
                / norm;
            primitive.push(acc);
        }
        // the normalized total is 1 up to rounding; pin the last knot
        let total = *primitive.last().unwrap();
        for v in primitive.iter_mut() {
            *v /= total;
        }
        Ok(Self {
            kind: ProfileKind::SmoothBump,
            scale,
            primitive: Arc::new(primitive),
            mass: scale,
            sup: scale * raw_smooth(0.5) / norm,
        })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        check_scale(scale)?;
        if samples.len() < 2 {
            return Err(Error::InvalidProfile(
                "table needs at least two rows".into(),
            ));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidProfile(
                    "table abscissae must be strictly increasing".into(),
                ));
            }
        }
        if samples[0].0 != 0.0 || samples.last().unwrap().0 != 1.0 {
            return Err(Error::InvalidProfile(
                "table must start at t = 0 and end at t = 1".into(),
            ));
        }
        if samples
            .iter()
            .any(|(t, b)| !t.is_finite() || !b.is_finite() || *b < 0.0)
        {
            return Err(Error::InvalidProfile(
                "table values must be finite and nonnegative".into(),
            ));
        }
        let mut primitive = Vec::with_capacity(samples.len());
        let mut acc = 0.0;
        primitive.push(0.0);
        for w in samples.windows(2) {
            acc += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
            primitive.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidProfile("profile has zero mass".into()));
        }
        let sup = samples.iter().map(|s| s.1).fold(0.0, f64::max) * scale;
        Ok(Self {
            kind: ProfileKind::Tabulated(samples),
            scale,
            primitive: Arc::new(primitive),
            mass: acc * scale,
            sup,
        })
    }

    /// Parses a two-column text table `t, beta` with one header row.
    /// Columns may be separated by commas or whitespace.
    pub fn parse_table(text: &str, scale: f64) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Format(format!(
                    "profile table line {}: expected two columns",
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("profile table line {}: {e}", lineno + 1)))
            };
            rows.push((parse(cols[0])?, parse(cols[1])?));
        }
        Self::tabulated(rows, scale)
    }

    pub fn from_table_file(path: &Path, scale: f64) -> Result<Self> {
        Self::parse_table(&std::fs::read_to_string(path)?, scale)
    }

    /// `"poly"`, `"smooth"`, or a path to a profile table.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "poly" | "polynomial" | "polynomial_bump" => Ok(Self::polynomial()),
            "smooth" | "smooth_bump" => Ok(Self::smooth()),
            other => {
                let path = Path::new(other);
                if path.exists() {
                    Self::from_table_file(path, 1.0)
                } else {
                    Err(Error::InvalidProfile(format!("unknown profile '{other}'")))
                }
            }
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::PolynomialBump => "poly",
            ProfileKind::SmoothBump => "smooth",
            ProfileKind::Tabulated(_) => "tabulated",
        }
    }

    /// M = integral of beta over [0, 1].
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// sup of beta over [0, 1].
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// beta(t), zero outside [0, 1].
    pub fn beta(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        let raw = match &self.kind {
            ProfileKind::PolynomialBump => 6.0 * t * (1.0 - t),
            ProfileKind::SmoothBump => raw_smooth(t) / smooth_normalization_cached(),
            ProfileKind::Tabulated(s) => {
                let i = segment(s, t);
                let (t0, b0) = s[i];
                let (t1, b1) = s[i + 1];
                b0 + (b1 - b0) * (t - t0) / (t1 - t0)
            }
        };
        self.scale * raw
    }

    /// beta'(t); one-sided at table knots.
    pub fn beta_prime(&self, t: f64) -> f64 {
        if !(t > 0.0 && t < 1.0) {
            return 0.0;
        }
        let raw = match &self.kind {
            ProfileKind::PolynomialBump => 6.0 - 12.0 * t,
            ProfileKind::SmoothBump => {
                let q = t * (1.0 - t);
                raw_smooth(t) / smooth_normalization_cached() * (1.0 - 2.0 * t) / (q * q)
            }
            ProfileKind::Tabulated(s) => {
                let i = segment(s, t);
                (s[i + 1].1 - s[i].1) / (s[i + 1].0 - s[i].0)
            }
        };
        self.scale * raw
    }

    /// B(s) = integral of beta over [0, s], clamped to [0, M].
    pub fn primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return self.mass;
        }
        let raw = match &self.kind {
            ProfileKind::PolynomialBump => s * s * (3.0 - 2.0 * s),
            ProfileKind::SmoothBump => {
                let x = s * SMOOTH_PANELS as f64;
                let p = (x.floor() as usize).min(SMOOTH_PANELS - 1);
                let u = x - p as f64;
                let h = 1.0 / SMOOTH_PANELS as f64;
                let norm = smooth_normalization_cached();
                let (y0, y1) = (self.primitive[p], self.primitive[p + 1]);
                let d0 = raw_smooth(p as f64 * h) / norm * h;
                let d1 = raw_smooth((p + 1) as f64 * h) / norm * h;
                hermite(y0, y1, d0, d1, u)
            }
            ProfileKind::Tabulated(samples) => {
                let i = segment(samples, s);
                let (t0, b0) = samples[i];
                let (t1, b1) = samples[i + 1];
                let dt = s - t0;
                let slope = (b1 - b0) / (t1 - t0);
                self.primitive[i] + b0 * dt + 0.5 * slope * dt * dt
            }
        };
        (self.scale * raw).clamp(0.0, self.mass)
    }

    /// beta_eps(t) = beta(t / eps) / eps.
    pub fn beta_eps(&self, t: f64, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        Ok(self.beta(t / eps) / eps)
    }

    /// Unchecked variant used in inner loops where eps is validated once.
    #[inline]
    pub(crate) fn beta_eps_unchecked(&self, t: f64, eps: f64) -> f64 {
        self.beta(t / eps) / eps
    }

    #[inline]
    pub(crate) fn beta_eps_prime_unchecked(&self, t: f64, eps: f64) -> f64 {
        self.beta_prime(t / eps) / (eps * eps)
    }
}

/// `eval_beta(profile, t, eps)`.
pub fn eval_beta(profile: &BetaProfile, t: f64, eps: f64) -> Result<f64> {
    profile.beta_eps(t, eps)
}

/// `eval_B(profile, s)`.
pub fn eval_primitive(profile: &BetaProfile, s: f64) -> f64 {
    profile.primitive(s)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        invalid(format!("eps must be positive, got {eps}"))
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProfile(format!(
            "profile scale must be positive, got {scale}"
        )))
    }
}

fn segment(samples: &[(f64, f64)], t: f64) -> usize {
    let idx = samples.partition_point(|s| s.0 <= t);
    idx.saturating_sub(1).min(samples.len() - 2)
}

fn raw_smooth(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// Integral of `exp(-1/(t(1-t)))` over [0, 1]. The integrand is flat to all
/// orders at both ends, so the trapezoid rule converges spectrally.
fn smooth_normalization() -> f64 {
    let n = 4000;
    let h = 1.0 / n as f64;
    (1..n).map(|i| raw_smooth(i as f64 * h)).sum::<f64>() * h
}

fn smooth_normalization_cached() -> f64 {
    use std::sync::OnceLock;
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(smooth_normalization)
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0
        + (u3 - 2.0 * u2 + u) * d0
        + (-2.0 * u3 + 3.0 * u2) * y1
        + (u3 - u2) * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_bump_closed_forms() {
        let p = BetaProfile::polynomial();
        assert!((eval_beta(&p, 0.05, 0.1).unwrap() - 15.0).abs() < 1e-12);
        assert_eq!(eval_beta(&p, -0.2, 0.1).unwrap(), 0.0);
        assert_eq!(eval_beta(&p, 0.2, 0.1).unwrap(), 0.0);
        assert_eq!(p.primitive(0.0), 0.0);
        assert!((p.primitive(1.0) - 1.0).abs() < 1e-15);
        assert!((p.primitive(0.5) - 0.5).abs() < 1e-15);
        assert!((p.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_eps_is_rejected() {
        let p = BetaProfile::polynomial();
        assert!(matches!(
            eval_beta(&p, 0.1, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            eval_beta(&p, 0.1, -1.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn scale_is_linear_in_mass() {
        let p = BetaProfile::polynomial_scaled(2.5).unwrap();
        assert!((p.mass() - 2.5).abs() < 1e-15);
        assert!((p.primitive(0.5) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn smooth_primitive_is_consistent_with_beta() {
        let p = BetaProfile::smooth();
        assert!((p.mass() - 1.0).abs() < 1e-12);
        let h = 1e-5;
        for s in [0.2, 0.37, 0.5, 0.81] {
            let fd = (p.primitive(s + h) - p.primitive(s - h)) / (2.0 * h);
            assert!((fd - p.beta(s)).abs() < 1e-6, "s = {s}");
        }
        assert!((p.primitive(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_profile_uses_trapezoid_mass() {
        let p = BetaProfile::parse_table("t,beta\n0,0\n0.5,2\n1,0\n", 1.0).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-15);
        assert!((p.primitive(0.5) - 0.5).abs() < 1e-15);
        assert!((p.primitive(0.25) - 0.125).abs() < 1e-15);
        assert!((p.beta(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_profile_errors() {
        let zero = BetaProfile::tabulated(vec![(0.0, 0.0), (1.0, 0.0)], 1.0);
        assert!(matches!(zero, Err(Error::InvalidProfile(_))));
        let short = BetaProfile::tabulated(vec![(0.1, 1.0), (1.0, 0.0)], 1.0);
        assert!(matches!(short, Err(Error::InvalidProfile(_))));
        let neg = BetaProfile::tabulated(vec![(0.0, 0.0), (0.5, -1.0), (1.0, 0.0)], 1.0);
        assert!(neg.is_err());
    }

    #[test]
    fn names_resolve() {
        assert_eq!(BetaProfile::from_name("poly").unwrap().name(), "poly");
        assert_eq!(BetaProfile::from_name("smooth").unwrap().name(), "smooth");
        assert!(BetaProfile::from_name("no-such-profile").is_err());
    }
}
