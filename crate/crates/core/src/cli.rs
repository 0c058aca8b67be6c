//! The `flamelab` command line.
//!
//! Every subcommand reads an optional JSON config, applies flag overrides,
//! writes its artifacts and prints a one-line JSON summary. Exit status:
//! 0 success, 1 I/O failure, 2 configuration error, 3 non-convergence,
//! 4 failed invariant checks.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blowup::{
    classify_blowup_2d, extract_free_boundary, homogeneity_deviation, label_density_sets, rescale,
    DensityLabel,
};
use crate::error::Error;
use crate::exact::{
    catenoid_f, catenoid_ode_residual, catenoid_slope, catenoid_support_identity, catenoid_theta0,
    ExactKind, CATENOID_MASS,
};
use crate::field::{norm, GridSpec, ScalarField};
use crate::fld::{meta_profile, read_fld, write_fld, FldMeta};
use crate::mesh::{export_mesh, surface_summary};
use crate::mollifier::BetaProfile;
use crate::quadrature::ShellQuadrature;
use crate::solver::{energy_j, solve_peps_with_stats, validate_ladder, SolverConfig, Sweep};
use crate::spherical::SphericalFunction;
use crate::spherical_energy::{monotonicity_profile, EnergyMode};
use crate::suite::{run_suite, SuiteKind};

/// A comma- or colon-separated list parsed as one argument.
type FloatList = Vec<f64>;

const PRECEDENCE: &str =
    "Settings are resolved as flags > config file (--config) > built-in defaults.";

#[derive(Debug, Parser)]
#[command(name = "flamelab", version, about = "Flame-front solver and blow-up laboratory", after_help = PRECEDENCE)]
pub struct Cli {
    /// Cap on worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the ε-problem and write an FLD field.
    Solve(SolveArgs),
    /// Tabulate the spherical energy S_ε or S over a radius range.
    Energy(EnergyArgs),
    /// Write blow-up rescalings of a field and their homogeneity diagnostics.
    Blowup(BlowupArgs),
    /// Classify the circle trace of a 2D field.
    #[command(name = "classify2d")]
    Classify2d(ClassifyArgs),
    /// Extract and label free-boundary points.
    Fb(FbArgs),
    /// Catenoid support-function report or samples.
    Catenoid(CatenoidArgs),
    /// Mesh and curvature summary of a support function.
    Surface(SurfaceArgs),
    /// Run the invariant suite.
    Check(CheckArgs),
}

/// A failed command: exit status and diagnostic.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 1,
            Error::Convergence { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args`, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }
    let out = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Blowup(a) => cmd_blowup(a),
        Command::Classify2d(a) => cmd_classify(a),
        Command::Fb(a) => cmd_fb(a),
        Command::Catenoid(a) => cmd_catenoid(a),
        Command::Surface(a) => cmd_surface(a),
        Command::Check(a) => cmd_check(a),
    };
    match out {
        Ok((summary, code)) => {
            println!("{}", json17(&summary));
            code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

// ---------------------------------------------------------------- output

/// Compact JSON with every float printed to 17 significant digits.
pub fn json17(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, &mut s);
    s
}

/// `x` with 17 significant digits.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64");
                out.push_str(&f17(x));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_json(x, out);
            }
            out.push('}');
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::config(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text).map_err(|e| CliError {
        code: 1,
        message: format!("cannot write '{}': {e}", path.display()),
    })
}

// ---------------------------------------------------------------- inputs

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError {
                code: 1,
                message: format!("cannot read config '{}': {e}", p.display()),
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config '{}': {e}", p.display())))
        }
    }
}

/// `a,b[,c]`.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

/// `r0:r1:n`, `n` equally spaced values including both ends.
pub fn parse_range(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected r0:r1:n, got '{s}'"));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|e| format!("'{}': {e}", parts[0]))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|e| format!("'{}': {e}", parts[1]))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|e| format!("'{}': {e}", parts[2]))?;
    match n {
        0 => Err("range needs n >= 1".into()),
        1 => Ok(vec![a]),
        _ => Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected nt,np, got '{s}'"))?;
    Ok((
        a.trim().parse().map_err(|e| format!("'{a}': {e}"))?,
        b.trim().parse().map_err(|e| format!("'{b}': {e}"))?,
    ))
}

fn field_input(path: &Option<PathBuf>) -> CliResult<(ScalarField, FldMeta)> {
    let p = path
        .as_ref()
        .ok_or_else(|| CliError::config("--field is required"))?;
    read_fld(p).map_err(|e| {
        let mut c = CliError::from(e);
        c.message = format!("field '{}': {}", p.display(), c.message);
        c
    })
}

fn center_for(center: &Option<Vec<f64>>, dim: usize) -> CliResult<Vec<f64>> {
    let c = center.clone().unwrap_or_else(|| vec![0.0; dim]);
    if c.len() != dim {
        return Err(CliError::config(format!(
            "--center needs {dim} coordinates"
        )));
    }
    Ok(c)
}

fn mass_for(flag: Option<f64>, meta: &FldMeta, fallback: f64) -> CliResult<f64> {
    let m = flag.or(meta.mass).unwrap_or(fallback);
    if !(m > 0.0) {
        return Err(CliError::config("mass M must be positive"));
    }
    Ok(m)
}

// ---------------------------------------------------------------- solve

/// Domain of a solve run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box {
        half_width: f64,
    },
    Ball {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

/// Boundary data from the fixed registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `√(2M)·x₁⁺`; `M` defaults to the profile mass.
    HalfPlane {
        #[serde(default)]
        mass: Option<f64>,
    },
    Wedge {
        alpha: f64,
    },
    TwoPlane {
        alpha: f64,
        beta: f64,
    },
    Catenoid,
    Constant {
        c: f64,
    },
    /// Degree-one data `|x|·g(x/|x|)` with `g` from a CSV table: `theta,g`
    /// in 2D, `theta,phi,g` on the shifted sphere grid in 3D.
    #[serde(rename = "custom_table", alias = "custom-table")]
    CustomTable {
        path: PathBuf,
    },
}

impl BoundarySpec {
    fn parse_flag(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| e.to_string());
        }
        match s {
            "half_plane" => Ok(Self::HalfPlane { mass: None }),
            "catenoid" => Ok(Self::Catenoid),
            other => Err(format!(
                "boundary '{other}' needs parameters; pass JSON such as {{\"name\":\"wedge\",\"alpha\":0.5}}"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub dim: usize,
    pub h: f64,
    pub domain: DomainSpec,
    pub boundary: BoundarySpec,
    pub profile: String,
    pub profile_scale: f64,
    pub eps: f64,
    /// Descending continuation ladder; entries above `eps` are solved first.
    pub ladder: Option<Vec<f64>>,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            h: 1.0 / 64.0,
            domain: DomainSpec::Ball {
                radius: 1.0,
                center: None,
            },
            boundary: BoundarySpec::HalfPlane { mass: None },
            profile: "poly".into(),
            profile_scale: 1.0,
            eps: 0.05,
            ladder: None,
            solver: SolverConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Continuation ladder `e0,e1,...` (strictly descending).
    #[arg(long, value_parser = parse_list)]
    pub ladder: Option<FloatList>,
    /// `poly`, `smooth` or a path to a two-column profile table.
    #[arg(long)]
    pub profile: Option<String>,
    /// Multiplies the profile, so `M` scales with it (the catenoid needs 0.5).
    #[arg(long)]
    pub profile_scale: Option<f64>,
    /// Registry name or a JSON record, e.g. `{"name":"wedge","alpha":0.5}`.
    #[arg(long, value_parser = BoundarySpec::parse_flag)]
    pub boundary: Option<BoundarySpec>,
    #[arg(long, value_parser = ["red_black", "lexicographic"])]
    pub sweep: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

impl SolveArgs {
    fn resolve(self) -> CliResult<SolveConfig> {
        let mut c: SolveConfig = load_config(&self.config)?;
        if let Some(v) = self.out {
            c.out = Some(v);
        }
        if let Some(v) = self.dim {
            c.dim = v;
        }
        if let Some(v) = self.h {
            c.h = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = self.ladder {
            c.ladder = Some(v);
        }
        if let Some(v) = self.profile {
            c.profile = v;
        }
        if let Some(v) = self.profile_scale {
            c.profile_scale = v;
        }
        if let Some(v) = self.boundary {
            c.boundary = v;
        }
        if let Some(v) = self.sweep {
            c.solver.sweep = if v == "lexicographic" {
                Sweep::Lexicographic
            } else {
                Sweep::RedBlack
            };
        }
        if let Some(v) = self.tol {
            c.solver.tol_residual = Some(v);
        }
        if let Some(v) = self.max_iterations {
            c.solver.max_iterations = v;
        }
        Ok(c)
    }
}

fn profile_from(name: &str, scale: f64) -> CliResult<BetaProfile> {
    if !(scale > 0.0) {
        return Err(CliError::config("profile_scale must be positive"));
    }
    let p = match name {
        "poly" | "polynomial" | "polynomial_bump" => BetaProfile::polynomial_scaled(scale)?,
        "smooth" | "smooth_bump" => BetaProfile::smooth_scaled(scale)?,
        path => BetaProfile::from_table_file(Path::new(path), scale)?,
    };
    Ok(p)
}

/// Degree-one boundary data built from a sampled `g`.
struct TableData {
    g: SphericalFunction,
    /// 2D samples `(θ, g)` sorted by angle.
    circle: Vec<(f64, f64)>,
}

impl TableData {
    fn load(path: &Path, dim: usize) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError {
            code: 1,
            message: format!("cannot read boundary table '{}': {e}", path.display()),
        })?;
        if dim == 3 {
            return Ok(Self {
                g: SphericalFunction::parse_csv(&text)?,
                circle: Vec::new(),
            });
        }
        let mut circle = Vec::new();
        for line in text.lines().skip(1) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v = parse_list(line).map_err(CliError::config)?;
            if v.len() != 2 {
                return Err(CliError::config("2D boundary tables have columns theta,g"));
            }
            circle.push((v[0].rem_euclid(2.0 * PI), v[1]));
        }
        if circle.len() < 3 {
            return Err(CliError::config("boundary table needs at least 3 rows"));
        }
        circle.sort_by(|a, b| a.0.total_cmp(&b.0));
        let g = SphericalFunction::circle(circle.iter().map(|r| r.1).collect())?;
        Ok(Self { g, circle })
    }

    fn eval(&self, x: &crate::Vec3, dim: usize) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return 0.0;
        }
        if dim == 2 {
            let t = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
            let n = self.circle.len();
            let k = self.circle.partition_point(|s| s.0 <= t);
            let (a, b) = if k == 0 || k == n {
                let (a, b) = (self.circle[n - 1], self.circle[0]);
                ((a.0 - 2.0 * PI, a.1), b)
            } else {
                (self.circle[k - 1], self.circle[k])
            };
            let t = if t < a.0 { t + 2.0 * PI } else { t };
            let s = ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
            return r * (a.1 + s * (b.1 - a.1));
        }
        let g = &self.g;
        let theta = (x[2] / r).clamp(-1.0, 1.0).acos();
        let phi = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        let jf = (theta / g.d_theta() - 0.5).clamp(0.0, (g.n_theta - 1) as f64);
        let j0 = (jf.floor() as usize).min(g.n_theta - 2);
        let sj = jf - j0 as f64;
        let kf = phi / g.d_phi();
        let k0 = kf.floor() as usize % g.n_phi;
        let sk = kf - kf.floor();
        let v = |j: usize, k: usize| g.at(j, k % g.n_phi);
        let lo = v(j0, k0) * (1.0 - sk) + v(j0, k0 + 1) * sk;
        let hi = v(j0 + 1, k0) * (1.0 - sk) + v(j0 + 1, k0 + 1) * sk;
        r * (lo * (1.0 - sj) + hi * sj)
    }
}

fn boundary_field(c: &SolveConfig, profile: &BetaProfile) -> CliResult<ScalarField> {
    if !(2..=3).contains(&c.dim)
        && !(c.dim == 1 && !matches!(c.boundary, BoundarySpec::CustomTable { .. }))
    {
        return Err(CliError::config(
            "dim must be 1, 2 or 3 (custom tables need 2 or 3)",
        ));
    }
    let (grid, center, radius) = match &c.domain {
        DomainSpec::Box { half_width } => {
            (GridSpec::centered(c.dim, *half_width, c.h)?, None, None)
        }
        DomainSpec::Ball { radius, center } => {
            let center = center.clone().unwrap_or_else(|| vec![0.0; c.dim]);
            if center.len() != c.dim {
                return Err(CliError::config("ball center has the wrong dimension"));
            }
            let mut g = GridSpec::for_ball(c.dim, *radius, c.h)?;
            for (o, x) in g.origin.iter_mut().zip(&center) {
                *o += x;
            }
            (g, Some(center), Some(*radius))
        }
    };
    let value: Box<dyn Fn(&crate::Vec3) -> f64> = match &c.boundary {
        BoundarySpec::CustomTable { path } => {
            let t = TableData::load(path, c.dim)?;
            let dim = c.dim;
            Box::new(move |x| t.eval(x, dim))
        }
        spec => {
            let kind = match *spec {
                BoundarySpec::HalfPlane { mass } => ExactKind::HalfPlane {
                    mass: mass.unwrap_or(profile.mass()),
                },
                BoundarySpec::Wedge { alpha } => ExactKind::Wedge { alpha },
                BoundarySpec::TwoPlane { alpha, beta } => ExactKind::TwoPlane { alpha, beta },
                BoundarySpec::Catenoid => ExactKind::Catenoid,
                BoundarySpec::Constant { c } => ExactKind::Constant { c },
                BoundarySpec::CustomTable { .. } => unreachable!("handled above"),
            };
            kind.validate(c.dim)?;
            Box::new(move |x| kind.eval(x).0)
        }
    };
    let field = match (center, radius) {
        (Some(ctr), Some(r)) => ScalarField::from_fn_ball(grid, ctr, r, |x| value(x))?,
        _ => ScalarField::from_fn_box(grid, |x| value(x))?,
    };
    Ok(field)
}

fn cmd_solve(args: SolveArgs) -> CliResult<(Value, i32)> {
    let c = args.resolve()?;
    if !(c.h > 0.0) || !(c.eps > 0.0) {
        return Err(CliError::config("h and eps must be positive"));
    }
    let mut solver = c.solver.clone();
    if let Some(l) = &c.ladder {
        validate_ladder(l).map_err(CliError::from)?;
        solver.continuation = Some(l.clone());
    }
    solver.validate()?;
    let out = c
        .out
        .clone()
        .ok_or_else(|| CliError::config("--out is required"))?;
    let profile = profile_from(&c.profile, c.profile_scale)?;
    let boundary = boundary_field(&c, &profile)?;
    match solve_peps_with_stats(&boundary, &profile, c.eps, &solver) {
        Ok((u, stats)) => {
            write_fld(&out, &u, Some(&profile))?;
            let summary = json!({
                "command": "solve",
                "converged": true,
                "out": out.display().to_string(),
                "dim": c.dim,
                "nodes": u.len(),
                "interior": u.interior_count(),
                "eps": c.eps,
                "M": profile.mass(),
                "sweeps": stats.sweeps,
                "residual": stats.residual,
                "omega": stats.omega,
                "energy_J": energy_j(&u, &profile, c.eps)?,
            });
            Ok((summary, 0))
        }
        Err(Error::Convergence {
            iterations,
            residual,
        }) => Ok((
            json!({
                "command": "solve",
                "converged": false,
                "eps": c.eps,
                "sweeps": iterations,
                "residual": residual,
            }),
            3,
        )),
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------- energy

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub field: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub mode: Option<String>,
    pub angular: Option<usize>,
    pub mass: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// `x,y[,z]`.
    #[arg(long, value_parser = parse_list)]
    pub center: Option<FloatList>,
    /// `r0:r1:n`.
    #[arg(long, value_parser = parse_range)]
    pub radii: Option<FloatList>,
    #[arg(long, value_parser = ["eps", "limit"])]
    pub mode: Option<String>,
    /// Angular nodes (2D) or latitude nodes (3D, with twice as many longitudes).
    #[arg(long)]
    pub angular: Option<usize>,
    /// Mass for the limit functional (default: from the field file).
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn shell_rule(dim: usize, n: Option<usize>) -> CliResult<ShellQuadrature> {
    Ok(match dim {
        2 => ShellQuadrature::circle(n.unwrap_or(256))?,
        3 => {
            let n = n.unwrap_or(64);
            ShellQuadrature::sphere(n, 2 * n)?
        }
        d => {
            return Err(CliError::config(format!(
                "shell diagnostics need a 2D or 3D field (got {d})"
            )))
        }
    })
}

fn cmd_energy(a: EnergyArgs) -> CliResult<(Value, i32)> {
    let mut c: EnergyConfig = load_config(&a.config)?;
    c.field = a.field.or(c.field);
    c.center = a.center.or(c.center);
    c.radii = a.radii.or(c.radii);
    c.mode = a.mode.or(c.mode);
    c.angular = a.angular.or(c.angular);
    c.mass = a.mass.or(c.mass);
    c.out = a.out.or(c.out);
    let (u, meta) = field_input(&c.field)?;
    let center = center_for(&c.center, u.dim())?;
    let radii = c
        .radii
        .ok_or_else(|| CliError::config("--radii is required"))?;
    let quad = shell_rule(u.dim(), c.angular)?;
    let mode_name = c.mode.unwrap_or_else(|| "eps".into());
    let profile = meta_profile(&meta)?;
    let (prof, eps, mass) = if mode_name == "limit" {
        let m = mass_for(c.mass, &meta, 1.0)?;
        (
            monotonicity_profile(&u, &center, &radii, EnergyMode::Limit { mass: m }, &quad)?,
            None,
            m,
        )
    } else if mode_name == "eps" {
        let p = profile.ok_or_else(|| {
            CliError::config("mode eps needs a profile recorded in the field file")
        })?;
        let eps = meta
            .eps
            .ok_or_else(|| CliError::config("mode eps needs eps recorded in the field file"))?;
        (
            monotonicity_profile(
                &u,
                &center,
                &radii,
                EnergyMode::Eps { profile: &p, eps },
                &quad,
            )?,
            Some(eps),
            p.mass(),
        )
    } else {
        return Err(CliError::config(format!("unknown mode '{mode_name}'")));
    };
    let mut csv = format!(
        "# center={} mode={mode_name} eps={} M={}\nradius,S,defect\n",
        center.iter().map(|x| f17(*x)).collect::<Vec<_>>().join(","),
        eps.map_or("none".to_string(), f17),
        f17(mass)
    );
    for (k, (r, s)) in prof.radii.iter().zip(&prof.values).enumerate() {
        let d = if k == 0 {
            String::new()
        } else {
            f17(prof.defects[k - 1])
        };
        csv.push_str(&format!("{},{},{d}\n", f17(*r), f17(*s)));
    }
    if let Some(out) = &c.out {
        write_text(out, &csv)?;
    }
    Ok((
        json!({
            "command": "energy",
            "mode": mode_name,
            "radii": prof.radii.len(),
            "min_defect": prof.min_defect(),
            "monotone": prof.defects.iter().all(|d| *d >= 0.0),
            "S_first": prof.values.first(),
            "S_last": prof.values.last(),
            "out": c.out.map(|p| p.display().to_string()),
        }),
        0,
    ))
}

// ---------------------------------------------------------------- blowup

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    pub field: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
    /// Spacing of the rescaled grids on `[-1, 1]^N` (default: the field spacing).
    pub h: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlowupArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, value_parser = parse_list)]
    pub center: Option<FloatList>,
    /// `s0:s1:n`.
    #[arg(long, value_parser = parse_range)]
    pub scales: Option<FloatList>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_blowup(a: BlowupArgs) -> CliResult<(Value, i32)> {
    let mut c: BlowupConfig = load_config(&a.config)?;
    c.field = a.field.or(c.field);
    c.center = a.center.or(c.center);
    c.scales = a.scales.or(c.scales);
    c.h = a.h.or(c.h);
    c.out = a.out.or(c.out);
    let (u, meta) = field_input(&c.field)?;
    let center = center_for(&c.center, u.dim())?;
    let scales = c
        .scales
        .ok_or_else(|| CliError::config("--scales is required"))?;
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(CliError::config("blow-up scales must be positive"));
    }
    let dir = c.out.ok_or_else(|| CliError::config("--out is required"))?;
    fs::create_dir_all(&dir)?;
    let grid = GridSpec::centered(u.dim(), 1.0, c.h.unwrap_or(u.h()))?;
    let quad = shell_rule(u.dim(), None)?;
    let profile = meta_profile(&meta)?;
    let mut records = Vec::new();
    for (k, rho) in scales.iter().enumerate() {
        let v = rescale(&u, &center, *rho, &grid)?;
        let name = format!("blowup_{k:03}.fld");
        write_fld(&dir.join(&name), &v, profile.as_ref())?;
        let dev = homogeneity_deviation(&v, &vec![0.0; u.dim()], 0.25, 0.75, &quad)?;
        let mut rec = json!({ "rho": rho, "file": name, "homogeneity_deviation": dev });
        if u.dim() == 2 {
            let mass = mass_for(None, &meta, 1.0)?;
            let g = SphericalFunction::from_probe(&v, &[0.0, 0.0], 0.5, 1, 512)?;
            rec["classification"] = to_value(&classify_blowup_2d(&g, mass, 1e-2)?.variant)?;
        }
        records.push(rec);
    }
    let summary = json!({ "command": "blowup", "center": center, "scales": records });
    write_text(&dir.join("blowup.json"), &(json17(&summary) + "\n"))?;
    Ok((
        json!({ "command": "blowup", "count": scales.len(), "out": dir.display().to_string() }),
        0,
    ))
}

// ---------------------------------------------------------------- classify2d

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub field: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub mass: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, value_parser = parse_list)]
    pub center: Option<FloatList>,
    /// Radius of the sampled circle (default 0.25).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Angle samples (default 512).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Classification tolerance (default 1e-3).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_classify(a: ClassifyArgs) -> CliResult<(Value, i32)> {
    let mut c: ClassifyConfig = load_config(&a.config)?;
    c.field = a.field.or(c.field);
    c.center = a.center.or(c.center);
    c.radius = a.radius.or(c.radius);
    c.samples = a.samples.or(c.samples);
    c.tol = a.tol.or(c.tol);
    c.mass = a.mass.or(c.mass);
    c.out = a.out.or(c.out);
    let (u, meta) = field_input(&c.field)?;
    if u.dim() != 2 {
        return Err(CliError::config("classify2d needs a 2D field"));
    }
    let center = center_for(&c.center, 2)?;
    let tol = c.tol.unwrap_or(1e-3);
    if !(tol > 0.0) {
        return Err(CliError::config("tol must be positive"));
    }
    let mass = mass_for(c.mass, &meta, 1.0)?;
    let g = SphericalFunction::from_probe(
        &u,
        &center,
        c.radius.unwrap_or(0.25),
        1,
        c.samples.unwrap_or(512),
    )?;
    let cls = classify_blowup_2d(&g, mass, tol)?;
    let record = to_value(&cls)?;
    if let Some(out) = &c.out {
        write_text(out, &(json17(&record) + "\n"))?;
    }
    Ok((
        json!({ "command": "classify2d", "variant": to_value(&cls.variant)?, "fit_residual": cls.fit_residual }),
        0,
    ))
}

// ---------------------------------------------------------------- fb

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbConfig {
    pub field: Option<PathBuf>,
    pub level_tol: Option<f64>,
    /// Strictly descending density radii (default `8h, 4h, 2h`).
    pub radii: Option<Vec<f64>>,
    pub half_tol: Option<f64>,
    pub mass: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FbArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub level_tol: Option<f64>,
    #[arg(long, value_parser = parse_list)]
    pub radii: Option<FloatList>,
    #[arg(long)]
    pub half_tol: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_fb(a: FbArgs) -> CliResult<(Value, i32)> {
    let mut c: FbConfig = load_config(&a.config)?;
    c.field = a.field.or(c.field);
    c.level_tol = a.level_tol.or(c.level_tol);
    c.radii = a.radii.or(c.radii);
    c.half_tol = a.half_tol.or(c.half_tol);
    c.mass = a.mass.or(c.mass);
    c.out = a.out.or(c.out);
    let (u, meta) = field_input(&c.field)?;
    let h = u.h();
    let radii = c.radii.unwrap_or_else(|| vec![8.0 * h, 4.0 * h, 2.0 * h]);
    let mass = mass_for(c.mass, &meta, 1.0)?;
    let fb = extract_free_boundary(&u, c.level_tol.unwrap_or(1e-12));
    let fb = label_density_sets(&fb, &u, &radii, c.half_tol.unwrap_or(0.05), mass)?;
    if let Some(out) = &c.out {
        write_text(out, &(json17(&to_value(&fb)?) + "\n"))?;
    }
    Ok((
        json!({
            "command": "fb",
            "points": fb.len(),
            "half_density": fb.count(DensityLabel::HalfDensity),
            "full_density": fb.count(DensityLabel::FullDensity),
            "degenerate": fb.count(DensityLabel::Degenerate),
            "unknown": fb.count(DensityLabel::Unknown),
        }),
        0,
    ))
}

// ---------------------------------------------------------------- catenoid

#[derive(Debug, Args)]
pub struct CatenoidArgs {
    /// Print θ₀, the ODE residual and the support-identity defect (default).
    #[arg(long)]
    pub report: bool,
    /// Write g on an `(n, 2n)` sphere grid as CSV.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output path for `--samples` (default `catenoid_g.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The catenoid diagnostics printed by `catenoid --report`.
pub fn catenoid_report() -> crate::Result<Value> {
    let t0 = catenoid_theta0();
    let (lo, hi) = (0.1, 0.5 * PI - 0.1);
    let (flo, fhi) = (catenoid_f(lo)?.0, catenoid_f(hi)?.0);
    let n = 10_000;
    let (a, b) = (0.5 * t0, PI - 0.5 * t0);
    let mut ode: f64 = 0.0;
    for i in 0..n {
        let t = a + (b - a) * (i as f64 + 0.5) / n as f64;
        ode = ode.max(catenoid_ode_residual(t)?.abs());
    }
    let thetas: Vec<f64> = (0..n)
        .map(|i| 0.1 + (PI - 0.2) * i as f64 / (n - 1) as f64)
        .collect();
    Ok(json!({
        "command": "catenoid",
        "theta0": t0,
        "f_at_theta0": catenoid_f(t0)?.0,
        "bracket": [lo, hi],
        "bracket_values": [flo, fhi],
        "slope": catenoid_slope(),
        "M": CATENOID_MASS,
        "ode_residual_max": ode,
        "support_identity_defect": catenoid_support_identity(&thetas, 2.0)?,
    }))
}

fn cmd_catenoid(a: CatenoidArgs) -> CliResult<(Value, i32)> {
    if let Some(n) = a.samples {
        if n < 3 {
            return Err(CliError::config("--samples needs n >= 3"));
        }
        let g = SphericalFunction::sphere_from_fn(n, 2 * n, |t, _| {
            crate::exact::catenoid_g(t).map(|v| v.0).unwrap_or(f64::NAN)
        })?;
        let out = a.out.unwrap_or_else(|| PathBuf::from("catenoid_g.csv"));
        write_text(&out, &g.to_csv())?;
        let mut r = catenoid_report()?;
        r["samples"] = json!({ "n_theta": n, "n_phi": 2 * n, "out": out.display().to_string() });
        return Ok((r, 0));
    }
    Ok((catenoid_report()?, 0))
}

// ---------------------------------------------------------------- surface

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub g: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub res: Option<(usize, usize)>,
    pub mass: Option<f64>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV `theta,phi,g` on the shifted sphere grid.
    #[arg(long)]
    pub g: Option<PathBuf>,
    /// FLD field whose trace `u(c + rσ)/r` is taken as `g`.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, value_parser = parse_list)]
    pub center: Option<FloatList>,
    /// Trace radius `r` (default 0.5).
    #[arg(long)]
    pub radius: Option<f64>,
    /// `nt,np` for field sampling (default 128,256).
    #[arg(long, value_parser = parse_pair)]
    pub res: Option<(usize, usize)>,
    /// Mass for contact angles (default: from the field file, else 1/2).
    #[arg(long)]
    pub mass: Option<f64>,
    /// OBJ mesh path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

fn cmd_surface(a: SurfaceArgs) -> CliResult<(Value, i32)> {
    let mut c: SurfaceConfig = load_config(&a.config)?;
    c.g = a.g.or(c.g);
    c.field = a.field.or(c.field);
    c.center = a.center.or(c.center);
    c.radius = a.radius.or(c.radius);
    c.res = a.res.or(c.res);
    c.mass = a.mass.or(c.mass);
    c.out = a.out.or(c.out);
    c.summary = a.summary.or(c.summary);
    let (g, mass) = match (&c.g, &c.field) {
        (Some(p), None) => {
            let text = fs::read_to_string(p)?;
            (
                SphericalFunction::parse_csv(&text)?,
                c.mass.unwrap_or(CATENOID_MASS),
            )
        }
        (None, Some(_)) => {
            let (u, meta) = field_input(&c.field)?;
            if u.dim() != 3 {
                return Err(CliError::config("surface needs a 3D field"));
            }
            let center = center_for(&c.center, 3)?;
            let (nt, np) = c.res.unwrap_or((128, 256));
            let m = mass_for(c.mass, &meta, CATENOID_MASS)?;
            (
                SphericalFunction::from_probe(&u, &center, c.radius.unwrap_or(0.5), nt, np)?,
                m,
            )
        }
        _ => return Err(CliError::config("pass exactly one of --g and --field")),
    };
    let mesh = export_mesh(&g)?;
    let s = surface_summary(&g, &mesh, mass)?;
    if let Some(out) = &c.out {
        write_text(out, &mesh.to_obj())?;
    }
    let mut v = to_value(&s)?;
    v["hessian_frame"] = json!("e_theta, e_phi (raw Hessian entries are frame dependent)");
    if let Some(p) = &c.summary {
        write_text(p, &(json17(&v) + "\n"))?;
    }
    Ok((
        json!({
            "command": "surface",
            "vertices": s.vertices,
            "faces": s.faces,
            "euler_characteristic": s.euler_characteristic,
            "boundary_loops": s.boundary_loops,
            "max_mean_residual": s.max_mean_residual,
            "max_conformality_defect": s.max_conformality_defect,
        }),
        0,
    ))
}

// ---------------------------------------------------------------- check

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value = "all", value_parser = ["all", "fast"])]
    pub suite: String,
    /// Full JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_check(a: CheckArgs) -> CliResult<(Value, i32)> {
    let kind = if a.suite == "fast" {
        SuiteKind::Fast
    } else {
        SuiteKind::All
    };
    let report = run_suite(kind);
    for r in report.results.iter().filter(|r| !r.passed) {
        eprintln!("FAILED [{}] {}: {}", r.module, r.invariant, r.detail);
    }
    if let Some(out) = &a.out {
        write_text(out, &(json17(&to_value(&report)?) + "\n"))?;
    }
    let failed: Vec<&str> = report
        .results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.invariant)
        .collect();
    let code = if failed.is_empty() { 0 } else { 4 };
    Ok((
        json!({ "command": "check", "suite": report.suite, "passed": report.passed, "failed": report.failed, "failures": failed }),
        code,
    ))
}
