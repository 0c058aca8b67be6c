//! The invariant suite behind `flamelab check`.
//!
//! Each check names the property it guards; a failing check reports that
//! name together with the measured quantities.

use std::f64::consts::PI;
use std::time::Instant;

use serde::Serialize;

use crate::blowup::{
    ball_sup, classify_blowup_2d, extract_free_boundary, homogeneity_deviation, label_density_sets,
    rescale, scaled_sphere_integral, BlowupVariant, DensityLabel,
};
use crate::exact::{
    catenoid_g, catenoid_ode_residual, catenoid_slope, catenoid_theta0, make_exact_field,
    ExactField, ExactKind, CATENOID_MASS,
};
use crate::field::{norm, GridSpec, NodeKind, ScalarField};
use crate::fld::write_fld;
use crate::mesh::{export_mesh, surface_summary};
use crate::mollifier::BetaProfile;
use crate::quadrature::{gauss_legendre_on, ShellQuadrature};
use crate::solver::{solve_ladder, solve_peps, SolverConfig, Sweep};
use crate::spherical::SphericalFunction;
use crate::spherical_energy::{acf_phi, monotonicity_profile, spruck_s_limit, EnergyMode};
use crate::support_geometry::{curvature_report, immersion_x, support_boundary_nodes, unit_normal};

type Outcome = std::result::Result<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    Fast,
    All,
}

pub struct Check {
    pub module: &'static str,
    pub invariant: &'static str,
    /// Included in the fast suite.
    pub fast: bool,
    run: fn() -> Outcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub module: &'static str,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub results: Vec<CheckResult>,
}

fn lib<T>(r: crate::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn checks() -> Vec<Check> {
    vec![
        Check {
            module: "mollifier",
            invariant: "primitive is monotone and bounded by the mass",
            fast: true,
            run: primitive_bounds,
        },
        Check {
            module: "mollifier",
            invariant: "scaled profile integrates to the mass at every eps",
            fast: true,
            run: mass_at_every_eps,
        },
        Check {
            module: "mollifier",
            invariant: "scaled profile is nonnegative",
            fast: true,
            run: nonnegative_profile,
        },
        Check {
            module: "grid_solver",
            invariant: "maximum principle",
            fast: true,
            run: maximum_principle,
        },
        Check {
            module: "grid_solver",
            invariant: "uniform interior Lipschitz bound across the eps ladder",
            fast: false,
            run: uniform_lipschitz,
        },
        Check {
            module: "grid_solver",
            invariant: "gradient cap near the transition",
            fast: false,
            run: gradient_cap,
        },
        Check {
            module: "grid_solver",
            invariant: "determinism under the lexicographic sweep",
            fast: true,
            run: determinism,
        },
        Check {
            module: "spherical_energy",
            invariant: "limit functional quadrature exactness",
            fast: true,
            run: quadrature_exactness,
        },
        Check {
            module: "spherical_energy",
            invariant: "scaling covariance on homogeneous fields",
            fast: true,
            run: scaling_covariance,
        },
        Check {
            module: "spherical_energy",
            invariant: "monotonicity defect on a solved field",
            fast: false,
            run: monotonicity_on_solved,
        },
        Check {
            module: "spherical_energy",
            invariant: "two-phase functional is symmetric",
            fast: true,
            run: acf_symmetry,
        },
        Check {
            module: "blowup_lab",
            invariant: "rescale composition",
            fast: true,
            run: rescale_composition,
        },
        Check {
            module: "blowup_lab",
            invariant: "homogeneity deviation scales quadratically",
            fast: true,
            run: quadratic_scaling,
        },
        Check {
            module: "blowup_lab",
            invariant: "classification is rotation invariant",
            fast: true,
            run: rotation_invariance,
        },
        Check {
            module: "blowup_lab",
            invariant: "at most one density label per point",
            fast: true,
            run: exclusive_labels,
        },
        Check {
            module: "blowup_lab",
            invariant: "strengthened non-degeneracy on the catenoid (spherical mean)",
            fast: true,
            run: catenoid_nondegeneracy,
        },
        Check {
            module: "exact_library",
            invariant: "exact fields are degree-one homogeneous",
            fast: true,
            run: exact_homogeneity,
        },
        Check {
            module: "exact_library",
            invariant: "catenoid spherical part solves the minimal-surface ODE",
            fast: true,
            run: catenoid_ode,
        },
        Check {
            module: "exact_library",
            invariant: "catenoid free-boundary gradient is one",
            fast: true,
            run: catenoid_unit_gradient,
        },
        Check {
            module: "exact_library",
            invariant: "two-plane classification iff alpha^2 - beta^2 = 2M",
            fast: true,
            run: two_plane_condition,
        },
        Check {
            module: "support_geometry",
            invariant: "trace identity",
            fast: true,
            run: trace_identity,
        },
        Check {
            module: "support_geometry",
            invariant: "immersion equals the Cartesian gradient",
            fast: false,
            run: gradient_identity,
        },
        Check {
            module: "support_geometry",
            invariant: "gradient is homogeneous of degree zero",
            fast: true,
            run: zero_degree_gradient,
        },
        Check {
            module: "support_geometry",
            invariant: "containment in the ball of radius sqrt(2M)",
            fast: true,
            run: containment,
        },
        Check {
            module: "support_geometry",
            invariant: "second-order convergence of residual and defect",
            fast: false,
            run: convergence_order,
        },
        Check {
            module: "cli_harness",
            invariant: "deterministic FLD and OBJ artifacts",
            fast: true,
            run: deterministic_artifacts,
        },
    ]
}

pub fn run_suite(kind: SuiteKind) -> SuiteReport {
    let mut results = Vec::new();
    for c in checks()
        .into_iter()
        .filter(|c| kind == SuiteKind::All || c.fast)
    {
        let t = Instant::now();
        let out = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("check panicked".into()));
        let (passed, detail) = match out {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        results.push(CheckResult {
            module: c.module,
            invariant: c.invariant,
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    let passed = results.iter().filter(|r| r.passed).count();
    SuiteReport {
        suite: match kind {
            SuiteKind::Fast => "fast",
            SuiteKind::All => "all",
        },
        passed,
        failed: results.len() - passed,
        results,
    }
}

fn profiles() -> Vec<BetaProfile> {
    vec![
        BetaProfile::polynomial(),
        BetaProfile::smooth(),
        BetaProfile::polynomial_scaled(2.5).expect("positive scale"),
    ]
}

fn primitive_bounds() -> Outcome {
    for p in profiles() {
        let m = p.mass();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=4000 {
            let s = -0.5 + 2.0 * i as f64 / 4000.0;
            let b = p.primitive(s);
            ensure(b >= 0.0 && b <= m * (1.0 + 1e-14), || {
                format!("{}: B({s}) = {b} outside [0, {m}]", p.name())
            })?;
            ensure(b >= prev, || {
                format!("{}: B decreases at s = {s}", p.name())
            })?;
            prev = b;
        }
    }
    Ok("4001 samples on [-0.5, 1.5] for three profiles".into())
}

fn mass_at_every_eps() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in profiles() {
        for eps in [1e-2, 1e-5, 1e-8] {
            let mut total = 0.0;
            for k in 0..64 {
                let a = -0.5 * eps + 2.0 * eps * k as f64 / 64.0;
                let (x, w) = gauss_legendre_on(16, a, a + 2.0 * eps / 64.0);
                for (t, wt) in x.iter().zip(&w) {
                    total += wt * lib(p.beta_eps(*t, eps))?;
                }
            }
            let err = (total - p.mass()).abs();
            worst = worst.max(err);
            ensure(err <= 1e-8, || {
                format!(
                    "{} at eps = {eps:e}: integral {total} vs M = {}",
                    p.name(),
                    p.mass()
                )
            })?;
        }
    }
    Ok(format!("max |integral - M| = {worst:.3e}"))
}

fn nonnegative_profile() -> Outcome {
    for p in profiles() {
        for i in 0..=10_000 {
            let t = -0.2 + 0.5 * i as f64 / 10_000.0;
            let v = lib(p.beta_eps(t, 0.1))?;
            ensure(v >= 0.0, || format!("{}: beta_eps({t}) = {v}", p.name()))?;
        }
    }
    Ok("10001 samples per profile".into())
}

fn disk(h: f64, kind: ExactKind) -> crate::Result<ScalarField> {
    kind.validate(2)?;
    let grid = GridSpec::for_ball(2, 1.0, h)?;
    ScalarField::from_fn_ball(grid, vec![0.0, 0.0], 1.0, |x| kind.eval(x).0)
}

fn maximum_principle() -> Outcome {
    let p = BetaProfile::polynomial();
    let tol = 1e-10;
    for kind in [
        ExactKind::TwoPlane {
            alpha: 1.7,
            beta: 0.6,
        },
        ExactKind::Wedge { alpha: 0.8 },
    ] {
        let b = lib(disk(1.0 / 32.0, kind))?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, m) in b.values.iter().zip(&b.mask) {
            if *m == NodeKind::Dirichlet {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        let u = lib(solve_peps(&b, &p, 0.1, &SolverConfig::default()))?;
        for (v, m) in u.values.iter().zip(&u.mask) {
            if *m == NodeKind::Interior {
                ensure(*v >= lo.min(0.0) - tol && *v <= hi + tol, || {
                    format!("{kind:?}: u = {v} outside [{}, {hi}]", lo.min(0.0))
                })?;
            }
        }
    }
    Ok("two-plane and wedge data on the unit disk".into())
}

fn half_disk_gradient(u: &ScalarField) -> f64 {
    u.max_gradient_where(|i, x, _| {
        u.mask[i] == NodeKind::Interior && x[0] * x[0] + x[1] * x[1] < 0.25
    })
}

fn uniform_lipschitz() -> Outcome {
    let p = BetaProfile::polynomial();
    let ladder = [0.2, 0.1, 0.05, 0.025];
    let b = lib(disk(1.0 / 128.0, ExactKind::HalfPlane { mass: 1.0 }))?;
    let fields = lib(solve_ladder(&b, &p, &ladder, &SolverConfig::default()))?;
    let g: Vec<f64> = fields.iter().map(half_disk_gradient).collect();
    let (lo, hi) = g
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let var = (hi - lo) / lo;
    ensure(var < 0.2, || {
        format!("max gradients {g:?} vary by {:.1}%", 100.0 * var)
    })?;
    Ok(format!(
        "max |grad u| on B_1/2: {g:?}, variation {:.2}%",
        100.0 * var
    ))
}

/// Signed excess of `max |∇u_ε|` over `√(2M)` on the transition band
/// `0 < u < ε` inside `|x|∞ < 1/4`, along the ladder {0.2, 0.1, 0.05}.
pub fn transition_gradient_excess(h: f64) -> crate::Result<Vec<f64>> {
    let p = BetaProfile::polynomial();
    let ladder = [0.2, 0.1, 0.05];
    let grid = GridSpec::centered(2, 0.5, h)?;
    let b = make_exact_field(ExactKind::HalfPlane { mass: p.mass() }, grid)?;
    let fields = solve_ladder(&b, &p, &ladder, &SolverConfig::default())?;
    let cap = (2.0 * p.mass()).sqrt();
    Ok(fields
        .iter()
        .zip(ladder)
        .map(|(f, e)| {
            f.max_gradient_where(|_, x, v| v > 0.0 && v < e && x[0].abs().max(x[1].abs()) < 0.25)
                - cap
        })
        .collect())
}

fn gradient_cap() -> Outcome {
    let ex = lib(transition_gradient_excess(1.0 / 128.0))?;
    ensure(ex.windows(2).all(|w| w[1] < w[0]), || {
        format!("excess {ex:?} does not shrink")
    })?;
    Ok(format!("excess over sqrt(2M) along the ladder: {ex:?}"))
}

fn lexicographic() -> SolverConfig {
    SolverConfig {
        sweep: Sweep::Lexicographic,
        continuation: Some(vec![0.4]),
        ..Default::default()
    }
}

fn determinism() -> Outcome {
    let p = BetaProfile::polynomial();
    let b = lib(disk(1.0 / 32.0, ExactKind::HalfPlane { mass: 1.0 }))?;
    let cfg = lexicographic();
    let u = lib(solve_peps(&b, &p, 0.1, &cfg))?;
    let v = lib(solve_peps(&b, &p, 0.1, &cfg))?;
    let same = u
        .values
        .iter()
        .zip(&v.values)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || "repeated solves differ".into())?;
    Ok(format!("{} nodes bit-identical", u.len()))
}

fn quadrature_exactness() -> Outcome {
    let mass = 1.0;
    let mut report = Vec::new();
    for (dim, h, quad) in [
        (2, 1.0 / 64.0, lib(ShellQuadrature::circle(256))?),
        (3, 1.0 / 32.0, lib(ShellQuadrature::sphere(32, 64))?),
    ] {
        let grid = lib(GridSpec::centered(dim, 1.25, h))?;
        let f = lib(make_exact_field(ExactKind::HalfPlane { mass }, grid))?;
        let want = if dim == 2 {
            2.0 * PI * mass
        } else {
            4.0 * PI * mass
        };
        let s = lib(spruck_s_limit(&f, &[0.0; 3][..dim], 1.0, mass, &quad))?;
        let err = (s - want).abs() / want;
        ensure(err <= 10.0 * h + 1e-2, || {
            format!("{dim}D: S = {s}, expected {want}")
        })?;
        report.push(format!("{dim}D rel err {err:.2e}"));
    }
    Ok(report.join(", "))
}

fn scaling_covariance() -> Outcome {
    let q = lib(ShellQuadrature::circle(512))?;
    let f = lib(ExactField::new(
        ExactKind::TwoPlane {
            alpha: 3f64.sqrt(),
            beta: 1.0,
        },
        2,
    ))?;
    let c = [0.0, 0.0];
    let (a, b) = (
        lib(spruck_s_limit(&f, &c, 0.3, 1.0, &q))?,
        lib(spruck_s_limit(&f, &c, 0.6, 1.0, &q))?,
    );
    ensure((a - b).abs() <= 1e-10 * a.abs().max(1.0), || {
        format!("S(0.3) = {a}, S(0.6) = {b}")
    })?;
    Ok(format!("|S(r) - S(2r)| = {:.2e}", (a - b).abs()))
}

/// Monotonicity defect of `S_ε` on the solved half-plane field
/// (ε = 0.05, h = 1/256, 20 radii in [0.1, 0.45]).
pub fn solved_monotonicity_defect(h: f64) -> crate::Result<f64> {
    let p = BetaProfile::polynomial();
    let grid = GridSpec::centered(2, 0.5, h)?;
    let b = make_exact_field(ExactKind::HalfPlane { mass: p.mass() }, grid)?;
    let cfg = SolverConfig {
        continuation: Some(vec![0.2, 0.1]),
        ..Default::default()
    };
    let u = solve_peps(&b, &p, 0.05, &cfg)?;
    let radii: Vec<f64> = (0..20).map(|i| 0.1 + 0.35 * i as f64 / 19.0).collect();
    let q = ShellQuadrature::circle(256)?;
    let prof = monotonicity_profile(
        &u,
        &[0.0, 0.0],
        &radii,
        EnergyMode::Eps {
            profile: &p,
            eps: 0.05,
        },
        &q,
    )?;
    Ok(prof.min_defect())
}

fn monotonicity_on_solved() -> Outcome {
    let d = lib(solved_monotonicity_defect(1.0 / 256.0))?;
    ensure(d >= -5e-3, || format!("min defect {d}"))?;
    Ok(format!("min defect {d:.3e}"))
}

fn acf_symmetry() -> Outcome {
    let grid = lib(GridSpec::centered(2, 1.0, 1.0 / 32.0))?;
    let u = lib(ScalarField::from_fn_box(grid.clone(), |x| {
        x[0].max(0.0) + 0.3 * x[1] * x[1]
    }))?;
    let v = lib(ScalarField::from_fn_box(grid, |x| {
        (-x[0] - 0.2 * x[1]).max(0.0)
    }))?;
    for r in [0.25, 0.5, 0.75] {
        let a = lib(acf_phi(&u, &v, &[0.0, 0.0], r))?;
        let b = lib(acf_phi(&v, &u, &[0.0, 0.0], r))?;
        ensure((a - b).abs() <= 1e-12 * a.abs().max(1.0), || {
            format!("r = {r}: {a} vs {b}")
        })?;
    }
    Ok("three radii".into())
}

fn rescale_composition() -> Outcome {
    let h = 1.0 / 64.0;
    let grid = lib(GridSpec::centered(2, 1.0, h))?;
    let (alpha, beta) = (1.3, 0.7);
    let u = lib(ScalarField::from_fn_box(grid.clone(), |x| {
        let t = x[0] + 0.4 * x[1] + 0.1;
        if t > 0.0 {
            alpha * t
        } else {
            beta * t
        }
    }))?;
    let lip = alpha * (1.0_f64 + 0.16).sqrt();
    let c = [0.05, -0.02];
    let once = lib(rescale(&u, &c, 0.5, &grid))?;
    let twice = lib(rescale(&once, &[0.0, 0.0], 0.5, &grid))?;
    let direct = lib(rescale(&u, &c, 0.25, &grid))?;
    let err = twice
        .values
        .iter()
        .zip(&direct.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(err <= 4.0 * lip * h, || {
        format!("max difference {err} > 4 Lip h = {}", 4.0 * lip * h)
    })?;
    Ok(format!(
        "max difference {err:.3e}, bound {:.3e}",
        4.0 * lip * h
    ))
}

fn quadratic_scaling() -> Outcome {
    let q = lib(ShellQuadrature::circle(256))?;
    let f = crate::field::FnProbe::new(2, |x: &crate::Vec3| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (r2 + x[0], [2.0 * x[0] + 1.0, 2.0 * x[1], 0.0])
    });
    let g = crate::field::FnProbe::new(2, |x: &crate::Vec3| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        (
            2.5 * (r2 + x[0]),
            [2.5 * (2.0 * x[0] + 1.0), 5.0 * x[1], 0.0],
        )
    });
    let a = lib(homogeneity_deviation(&f, &[0.0, 0.0], 0.5, 1.5, &q))?;
    let b = lib(homogeneity_deviation(&g, &[0.0, 0.0], 0.5, 1.5, &q))?;
    let ratio = b / a;
    ensure((ratio - 6.25).abs() <= 1e-10 * 6.25, || {
        format!("ratio {ratio}, expected 6.25")
    })?;
    Ok(format!("ratio {ratio}"))
}

fn same_variant(a: &BlowupVariant, b: &BlowupVariant, tol: f64) -> bool {
    match (a, b) {
        (BlowupVariant::HalfPlane { alpha: x }, BlowupVariant::HalfPlane { alpha: y })
        | (BlowupVariant::Wedge { alpha: x }, BlowupVariant::Wedge { alpha: y }) => {
            (x - y).abs() <= tol
        }
        (
            BlowupVariant::TwoPlane {
                alpha: a1,
                beta: b1,
            },
            BlowupVariant::TwoPlane {
                alpha: a2,
                beta: b2,
            },
        ) => (a1 - a2).abs() <= tol && (b1 - b2).abs() <= tol,
        (BlowupVariant::Zero, BlowupVariant::Zero)
        | (BlowupVariant::Unclassified, BlowupVariant::Unclassified) => true,
        _ => false,
    }
}

fn trace_of(kind: ExactKind, n: usize, rot: f64) -> crate::Result<SphericalFunction> {
    kind.validate(2)?;
    SphericalFunction::circle_from_fn(n, |t| kind.eval(&[(t - rot).cos(), (t - rot).sin(), 0.0]).0)
}

fn rotation_invariance() -> Outcome {
    let tol = 1e-3;
    let cases = [
        ExactKind::HalfPlane { mass: 1.0 },
        ExactKind::Wedge { alpha: 0.5 },
        ExactKind::TwoPlane {
            alpha: 3f64.sqrt(),
            beta: 1.0,
        },
        ExactKind::TwoPlane {
            alpha: 2.0,
            beta: 1.0,
        },
    ];
    for kind in cases {
        let base = lib(classify_blowup_2d(
            &lib(trace_of(kind, 512, 0.0))?,
            1.0,
            tol,
        ))?;
        for rot in [0.37, 1.91, 2.65, 4.02, 5.55] {
            let c = lib(classify_blowup_2d(
                &lib(trace_of(kind, 512, rot))?,
                1.0,
                tol,
            ))?;
            ensure(same_variant(&base.variant, &c.variant, tol), || {
                format!(
                    "{kind:?}: {:?} at rotation 0, {:?} at {rot}",
                    base.variant, c.variant
                )
            })?;
        }
    }
    Ok("four traces at five rotations".into())
}

fn exclusive_labels() -> Outcome {
    let grid = lib(GridSpec::centered(2, 1.0, 1.0 / 32.0))?;
    let u = lib(make_exact_field(ExactKind::HalfPlane { mass: 1.0 }, grid))?;
    let fb = extract_free_boundary(&u, 1e-12);
    let fb = lib(label_density_sets(&fb, &u, &[0.4, 0.2, 0.1], 0.05, 1.0))?;
    let assigned = [
        DensityLabel::HalfDensity,
        DensityLabel::FullDensity,
        DensityLabel::Degenerate,
    ]
    .iter()
    .map(|l| fb.count(*l))
    .sum::<usize>()
        + fb.count(DensityLabel::Unknown);
    ensure(fb.labels.len() == fb.len() && assigned == fb.len(), || {
        "label count mismatch".into()
    })?;
    Ok(format!(
        "{} points, {} half density",
        fb.len(),
        fb.count(DensityLabel::HalfDensity)
    ))
}

/// Spherical-mean margins `∫ u₀(x + rσ) dσ / (√(2M)·π·r)` and sup ratios
/// `sup_{B_r(x)} u₀ / (√(2M)·π·r)` at a point of the catenoid cone.
pub fn catenoid_nondegeneracy_margins(radii: &[f64]) -> crate::Result<Vec<(f64, f64, f64)>> {
    let f = ExactField::new(ExactKind::Catenoid, 3)?;
    let t0 = catenoid_theta0();
    let x = [t0.sin(), 0.0, t0.cos()];
    let q = ShellQuadrature::sphere(128, 256)?;
    let scale = (2.0 * CATENOID_MASS).sqrt() * PI;
    radii
        .iter()
        .map(|&r| {
            let s = scaled_sphere_integral(&f, &x, r, &q)?;
            let sup = ball_sup(&f, &x, r)?;
            Ok((r, s / (scale * r), sup / (scale * r)))
        })
        .collect()
}

fn catenoid_nondegeneracy() -> Outcome {
    let m = lib(catenoid_nondegeneracy_margins(&[0.2, 0.3, 0.5]))?;
    for (r, mean, _) in &m {
        ensure(*mean >= 1.0, || {
            format!("r = {r}: spherical mean ratio {mean} < 1")
        })?;
    }
    let sups: Vec<String> = m.iter().map(|(r, _, s)| format!("r={r}: {s:.4}")).collect();
    Ok(format!(
        "mean ratios {:?}; sup ratios (diagnostic) {}",
        m.iter().map(|t| t.1).collect::<Vec<_>>(),
        sups.join(", ")
    ))
}

fn exact_homogeneity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (kind, dim) in [
        (ExactKind::HalfPlane { mass: 1.0 }, 2),
        (ExactKind::Wedge { alpha: 0.5 }, 2),
        (
            ExactKind::TwoPlane {
                alpha: 2.0,
                beta: 1.0,
            },
            2,
        ),
        (ExactKind::HalfPlane { mass: 0.7 }, 3),
        (ExactKind::Catenoid, 3),
    ] {
        let f = lib(ExactField::new(kind, dim))?;
        let q = lib(ShellQuadrature::for_dim(
            dim,
            if dim == 2 { 256 } else { 32 },
        ))?;
        let d = lib(homogeneity_deviation(&f, &vec![0.0; dim], 0.5, 2.0, &q))?;
        worst = worst.max(d);
        ensure(d <= 1e-10, || format!("{kind:?}: deviation {d:e}"))?;
    }
    Ok(format!("max deviation {worst:.2e}"))
}

fn catenoid_ode() -> Outcome {
    let t0 = catenoid_theta0();
    let (a, b) = (0.5 * t0, PI - 0.5 * t0);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let t = a + (b - a) * (i as f64 + 0.5) / 10_000.0;
        worst = worst.max(lib(catenoid_ode_residual(t))?.abs());
    }
    ensure(worst <= 1e-9, || format!("max residual {worst:e}"))?;
    Ok(format!("max residual {worst:.2e}"))
}

fn catenoid_unit_gradient() -> Outcome {
    let t0 = catenoid_theta0();
    let mut worst: f64 = 0.0;
    for k in 0..32 {
        let phi = 2.0 * PI * k as f64 / 32.0;
        for t in [t0, PI - t0] {
            let inward = if t < 0.5 * PI { 1e-9 } else { -1e-9 };
            let x = unit_normal(t + inward, phi);
            let (_, g) = ExactKind::Catenoid.eval(&x);
            worst = worst.max((norm(&g) - 1.0).abs());
        }
    }
    ensure(worst <= 1e-6, || {
        format!("|grad u| - 1 = {worst:e} on the cone")
    })?;
    Ok(format!(
        "max ||grad u| - 1| = {worst:.2e}, slope {:.6}",
        catenoid_slope()
    ))
}

fn two_plane_condition() -> Outcome {
    let tol = 1e-3;
    let ok = lib(classify_blowup_2d(
        &lib(trace_of(
            ExactKind::TwoPlane {
                alpha: 3f64.sqrt(),
                beta: 1.0,
            },
            512,
            0.0,
        ))?,
        1.0,
        tol,
    ))?;
    ensure(matches!(ok.variant, BlowupVariant::TwoPlane { .. }), || {
        format!("accepted case gave {:?}", ok.variant)
    })?;
    let bad = lib(classify_blowup_2d(
        &lib(trace_of(
            ExactKind::TwoPlane {
                alpha: 2.0,
                beta: 1.0,
            },
            512,
            0.0,
        ))?,
        1.0,
        tol,
    ))?;
    ensure(matches!(bad.variant, BlowupVariant::Unclassified), || {
        format!("rejected case gave {:?}", bad.variant)
    })?;
    Ok("accepts (sqrt 3, 1), rejects (2, 1) at M = 1".into())
}

fn catenoid_trace(nt: usize, np: usize) -> crate::Result<SphericalFunction> {
    SphericalFunction::sphere_from_fn(nt, np, |t, _| {
        catenoid_g(t).map(|v| v.0).unwrap_or(f64::NAN)
    })
}

fn trace_identity() -> Outcome {
    let g = lib(SphericalFunction::sphere_from_fn(48, 96, |t, p| {
        1.0 + 0.3 * t.cos() + 0.2 * (t.sin() * p.cos()).powi(2) - 0.1 * (2.0 * p).sin() * t.sin()
    }))?;
    let mut worst: f64 = 0.0;
    for j in 1..47 {
        for k in 0..96 {
            let r = lib(curvature_report(&g, j, k))?;
            worst = worst.max((r.radii.0 + r.radii.1 - r.mean_residual).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max |r1 + r2 - tr W| = {worst:e}")
    })?;
    Ok(format!("max |r1 + r2 - tr W| = {worst:.2e}"))
}

/// Max |X(n) − ∇u₀(n)| over support nodes at least `3h` from the cone, with
/// `∇u₀` interpolated from a Cartesian catenoid grid of spacing `h`.
pub fn catenoid_gradient_identity(h: f64, nt: usize, np: usize) -> crate::Result<f64> {
    let grid = GridSpec::centered(3, 1.25, h)?;
    let u = make_exact_field(ExactKind::Catenoid, grid)?;
    let g = catenoid_trace(nt, np)?;
    let mut worst: f64 = 0.0;
    for j in 1..nt - 1 {
        if g.at(j, 0) <= 3.0 * h {
            continue;
        }
        for k in (0..np).step_by((np / 16).max(1)) {
            let x = immersion_x(&g, j, k)?;
            let n = unit_normal(g.theta(j), g.phi(k));
            let (_, grad) = u.interpolate(&n)?;
            let d = [x[0] - grad[0], x[1] - grad[1], x[2] - grad[2]];
            worst = worst.max(norm(&d));
        }
    }
    Ok(worst)
}

fn gradient_identity() -> Outcome {
    let coarse = lib(catenoid_gradient_identity(1.0 / 32.0, 128, 256))?;
    let fine = lib(catenoid_gradient_identity(1.0 / 64.0, 128, 256))?;
    ensure(fine <= 2.0 / 64.0 && fine < coarse, || {
        format!("errors {coarse:e} (h = 1/32), {fine:e} (h = 1/64)")
    })?;
    Ok(format!(
        "max |X - grad u| = {coarse:.3e} (h = 1/32), {fine:.3e} (h = 1/64)"
    ))
}

fn zero_degree_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    for j in 0..40 {
        for k in 0..16 {
            let n = unit_normal(PI * (j as f64 + 0.5) / 40.0, 2.0 * PI * k as f64 / 16.0);
            let (_, g1) = ExactKind::Catenoid.eval(&n);
            for r in [0.5, 2.0] {
                let (_, g) = ExactKind::Catenoid.eval(&[r * n[0], r * n[1], r * n[2]]);
                for a in 0..3 {
                    worst = worst.max((g[a] - g1[a]).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn containment() -> Outcome {
    let g = lib(catenoid_trace(128, 256))?;
    let radius = (2.0 * CATENOID_MASS).sqrt();
    let boundary = support_boundary_nodes(&g);
    let mut interior_max: f64 = 0.0;
    for j in 1..127 {
        for k in 0..256 {
            if g.at(j, k) <= 0.0 || boundary.contains(&(j, k)) {
                continue;
            }
            let x = lib(immersion_x(&g, j, k))?;
            interior_max = interior_max.max(norm(&x));
        }
    }
    ensure(interior_max < radius, || {
        format!("interior |X| reaches {interior_max}")
    })?;
    let summary = lib(surface_summary(&g, &lib(export_mesh(&g))?, CATENOID_MASS))?;
    let b = summary.boundary_x_norm.ok_or("no boundary samples")?;
    ensure(
        (b.min - radius).abs() <= 1e-3 && (b.max - radius).abs() <= 1e-3,
        || format!("boundary |X| in [{}, {}]", b.min, b.max),
    )?;
    ensure(summary.max_x_norm <= radius + 1e-3, || {
        format!("max |X| = {}", summary.max_x_norm)
    })?;
    Ok(format!(
        "interior max |X| = {interior_max:.6}, boundary |X| in [{:.6}, {:.6}]",
        b.min, b.max
    ))
}

/// Max mean residual and conformality defect of the catenoid surface at
/// `(n, 2n)` resolution.
pub fn catenoid_surface_errors(n: usize) -> crate::Result<(f64, f64)> {
    let g = catenoid_trace(n, 2 * n)?;
    let s = surface_summary(&g, &export_mesh(&g)?, CATENOID_MASS)?;
    Ok((s.max_mean_residual, s.max_conformality_defect))
}

fn convergence_order() -> Outcome {
    let (r1, d1) = lib(catenoid_surface_errors(128))?;
    let (r2, d2) = lib(catenoid_surface_errors(256))?;
    let (pr, pd) = ((r1 / r2).log2(), (d1 / d2).log2());
    ensure(pr >= 1.8 && pd >= 1.8, || {
        format!("orders {pr:.3} (residual), {pd:.3} (defect)")
    })?;
    Ok(format!("orders {pr:.3} (residual), {pd:.3} (defect)"))
}

fn deterministic_artifacts() -> Outcome {
    let p = BetaProfile::polynomial();
    let b = lib(disk(
        1.0 / 32.0,
        ExactKind::TwoPlane {
            alpha: 1.5,
            beta: 0.5,
        },
    ))?;
    let dir = std::env::temp_dir().join(format!("flamelab-check-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in 0..2 {
        let u = lib(solve_peps(&b, &p, 0.1, &lexicographic()))?;
        let path = dir.join(format!("u{run}.fld"));
        lib(write_fld(&path, &u, Some(&p)))?;
        let raw = std::fs::read(dir.join(format!("u{run}.fld.raw"))).map_err(|e| e.to_string())?;
        let g = lib(catenoid_trace(32, 64))?;
        let obj = lib(export_mesh(&g))?.to_obj();
        bytes.push((raw, obj));
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(bytes[0] == bytes[1], || {
        "artifacts differ between runs".into()
    })?;
    Ok("FLD payload and OBJ text identical across runs".into())
}
