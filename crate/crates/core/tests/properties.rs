use std::f64::consts::PI;

use proptest::prelude::*;

use flamelab::blowup::{classify_blowup_2d, homogeneity_deviation, rescale, BlowupVariant};
use flamelab::cli::json17;
use flamelab::exact::{ExactField, ExactKind};
use flamelab::field::{FnProbe, GridSpec, ScalarField};
use flamelab::fld::{read_fld, write_fld};
use flamelab::mollifier::BetaProfile;
use flamelab::quadrature::ShellQuadrature;
use flamelab::solver::{solve_peps, SolverConfig, Sweep};
use flamelab::spherical::SphericalFunction;
use flamelab::spherical_energy::{acf_phi, spruck_s_limit};
use flamelab::support_geometry::curvature_report;

fn profile(smooth: bool, scale: f64) -> BetaProfile {
    if smooth {
        BetaProfile::smooth_scaled(scale).unwrap()
    } else {
        BetaProfile::polynomial_scaled(scale).unwrap()
    }
}

/// Composite Simpson with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn primitive_is_monotone_and_bounded(smooth: bool, scale in 0.1f64..4.0, s in -1.0f64..2.0, ds in 0.0f64..0.5) {
        let p = profile(smooth, scale);
        let (a, b) = (p.primitive(s), p.primitive(s + ds));
        prop_assert!(a >= 0.0 && b <= p.mass());
        prop_assert!(b >= a);
    }

    #[test]
    fn scaled_profile_is_nonnegative(smooth: bool, scale in 0.1f64..4.0, t in -1.0f64..2.0, log_eps in -3.0f64..0.0) {
        let p = profile(smooth, scale);
        prop_assert!(p.beta_eps(t, 10f64.powf(log_eps)).unwrap() >= 0.0);
    }

    #[test]
    fn scaled_profile_carries_the_mass(smooth: bool, scale in 0.1f64..4.0, decade in 0usize..3, frac in 1.0f64..10.0) {
        let p = profile(smooth, scale);
        let eps = frac * 10f64.powi(-(decade as i32) - 1);
        let m = simpson(|t| p.beta_eps(t, eps).unwrap(), -0.1 * eps, 1.1 * eps, 4000);
        prop_assert!((m - p.mass()).abs() <= 1e-8 * p.mass().max(1.0), "eps {eps}: {m} vs {}", p.mass());
    }

    #[test]
    fn json_floats_round_trip(x in proptest::num::f64::NORMAL) {
        let s = json17(&serde_json::json!({ "x": x }));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(v["x"].as_f64().unwrap().to_bits(), x.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn maximum_principle(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5, eps in 0.05f64..0.3) {
        let p = BetaProfile::polynomial();
        // h = 1/32 keeps h below 0.8ε, where the pointwise solve is monotone.
        let grid = GridSpec::centered(2, 1.0, 1.0 / 32.0).unwrap();
        let bd = ScalarField::from_fn_box(grid, |x| a * x[0] + b * x[1] + c).unwrap();
        let cfg = SolverConfig { tol_residual: Some(1e-9), ..Default::default() };
        let u = solve_peps(&bd, &p, eps, &cfg).unwrap();
        let bvals: Vec<f64> = bd.values.clone();
        let hi = bvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = bvals.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
        for v in &u.values {
            prop_assert!(*v <= hi + 1e-9 && *v >= lo - 1e-9);
        }
    }

    #[test]
    fn lexicographic_solves_are_bit_identical(a in 0.2f64..2.0, eps in 0.1f64..0.3) {
        let p = BetaProfile::polynomial();
        let grid = GridSpec::centered(2, 1.0, 1.0 / 16.0).unwrap();
        let bd = ScalarField::from_fn_box(grid, |x| a * x[0].max(0.0)).unwrap();
        let cfg = SolverConfig { sweep: Sweep::Lexicographic, tol_residual: Some(1e-8), ..Default::default() };
        let u = solve_peps(&bd, &p, eps, &cfg).unwrap();
        let v = solve_peps(&bd, &p, eps, &cfg).unwrap();
        prop_assert!(u.values.iter().zip(&v.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn limit_functional_is_scale_invariant(mass in 0.2f64..2.0, angle in 0.0f64..(2.0 * PI), r in 0.2f64..1.0) {
        let (c, s) = (angle.cos(), angle.sin());
        let a = (2.0 * mass).sqrt();
        let f = FnProbe::new(2, move |x: &[f64; 3]| {
            let t = c * x[0] + s * x[1];
            if t > 0.0 { (a * t, [a * c, a * s, 0.0]) } else { (0.0, [0.0; 3]) }
        });
        let q = ShellQuadrature::circle(256).unwrap();
        let s1 = spruck_s_limit(&f, &[0.0, 0.0], r, mass, &q).unwrap();
        let s2 = spruck_s_limit(&f, &[0.0, 0.0], 2.0 * r, mass, &q).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-9 * s1.abs().max(1.0), "{s1} vs {s2}");
    }

    #[test]
    fn two_phase_functional_is_symmetric(a in 0.1f64..2.0, b in 0.1f64..2.0, tilt in -0.5f64..0.5, r in 0.2f64..0.8) {
        let grid = GridSpec::centered(2, 1.0, 1.0 / 32.0).unwrap();
        let u = ScalarField::from_fn_box(grid.clone(), |x| a * (x[0] + tilt * x[1]).max(0.0)).unwrap();
        let v = ScalarField::from_fn_box(grid, |x| b * (-x[0] + tilt * x[1] * x[1]).max(0.0)).unwrap();
        let uv = acf_phi(&u, &v, &[0.0, 0.0], r).unwrap();
        let vu = acf_phi(&v, &u, &[0.0, 0.0], r).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * uv.abs().max(1e-300));
    }

    #[test]
    fn rescales_compose(r1 in 0.3f64..1.0, r2 in 0.3f64..1.0, slope in 0.5f64..2.0) {
        let h = 1.0 / 64.0;
        let grid = GridSpec::centered(2, 1.0, h).unwrap();
        let u = ScalarField::from_fn_box(grid.clone(), |x| slope * (x[0] + 0.3 * x[1] - 0.05).max(0.0)).unwrap();
        let once = rescale(&u, &[0.0, 0.0], r1, &grid).unwrap();
        let twice = rescale(&once, &[0.0, 0.0], r2, &grid).unwrap();
        let direct = rescale(&u, &[0.0, 0.0], r1 * r2, &grid).unwrap();
        let lip = slope * (1.0f64 + 0.09).sqrt();
        let err = twice.values.iter().zip(&direct.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 4.0 * lip * h, "{err}");
    }

    #[test]
    fn homogeneity_deviation_scales_quadratically(c in 0.1f64..5.0, k in 0.5f64..2.0) {
        let q = ShellQuadrature::circle(128).unwrap();
        let f = FnProbe::new(2, move |x: &[f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (r2 + k * x[1], [2.0 * x[0], 2.0 * x[1] + k, 0.0])
        });
        let g = FnProbe::new(2, move |x: &[f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (c * (r2 + k * x[1]), [2.0 * c * x[0], c * (2.0 * x[1] + k), 0.0])
        });
        let a = homogeneity_deviation(&f, &[0.0, 0.0], 0.5, 1.5, &q).unwrap();
        let b = homogeneity_deviation(&g, &[0.0, 0.0], 0.5, 1.5, &q).unwrap();
        prop_assert!((b / a - c * c).abs() <= 1e-10 * c * c);
    }

    #[test]
    fn degree_one_fields_have_no_deviation(alpha in 0.1f64..3.0, beta in 0.1f64..3.0, dim in 2usize..4) {
        let q = ShellQuadrature::for_dim(dim, 32).unwrap();
        for kind in [ExactKind::Wedge { alpha }, ExactKind::TwoPlane { alpha, beta }, ExactKind::HalfPlane { mass: alpha }] {
            let f = ExactField::new(kind, dim).unwrap();
            let d = homogeneity_deviation(&f, &vec![0.0; dim], 0.3, 0.9, &q).unwrap();
            prop_assert!(d <= 1e-10, "{kind:?}: {d}");
        }
    }

    #[test]
    fn classification_ignores_rotation(rot in 0.0f64..(2.0 * PI), which in 0usize..3) {
        let (a, b, wedge) = [(2f64.sqrt(), 0.0, false), (0.5, 0.0, true), (3f64.sqrt(), 1.0, false)][which];
        let trace = |rot: f64| SphericalFunction::circle_from_fn(512, move |t| {
            let c = (t - rot).cos();
            if c > 0.0 { a * c } else if wedge { -a * c } else { b * c }
        }).unwrap();
        let base = classify_blowup_2d(&trace(0.0), 1.0, 1e-3).unwrap().variant;
        let turned = classify_blowup_2d(&trace(rot), 1.0, 1e-3).unwrap().variant;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-3;
        let same = match (base, turned) {
            (BlowupVariant::HalfPlane { alpha: x }, BlowupVariant::HalfPlane { alpha: y })
            | (BlowupVariant::Wedge { alpha: x }, BlowupVariant::Wedge { alpha: y }) => close(x, y),
            (BlowupVariant::TwoPlane { alpha: x1, beta: y1 }, BlowupVariant::TwoPlane { alpha: x2, beta: y2 }) => {
                close(x1, x2) && close(y1, y2)
            }
            _ => false,
        };
        prop_assert!(same, "{base:?} vs {turned:?} at {rot}");
    }

    #[test]
    fn two_plane_accepted_iff_mass_condition(alpha in 0.5f64..3.0, gap in -0.5f64..0.5) {
        let mass = 1.0;
        let beta2 = alpha * alpha - 2.0 * mass + gap;
        prop_assume!(beta2 > 0.01 && gap.abs() > 0.02);
        let beta = beta2.sqrt();
        let g = SphericalFunction::circle_from_fn(512, |t| {
            let c = t.cos();
            if c > 0.0 { alpha * c } else { beta * c }
        }).unwrap();
        let accepted = matches!(classify_blowup_2d(&g, mass, 1e-3).unwrap().variant, BlowupVariant::TwoPlane { .. });
        prop_assert!(!accepted);
        let beta = (alpha * alpha - 2.0 * mass).max(0.0).sqrt();
        prop_assume!(beta > 0.1);
        let g = SphericalFunction::circle_from_fn(512, |t| {
            let c = t.cos();
            if c > 0.0 { alpha * c } else { beta * c }
        }).unwrap();
        let accepted = matches!(classify_blowup_2d(&g, mass, 1e-3).unwrap().variant, BlowupVariant::TwoPlane { .. });
        prop_assert!(accepted);
    }

    #[test]
    fn radii_sum_to_the_mean_residual(c0 in 0.5f64..2.0, c1 in -0.5f64..0.5, c2 in -0.3f64..0.3, j in 2usize..30, k in 0usize..64) {
        let g = SphericalFunction::sphere_from_fn(32, 64, |t, p| {
            c0 + c1 * t.cos() + c2 * (t.sin() * p.cos()).powi(2)
        }).unwrap();
        let s = curvature_report(&g, j, k).unwrap();
        let sum = s.radii.0 + s.radii.1;
        prop_assert!((sum - s.mean_residual).abs() <= 1e-12 * (1.0 + s.mean_residual.abs()));
    }

    #[test]
    fn fld_round_trip(seed in 0u64..1000, n in 4usize..12) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.fld");
        let h = 2.0 / (n - 1) as f64;
        let grid = GridSpec::new(vec![n, n + 1], h, vec![-1.0, -1.0]).unwrap();
        let f = ScalarField::from_fn_box(grid, |x| ((seed as f64 + 1.0) * x[0]).sin() * x[1].exp()).unwrap();
        write_fld(&path, &f, None).unwrap();
        let (g, _) = read_fld(&path).unwrap();
        prop_assert!(f.values.iter().zip(&g.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
