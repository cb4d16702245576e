use std::f64::consts::PI;
use std::sync::Arc;

use oseen_core::decay_lab::{fit_power_law, FitCheck, FitOptions};
use oseen_core::geometry::{build_boundary_mesh, wake_weight, MultiIndex, Point3, Shape, Vec3};
use oseen_core::potentials::*;
use proptest::prelude::*;

const TAU: f64 = 1.0;

fn source() -> SourceField {
    SourceField::CompactBump { center: [0.0; 3], radius: 1.0, horizon: 1.0, amplitude: [1.0, 0.5, 0.0] }
}

fn curl_bump() -> InitialField {
    InitialField::CompactBump { center: [0.0; 3], radius: 1.0, axis: [0.0, 0.3, 1.0] }
}

fn rel(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn zero_data_gives_zero() {
    let x = Point3::new(3.0, 1.0, 0.0);
    let f = SourceField::CompactBump { center: [0.0; 3], radius: 1.0, horizon: 1.0, amplitude: [0.0; 3] };
    let a = InitialField::CompactBump { center: [0.0; 3], radius: 1.0, axis: [0.0; 3] };
    for d in [MultiIndex::ZERO, MultiIndex::dx(1)] {
        assert_eq!(eval_volume_potential(&f, &x, 2.0, TAU, d).unwrap(), Vec3::zeros());
        assert_eq!(eval_initial_potential(&a, &x, 2.0, TAU, d).unwrap(), Vec3::zeros());
    }
    let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 1).unwrap());
    let phi = SurfaceDensity::zeros(mesh, TimeGrid::new(0.5, 4).unwrap());
    assert_eq!(eval_single_layer(&phi, Target::Point(x), 1.5, TAU, MultiIndex::ZERO).unwrap(), Vec3::zeros());
}

#[test]
fn far_downstream_volume_value_self_converges() {
    let e = eval_volume_potential_with(
        &source(),
        &Point3::new(40.0, 0.0, 0.0),
        5.0,
        TAU,
        MultiIndex::ZERO,
        &PotentialOptions::default(),
    )
    .unwrap();
    assert!(e.converged && e.difference < 0.01, "{e:?}");
    assert!(e.value.norm() > 0.0);
}

#[test]
fn preconditions_are_enforced() {
    let x = Point3::new(3.0, 0.0, 0.0);
    assert!(eval_volume_potential(&source(), &x, 0.0, TAU, MultiIndex::ZERO).is_err());
    assert!(eval_volume_potential(&source(), &x, 0.5, TAU, MultiIndex::DT).is_err());
    assert!(eval_volume_potential(&source(), &x, 2.0, TAU, MultiIndex::DT).is_ok());
    assert!(eval_initial_potential(&curl_bump(), &x, -1.0, TAU, MultiIndex::ZERO).is_err());
    assert!(MultiIndex::new([1, 0, 0], 1).is_err());
}

#[test]
fn potentials_are_linear() {
    let f2 = SourceField::CompactBump { center: [0.5, 0.0, 0.0], radius: 0.7, horizon: 2.0, amplitude: [0.0, 0.0, 1.0] };
    let sum = SourceField::Superposition { parts: vec![source(), f2.clone()] };
    let x = Point3::new(2.0, 3.0, -1.0);
    for d in [MultiIndex::ZERO, MultiIndex::dx(2)] {
        let a = eval_volume_potential(&source(), &x, 3.0, TAU, d).unwrap();
        let b = eval_volume_potential(&f2, &x, 3.0, TAU, d).unwrap();
        let s = eval_volume_potential(&sum, &x, 3.0, TAU, d).unwrap();
        assert!(rel(a + b, s) < 1e-12);
    }
    let a2 = InitialField::MassBump { center: [1.0, 1.0, 0.0], radius: 0.5, amplitude: [1.0, 0.0, 0.0] };
    let asum = InitialField::Superposition { parts: vec![curl_bump(), a2.clone()] };
    let a = eval_initial_potential(&curl_bump(), &x, 1.0, TAU, MultiIndex::ZERO).unwrap();
    let b = eval_initial_potential(&a2, &x, 1.0, TAU, MultiIndex::ZERO).unwrap();
    let s = eval_initial_potential(&asum, &x, 1.0, TAU, MultiIndex::ZERO).unwrap();
    assert!(rel(a + b, s) < 1e-12);

    let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 1).unwrap());
    let grid = TimeGrid::new(0.25, 8).unwrap();
    let m = mesh.clone();
    let p1 = SurfaceDensity::from_fn(mesh.clone(), grid, |_, k| Vec3::new(1.0 + k as f64, 0.0, 0.0));
    let p2 = SurfaceDensity::from_fn(mesh, grid, move |i, _| m.nodes[i].cross(&Vec3::z()));
    let t = Target::Point(Point3::new(2.5, 0.5, 0.0));
    let v1 = eval_single_layer(&p1, t, 1.9, TAU, MultiIndex::ZERO).unwrap();
    let v2 = eval_single_layer(&p2, t, 1.9, TAU, MultiIndex::ZERO).unwrap();
    let vs = eval_single_layer(&p1.axpy(-2.0, &p2).unwrap(), t, 1.9, TAU, MultiIndex::ZERO).unwrap();
    assert!(rel(v1 - 2.0 * v2, vs) < 1e-12);
}

/// Divergence from the analytic first derivatives and from central
/// differences of the values.
fn divergences(eval: impl Fn(&Point3, MultiIndex) -> Vec3, x: &Point3) -> (f64, f64, f64) {
    let mut exact = 0.0;
    let mut fd = 0.0;
    let mut scale = 0.0f64;
    let h = 1e-3;
    for i in 0..3 {
        let g = eval(x, MultiIndex::dx(i));
        exact += g[i];
        scale = scale.max(g.norm());
        let e = Vec3::ith(i, h);
        fd += (eval(&(x + e), MultiIndex::ZERO)[i] - eval(&(x - e), MultiIndex::ZERO)[i]) / (2.0 * h);
    }
    (exact, fd, scale)
}

#[test]
fn potential_fields_are_divergence_free() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let f = source();
    let a = curl_bump();
    for _ in 0..6 {
        let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let x = Point3::from(rng.gen_range(2.0..6.0) * dir);
        let t = rng.gen_range(1.5..4.0);
        let (exact, fd, scale) = divergences(|y, d| eval_volume_potential(&f, y, t, TAU, d).unwrap(), &x);
        assert!(exact.abs() < 1e-10 * scale && fd.abs() < 1e-4 * scale, "R: {exact} {fd} {scale}");
        let t = rng.gen_range(0.2..2.0);
        let (exact, fd, scale) = divergences(|y, d| eval_initial_potential(&a, y, t, TAU, d).unwrap(), &x);
        assert!(exact.abs() < 1e-4 * scale && fd.abs() < 1e-4 * scale, "I: {exact} {fd} {scale}");
    }
}

#[test]
fn time_derivative_matches_differences() {
    let x = Point3::new(2.0, 1.5, 0.0);
    let (t, h) = (2.5, 1e-3);
    let f = source();
    let d = eval_volume_potential(&f, &x, t, TAU, MultiIndex::DT).unwrap();
    let fd = (eval_volume_potential(&f, &x, t + h, TAU, MultiIndex::ZERO).unwrap()
        - eval_volume_potential(&f, &x, t - h, TAU, MultiIndex::ZERO).unwrap())
        / (2.0 * h);
    assert!(rel(fd, d) < 1e-4, "{d} {fd}");
    let a = curl_bump();
    let d = eval_initial_potential(&a, &x, 1.0, TAU, MultiIndex::DT).unwrap();
    let fd = (eval_initial_potential(&a, &x, 1.0 + h, TAU, MultiIndex::ZERO).unwrap()
        - eval_initial_potential(&a, &x, 1.0 - h, TAU, MultiIndex::ZERO).unwrap())
        / (2.0 * h);
    assert!(rel(fd, d) < 1e-4, "{d} {fd}");
}

fn mass_bump() -> InitialField {
    InitialField::MassBump { center: [0.0; 3], radius: 1.0, amplitude: [1.0, -0.5, 0.25] }
}

#[test]
fn initial_potential_carries_the_mass_along_the_stream() {
    let a = mass_bump();
    let m = a.mass();
    let t = 1e3;
    let v = eval_initial_potential(&a, &Point3::new(TAU * t, 0.0, 0.0), t, TAU, MultiIndex::ZERO).unwrap();
    assert!(rel(v * (4.0 * PI * t).powf(1.5), m) < 0.02);
}

#[test]
fn initial_potential_sup_decays_at_the_l1_rate() {
    let a = mass_bump();
    let offsets = [Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0), Vec3::new(-3.0, 0.0, 1.0), Vec3::new(5.0, 0.0, 0.0)];
    let ts = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
    let sups: Vec<f64> = ts
        .iter()
        .map(|&t| {
            offsets
                .iter()
                .map(|o| {
                    let x = Point3::new(TAU * t, 0.0, 0.0) + o;
                    eval_initial_potential(&a, &x, t, TAU, MultiIndex::ZERO).unwrap().norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let opts = FitOptions { predicted: -1.5, tolerance: 0.1, check: FitCheck::Match, min_points: 5, knee: false };
    let fit = fit_power_law(&ts, &sups, opts).unwrap();
    assert!(fit.pass, "{fit:?}");
}

#[test]
fn heat_semigroup_composes_in_the_moving_frame() {
    // I(a)(x, t + δ) = ∫ 𝔥(x - y - τδe1, δ) I(a)(y, t) dy
    let a = curl_bump();
    let (t, delta) = (0.6, 0.3);
    let x = Point3::new(1.2, 0.4, -0.2);
    let direct = eval_initial_potential(&a, &x, t + delta, TAU, MultiIndex::ZERO).unwrap();
    let p = Point3::new(x[0] - TAU * delta, x[1], x[2]);
    let half = 7.0 * delta.sqrt();
    let g = oseen_core::quadrature::gauss(20);
    let nodes: Vec<(f64, f64)> = g.mapped(-half, half).collect();
    let mut composed = Vec3::zeros();
    for &(a1, w1) in &nodes {
        for &(a2, w2) in &nodes {
            for &(a3, w3) in &nodes {
                let z = Vec3::new(a1, a2, a3);
                let inner = eval_initial_potential_with(
                    &a,
                    &(p - z),
                    t,
                    TAU,
                    MultiIndex::ZERO,
                    &PotentialOptions { check: false, level: 2, ..Default::default() },
                )
                .unwrap()
                .value;
                composed += w1 * w2 * w3 * oseen_core::kernels::heat_kernel(&z, delta, MultiIndex::ZERO).unwrap() * inner;
            }
        }
    }
    assert!(rel(composed, direct) < 1e-3, "{composed} {direct}");
}

#[test]
fn single_layer_far_field_decays_like_inverse_square_transversally() {
    let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 1).unwrap());
    let grid = TimeGrid::with_horizon(10.0, 2000.0).unwrap();
    let phi = SurfaceDensity::from_fn(mesh, grid, |_, _| Vec3::new(1.0, 0.0, 0.0));
    let rs = [10.0, 14.0, 20.0, 28.0, 40.0];
    let vals: Vec<f64> = rs
        .iter()
        .map(|&r| eval_single_layer(&phi, Target::Point(Point3::new(0.0, r, 0.0)), 2000.0, TAU, MultiIndex::ZERO).unwrap().norm())
        .collect();
    let opts = FitOptions { predicted: -2.0, tolerance: 0.15, check: FitCheck::Match, min_points: 5, knee: false };
    let fit = fit_power_law(&rs, &vals, opts).unwrap();
    assert!(fit.pass, "{fit:?}");
}

#[test]
fn single_layer_saturates_for_steady_density() {
    let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 1).unwrap());
    let grid = TimeGrid::with_horizon(2.0, 512.0).unwrap();
    let phi = SurfaceDensity::from_fn(mesh, grid, |_, _| Vec3::new(1.0, 0.0, 0.0));
    let x = Target::Point(Point3::new(0.0, 3.0, 0.0));
    let vals: Vec<Vec3> =
        [128.0, 256.0, 512.0].iter().map(|&t| eval_single_layer(&phi, x, t, TAU, MultiIndex::ZERO).unwrap()).collect();
    assert!(rel(vals[0], vals[1]) < 0.01 && rel(vals[1], vals[2]) < 0.01);
    assert!(rel(vals[1], vals[2]) < rel(vals[0], vals[1]));
}

#[test]
fn near_boundary_targets_are_flagged() {
    let mesh = build_boundary_mesh(Shape::UnitSphere, 1).unwrap();
    assert!(near_boundary(&mesh, &Point3::new(1.0 + 0.5 * mesh.h, 0.0, 0.0)));
    assert!(!near_boundary(&mesh, &Point3::new(1.0 + 3.0 * mesh.h, 0.0, 0.0)));
}

fn wake_source(a: f64, b: f64) -> SourceField {
    SourceField::WakeDecaying {
        amplitude: [1.0, 2.0, 0.0],
        spatial_exponent: a,
        wake_exponent: b,
        time_exponent: 1.5,
        core_radius: 1.0,
    }
}

#[test]
fn wake_decay_conditions() {
    assert!(wake_source(3.0, 1.0).decay_conditions_hold());
    assert!(!wake_source(2.5, 0.9).decay_conditions_hold());
    assert!(!wake_source(3.2, 0.2).decay_conditions_hold());
    assert!(wake_source(3.0, 0.0).validate().is_ok());
    assert!(wake_source(3.0, -1.0).validate().is_err());
}

#[test]
fn mixed_norm_of_the_compact_bump() {
    // ∫ (1 - r²)^6 over the unit ball = 4π · 1024/45045; time factor ∫ χ = 8/15
    let f = SourceField::CompactBump { center: [0.0; 3], radius: 1.0, horizon: 1.0, amplitude: [3.0, 4.0, 0.0] };
    let space = (4.0 * PI * 1024.0 / 45045.0).sqrt();
    let n = f.norm_qs(2.0, 1.0).unwrap();
    assert!((n - 5.0 * space * 8.0 / 15.0).abs() < 1e-10 * n);
    let sup = f.norm_qs(2.0, f64::INFINITY).unwrap();
    assert!((sup - 5.0 * space).abs() < 1e-10 * sup);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compact_source_vanishes_off_support(r in 1.0f64..5.0, th in 0.0f64..PI, s in -1.0f64..3.0) {
        let f = source();
        prop_assert_eq!(f.value(&Point3::new(r * th.cos(), r * th.sin(), 0.0), s), Vec3::zeros());
        if !(0.0..1.0).contains(&s) {
            prop_assert_eq!(f.value(&Point3::new(0.1, 0.2, 0.0), s), Vec3::zeros());
        }
    }

    #[test]
    fn wake_source_respects_its_envelope(r in 0.1f64..200.0, th in 0.0f64..PI, ph in 0.0f64..(2.0 * PI), s in 0.0f64..50.0) {
        let y = Point3::new(r * th.cos(), r * th.sin() * ph.cos(), r * th.sin() * ph.sin());
        let f = wake_source(3.0, 1.0);
        let env = 5f64.sqrt() * (1.0 + s).powf(-1.5) * r.powf(-3.0) / wake_weight(&y);
        prop_assert!(f.value(&y, s).norm() <= env * (1.0 + 1e-12));
    }

    #[test]
    fn curl_fields_are_divergence_free(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5, scale in 1.0f64..30.0) {
        let h = 1e-5;
        for a in [curl_bump(), InitialField::AlgebraicDecay { axis: [0.2, 0.0, 1.0], kappa: 0.5, core_radius: 1.0 }] {
            let p = scale * Point3::new(x, y, z);
            let mut div = 0.0;
            let mut size = 0.0f64;
            for i in 0..3 {
                let e = Vec3::ith(i, h * scale);
                div += (a.value(&(p + e))[i] - a.value(&(p - e))[i]) / (2.0 * h * scale);
                size = size.max(a.gradient(&p).row(i).norm());
            }
            prop_assert!(div.abs() <= 1e-6 * size.max(1e-300) + 1e-12, "div {} size {}", div, size);
            let j = a.gradient(&p);
            prop_assert!(j.trace().abs() <= 1e-12 * j.norm() + 1e-300);
        }
    }

    #[test]
    fn algebraic_field_meets_its_decay_bound(r in 0.5f64..500.0, th in 0.0f64..PI, ph in 0.0f64..(2.0 * PI)) {
        let a = InitialField::AlgebraicDecay { axis: [0.0, 0.6, 0.8], kappa: 0.4, core_radius: 1.0 };
        let (d0, k) = a.decay_constant().unwrap();
        let y = Point3::new(r * th.cos(), r * th.sin() * ph.cos(), r * th.sin() * ph.sin());
        let g = r * wake_weight(&y);
        prop_assert!(a.value(&y).norm() <= d0 * g.powf(-1.0 - k));
        prop_assert!(a.gradient(&y).norm() <= d0 * g.powf(-1.5 - k));
    }
}
