use oseen_core::geometry::{MultiIndex, Point3, Vec3};
use oseen_core::integral_equation::manufactured::{SeparableDensity, SlabSampling, SpatialProfile, TemporalProfile};
use oseen_core::potentials::{eval_initial_potential, InitialField, SourceField};
use oseen_core::solver::*;
use oseen_core::Error;
use rand::{Rng, SeedableRng};

fn stream_bc(c: f64) -> BoundaryData {
    BoundaryData::Separable {
        terms: vec![(SpatialProfile::Uniform { c: [c, 0.0, 0.0] }, TemporalProfile::PolyExp { power: 1, rate: 1.0 })],
    }
}

/// Compact force upstream, compact initial swirl above the obstacle and a
/// rapidly decaying uniform boundary velocity.
fn small_problem() -> ProblemSpec {
    let mut spec = ProblemSpec::zero(1.0, 1, 0.2, 4.0);
    spec.source = SourceField::CompactBump { center: [-2.5, 0.0, 0.0], radius: 1.0, horizon: 1.0, amplitude: [1.0, 0.5, 0.0] };
    spec.initial = InitialField::CompactBump { center: [0.0, 0.0, 2.5], radius: 1.0, axis: [0.0, 1.0, 0.0] };
    spec.boundary = stream_bc(0.5);
    spec
}

#[test]
fn zero_data_gives_zero_velocity() {
    let h = solve_ibvp(&ProblemSpec::zero(1.0, 1, 0.2, 2.0)).unwrap();
    assert!(h.density.is_zero());
    assert_eq!(h.report.rhs.total, 0.0);
    assert_eq!(eval_velocity(&h, &Point3::new(2.0, 1.0, 0.0), 1.0, MultiIndex::ZERO).unwrap(), Vec3::zeros());
}

#[test]
fn initial_trace_data_cancels() {
    let mut spec = ProblemSpec::zero(1.0, 1, 0.2, 2.0);
    spec.initial = InitialField::CompactBump { center: [0.0, 1.8, 0.0], radius: 0.7, axis: [1.0, 0.0, 0.5] };
    spec.boundary = BoundaryData::InitialTrace;
    let h = solve_ibvp(&spec).unwrap();
    assert!(h.report.rhs.initial > 0.0);
    assert!(h.density.is_zero());
    for x in [Point3::new(0.0, 2.0, 0.3), Point3::new(1.5, -1.0, 0.5)] {
        let u = eval_velocity(&h, &x, 1.2, MultiIndex::ZERO).unwrap();
        let i = eval_initial_potential(&spec.initial, &x, 1.2, 1.0, MultiIndex::ZERO).unwrap();
        assert!((u - i).norm() <= 1e-12 * i.norm());
    }
}

#[test]
fn manufactured_boundary_data_recovers_the_density() {
    let mut spec = ProblemSpec::zero(1.0, 2, 0.1, 4.0);
    let star = SeparableDensity::standard();
    spec.boundary = BoundaryData::SingleLayerOf { density: star.clone() };
    let h = solve_ibvp(&spec).unwrap();
    let sampled = star.sample(h.density.mesh.clone(), h.density.grid, SlabSampling::Average);
    let err = h.density.axpy(-1.0, &sampled).unwrap().l2_norm() / sampled.l2_norm();
    assert!(err < 0.05, "relative density error {err}");
}

#[test]
fn boundary_condition_and_divergence() {
    let h = solve_ibvp(&small_problem()).unwrap();
    assert!(h.report.density.residual < 1e-3);
    let b = |t: f64| 0.5 * t * (-t).exp();
    let b_max = b(1.0);
    let mesh = h.density.mesh.clone();
    for (node, t) in [(0, 1.0), (7, 2.0), (20, 3.0), (41, 3.2)] {
        let u = eval_boundary_velocity(&h, node, t).unwrap();
        assert!((u - Vec3::new(b(t), 0.0, 0.0)).norm() < 0.04 * b_max, "node {node} t {t}: {u:?}");
    }
    assert!(mesh.len() == 42);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let step = 1e-3;
    for _ in 0..5 {
        let dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let x = Point3::from(dir * rng.gen_range(4.0..8.0));
        let t = rng.gen_range(1.0..3.0);
        let mut div = 0.0;
        let mut scale = 0.0f64;
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = step;
            let up = eval_velocity(&h, &(x + e), t, MultiIndex::ZERO).unwrap();
            let down = eval_velocity(&h, &(x - e), t, MultiIndex::ZERO).unwrap();
            let d = (up - down) / (2.0 * step);
            div += d[j];
            scale = scale.max(d.norm());
        }
        assert!(div.abs() < 1e-4 * scale, "div {div} vs {scale} at {x:?}");
    }
}

#[test]
fn far_field_decreases_along_rays() {
    let h = solve_ibvp(&small_problem()).unwrap();
    for dir in [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -0.6, 0.8]] {
        let mut last = f64::INFINITY;
        for r in [10.0, 15.0, 22.0, 33.0, 50.0] {
            let x = Point3::new(r * dir[0], r * dir[1], r * dir[2]);
            let u = eval_velocity(&h, &x, 3.0, MultiIndex::ZERO).unwrap().norm();
            assert!(u < last, "{dir:?} r {r}");
            last = u;
        }
    }
}

#[test]
fn solve_is_linear_in_all_data() {
    let one = small_problem();
    let mut two = ProblemSpec::zero(1.0, 1, 0.2, 4.0);
    two.source = SourceField::CompactBump { center: [0.0, -2.5, 0.0], radius: 0.8, horizon: 0.6, amplitude: [0.0, 0.3, -1.0] };
    two.initial = InitialField::CompactBump { center: [2.2, 0.0, 0.0], radius: 0.9, axis: [0.0, 0.0, 1.0] };
    two.boundary = BoundaryData::Separable {
        terms: vec![(SpatialProfile::Rotation { axis: [0.0, 0.0, 1.0] }, TemporalProfile::PolyExp { power: 2, rate: 2.0 })],
    };
    let mut sum = one.clone();
    sum.source = SourceField::Superposition { parts: vec![one.source.clone(), two.source.clone()] };
    sum.initial = InitialField::Superposition { parts: vec![one.initial.clone(), two.initial.clone()] };
    let (BoundaryData::Separable { terms: t1 }, BoundaryData::Separable { terms: t2 }) = (&one.boundary, &two.boundary) else {
        unreachable!()
    };
    sum.boundary = BoundaryData::Separable { terms: t1.iter().chain(t2).cloned().collect() };
    let (h1, h2, hs) = (solve_ibvp(&one).unwrap(), solve_ibvp(&two).unwrap(), solve_ibvp(&sum).unwrap());
    let expect = h1.density.axpy(1.0, &h2.density).unwrap();
    let diff = hs.density.axpy(-1.0, &expect).unwrap().l2_norm();
    assert!(diff <= 1e-9 * expect.l2_norm(), "{diff}");
}

#[test]
fn saved_solutions_reload() {
    let h = solve_ibvp(&small_problem()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    h.save(dir.path()).unwrap();
    let back = SolutionHandle::load(dir.path()).unwrap();
    assert_eq!(back.spec, h.spec);
    assert_eq!(back.density.values, h.density.values);
    let x = Point3::new(3.0, 2.0, -1.0);
    assert_eq!(eval_velocity(&back, &x, 2.0, MultiIndex::ZERO).unwrap(), eval_velocity(&h, &x, 2.0, MultiIndex::ZERO).unwrap());
    assert_eq!(back.report.density.residual, h.report.density.residual);
}

#[test]
fn evaluation_preconditions() {
    let h = solve_ibvp(&ProblemSpec::zero(1.0, 0, 0.5, 5.0)).unwrap();
    assert!((h.latest_time() - 4.0).abs() < 1e-12);
    assert!(eval_velocity(&h, &Point3::new(3.0, 0.0, 0.0), 4.5, MultiIndex::ZERO).is_err());
    assert!(eval_velocity(&h, &Point3::new(0.2, 0.0, 0.0), 1.0, MultiIndex::ZERO).is_err());
    assert!(eval_velocity(&h, &Point3::new(3.0, 0.0, 0.0), 1.0, MultiIndex::DT).is_err());
    assert!(eval_boundary_velocity(&h, 999, 1.0).is_err());
}

#[test]
fn problem_specs_are_validated_and_serialized() {
    let mut spec = small_problem();
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<ProblemSpec>(&json).unwrap(), spec);
    spec.source = SourceField::WakeDecaying {
        amplitude: [1.0, 0.0, 0.0],
        spatial_exponent: 2.0,
        wake_exponent: 0.5,
        time_exponent: 1.0,
        core_radius: 1.5,
    };
    assert!(matches!(spec.validate(), Err(Error::Domain(_))));
    let mut bad = small_problem();
    bad.dt = 0.0;
    assert!(bad.validate().is_err());
    let mut bad = small_problem();
    bad.boundary_tail = Some(TailRate { zeta: -0.5, delta: 1.0 });
    assert!(bad.validate().is_err());
    let mut bad = small_problem();
    bad.shape = oseen_core::geometry::Shape::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 };
    bad.boundary = BoundaryData::SingleLayerOf { density: SeparableDensity::standard() };
    assert!(bad.validate().is_err());
}
