use std::sync::Arc;

use oseen_core::boundary_space::{h_tail_norm_with, BoundaryTrace, RieszMap};
use oseen_core::geometry::{build_boundary_mesh, BoundaryMesh, MultiIndex, Shape, Vec3};
use oseen_core::integral_equation::manufactured::{SeparableDensity, SlabSampling, SpatialProfile, TemporalProfile};
use oseen_core::integral_equation::*;
use oseen_core::potentials::{eval_single_layer, SurfaceDensity, Target, TimeGrid};
use oseen_core::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere(level: u32) -> Arc<BoundaryMesh> {
    Arc::new(build_boundary_mesh(Shape::UnitSphere, level).unwrap())
}

fn small_system() -> VolterraSystem {
    assemble(sphere(1), TimeGrid::new(0.2, 10).unwrap(), 1.0).unwrap()
}

fn as_trace(sys: &VolterraSystem, values: Vec<Vec3>) -> BoundaryTrace {
    BoundaryTrace::new(sys.mesh.clone(), sys.grid.collocation_times(), values, "test data").unwrap()
}

fn rel_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let den: f64 = b.iter().map(|y| y.norm_squared()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn random_density(mesh: Arc<BoundaryMesh>, grid: TimeGrid, seed: u64) -> SurfaceDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let (c1, c2, c3) = (c(), c(), c());
    SeparableDensity {
        terms: vec![
            (SpatialProfile::Uniform { c: c1 }, TemporalProfile::PolyExp { power: 2, rate: 2.0 }),
            (SpatialProfile::Rotation { axis: c2 }, TemporalProfile::PolyExp { power: 1, rate: 3.0 }),
            (SpatialProfile::Saddle { i: 1, j: 2, dir: c3 }, TemporalProfile::PolyExp { power: 3, rate: 2.5 }),
        ],
    }
    .sample(mesh, grid, SlabSampling::Average)
}

#[test]
fn blocks_are_causal() {
    let sys = small_system();
    let n = sys.n_nodes();
    let k = 4;
    let mut phi = SurfaceDensity::zeros(sys.mesh.clone(), sys.grid);
    phi.slab_mut(k).iter_mut().enumerate().for_each(|(i, v)| *v = Vec3::new(1.0, 0.5 * i as f64, -0.2));
    let out = sys.apply(&phi).unwrap();
    assert!(out[..k * n].iter().all(|v| *v == Vec3::zeros()));
    assert!(out[k * n..].iter().any(|v| *v != Vec3::zeros()));
    assert!(sys.diagonal_condition.is_finite() && sys.diagonal_condition < CONDITION_LIMIT);
}

#[test]
fn relabeling_permutes_rows_and_columns() {
    let mesh = sphere(1);
    let grid = TimeGrid::new(0.25, 4).unwrap();
    let sys = assemble(mesh.clone(), grid, 1.0).unwrap();
    let mut perm: Vec<usize> = (0..mesh.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let relabeled = Arc::new(mesh.permuted(&perm).unwrap());
    let fresh = assemble(relabeled.clone(), grid, 1.0).unwrap();
    let moved = sys.permuted(relabeled, &perm).unwrap();
    let scale = sys.block(0, 0, 0)[0].abs();
    for lag in 0..grid.n_slabs {
        for n in 0..mesh.len() {
            for i in 0..mesh.len() {
                let (a, b) = (fresh.block(lag, n, i), moved.block(lag, n, i));
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale), "lag {lag} ({n},{i})");
            }
        }
    }
    // the solve commutes with the relabeling
    let phi = random_density(mesh.clone(), grid, 2);
    let data = as_trace(&sys, sys.apply(&phi).unwrap());
    let (back, _) = solve_density(&sys, &data).unwrap();
    let pdata: Vec<Vec3> =
        (0..grid.n_slabs).flat_map(|m| perm.iter().map(move |&old| (m, old))).map(|(m, old)| data.slice(m)[old]).collect();
    let (pback, _) = solve_density(&fresh, &as_trace(&fresh, pdata)).unwrap();
    for k in 0..grid.n_slabs {
        for (new, &old) in perm.iter().enumerate() {
            assert!((pback.slab(k)[new] - back.slab(k)[old]).norm() <= 1e-8 * back.max_abs());
        }
    }
}

#[test]
fn apply_matches_pointwise_single_layer() {
    let sys = small_system();
    let phi = random_density(sys.mesh.clone(), sys.grid, 7);
    let out = sys.apply(&phi).unwrap();
    let n = sys.n_nodes();
    let mut direct = Vec::new();
    let mut discrete = Vec::new();
    for m in [0, 3, 9] {
        for i in (0..n).step_by(5) {
            let t = sys.grid.collocation_time(m);
            direct.push(eval_single_layer(&phi, Target::Node(i), t, sys.tau, MultiIndex::ZERO).unwrap());
            discrete.push(out[m * n + i]);
        }
    }
    assert!(rel_diff(&discrete, &direct) < 0.02, "{}", rel_diff(&discrete, &direct));
}

#[test]
fn zero_data_gives_zero_density() {
    let sys = small_system();
    let zero = BoundaryTrace::zeros(sys.mesh.clone(), sys.grid.collocation_times(), "zero").unwrap();
    let (phi, report) = solve_density(&sys, &zero).unwrap();
    assert!(phi.is_zero() && phi.zero_flux);
    assert_eq!(report.residual, 0.0);
    assert!(matches!(density_tail_fit(&phi, &[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), DensityTail::ZeroDensity));
    let tc = trace_consistency(&phi, &[0.8, 0.4], &TraceProbe { nodes: vec![], times: vec![1.0], tau: 1.0 }).unwrap();
    assert_eq!(tc.extrapolated, 0.0);
    assert!(tc.mismatch.iter().all(|&m| m == 0.0));
}

#[test]
fn solve_is_linear_and_deterministic() {
    let sys = small_system();
    let a = random_density(sys.mesh.clone(), sys.grid, 1);
    let b = random_density(sys.mesh.clone(), sys.grid, 2);
    let ba = as_trace(&sys, sys.apply(&a).unwrap());
    let bb = as_trace(&sys, sys.apply(&b).unwrap());
    let sum = ba.axpy(1.0, &bb).unwrap();
    let (pa, ra) = solve_density(&sys, &ba).unwrap();
    let (pb, _) = solve_density(&sys, &bb).unwrap();
    let (ps, _) = solve_density(&sys, &sum).unwrap();
    let expect = pa.axpy(1.0, &pb).unwrap();
    assert!(rel_diff(&ps.values, &expect.values) < 1e-8);
    // discrete data of a zero-flux density is recovered to solver precision
    assert!(rel_diff(&pa.values, &a.values) < 1e-8, "{}", rel_diff(&pa.values, &a.values));
    assert!(ra.residual < 1e-8);
    assert!(ra.flux_violations.iter().all(|&f| f < 1e-10 * a.max_abs()));

    let again = small_system();
    let (pa2, _) = solve_density(&again, &ba).unwrap();
    assert!(rel_diff(&pa2.values, &pa.values) < 1e-8);
}

#[test]
fn flux_incompatible_data_is_reported() {
    let sys = small_system();
    let mesh = sys.mesh.clone();
    // a pure normal field has nonzero net flux in every slab
    let values = (0..sys.grid.n_slabs).flat_map(|_| mesh.normals.iter().map(|n| Vec3::new(n[0], n[1], n[2]))).collect();
    let data = as_trace(&sys, values);
    let (_, report) = solve_density(&sys, &data).unwrap();
    assert!(report.data_incompatibility.iter().all(|&c| c > 0.9));
    assert!(report.incompatible_l2 > 0.0);
    let strict = SolveOptions { strict_flux: true, ..Default::default() };
    assert!(matches!(solve_density_with(&sys, &data, &strict), Err(Error::FluxIncompatible(..))));
    let back: DensitySolveReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back.data_incompatibility.len(), sys.grid.n_slabs);
}

#[test]
fn checkpointed_solve_resumes() {
    let sys = small_system();
    let phi = random_density(sys.mesh.clone(), sys.grid, 3);
    let data = as_trace(&sys, sys.apply(&phi).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("density.txt");
    let opts = SolveOptions { checkpoint: Some(path.clone()), checkpoint_every: 3, ..Default::default() };
    let (full, first) = solve_density_with(&sys, &data, &opts).unwrap();
    assert_eq!(first.resumed_slabs, 0);
    // keep only the first six slabs in the checkpoint
    let mut partial = Vec::new();
    full.write_text_prefix(&mut partial, 6).unwrap();
    std::fs::write(&path, partial).unwrap();
    let (resumed, second) = solve_density_with(&sys, &data, &opts).unwrap();
    assert_eq!(second.resumed_slabs, 6);
    assert!(rel_diff(&resumed.values, &full.values) < 1e-10);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let sys = small_system();
    let wrong_times = BoundaryTrace::zeros(sys.mesh.clone(), vec![0.3, 0.6], "short").unwrap();
    assert!(solve_density(&sys, &wrong_times).is_err());
    assert!(assemble(sphere(0), TimeGrid::new(0.2, 2).unwrap(), -1.0).is_err());
    let phi = SurfaceDensity::zeros(sphere(0), sys.grid);
    assert!(sys.apply(&phi).is_err());
    let p = random_density(sys.mesh.clone(), sys.grid, 1);
    let probe = TraceProbe { nodes: vec![], times: vec![1.0], tau: 1.0 };
    assert!(trace_consistency(&p, &[0.1, 0.2], &probe).is_err());
    assert!(trace_consistency(&p, &[0.5 * sys.mesh.h, 0.1 * sys.mesh.h], &probe).is_err());
    assert!(density_tail_fit(&p, &[0.2, 0.4, 0.6], 0.5).is_err());
}

/// Empirical constants of `‖V(φ)‖_H ≤ c₁‖φ‖₂` and `‖φ‖₂ ≤ c₂‖V(φ)‖_H`
/// stay within one order of magnitude over random smooth densities.
#[test]
fn energy_constants_are_stable() {
    let mesh = sphere(0);
    let grid = TimeGrid::new(0.1, 80).unwrap();
    let sys = assemble(mesh.clone(), grid, 1.0).unwrap();
    let riesz = RieszMap::new(&mesh).unwrap();
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let phi = random_density(mesh.clone(), grid, 100 + seed);
        let trace = as_trace(&sys, sys.apply(&phi).unwrap());
        let h = h_tail_norm_with(&trace, 0.0, &riesz).unwrap();
        ratios.push(h.total / phi.l2_norm());
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo < 10.0, "c1 samples {ratios:?}");
}
