use std::f64::consts::PI;
use std::sync::Arc;

use oseen_core::boundary_space::*;
use oseen_core::geometry::{build_boundary_mesh, BoundaryMesh, Shape, Vec3};
use oseen_core::kernels::Mat3;
use rand::{Rng, SeedableRng};

fn sphere(level: u32) -> Arc<BoundaryMesh> {
    Arc::new(build_boundary_mesh(Shape::UnitSphere, level).unwrap())
}

/// The same scalar signal at every node, in the first component.
fn signal_trace(times: &[f64], f: impl Fn(f64) -> f64, df: Option<&dyn Fn(f64) -> f64>) -> BoundaryTrace {
    let mesh = sphere(0);
    let n = mesh.len();
    let values = times.iter().flat_map(|&t| std::iter::repeat_n(Vec3::new(f(t), 0.0, 0.0), n)).collect();
    let tr = BoundaryTrace::new(mesh, times.to_vec(), values, "test signal").unwrap();
    match df {
        Some(d) => {
            let dv = times.iter().flat_map(|&t| std::iter::repeat_n(Vec3::new(d(t), 0.0, 0.0), n)).collect();
            tr.with_dt(dv).unwrap()
        }
        None => tr,
    }
}

fn uniform(h: f64, end: f64) -> Vec<f64> {
    (1..=(end / h).round() as usize).map(|k| k as f64 * h).collect()
}

#[test]
fn half_derivative_of_constants_zero_and_ramps() {
    let times = uniform(0.25, 100.0);
    let one = signal_trace(&times, |_| 1.0, Some(&|_| 0.0));
    let ramp = signal_trace(&times, |r| r, Some(&|_| 1.0));
    let zero = signal_trace(&times, |_| 0.0, Some(&|_| 0.0));
    for t in [1.0, 3.3, 10.0, 47.0, 100.0] {
        for lower in [0.0, 0.3 * t, 0.95 * t] {
            let c = half_derivative(&one, lower, t).unwrap();
            assert!(c.iter().all(|v| (v[0] * (PI * t).sqrt() - 1.0).abs() < 1e-3));
            let r = half_derivative(&ramp, lower, t).unwrap();
            assert!(r.iter().all(|v| (v[0] / (2.0 * (t / PI).sqrt()) - 1.0).abs() < 1e-3));
            assert!(half_derivative(&zero, lower, t).unwrap().iter().all(|v| *v == Vec3::zeros()));
        }
    }
}

#[test]
fn half_derivative_preconditions() {
    let times = uniform(0.5, 10.0);
    let no_dt = signal_trace(&times, |r| r, None);
    assert!(half_derivative(&no_dt, 2.0, 5.0).is_err());
    let ok = signal_trace(&times, |r| r, Some(&|_| 1.0));
    assert!(half_derivative(&ok, 5.0, 5.0).is_err());
    assert!(half_derivative(&ok, 5.0, 4.0).is_err());
}

#[test]
fn half_derivative_twice_is_the_first_derivative() {
    let times = uniform(0.01, 4.0);
    let sq = signal_trace(&times, |r| r * r, Some(&|r| 2.0 * r));
    let node0: Vec<Vec3> = times.iter().map(|&t| half_derivative(&sq, 0.0, t).unwrap()[0]).collect();
    let n = sq.n_nodes();
    let values = node0.iter().flat_map(|v| std::iter::repeat_n(*v, n)).collect();
    let half = BoundaryTrace::new(sq.mesh.clone(), times.clone(), values, "half").unwrap();
    let half = half.clone().with_dt(half.differenced_dt().unwrap()).unwrap();
    for t in [1.0, 2.0, 3.0, 4.0] {
        let v = half_derivative(&half, 0.5 * t, t).unwrap()[0][0];
        assert!((v / (2.0 * t) - 1.0).abs() < 0.01, "{t}: {v}");
    }
}

#[test]
fn h1_norm_of_constant_and_linear_fields() {
    for level in [2, 3] {
        let mesh = sphere(level);
        let riesz = RieszMap::new(&mesh).unwrap();
        let c = Vec3::new(1.0, -2.0, 0.5);
        let consts = vec![c; mesh.len()];
        let zero_grad = vec![Mat3::zeros(); mesh.len()];
        for g in [None, Some(zero_grad.as_slice())] {
            let n = h1_boundary_norm(&mesh, &riesz, &consts, g).unwrap();
            assert!((n / (c.norm() * (4.0 * PI).sqrt()) - 1.0).abs() < 1e-3);
        }
        // x1 in the first component: ambient gradient e1 ⊗ e1
        let x1: Vec<Vec3> = mesh.nodes.iter().map(|p| Vec3::new(p[0], 0.0, 0.0)).collect();
        let mut j = Mat3::zeros();
        j[(0, 0)] = 1.0;
        let grads = vec![j; mesh.len()];
        let exact = (4.0 * PI).sqrt();
        let from_grad = h1_boundary_norm(&mesh, &riesz, &x1, Some(&grads)).unwrap();
        assert!((from_grad / exact - 1.0).abs() < 0.01, "{from_grad}");
        if level == 3 {
            let from_stiffness = h1_boundary_norm(&mesh, &riesz, &x1, None).unwrap();
            assert!((from_stiffness / exact - 1.0).abs() < 0.01, "{from_stiffness}");
        }
        let scaled: Vec<Vec3> = x1.iter().map(|v| 3.5 * v).collect();
        let a = h1_boundary_norm(&mesh, &riesz, &x1, None).unwrap();
        let b = h1_boundary_norm(&mesh, &riesz, &scaled, None).unwrap();
        assert!((b - 3.5 * a).abs() <= 1e-14 * b);
    }
}

#[test]
fn dual_norm_examples() {
    let mesh = sphere(2);
    let riesz = RieszMap::new(&mesh).unwrap();
    assert_eq!(h1_dual_norm(&riesz, &vec![0.0; mesh.len()]).unwrap(), 0.0);
    let c = -1.7;
    let loads = riesz.loads(&vec![c; mesh.len()]).unwrap();
    let d = h1_dual_norm(&riesz, &loads).unwrap();
    assert!((d / (c.abs() * (4.0 * PI).sqrt()) - 1.0).abs() < 0.01);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let w: Vec<f64> = (0..mesh.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loads = riesz.loads(&w).unwrap();
        let dual = h1_dual_norm(&riesz, &loads).unwrap();
        let rep = riesz.riesz(&loads).unwrap();
        let f_rep: f64 = loads.iter().zip(&rep).map(|(a, b)| a * b).sum();
        assert!((f_rep - dual * dual).abs() < 1e-10 * dual * dual);
        let l2 = w.iter().zip(&mesh.weights).map(|(v, a)| a * v * v).sum::<f64>().sqrt();
        assert!(dual <= l2 * (1.0 + 1e-12));
    }
}

#[test]
fn norms_converge_under_refinement() {
    let field = |m: &BoundaryMesh| -> Vec<f64> { m.nodes.iter().map(|p| p[0] * p[1] + 0.5 * p[2]).collect() };
    let vals: Vec<(f64, f64)> = [2, 3]
        .iter()
        .map(|&l| {
            let mesh = sphere(l);
            let r = RieszMap::new(&mesh).unwrap();
            let f = field(&mesh);
            (r.norm(&f).unwrap(), r.dual_norm(&r.loads(&f).unwrap()).unwrap())
        })
        .collect();
    assert!((vals[0].0 / vals[1].0 - 1.0).abs() < 0.02);
    assert!((vals[0].1 / vals[1].1 - 1.0).abs() < 0.02);
}

/// A separable trace `g(y) e^{-r}`-like profile with algebraic tail.
fn decaying_trace(mesh: Arc<BoundaryMesh>, with_dt: bool) -> BoundaryTrace {
    let mut times = uniform(0.05, 2.0);
    let mut t = 2.0;
    while t < 400.0 {
        t *= 1.05;
        times.push(t);
    }
    let prof = |r: f64| r * r / (1.0 + r).powi(4);
    let dprof = |r: f64| 2.0 * r / (1.0 + r).powi(4) - 4.0 * r * r / (1.0 + r).powi(5);
    let g: Vec<Vec3> = mesh.nodes.iter().map(|p| Vec3::new(1.0 + p[0], p[1] * p[2], 0.3)).collect();
    let values = times.iter().flat_map(|&r| g.iter().map(move |v| prof(r) * v)).collect();
    let tr = BoundaryTrace::new(mesh, times.clone(), values, "separable").unwrap();
    if with_dt {
        let dv = times.iter().flat_map(|&r| g.iter().map(move |v| dprof(r) * v)).collect();
        tr.with_dt(dv).unwrap()
    } else {
        tr
    }
}

#[test]
fn tail_norm_structure() {
    let mesh = sphere(1);
    let riesz = RieszMap::new(&mesh).unwrap();
    let tr = decaying_trace(mesh.clone(), true);
    let zero = BoundaryTrace::zeros(mesh.clone(), tr.times.clone(), "zero").unwrap();
    assert_eq!(h_tail_norm_with(&zero, 4.0, &riesz).unwrap().total, 0.0);

    let mut last = f64::INFINITY;
    for lower in [2.0, 4.0, 8.0, 16.0, 32.0] {
        let t = tr.times[tr.times.partition_point(|&s| s < lower)];
        let h = h_tail_norm_with(&tr, t, &riesz).unwrap();
        let p = h.parts;
        let sum = p.h1 * p.h1 + p.half_derivative * p.half_derivative + p.normal_dt_dual * p.normal_dt_dual;
        assert!((h.total * h.total - sum).abs() <= 1e-12 * sum);
        assert!(h.total < last, "tail norm must not grow with T");
        assert!(h.tail_share < TAIL_SHARE, "{h:?}");
        assert!(!h.differenced_dt);
        last = h.total;
        let back: HTailNorm = serde_json::from_str(&h.to_json().unwrap()).unwrap();
        assert_eq!(back, h);
    }
    let differenced = h_tail_norm_with(&decaying_trace(mesh, false), 8.0, &riesz).unwrap();
    let exact = h_tail_norm_with(&tr, 8.0, &riesz).unwrap();
    assert!(differenced.differenced_dt);
    assert!((differenced.total / exact.total - 1.0).abs() < 0.01);
}

#[test]
fn non_decaying_tails_are_flagged() {
    let mesh = sphere(0);
    let times: Vec<f64> = (1..200).map(|k| k as f64).collect();
    let values = times.iter().flat_map(|_| std::iter::repeat_n(Vec3::new(1.0, 0.0, 0.0), mesh.len())).collect();
    let tr = BoundaryTrace::new(mesh, times, values, "constant").unwrap();
    assert!(h_tail_norm(&tr, 10.0).is_err());
}
