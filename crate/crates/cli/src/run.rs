use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use oseen_core::boundary_space::{half_derivative, BoundaryTrace};
use oseen_core::decay_lab::Field;
use oseen_core::decay_lab::{
    epsilon_grid, fit_spatial_decay, fit_temporal_decay, geometric_times, initial_rate, predict_linear_rates,
    predict_nonlinear_rates, verify_exponent_sums, volume_rate, DecayExperiment, DecayFit, FieldProbe, FitCheck, RateInputs,
};
use oseen_core::geometry::{build_boundary_mesh, Shape, Vec3};
use oseen_core::integral_equation::{density_tail_fit, DensityTail, SolveOptions};
use oseen_core::kernels::checks::kernel_identity_suite;
use oseen_core::potentials::{convolution_scaling_probe, ProbeParams, SourceField, Window};
use oseen_core::solver::{boundary_trace, eval_boundary_velocity, solve_ibvp_with, SolutionHandle};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, FieldKind, RunConfig, TemporalFit, Violation};
use crate::summary::{ExperimentFailure, Summary, SummaryRow};

#[derive(Debug)]
pub enum RunError {
    Invalid(Vec<Violation>),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(v) => {
                for x in v {
                    writeln!(f, "{x}")?;
                }
                Ok(())
            }
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub struct RunOutcome {
    pub summary: Summary,
    pub output: PathBuf,
}

pub const SOLUTION_DIR: &str = "solution";

type Rows = Result<Vec<SummaryRow>, String>;

struct Context<'a> {
    config: &'a RunConfig,
    out: PathBuf,
    solution: Option<Result<SolutionHandle, String>>,
}

/// Validates, solves the problem once when an experiment needs it, runs the
/// experiments on `workers` threads and writes `summary.json`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(RunError::Invalid(violations));
    }
    let out = config.resolved_output();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.json"), to_json(config)?)?;

    let solution = config.experiments.iter().any(Experiment::needs_solution).then(|| solve(config, &out));
    let ctx = Context { config, out: out.clone(), solution };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(std::io::Error::other)?;
    let results: Vec<(String, Rows)> = pool.install(|| {
        config
            .experiments
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                let name = format!("{i}:{}", e.kind());
                info!("running {name}");
                let rows = run_one(&ctx, i, e, &name);
                (name, rows)
            })
            .collect()
    });

    let mut summary = Summary::new(config.seed);
    for (name, rows) in results {
        match rows {
            Ok(r) => summary.rows.extend(r),
            Err(error) => summary.failures.push(ExperimentFailure { experiment: name, error }),
        }
    }
    summary.write(&out)?;
    Ok(RunOutcome { summary, output: out })
}

fn to_json<T: Serialize>(v: &T) -> std::io::Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(std::io::Error::other)
}

fn solve(config: &RunConfig, out: &Path) -> Result<SolutionHandle, String> {
    let dir = out.join(SOLUTION_DIR);
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let every = config.experiments.iter().find_map(|e| match e {
        Experiment::Solve { checkpoint_every, .. } => *checkpoint_every,
        _ => None,
    });
    let opts = SolveOptions {
        strict_flux: config.problem.strict_flux,
        checkpoint: every.map(|_| dir.join("density.partial.txt")),
        checkpoint_every: every.unwrap_or(10),
        ..Default::default()
    };
    let handle = solve_ibvp_with(&config.problem, &opts).map_err(|e| e.to_string())?;
    handle.save(&dir).map_err(|e| e.to_string())?;
    Ok(handle)
}

fn row(
    experiment: &str,
    check: impl Into<String>,
    reference: &str,
    predicted: Option<f64>,
    measured: Option<f64>,
    pass: bool,
) -> SummaryRow {
    SummaryRow { experiment: experiment.into(), check: check.into(), reference: reference.into(), predicted, measured, pass }
}

fn run_one(ctx: &Context, index: usize, e: &Experiment, name: &str) -> Rows {
    let dir = ctx.out.join(format!("{index:02}-{}", e.kind()));
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = ctx.config;
    match e {
        Experiment::KernelCheck {} => {
            let checks = kernel_identity_suite(cfg.problem.tau, cfg.tolerances.kernel, cfg.seed.wrapping_add(index as u64))
                .map_err(|e| e.to_string())?;
            write(&dir.join("checks.json"), &checks)?;
            Ok(checks.iter().map(|c| row(name, &c.name, &c.tag, None, Some(c.worst), c.pass)).collect())
        }
        Experiment::PotentialsCheck {} => potentials_check(&dir, name),
        Experiment::Solve { tail_times, .. } => {
            let h = solution(ctx)?;
            solve_rows(cfg, h, tail_times, &dir, name)
        }
        Experiment::DecayFit { field, order, enclosing_radius, rays, temporal } => {
            let p = &cfg.problem;
            let probe: Box<dyn FieldProbe + '_> = match field {
                FieldKind::Velocity => Box::new(Field::Velocity(solution(ctx)?)),
                FieldKind::Volume => Box::new(Field::Volume { source: &p.source, tau: p.tau, options: p.potentials }),
                FieldKind::Initial => Box::new(Field::Initial { initial: &p.initial, tau: p.tau, options: p.potentials }),
            };
            decay_rows(cfg, probe.as_ref(), *field, *order, *enclosing_radius, rays, temporal.as_ref(), &dir, name)
        }
        Experiment::Rates {} => rate_rows(&cfg.rates, &dir, name),
        Experiment::ExponentSums { grid } => {
            let report = verify_exponent_sums(&epsilon_grid(*grid)).map_err(|e| e.to_string())?;
            write(&dir.join("exponent_sums.json"), &report)?;
            let bad = report.counterexamples.len();
            Ok(vec![row(name, format!("exponent sums over {grid} values"), "Lem110", Some(0.0), Some(bad as f64), bad == 0)])
        }
    }
}

fn solution<'a>(ctx: &'a Context) -> Result<&'a SolutionHandle, String> {
    match &ctx.solution {
        Some(Ok(h)) => Ok(h),
        Some(Err(e)) => Err(format!("solve failed: {e}")),
        None => Err("no solution was computed".into()),
    }
}

fn write<T: Serialize>(path: &Path, v: &T) -> Result<(), String> {
    fs::write(path, to_json(v).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

/// The solve is direct, so its residual is the part of the data outside the
/// range of the discrete operator; it is held to the flux tolerance.
fn residual_limit() -> f64 {
    SolveOptions::default().flux_tolerance
}
/// Boundary condition mismatch, relative to the largest data value.
const BOUNDARY_LIMIT: f64 = 0.02;

fn solve_rows(cfg: &RunConfig, h: &SolutionHandle, tail_times: &[f64], dir: &Path, name: &str) -> Rows {
    let report = &h.report;
    write(&dir.join("report.json"), report)?;
    // a resumed solve only measures the slabs it solved itself
    let d = &report.density;
    let solved = d.flux_violations.len() - d.resumed_slabs;
    let mut rows = vec![if solved > 0 {
        let check = format!("density solve residual over {solved} slabs");
        row(name, check, "Thm1040", None, Some(d.residual), d.residual <= residual_limit())
    } else {
        row(name, "density solve residual (all slabs resumed)", "Thm1040", None, None, true)
    }];
    // u = b on the boundary at a spread of nodes and slab times
    let mesh = h.density.mesh.clone();
    let grid = h.density.grid;
    let b = boundary_trace(&h.spec, mesh.clone(), grid).map_err(|e| e.to_string())?;
    let b_max = b.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let latest = h.latest_time();
    let mut worst = 0.0f64;
    for (m, &t) in b.times.iter().enumerate().filter(|(_, &t)| t <= latest).step_by(3) {
        for node in (0..mesh.len()).step_by(7) {
            let u = eval_boundary_velocity(h, node, t).map_err(|e| e.to_string())?;
            worst = worst.max((u - b.slice(m)[node]).norm());
        }
    }
    if b_max > 0.0 {
        let rel = worst / b_max;
        rows.push(row(name, "boundary condition mismatch", "Thm1060", None, Some(rel), rel <= BOUNDARY_LIMIT));
    }
    if let (Some(tail), false) = (h.spec.boundary_tail, tail_times.is_empty()) {
        let fit = density_tail_fit(&h.density, tail_times, tail.zeta).map_err(|e| e.to_string())?;
        write(&dir.join("density_tail.json"), &fit)?;
        match fit {
            DensityTail::ZeroDensity => {
                rows.push(row(name, "density tail (zero density)", "Thm310", Some(-tail.zeta), None, true))
            }
            DensityTail::Fit { fit, .. } => {
                let tol = cfg.tolerances.density_tail;
                let pass = DecayFit::verdict(fit.slope, -tail.zeta, tol, FitCheck::Bound);
                rows.push(row(name, "density tail slope", "Thm310", Some(-tail.zeta), Some(fit.slope), pass));
            }
        }
    }
    Ok(rows)
}

fn save_experiment(dir: &Path, stem: &str, e: &DecayExperiment) -> Result<(), String> {
    let csv = fs::File::create(dir.join(format!("{stem}.csv"))).map_err(|e| e.to_string())?;
    e.write_csv(csv).map_err(|e| e.to_string())?;
    fs::write(dir.join(format!("{stem}.json")), e.fit_json().map_err(|e| e.to_string())? + "\n").map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn decay_rows(
    cfg: &RunConfig,
    probe: &dyn FieldProbe,
    field: FieldKind,
    order: u8,
    enclosing: f64,
    rays: &[oseen_core::decay_lab::RaySpec],
    temporal: Option<&TemporalFit>,
    dir: &Path,
    name: &str,
) -> Rows {
    let mut rows = Vec::new();
    for (j, ray) in rays.iter().enumerate() {
        let fits = fit_spatial_decay(probe, order, ray, enclosing, cfg.tolerances.spatial).map_err(|e| e.to_string())?;
        for (k, e) in fits.iter().enumerate() {
            save_experiment(dir, &format!("ray{j}-t{k}"), e)?;
            rows.push(row(name, &e.label, "Eq130", Some(e.fit.predicted_exponent), Some(e.fit.slope), e.fit.pass));
        }
    }
    if let Some(tf) = temporal {
        let (predicted, tag) = match field {
            FieldKind::Initial => (tf.predicted.unwrap_or(initial_rate(1.0, order, 0)), "Lem1090"),
            FieldKind::Volume => (tf.predicted.unwrap_or(volume_rate(1.0, 1.0, order, 0)), "Lem610"),
            FieldKind::Velocity => (tf.predicted.ok_or("temporal fit of the velocity needs a predicted exponent")?, "Cor820"),
        };
        let times = geometric_times(tf.t_min, tf.t_max, tf.count);
        let e = fit_temporal_decay(probe, order, &tf.target, &times, predicted, cfg.tolerances.temporal)
            .map_err(|e| e.to_string())?;
        save_experiment(dir, "temporal", &e)?;
        rows.push(row(name, &e.label, tag, Some(predicted), Some(e.fit.slope), e.fit.pass));
    }
    Ok(rows)
}

fn rate_rows(inputs: &RateInputs, dir: &Path, name: &str) -> Rows {
    let (rho1, rho2) = predict_linear_rates(inputs).map_err(|e| e.to_string())?;
    let nl = predict_nonlinear_rates(inputs).map_err(|e| e.to_string())?;
    let mut rows = vec![
        row(name, "linear far-field rate", "Thm810", None, Some(rho1), true),
        row(name, "linear interpolated rate", "Thm810", None, Some(rho2), true),
        row(name, "nonlinear far-field rate", "Thm850", None, Some(nl.first), true),
        row(name, "nonlinear interpolated rate", "Thm850", None, Some(nl.second), true),
        row(name, "nonlinear far-field limit", "Thm850", None, Some(nl.limit_first), true),
        row(name, "nonlinear interpolated limit", "Thm850", None, Some(nl.limit_second), true),
    ];
    let mut regime = Vec::new();
    for alpha in [0u8, 1] {
        let c = RateInputs::compact_support(0.5, alpha).map_err(|e| e.to_string())?;
        let (r1, r2) = predict_linear_rates(&c).map_err(|e| e.to_string())?;
        let want = 1.0 + alpha as f64 / 2.0;
        rows.push(row(
            name,
            format!("compact data rates, |alpha| = {alpha}"),
            "Cor820",
            Some(want),
            Some(r2),
            r1 == 0.5 && r2 == want,
        ));
        regime.push((c, r1, r2));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        inputs: &'a RateInputs,
        rho: (f64, f64),
        nonlinear: oseen_core::decay_lab::NonlinearRates,
        compact_support: Vec<(RateInputs, f64, f64)>,
    }
    write(&dir.join("rates.json"), &Out { inputs, rho: (rho1, rho2), nonlinear: nl, compact_support: regime })?;
    Ok(rows)
}

/// Half derivative of constants and of `r²` composed with itself, and the
/// three convolution scaling probes.
fn potentials_check(dir: &Path, name: &str) -> Rows {
    let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 0).map_err(|e| e.to_string())?);
    let n = mesh.len();
    let scalar = |times: &[f64], f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64| -> Result<BoundaryTrace, String> {
        let rep =
            |g: &dyn Fn(f64) -> f64| times.iter().flat_map(|&t| std::iter::repeat_n(Vec3::new(g(t), 0.0, 0.0), n)).collect();
        BoundaryTrace::new(mesh.clone(), times.to_vec(), rep(f), "signal")
            .and_then(|tr| tr.with_dt(rep(df)))
            .map_err(|e| e.to_string())
    };
    let mut rows = Vec::new();

    let times: Vec<f64> = (1..=400).map(|k| 0.25 * k as f64).collect();
    let one = scalar(&times, &|_| 1.0, &|_| 0.0)?;
    let mut worst = 0.0f64;
    for t in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        let v = half_derivative(&one, 0.0, t).map_err(|e| e.to_string())?;
        worst = worst.max((v[0][0] * (std::f64::consts::PI * t).sqrt() - 1.0).abs());
    }
    rows.push(row(name, "half derivative of a constant", "Sec3", None, Some(worst), worst <= 1e-3));

    let fine: Vec<f64> = (1..=400).map(|k| 0.01 * k as f64).collect();
    let sq = scalar(&fine, &|r| r * r, &|r| 2.0 * r)?;
    let halves: Vec<Vec3> =
        fine.iter().map(|&t| half_derivative(&sq, 0.0, t).map(|v| v[0])).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let values = halves.iter().flat_map(|v| std::iter::repeat_n(*v, n)).collect();
    let half = BoundaryTrace::new(mesh.clone(), fine.clone(), values, "half").map_err(|e| e.to_string())?;
    let half = half.differenced_dt().and_then(|dt| half.with_dt(dt)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for t in [1.0, 2.0, 3.0, 4.0] {
        let v = half_derivative(&half, 0.5 * t, t).map_err(|e| e.to_string())?[0][0];
        worst = worst.max((v / (2.0 * t) - 1.0).abs());
    }
    rows.push(row(name, "half of half derivative of r^2", "Sec3", None, Some(worst), worst <= 0.01));

    let h = SourceField::CompactBump { center: [0.0; 3], radius: 1.0, horizon: 1.0, amplitude: [1.0, 0.0, 0.0] };
    let sets = [
        ProbeParams::new(4.0, 4.0, f64::INFINITY, [0; 3], Window::Below),
        ProbeParams::new(1.0, 1.0, f64::INFINITY, [1, 0, 0], Window::Above),
        ProbeParams::new(1.0, 1.0, f64::INFINITY, [0; 3], Window::Below),
    ];
    let mut probes = Vec::new();
    for p in sets {
        let label = format!("convolution scaling q={} s={} |alpha|={} {:?}", p.q, p.s, p.alpha.iter().sum::<u8>(), p.window);
        match (convolution_scaling_probe(&p, &h), p.validate().is_ok()) {
            (Ok(r), _) => {
                rows.push(row(name, label, "Thm430", Some(r.theorem_exponent), Some(r.measured_exponent), r.pass));
                probes.push(Some(r));
            }
            // an inadmissible window must be rejected
            (Err(_), false) => {
                rows.push(row(name, label + " (rejected)", "Thm430", Some(p.exponent()), None, true));
                probes.push(None);
            }
            (Err(e), true) => return Err(e.to_string()),
        }
    }
    write(&dir.join("scaling_probes.json"), &probes)?;
    Ok(rows)
}
