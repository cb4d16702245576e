use std::sync::Arc;

use rayon::prelude::*;

use super::fields::{InitialField, SourceField};
use super::volume::{eval_initial_potential_with, eval_volume_potential_with, Evaluation, PotentialOptions};
use crate::boundary_space::BoundaryTrace;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, MultiIndex, Point3, Vec3};
use crate::kernels::Mat3;

/// What to sample besides the values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceContent {
    pub gradients: bool,
    pub dt: bool,
}

impl TraceContent {
    pub const VALUES: TraceContent = TraceContent { gradients: false, dt: false };
    pub const ALL: TraceContent = TraceContent { gradients: true, dt: true };
}

struct Sample {
    value: Evaluation,
    gradient: [Evaluation; 3],
    dt: Option<Evaluation>,
}

fn blank() -> Evaluation {
    Evaluation { value: Vec3::zeros(), difference: 0.0, converged: true }
}

/// Checks the self-convergence of one channel in the sup norm over the
/// whole trace: every change must stay below `tolerance · max |value|`.
fn check_channel<'a>(
    what: &str,
    evals: impl Iterator<Item = (&'a Evaluation, usize)> + Clone,
    times: &[f64],
    mesh: &BoundaryMesh,
    tolerance: f64,
) -> Result<()> {
    let scale = evals.clone().fold(0.0f64, |m, (e, _)| m.max(e.value.norm()));
    let n = mesh.len();
    for (e, idx) in evals {
        let change = e.difference * e.value.norm();
        if !e.converged && change > tolerance * scale {
            return Err(Error::Quadrature(format!(
                "{what} at {:?}, t = {}: refinement changed the value by {:.2e} of the trace maximum",
                mesh.nodes[idx % n].as_slice(),
                times[idx / n],
                change / scale
            )));
        }
    }
    Ok(())
}

fn sample_trace(
    mesh: Arc<BoundaryMesh>,
    times: &[f64],
    content: TraceContent,
    provenance: &str,
    tolerance: f64,
    dt_available: impl Fn(f64) -> bool + Sync,
    eval: impl Fn(&Point3, f64, MultiIndex) -> Result<Evaluation> + Sync,
) -> Result<BoundaryTrace> {
    let n = mesh.len();
    let samples: Vec<Sample> = (0..times.len() * n)
        .into_par_iter()
        .map(|idx| {
            let (t, x) = (times[idx / n], mesh.nodes[idx % n]);
            let value = eval(&x, t, MultiIndex::ZERO)?;
            let mut gradient = [blank(); 3];
            if content.gradients {
                for (j, g) in gradient.iter_mut().enumerate() {
                    *g = eval(&x, t, MultiIndex::dx(j))?;
                }
            }
            let dt = if content.dt && dt_available(t) { Some(eval(&x, t, MultiIndex::DT)?) } else { None };
            Ok(Sample { value, gradient, dt })
        })
        .collect::<Result<_>>()?;
    let indexed = || samples.iter().enumerate().map(|(i, s)| (s, i));
    check_channel(provenance, indexed().map(|(s, i)| (&s.value, i)), times, &mesh, tolerance)?;
    if content.gradients {
        for j in 0..3 {
            check_channel(provenance, indexed().map(move |(s, i)| (&s.gradient[j], i)), times, &mesh, tolerance)?;
        }
    }
    check_channel(provenance, indexed().filter_map(|(s, i)| s.dt.as_ref().map(|d| (d, i))), times, &mesh, tolerance)?;

    let values = samples.iter().map(|s| s.value.value).collect();
    let mut trace = BoundaryTrace::new(mesh.clone(), times.to_vec(), values, provenance)?;
    if content.gradients {
        let rows = |s: &Sample| {
            let mut m = Mat3::zeros();
            for (j, g) in s.gradient.iter().enumerate() {
                m.set_row(j, &g.value.transpose());
            }
            m
        };
        trace = trace.with_gradients(samples.iter().map(rows).collect())?;
    }
    if content.dt {
        // differences stand in where the time derivative is not available
        let differenced = if samples.iter().any(|s| s.dt.is_none()) { Some(trace.differenced_dt()?) } else { None };
        let dt =
            samples.iter().enumerate().map(|(i, s)| s.dt.map_or_else(|| differenced.as_ref().unwrap()[i], |d| d.value)).collect();
        trace = trace.with_dt(dt)?;
    }
    Ok(trace)
}

/// Samples `R(f)` at the mesh nodes; self-convergence is required in the
/// sup norm of each sampled channel. `∂_t` is evaluated past the source
/// horizon and differenced before it.
pub fn volume_potential_trace(
    f: &SourceField,
    mesh: Arc<BoundaryMesh>,
    times: &[f64],
    tau: f64,
    content: TraceContent,
    opts: &PotentialOptions,
) -> Result<BoundaryTrace> {
    let horizon = f.horizon();
    sample_trace(
        mesh,
        times,
        content,
        "volume potential",
        opts.tolerance,
        |t| horizon.is_some_and(|h| t > h),
        |x, t, d| eval_volume_potential_with(f, x, t, tau, d, opts),
    )
}

/// Samples `I(a)` at the mesh nodes.
pub fn initial_potential_trace(
    a: &InitialField,
    mesh: Arc<BoundaryMesh>,
    times: &[f64],
    tau: f64,
    content: TraceContent,
    opts: &PotentialOptions,
) -> Result<BoundaryTrace> {
    sample_trace(
        mesh,
        times,
        content,
        "initial potential",
        opts.tolerance,
        |_| true,
        |x, t, d| eval_initial_potential_with(a, x, t, tau, d, opts),
    )
}
