use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::{IbvpReport, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{MultiIndex, Point3, Vec3};
use crate::potentials::{
    eval_initial_potential_with, eval_single_layer, eval_volume_potential_with, Evaluation, SurfaceDensity, Target,
};

/// Evaluations are restricted to `t <= GUARD_FRACTION · T_h`.
pub const GUARD_FRACTION: f64 = 0.8;

const SPEC_FILE: &str = "problem.json";
const DENSITY_FILE: &str = "density.txt";
const REPORT_FILE: &str = "report.json";

/// The solved density together with the data it was solved for.
#[derive(Clone, Debug)]
pub struct SolutionHandle {
    pub spec: ProblemSpec,
    pub density: SurfaceDensity,
    pub report: IbvpReport,
}

impl SolutionHandle {
    pub fn latest_time(&self) -> f64 {
        GUARD_FRACTION * self.density.grid.horizon()
    }

    /// Writes `problem.json`, `density.txt` and `report.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SPEC_FILE), serde_json::to_string_pretty(&self.spec)?)?;
        self.density.write_text(BufWriter::new(fs::File::create(dir.join(DENSITY_FILE))?))?;
        fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&self.report)?)?;
        Ok(())
    }

    /// Reloads a saved solution; the mesh is rebuilt from the problem spec.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let spec: ProblemSpec = serde_json::from_str(&fs::read_to_string(dir.join(SPEC_FILE))?)?;
        spec.validate()?;
        let (density, slabs) = SurfaceDensity::read_text(spec.mesh()?, BufReader::new(fs::File::open(dir.join(DENSITY_FILE))?))?;
        if density.grid != spec.grid()? || slabs != density.grid.n_slabs {
            return invalid("stored density does not cover the time grid of the problem");
        }
        let report = serde_json::from_str(&fs::read_to_string(dir.join(REPORT_FILE))?)?;
        Ok(Self { spec, density: SurfaceDensity { zero_flux: true, ..density }, report })
    }
}

/// The three parts of `∂^α u(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityParts {
    pub volume: Evaluation,
    pub initial: Evaluation,
    pub layer: Vec3,
}

impl VelocityParts {
    pub fn total(&self) -> Vec3 {
        self.volume.value + self.initial.value + self.layer
    }

    pub fn converged(&self) -> bool {
        self.volume.converged && self.initial.converged
    }
}

fn check(h: &SolutionHandle, t: f64, d: MultiIndex) -> Result<()> {
    if d.l != 0 {
        return invalid("velocity evaluation supports spatial derivatives only");
    }
    if t > h.latest_time() * (1.0 + 1e-12) {
        return invalid(format!("t = {t} lies in the guard band beyond {}", h.latest_time()));
    }
    Ok(())
}

pub fn eval_velocity_parts(h: &SolutionHandle, x: &Point3, t: f64, d: MultiIndex) -> Result<VelocityParts> {
    check(h, t, d)?;
    if h.spec.shape.implicit(x) < -1e-12 {
        return invalid(format!("{:?} lies inside the obstacle", x.as_slice()));
    }
    let s = &h.spec;
    Ok(VelocityParts {
        volume: eval_volume_potential_with(&s.source, x, t, s.tau, d, &s.potentials)?,
        initial: eval_initial_potential_with(&s.initial, x, t, s.tau, d, &s.potentials)?,
        layer: eval_single_layer(&h.density, Target::Point(*x), t, s.tau, d)?,
    })
}

/// `∂^α u(x, t) = ∂^α (R(f) + I(a) + V(φ))(x, t)`; fails when a volume part
/// misses its self-convergence tolerance.
pub fn eval_velocity(h: &SolutionHandle, x: &Point3, t: f64, d: MultiIndex) -> Result<Vec3> {
    let parts = eval_velocity_parts(h, x, t, d)?;
    if !parts.converged() {
        let diff = parts.volume.difference.max(parts.initial.difference);
        return Err(Error::Quadrature(format!(
            "velocity at {:?}, t = {t}: refinement changed a volume part by {diff:.2e}",
            x.as_slice()
        )));
    }
    Ok(parts.total())
}

/// `u` at mesh node `node`, with the single layer taken as its on-surface
/// trace.
pub fn eval_boundary_velocity(h: &SolutionHandle, node: usize, t: f64) -> Result<Vec3> {
    check(h, t, MultiIndex::ZERO)?;
    let mesh = &h.density.mesh;
    let x = *mesh.nodes.get(node).ok_or_else(|| Error::InvalidArgument(format!("node {node} out of range")))?;
    let s = &h.spec;
    let volume = eval_volume_potential_with(&s.source, &x, t, s.tau, MultiIndex::ZERO, &s.potentials)?;
    let initial = eval_initial_potential_with(&s.initial, &x, t, s.tau, MultiIndex::ZERO, &s.potentials)?;
    Ok(volume.value + initial.value + eval_single_layer(&h.density, Target::Node(node), t, s.tau, MultiIndex::ZERO)?)
}
