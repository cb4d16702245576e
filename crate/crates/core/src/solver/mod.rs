//! Initial-boundary value problems through the potential representation
//! `u = R(f) + I(a) + V(φ)` with `V(φ)|∂Ω = b - R(f) - I(a)`.

mod handle;

use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use crate::boundary_space::BoundaryTrace;
use crate::error::{invalid, Error, Result};
use crate::geometry::{build_boundary_mesh, BoundaryMesh, Shape, Vec3};
use crate::integral_equation::manufactured::{
    sphere_reference_trace, ReferenceOrders, SeparableDensity, SpatialProfile, TemporalProfile,
};
use crate::integral_equation::{assemble_with, solve_density_with, AssembleOptions, DensitySolveReport, SolveOptions};
use crate::potentials::{
    initial_potential_trace, volume_potential_trace, InitialField, PotentialOptions, SourceField, TimeGrid, TraceContent,
};

pub use handle::{eval_boundary_velocity, eval_velocity, eval_velocity_parts, SolutionHandle, VelocityParts, GUARD_FRACTION};

/// Prescribed boundary velocity `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryData {
    Zero,
    /// `b(y, t) = Σ g_c(y) ρ_c(t)`.
    Separable {
        terms: Vec<(SpatialProfile, TemporalProfile)>,
    },
    /// The trace of `V(φ*)` for a manufactured density, from the
    /// independent unit-sphere reference quadrature.
    SingleLayerOf {
        density: SeparableDensity,
    },
    /// The trace of `I(a)` for the problem's own initial field.
    InitialTrace,
}

/// Declared tail bound `‖b|S_{T,∞}‖ ≤ δ T^{-ζ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub tau: f64,
    pub source: SourceField,
    pub initial: InitialField,
    pub boundary: BoundaryData,
    #[serde(default)]
    pub boundary_tail: Option<TailRate>,
    pub shape: Shape,
    pub mesh_level: u32,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub potentials: PotentialOptions,
    #[serde(default)]
    pub tikhonov: f64,
    #[serde(default)]
    pub strict_flux: bool,
}

impl ProblemSpec {
    /// A problem with zero data on the unit sphere.
    pub fn zero(tau: f64, mesh_level: u32, dt: f64, horizon: f64) -> Self {
        Self {
            tau,
            source: SourceField::Superposition { parts: vec![] },
            initial: InitialField::Superposition { parts: vec![] },
            boundary: BoundaryData::Zero,
            boundary_tail: None,
            shape: Shape::UnitSphere,
            mesh_level,
            dt,
            horizon,
            potentials: PotentialOptions::default(),
            tikhonov: 0.0,
            strict_flux: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return invalid(format!("Reynolds number must be non-negative, got {}", self.tau));
        }
        self.shape.validate()?;
        self.source.validate()?;
        self.initial.validate()?;
        if !self.source.decay_conditions_hold() {
            return Err(Error::Domain("wake-decaying source needs A + min{1,B} > 3 and A + B >= 7/2".into()));
        }
        self.grid()?;
        if !(self.horizon >= 2.0 * self.dt) {
            return invalid("horizon must span at least two time steps");
        }
        if let Some(TailRate { zeta, delta }) = self.boundary_tail {
            if !(zeta > 0.0) || !(delta >= 0.0) {
                return invalid("declared boundary tail needs ζ > 0 and δ >= 0");
            }
        }
        if let BoundaryData::SingleLayerOf { .. } = self.boundary {
            if self.shape != Shape::UnitSphere {
                return invalid("manufactured single-layer data is only available on the unit sphere");
            }
        }
        if !(self.tikhonov >= 0.0) {
            return invalid("Tikhonov weight must be non-negative");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_horizon(self.dt, self.horizon)
    }

    pub fn mesh(&self) -> Result<Arc<BoundaryMesh>> {
        Ok(Arc::new(build_boundary_mesh(self.shape, self.mesh_level)?))
    }
}

/// `b` at the mesh nodes and the slab collocation times.
pub fn boundary_trace(spec: &ProblemSpec, mesh: Arc<BoundaryMesh>, grid: TimeGrid) -> Result<BoundaryTrace> {
    let times = grid.collocation_times();
    match &spec.boundary {
        BoundaryData::Zero => BoundaryTrace::zeros(mesh, times, "boundary data"),
        BoundaryData::Separable { terms } => {
            let values = times
                .iter()
                .flat_map(|&t| mesh.nodes.iter().map(move |y| terms.iter().map(|(g, r)| g.eval(y) * r.eval(t)).sum::<Vec3>()))
                .collect();
            BoundaryTrace::new(mesh.clone(), times, values, "boundary data")
        }
        BoundaryData::SingleLayerOf { density } => {
            sphere_reference_trace(mesh, grid, spec.tau, density, ReferenceOrders::default())
        }
        BoundaryData::InitialTrace => {
            initial_potential_trace(&spec.initial, mesh, &times, spec.tau, TraceContent::VALUES, &spec.potentials)
        }
    }
}

/// Sizes of the pieces of the right-hand side `b̃ = b - R(f) - I(a)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RhsNorms {
    pub volume: f64,
    pub initial: f64,
    pub boundary: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IbvpReport {
    pub rhs: RhsNorms,
    pub density: DensitySolveReport,
}

/// Traces of `R(f)` and `I(a)`, the right-hand side, and the density solve.
pub fn solve_ibvp(spec: &ProblemSpec) -> Result<SolutionHandle> {
    solve_ibvp_with(spec, &SolveOptions { strict_flux: spec.strict_flux, ..Default::default() })
}

pub fn solve_ibvp_with(spec: &ProblemSpec, opts: &SolveOptions) -> Result<SolutionHandle> {
    spec.validate()?;
    let mesh = spec.mesh()?;
    let grid = spec.grid()?;
    let times = grid.collocation_times();
    let started = std::time::Instant::now();
    let volume = volume_potential_trace(&spec.source, mesh.clone(), &times, spec.tau, TraceContent::VALUES, &spec.potentials)?;
    let initial = initial_potential_trace(&spec.initial, mesh.clone(), &times, spec.tau, TraceContent::VALUES, &spec.potentials)?;
    let b = match spec.boundary {
        BoundaryData::InitialTrace => initial.clone(),
        _ => boundary_trace(spec, mesh.clone(), grid)?,
    };
    let rhs = b.axpy(-1.0, &volume)?.axpy(-1.0, &initial)?;
    let rhs_norms = RhsNorms {
        volume: volume.discrete_norm(),
        initial: initial.discrete_norm(),
        boundary: b.discrete_norm(),
        total: rhs.discrete_norm(),
    };
    info!("right-hand side traces in {:.1?}", started.elapsed());
    let system = assemble_with(mesh, grid, spec.tau, AssembleOptions { tikhonov: spec.tikhonov })?;
    let (density, report) = solve_density_with(&system, &rhs, opts)?;
    Ok(SolutionHandle { spec: spec.clone(), density, report: IbvpReport { rhs: rhs_norms, density: report } })
}
