//! Manufactured densities and an independent reference evaluation of their
//! single-layer trace on the unit sphere.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_space::{project_zero_flux, BoundaryTrace};
use crate::error::{invalid, Result};
use crate::geometry::{BoundaryMesh, Point3, Shape, Vec3};
use crate::kernels::oseen_sym;
use crate::potentials::{SurfaceDensity, TimeGrid};
use crate::quadrature::gauss;

/// Smooth vector field on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpatialProfile {
    /// Constant vector; zero flux on any closed surface.
    Uniform { c: [f64; 3] },
    /// `axis × y`; tangential on spheres.
    Rotation { axis: [f64; 3] },
    /// `y_i y_j dir` with `i != j`; zero flux on the unit sphere.
    Saddle { i: usize, j: usize, dir: [f64; 3] },
}

impl SpatialProfile {
    pub fn eval(&self, y: &Point3) -> Vec3 {
        match self {
            SpatialProfile::Uniform { c } => Vec3::from(*c),
            SpatialProfile::Rotation { axis } => Vec3::from(*axis).cross(y),
            SpatialProfile::Saddle { i, j, dir } => y[*i] * y[*j] * Vec3::from(*dir),
        }
    }
}

/// Scalar time profile, zero for `σ <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TemporalProfile {
    /// Cubic smoothstep from 0 at `σ = 0` to 1 at `σ = rise`.
    Ramp { rise: f64 },
    /// `σ^power e^{-rate σ}`.
    PolyExp { power: i32, rate: f64 },
    /// Ramp times `(1 + σ)^{-exponent}`.
    RampDecay { rise: f64, exponent: f64 },
}

fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

impl TemporalProfile {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            TemporalProfile::Ramp { rise } => smoothstep(s / rise),
            TemporalProfile::PolyExp { power, rate } => s.powi(power) * (-rate * s).exp(),
            TemporalProfile::RampDecay { rise, exponent } => smoothstep(s / rise) * (1.0 + s).powf(-exponent),
        }
    }

    /// Points where the profile is not smooth; the reference quadrature
    /// needs them on slab boundaries.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            TemporalProfile::Ramp { rise } | TemporalProfile::RampDecay { rise, .. } => vec![0.0, rise],
            TemporalProfile::PolyExp { .. } => vec![0.0],
        }
    }
}

/// `φ*(y, σ) = Σ g_c(y) ρ_c(σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableDensity {
    pub terms: Vec<(SpatialProfile, TemporalProfile)>,
}

/// How a continuous density is reduced to one value per slab.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlabSampling {
    Average,
    Midpoint,
    End,
}

impl SeparableDensity {
    /// The default smooth test density: a uniform stream, a rigid rotation
    /// and a saddle field with different time profiles.
    pub fn standard() -> Self {
        Self {
            terms: vec![
                (SpatialProfile::Uniform { c: [1.0, 0.0, 0.0] }, TemporalProfile::Ramp { rise: 1.0 }),
                (SpatialProfile::Rotation { axis: [0.0, 0.0, 0.5] }, TemporalProfile::PolyExp { power: 2, rate: 1.0 }),
                (SpatialProfile::Saddle { i: 0, j: 1, dir: [0.0, 0.0, 0.6] }, TemporalProfile::Ramp { rise: 2.0 }),
            ],
        }
    }

    pub fn eval(&self, y: &Point3, s: f64) -> Vec3 {
        self.terms.iter().map(|(g, r)| g.eval(y) * r.eval(s)).sum()
    }

    /// Samples onto `mesh` and `grid`, then removes the discrete flux.
    pub fn sample(&self, mesh: Arc<BoundaryMesh>, grid: TimeGrid, how: SlabSampling) -> SurfaceDensity {
        let g = gauss(8);
        let m2 = mesh.clone();
        let d = SurfaceDensity::from_fn(mesh, grid, |i, k| {
            let y = m2.nodes[i];
            let (a, b) = (grid.slab_start(k), grid.slab_start(k + 1));
            match how {
                SlabSampling::Average => {
                    let mut acc = Vec3::zeros();
                    for (s, w) in g.mapped(a, b) {
                        acc += w * self.eval(&y, s);
                    }
                    acc / grid.dt
                }
                SlabSampling::Midpoint => self.eval(&y, 0.5 * (a + b)),
                SlabSampling::End => self.eval(&y, b),
            }
        });
        project_zero_flux(&d)
    }

    fn kinks(&self) -> Vec<f64> {
        self.terms.iter().flat_map(|t| t.1.kinks()).collect()
    }
}

/// Quadrature orders of the reference evaluation.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceOrders {
    pub polar: usize,
    pub azimuth: usize,
    pub time: usize,
    pub first_slab_panels: usize,
}

impl Default for ReferenceOrders {
    fn default() -> Self {
        Self { polar: 8, azimuth: 40, time: 6, first_slab_panels: 2 }
    }
}

/// Time nodes `(u, w)` for `∫_0^T k(u) du` where `k ~ u^{-1/2}` at zero:
/// the first slab uses `u = v²`, the others plain Gauss panels.
fn lag_nodes(grid: TimeGrid, orders: ReferenceOrders) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let g = gauss(orders.time + 2);
    let sq = grid.dt.sqrt();
    for p in 0..orders.first_slab_panels {
        let a = sq * p as f64 / orders.first_slab_panels as f64;
        let b = sq * (p + 1) as f64 / orders.first_slab_panels as f64;
        for (v, w) in g.mapped(a, b) {
            out.push((v * v, 2.0 * v * w));
        }
    }
    let g = gauss(orders.time);
    for k in 1..grid.n_slabs {
        for (u, w) in g.mapped(grid.slab_start(k), grid.slab_start(k + 1)) {
            out.push((u, w));
        }
    }
    out
}

/// `∫_{S²} Λ(x - y, u) g_c(y) do_y` for every profile, in spherical
/// coordinates centred at `x` with polar panels graded at scale `√u`.
fn sphere_kernel_moments(x: &Point3, u: f64, tau: f64, profiles: &[SpatialProfile], orders: ReferenceOrders) -> Vec<Vec3> {
    let ea = if x[0].abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let ea = (ea - x * x.dot(&ea)).normalize();
    let eb = x.cross(&ea);
    let g = gauss(orders.polar);
    let a0 = (0.5 * u.sqrt()).clamp(1e-5, PI / 8.0);
    let mut edges = vec![0.0, a0];
    while *edges.last().unwrap() < PI {
        let next = (2.0 * edges.last().unwrap()).min(PI);
        edges.push(if PI - next < 0.25 * next { PI } else { next });
    }
    let m = orders.azimuth;
    let (sin_p, cos_p): (Vec<f64>, Vec<f64>) = (0..m).map(|j| (2.0 * PI * j as f64 / m as f64).sin_cos()).unzip();
    let mut out = vec![Vec3::zeros(); profiles.len()];
    for w in edges.windows(2) {
        for (th, wt) in g.mapped(w[0], w[1]) {
            let (st, ct) = th.sin_cos();
            let wgt = wt * st * 2.0 * PI / m as f64;
            for j in 0..m {
                let y = ct * x + st * (cos_p[j] * ea + sin_p[j] * eb);
                let k = oseen_sym(&(x - y), u, tau);
                for (o, p) in out.iter_mut().zip(profiles) {
                    let v = p.eval(&y);
                    *o += wgt
                        * Vec3::new(
                            k[0] * v[0] + k[3] * v[1] + k[4] * v[2],
                            k[3] * v[0] + k[1] * v[1] + k[5] * v[2],
                            k[4] * v[0] + k[5] * v[1] + k[2] * v[2],
                        );
                }
            }
        }
    }
    out
}

/// Reference values of `V(φ*)` at the nodes of a unit-sphere mesh and the
/// slab end points of `grid`. The density is integrated exactly in its
/// continuous form (no spatial or temporal discretisation), so this is an
/// independent oracle for the discrete operator.
pub fn sphere_reference_trace(
    mesh: Arc<BoundaryMesh>,
    grid: TimeGrid,
    tau: f64,
    density: &SeparableDensity,
    orders: ReferenceOrders,
) -> Result<BoundaryTrace> {
    if mesh.shape != Shape::UnitSphere {
        return invalid("the reference single layer is only available on the unit sphere");
    }
    for k in density.kinks() {
        let r = k / grid.dt;
        if (r - r.round()).abs() > 1e-9 {
            return invalid(format!("time profile kink at {k} is not on a slab boundary"));
        }
    }
    let lags = lag_nodes(grid, orders);
    let profiles: Vec<SpatialProfile> = density.terms.iter().map(|t| t.0.clone()).collect();
    let n = mesh.len();
    let times = grid.collocation_times();
    let per_node: Vec<Vec<Vec3>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = mesh.nodes[i];
            let moments: Vec<Vec<Vec3>> =
                lags.iter().map(|&(u, _)| sphere_kernel_moments(&x, u, tau, &profiles, orders)).collect();
            times
                .iter()
                .map(|&t| {
                    let mut acc = Vec3::zeros();
                    for ((u, w), mom) in lags.iter().zip(&moments) {
                        if *u >= t {
                            break;
                        }
                        for (c, term) in density.terms.iter().enumerate() {
                            acc += (w * term.1.eval(t - u)) * mom[c];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut values = vec![Vec3::zeros(); n * times.len()];
    for (i, col) in per_node.into_iter().enumerate() {
        for (m, v) in col.into_iter().enumerate() {
            values[m * n + i] = v;
        }
    }
    BoundaryTrace::new(mesh, times, values, "reference single layer")
}
