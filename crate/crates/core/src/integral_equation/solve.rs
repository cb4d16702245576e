use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::system::VolterraSystem;
use crate::boundary_space::BoundaryTrace;
use crate::decay_lab::DecayFit;
use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::potentials::{slab_flux, SurfaceDensity};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Relative size of the flux-incompatible part of the data above which
    /// the solve fails in strict mode (and warns otherwise).
    pub flux_tolerance: f64,
    pub strict_flux: bool,
    /// Write the density every `checkpoint_every` slabs to this file and
    /// resume from it when it already holds a prefix of the solution.
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { flux_tolerance: 1e-3, strict_flux: false, checkpoint: None, checkpoint_every: 10 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DensitySolveReport {
    /// `‖Bφ - b̃‖ / ‖b̃‖` over all collocation points.
    pub residual: f64,
    /// `|Σ w n·φ|` per slab of the computed density.
    pub flux_violations: Vec<f64>,
    /// Relative flux-incompatible part of the data per slab (removed before
    /// the solve).
    pub data_incompatibility: Vec<f64>,
    /// L² size of the removed incompatible part over all slabs.
    pub incompatible_l2: f64,
    pub diagonal_condition: f64,
    pub resumed_slabs: usize,
    pub tail_fits: Vec<DecayFit>,
}

impl DensitySolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_data(system: &VolterraSystem, data: &BoundaryTrace) -> Result<()> {
    if data.n_nodes() != system.n_nodes() {
        return invalid("boundary data and system use different meshes");
    }
    let expect = system.grid.collocation_times();
    if data.times.len() != expect.len() || data.times.iter().zip(&expect).any(|(a, b)| (a - b).abs() > 1e-9 * b.max(1.0)) {
        return invalid("boundary data must be sampled at the slab end points of the system grid");
    }
    Ok(())
}

/// Forward block substitution for `B φ = b̃` with one zero-flux multiplier
/// per slab.
pub fn solve_density(system: &VolterraSystem, data: &BoundaryTrace) -> Result<(SurfaceDensity, DensitySolveReport)> {
    solve_density_with(system, data, &SolveOptions::default())
}

pub fn solve_density_with(
    system: &VolterraSystem,
    data: &BoundaryTrace,
    opts: &SolveOptions,
) -> Result<(SurfaceDensity, DensitySolveReport)> {
    check_data(system, data)?;
    let mesh = system.mesh.clone();
    let nn = mesh.len();
    let ns = system.grid.n_slabs;
    let area = mesh.area();
    let mut report = DensitySolveReport { diagonal_condition: system.diagonal_condition, ..Default::default() };

    // remove the flux-incompatible part of the data
    let mut rhs: Vec<Vec3> = data.values.clone();
    let mut removed2 = 0.0;
    for m in 0..ns {
        let slice = &mut rhs[m * nn..(m + 1) * nn];
        let norm = slice.iter().zip(&mesh.weights).map(|(v, w)| w * v.norm_squared()).sum::<f64>().sqrt();
        let c = slab_flux(&mesh, slice) / area;
        for (v, nrm) in slice.iter_mut().zip(&mesh.normals) {
            *v -= c * nrm;
        }
        let part = c.abs() * area.sqrt();
        removed2 += part * part;
        report.data_incompatibility.push(if norm > 0.0 { part / norm } else { 0.0 });
    }
    report.incompatible_l2 = removed2.sqrt();
    let worst = report.data_incompatibility.iter().copied().fold(0.0, f64::max);
    if worst > opts.flux_tolerance {
        if opts.strict_flux {
            return Err(Error::FluxIncompatible(worst, opts.flux_tolerance));
        }
        warn!("boundary data flux incompatibility {worst:.3e} removed before the solve");
    }
    let target = rhs.clone();

    let mut phi = SurfaceDensity::zeros(mesh.clone(), system.grid);
    let mut start = 0;
    if let Some(path) = &opts.checkpoint {
        if path.exists() {
            let (loaded, done) = SurfaceDensity::read_text(mesh.clone(), BufReader::new(fs::File::open(path)?))?;
            if loaded.grid == system.grid {
                start = done.min(ns);
                phi = loaded;
                for k in start..ns {
                    phi.slab_mut(k).iter_mut().for_each(|v| *v = Vec3::zeros());
                }
                info!("resuming density solve at slab {start}");
            }
        }
    }
    report.resumed_slabs = start;
    // history of the already known slabs
    for k in 0..start {
        let neg: Vec<Vec3> = phi.slab(k).iter().map(|v| -v).collect();
        for m in start..ns {
            system.apply_lag_add(m - k, &neg, &mut rhs[m * nn..(m + 1) * nn]);
        }
    }

    let mut res2 = 0.0;
    let mut ref2 = 0.0;
    for m in start..ns {
        let (slab, mult) = system.solve_diagonal(&rhs[m * nn..(m + 1) * nn])?;
        phi.slab_mut(m).copy_from_slice(&slab);
        // the residual of slab m is the multiplier direction
        let r = mult.abs() * area.sqrt();
        res2 += r * r;
        let neg: Vec<Vec3> = slab.iter().map(|v| -v).collect();
        for later in m + 1..ns {
            system.apply_lag_add(later - m, &neg, &mut rhs[later * nn..(later + 1) * nn]);
        }
        if let Some(path) = &opts.checkpoint {
            if (m + 1) % opts.checkpoint_every.max(1) == 0 || m + 1 == ns {
                write_checkpoint(&phi, path, m + 1)?;
            }
        }
    }
    for m in 0..ns {
        report.flux_violations.push(phi.flux(m).abs());
        ref2 += target[m * nn..(m + 1) * nn].iter().zip(&mesh.weights).map(|(v, w)| w * v.norm_squared()).sum::<f64>();
    }
    report.residual = if ref2 > 0.0 { (res2 / ref2).sqrt() } else { 0.0 };
    phi.zero_flux = true;
    Ok((phi, report))
}

fn write_checkpoint(phi: &SurfaceDensity, path: &std::path::Path, slabs: usize) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        phi.write_text_prefix(&mut w, slabs)?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
