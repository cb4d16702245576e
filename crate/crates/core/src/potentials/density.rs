use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryMesh, Vec3};

/// Uniform time slabs `[k dt, (k + 1) dt)`, `k = 0..n_slabs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_slabs: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_slabs: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        if n_slabs == 0 {
            return invalid("time grid needs at least one slab");
        }
        Ok(Self { dt, n_slabs })
    }

    /// Grid with step `dt` covering `(0, horizon]`.
    pub fn with_horizon(dt: f64, horizon: f64) -> Result<Self> {
        let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(dt, n)
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_slabs as f64
    }

    pub fn slab_start(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    /// Collocation time of slab `m`, its right end point.
    pub fn collocation_time(&self, m: usize) -> f64 {
        self.dt * (m + 1) as f64
    }

    pub fn collocation_times(&self) -> Vec<f64> {
        (0..self.n_slabs).map(|m| self.collocation_time(m)).collect()
    }

    /// Slab index containing `t`, clamped to the grid.
    pub fn slab_of(&self, t: f64) -> usize {
        ((t / self.dt).floor().max(0.0) as usize).min(self.n_slabs - 1)
    }
}

/// Vector density on the boundary, piecewise linear in space (nodal values
/// on the mesh) and piecewise constant in time on the slabs of `grid`.
#[derive(Clone, Debug)]
pub struct SurfaceDensity {
    pub mesh: Arc<BoundaryMesh>,
    pub grid: TimeGrid,
    /// Slab-major values: `values[k * n_nodes + i]`.
    pub values: Vec<Vec3>,
    pub zero_flux: bool,
}

impl SurfaceDensity {
    pub fn zeros(mesh: Arc<BoundaryMesh>, grid: TimeGrid) -> Self {
        let n = mesh.len() * grid.n_slabs;
        Self { mesh, grid, values: vec![Vec3::zeros(); n], zero_flux: true }
    }

    /// Samples `f(node index, slab index)`.
    pub fn from_fn(mesh: Arc<BoundaryMesh>, grid: TimeGrid, mut f: impl FnMut(usize, usize) -> Vec3) -> Self {
        let n = mesh.len();
        let mut values = Vec::with_capacity(n * grid.n_slabs);
        for k in 0..grid.n_slabs {
            for i in 0..n {
                values.push(f(i, k));
            }
        }
        let mut d = Self { mesh, grid, values, zero_flux: false };
        d.zero_flux = d.max_flux() <= 1e-10 * d.max_abs().max(1e-300);
        d
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.len()
    }

    pub fn slab(&self, k: usize) -> &[Vec3] {
        let n = self.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn slab_mut(&mut self, k: usize) -> &mut [Vec3] {
        let n = self.n_nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Vec3::zeros())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.amax()))
    }

    /// Discrete net normal flux `Σ w_i n_i · φ_i` of slab `k`.
    pub fn flux(&self, k: usize) -> f64 {
        slab_flux(&self.mesh, self.slab(k))
    }

    pub fn max_flux(&self) -> f64 {
        (0..self.grid.n_slabs).map(|k| self.flux(k).abs()).fold(0.0, f64::max)
    }

    /// Last slab carrying a nonzero value, if any.
    pub fn support_end(&self) -> Option<usize> {
        (0..self.grid.n_slabs).rev().find(|&k| self.slab(k).iter().any(|v| *v != Vec3::zeros()))
    }

    /// `‖φ‖_{L²(∂Ω × (t0, t1))}` with the lumped mass.
    pub fn l2_norm_window(&self, t0: f64, t1: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.grid.n_slabs {
            let a = self.grid.slab_start(k).max(t0);
            let b = self.grid.slab_start(k + 1).min(t1);
            if b > a {
                let s: f64 = self.slab(k).iter().zip(&self.mesh.weights).map(|(v, w)| w * v.norm_squared()).sum();
                sum += (b - a) * s;
            }
        }
        sum.sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_window(0.0, self.grid.horizon())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) && self.mesh.nodes != other.mesh.nodes {
            return invalid("densities live on different meshes");
        }
        if self.grid != other.grid {
            return invalid("densities live on different time grids");
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Self { mesh: self.mesh.clone(), grid: self.grid, values, zero_flux: self.zero_flux && other.zero_flux })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Writes the density as text, one line per (slab, node):
    ///
    /// ```text
    /// # oseen density v1
    /// grid <dt> <n_slabs>
    /// nodes <N>
    /// <slab> <node> <phi1> <phi2> <phi3>
    /// ```
    pub fn write_text(&self, w: impl Write) -> Result<()> {
        self.write_text_prefix(w, self.grid.n_slabs)
    }

    /// Writes only the first `slabs` slabs; used for solver checkpoints.
    pub fn write_text_prefix(&self, mut w: impl Write, slabs: usize) -> Result<()> {
        writeln!(w, "# oseen density v1")?;
        writeln!(w, "grid {:e} {}", self.grid.dt, self.grid.n_slabs)?;
        writeln!(w, "nodes {}", self.n_nodes())?;
        let n = self.n_nodes();
        for (idx, v) in self.values.iter().enumerate().take(slabs.min(self.grid.n_slabs) * n) {
            writeln!(w, "{} {} {:e} {:e} {:e}", idx / n, idx % n, v[0], v[1], v[2])?;
        }
        Ok(())
    }

    /// Reads a density written by [`Self::write_text`]; missing lines are
    /// zero, so truncated checkpoints load as their completed prefix.
    pub fn read_text(mesh: Arc<BoundaryMesh>, r: impl BufRead) -> Result<(Self, usize)> {
        let mut grid = None;
        let mut values: Vec<Vec3> = Vec::new();
        let mut filled = 0usize;
        let n = mesh.len();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let perr = |msg: &str| Error::Parse { line: lineno + 1, msg: msg.to_owned() };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            match f[0] {
                "grid" => {
                    let dt: f64 = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad grid step"))?;
                    let ns: usize = f.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad slab count"))?;
                    let g = TimeGrid::new(dt, ns)?;
                    values = vec![Vec3::zeros(); n * ns];
                    grid = Some(g);
                }
                "nodes" => {
                    let m: usize = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad node count"))?;
                    if m != n {
                        return Err(perr(&format!("density has {m} nodes, mesh has {n}")));
                    }
                }
                _ => {
                    if grid.is_none() || f.len() != 5 {
                        return Err(perr("expected '<slab> <node> <v1> <v2> <v3>' after header"));
                    }
                    let k: usize = f[0].parse().map_err(|_| perr("bad slab index"))?;
                    let i: usize = f[1].parse().map_err(|_| perr("bad node index"))?;
                    let mut v = Vec3::zeros();
                    for c in 0..3 {
                        v[c] = f[2 + c].parse().map_err(|_| perr("bad component"))?;
                    }
                    let idx = k * n + i;
                    if i >= n || idx >= values.len() {
                        return Err(perr("index out of range"));
                    }
                    values[idx] = v;
                    filled = filled.max(idx + 1);
                }
            }
        }
        let grid = grid.ok_or_else(|| Error::Parse { line: 0, msg: "missing grid line".into() })?;
        let mut d = Self { mesh, grid, values, zero_flux: false };
        d.zero_flux = d.max_flux() <= 1e-10 * d.max_abs().max(1e-300);
        Ok((d, filled / n.max(1)))
    }
}

pub(crate) fn slab_flux(mesh: &BoundaryMesh, values: &[Vec3]) -> f64 {
    values.iter().zip(mesh.normals.iter().zip(&mesh.weights)).map(|(v, (n, w))| w * n.dot(v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary_mesh, Shape};

    #[test]
    fn grid_geometry() {
        let g = TimeGrid::with_horizon(0.05, 4.0).unwrap();
        assert_eq!(g.n_slabs, 80);
        assert_eq!(g.slab_of(0.07), 1);
        assert_eq!(g.slab_of(10.0), 79);
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 1).unwrap());
        let grid = TimeGrid::new(0.1, 3).unwrap();
        let d = SurfaceDensity::from_fn(mesh.clone(), grid, |i, k| Vec3::new(i as f64 * 0.1, k as f64, 1.0 / 3.0));
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        let (back, done) = SurfaceDensity::read_text(mesh.clone(), &buf[..]).unwrap();
        assert_eq!(back.values, d.values);
        assert_eq!(done, 3);
        let cut = buf.len() / 2;
        let cut = cut - buf[..cut].iter().rev().position(|&c| c == b'\n').unwrap();
        let (_, done) = SurfaceDensity::read_text(mesh, &buf[..cut]).unwrap();
        assert!(done < 3);
    }

    #[test]
    fn window_norm_of_constant() {
        let mesh = Arc::new(build_boundary_mesh(Shape::UnitSphere, 2).unwrap());
        let grid = TimeGrid::new(0.5, 8).unwrap();
        let d = SurfaceDensity::from_fn(mesh.clone(), grid, |_, _| Vec3::new(1.0, 0.0, 0.0));
        let expect = (mesh.area() * 2.0).sqrt();
        assert!((d.l2_norm_window(1.0, 3.0) - expect).abs() < 1e-12);
        assert!(d.zero_flux);
    }
}
