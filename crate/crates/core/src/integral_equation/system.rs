use std::sync::Arc;

use log::{info, warn};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryMesh, Vec3};
use crate::kernels::Sym3;
use crate::potentials::{slab_kernel, LayerQuadrature, SurfaceDensity, Target, TimeGrid};

/// Condition number above which the diagonal block is reported as
/// ill-conditioned.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Discrete single-layer operator on `∂Ω × (0, T_h)`.
///
/// The density is piecewise linear in space and constant on time slabs,
/// and boundary values are collocated at mesh nodes and slab end points.
/// With a uniform grid the block from slab `k` to slab `m` depends on the
/// lag `m - k` only; lag blocks are stored as symmetric 3x3 node-pair
/// kernels, row-major by target node: `blocks[(n * lags + lag) * N + i]`.
pub struct VolterraSystem {
    pub mesh: Arc<BoundaryMesh>,
    pub grid: TimeGrid,
    pub tau: f64,
    blocks: Vec<Sym3>,
    /// 1-norm condition estimate of the bordered diagonal block.
    pub diagonal_condition: f64,
    /// Scale of the border row/column relative to the block entries.
    border_scale: f64,
    lu: LU<f64, Dyn, Dyn>,
    tikhonov: f64,
}

impl std::fmt::Debug for VolterraSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VolterraSystem")
            .field("nodes", &self.mesh.len())
            .field("grid", &self.grid)
            .field("tau", &self.tau)
            .field("diagonal_condition", &self.diagonal_condition)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssembleOptions {
    /// Relative weight of an optional Tikhonov term on the diagonal block
    /// (zero disables it).
    pub tikhonov: f64,
}

/// Assembles all lag blocks and factors the bordered diagonal block.
pub fn assemble(mesh: Arc<BoundaryMesh>, grid: TimeGrid, tau: f64) -> Result<VolterraSystem> {
    assemble_with(mesh, grid, tau, AssembleOptions::default())
}

pub fn assemble_with(mesh: Arc<BoundaryMesh>, grid: TimeGrid, tau: f64, opts: AssembleOptions) -> Result<VolterraSystem> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return invalid(format!("Reynolds number must be non-negative, got {tau}"));
    }
    if !(opts.tikhonov >= 0.0) {
        return invalid("Tikhonov weight must be non-negative");
    }
    let n = mesh.len();
    let lags = grid.n_slabs;
    let started = std::time::Instant::now();
    let mut blocks = vec![[0.0; 6]; n * n * lags];
    blocks.par_chunks_mut(n * lags).enumerate().for_each(|(target, row)| {
        let mut quad = LayerQuadrature::new(&mesh, Target::Node(target));
        let x = quad.x;
        for lag in 0..lags {
            let ua = grid.slab_start(lag);
            let ub = grid.slab_start(lag + 1);
            let out = &mut row[lag * n..(lag + 1) * n];
            quad.for_each_point(ua, |y, c| {
                let k = slab_kernel(&(x - y), ua, ub, tau);
                for &(i, w) in c {
                    let o = &mut out[i];
                    for q in 0..6 {
                        o[q] += w * k[q];
                    }
                }
            });
        }
    });
    info!("assembled {} lag blocks for {} nodes in {:.1?}", lags, n, started.elapsed());
    let mut sys = VolterraSystem {
        mesh,
        grid,
        tau,
        blocks,
        diagonal_condition: f64::NAN,
        border_scale: 1.0,
        lu: LU::new(DMatrix::zeros(1, 1)),
        tikhonov: opts.tikhonov,
    };
    sys.factor()?;
    Ok(sys)
}

fn sym_apply(s: &Sym3, v: &Vec3) -> Vec3 {
    Vec3::new(
        s[0] * v[0] + s[3] * v[1] + s[4] * v[2],
        s[3] * v[0] + s[1] * v[1] + s[5] * v[2],
        s[4] * v[0] + s[5] * v[1] + s[2] * v[2],
    )
}

const SYM_INDEX: [[usize; 3]; 3] = [[0, 3, 4], [3, 1, 5], [4, 5, 2]];

impl VolterraSystem {
    pub fn n_nodes(&self) -> usize {
        self.mesh.len()
    }

    /// Kernel block between target node `n` and source node `i` at `lag`.
    pub fn block(&self, lag: usize, n: usize, i: usize) -> Sym3 {
        let nn = self.n_nodes();
        self.blocks[(n * self.grid.n_slabs + lag) * nn + i]
    }

    /// `out += B_lag φ` for one slab of density values.
    pub fn apply_lag_add(&self, lag: usize, phi: &[Vec3], out: &mut [Vec3]) {
        let nn = self.n_nodes();
        let lags = self.grid.n_slabs;
        out.par_iter_mut().enumerate().for_each(|(n, o)| {
            let row = &self.blocks[(n * lags + lag) * nn..(n * lags + lag + 1) * nn];
            let mut acc = Vec3::zeros();
            for (s, p) in row.iter().zip(phi) {
                acc += sym_apply(s, p);
            }
            *o += acc;
        });
    }

    /// Collocated boundary values `(Bφ)_m` for every slab `m`.
    pub fn apply(&self, phi: &SurfaceDensity) -> Result<Vec<Vec3>> {
        self.check_density(phi)?;
        let nn = self.n_nodes();
        let ns = self.grid.n_slabs;
        let mut out = vec![Vec3::zeros(); nn * ns];
        for k in 0..ns {
            let slab = phi.slab(k);
            if slab.iter().all(|v| *v == Vec3::zeros()) {
                continue;
            }
            for m in k..ns {
                self.apply_lag_add(m - k, slab, &mut out[m * nn..(m + 1) * nn]);
            }
        }
        Ok(out)
    }

    fn check_density(&self, phi: &SurfaceDensity) -> Result<()> {
        if phi.grid != self.grid || phi.n_nodes() != self.n_nodes() {
            return invalid("density grid or mesh does not match the system");
        }
        Ok(())
    }

    fn bordered_matrix(&self) -> DMatrix<f64> {
        let nn = self.n_nodes();
        let dim = 3 * nn + 1;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut diag = 0.0;
        for n in 0..nn {
            for i in 0..nn {
                let s = self.block(0, n, i);
                for p in 0..3 {
                    for q in 0..3 {
                        a[(3 * n + p, 3 * i + q)] = s[SYM_INDEX[p][q]];
                    }
                }
            }
            let s = self.block(0, n, n);
            diag += (s[0] + s[1] + s[2]) / 3.0;
        }
        let scale = diag / nn as f64;
        if self.tikhonov > 0.0 {
            for d in 0..3 * nn {
                a[(d, d)] += self.tikhonov * scale;
            }
        }
        let mean_w = self.mesh.area() / nn as f64;
        for n in 0..nn {
            for p in 0..3 {
                let nv = self.mesh.normals[n][p];
                a[(3 * n + p, 3 * nn)] = scale * nv;
                a[(3 * nn, 3 * n + p)] = scale * self.mesh.weights[n] / mean_w * nv;
            }
        }
        a
    }

    fn factor(&mut self) -> Result<()> {
        let a = self.bordered_matrix();
        let nn = self.n_nodes();
        self.border_scale = a[(0, 3 * nn)].abs().max(a[(1, 3 * nn)].abs()).max(a[(2, 3 * nn)].abs());
        let norm1 = (0..a.ncols()).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Solve("bordered diagonal block is singular".into()));
        }
        self.lu = lu;
        self.diagonal_condition = norm1 * self.inverse_norm1_estimate();
        if self.diagonal_condition > CONDITION_LIMIT {
            warn!("diagonal block is ill-conditioned: condition estimate {:.3e}", self.diagonal_condition);
        }
        info!("diagonal block condition estimate {:.3e}", self.diagonal_condition);
        Ok(())
    }

    /// Hager's estimate of `‖A⁻¹‖₁` from the LU factors.
    fn inverse_norm1_estimate(&self) -> f64 {
        let dim = self.lu.l().nrows();
        let mut x = DVector::from_element(dim, 1.0 / dim as f64);
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.lu.solve(&x).unwrap_or_else(|| DVector::zeros(dim));
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transposed(&xi);
            let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            if zmax <= z.dot(&x) {
                break;
            }
            x = DVector::zeros(dim);
            x[j] = 1.0;
        }
        est
    }

    /// Solves `Aᵀ x = b` with the factors of `P A = L U`.
    fn solve_transposed(&self, b: &DVector<f64>) -> DVector<f64> {
        let u = self.lu.u();
        let l = self.lu.l();
        let y = u.tr_solve_upper_triangular(b).unwrap_or_else(|| DVector::zeros(b.len()));
        let mut w = l.tr_solve_lower_triangular(&y).unwrap_or_else(|| DVector::zeros(b.len()));
        self.lu.p().inv_permute_rows(&mut w);
        w
    }

    /// Solves the bordered diagonal system for one slab: returns the
    /// zero-flux density and the multiplier.
    pub(crate) fn solve_diagonal(&self, rhs: &[Vec3]) -> Result<(Vec<Vec3>, f64)> {
        let nn = self.n_nodes();
        let mut b = DVector::zeros(3 * nn + 1);
        for (n, v) in rhs.iter().enumerate() {
            for p in 0..3 {
                b[3 * n + p] = v[p];
            }
        }
        let x = self.lu.solve(&b).ok_or_else(|| Error::Solve("diagonal solve failed".into()))?;
        let phi = (0..nn).map(|n| Vec3::new(x[3 * n], x[3 * n + 1], x[3 * n + 2])).collect();
        Ok((phi, x[3 * nn] * self.border_scale))
    }

    /// Memory held by the lag blocks in bytes.
    pub fn block_bytes(&self) -> usize {
        self.blocks.len() * std::mem::size_of::<Sym3>()
    }

    /// Reorders the system for a permuted mesh (`perm[new] = old`).
    pub fn permuted(&self, mesh: Arc<BoundaryMesh>, perm: &[usize]) -> Result<Self> {
        let nn = self.n_nodes();
        if perm.len() != nn || mesh.len() != nn {
            return invalid("permutation size does not match the mesh");
        }
        let lags = self.grid.n_slabs;
        let mut blocks = vec![[0.0; 6]; self.blocks.len()];
        for n in 0..nn {
            for lag in 0..lags {
                for i in 0..nn {
                    blocks[(n * lags + lag) * nn + i] = self.block(lag, perm[n], perm[i]);
                }
            }
        }
        let mut sys = VolterraSystem {
            mesh,
            grid: self.grid,
            tau: self.tau,
            blocks,
            diagonal_condition: f64::NAN,
            border_scale: 1.0,
            lu: LU::new(DMatrix::zeros(1, 1)),
            tikhonov: self.tikhonov,
        };
        sys.factor()?;
        Ok(sys)
    }
}
