use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::geometry::{BoundaryMesh, Vec3};
use crate::kernels::Mat3;

/// Vector field samples on the boundary at a strictly increasing list of
/// times, optionally with time derivatives and ambient spatial Jacobians.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub mesh: Arc<BoundaryMesh>,
    pub times: Vec<f64>,
    /// Time-major values: `values[m * n_nodes + i]`.
    pub values: Vec<Vec3>,
    /// `∂_t` of the field, same layout as `values`.
    pub dt_values: Option<Vec<Vec3>>,
    /// Ambient Jacobians `J[(j, k)] = ∂_j u_k`, same layout as `values`.
    pub gradients: Option<Vec<Mat3>>,
    /// What generated the samples.
    pub provenance: String,
}

impl BoundaryTrace {
    pub fn new(mesh: Arc<BoundaryMesh>, times: Vec<f64>, values: Vec<Vec3>, provenance: &str) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("trace times must be strictly increasing");
        }
        if values.len() != times.len() * mesh.len() {
            return invalid(format!("trace has {} values, expected {} times x {} nodes", values.len(), times.len(), mesh.len()));
        }
        if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return invalid("trace values must be finite");
        }
        Ok(Self { mesh, times, values, dt_values: None, gradients: None, provenance: provenance.to_owned() })
    }

    pub fn zeros(mesh: Arc<BoundaryMesh>, times: Vec<f64>, provenance: &str) -> Result<Self> {
        let n = mesh.len() * times.len();
        Self::new(mesh, times, vec![Vec3::zeros(); n], provenance)
    }

    pub fn with_dt(mut self, dt_values: Vec<Vec3>) -> Result<Self> {
        if dt_values.len() != self.values.len() {
            return invalid("time-derivative samples do not match the trace layout");
        }
        self.dt_values = Some(dt_values);
        Ok(self)
    }

    pub fn with_gradients(mut self, gradients: Vec<Mat3>) -> Result<Self> {
        if gradients.len() != self.values.len() {
            return invalid("gradient samples do not match the trace layout");
        }
        self.gradients = Some(gradients);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.len()
    }

    pub fn slice(&self, m: usize) -> &[Vec3] {
        let n = self.n_nodes();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn slice_mut(&mut self, m: usize) -> &mut [Vec3] {
        let n = self.n_nodes();
        &mut self.values[m * n..(m + 1) * n]
    }

    pub fn dt_slice(&self, m: usize) -> Option<&[Vec3]> {
        let n = self.n_nodes();
        self.dt_values.as_ref().map(|d| &d[m * n..(m + 1) * n])
    }

    pub fn gradient_slice(&self, m: usize) -> Option<&[Mat3]> {
        let n = self.n_nodes();
        self.gradients.as_ref().map(|d| &d[m * n..(m + 1) * n])
    }

    /// Discrete `L²(∂Ω × times)` norm with lumped mass in space and the
    /// counting measure in time.
    pub fn discrete_norm(&self) -> f64 {
        let n = self.n_nodes();
        self.values.iter().enumerate().map(|(idx, v)| self.mesh.weights[idx % n] * v.norm_squared()).sum::<f64>().sqrt()
    }

    /// `self + c * other` on the same mesh and times; derivative samples are
    /// combined when both carry them.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        if self.times != other.times || self.values.len() != other.values.len() {
            return invalid("traces sampled on different grids");
        }
        let comb = |a: &[Vec3], b: &[Vec3]| a.iter().zip(b).map(|(x, y)| x + c * y).collect::<Vec<_>>();
        let mut out = Self::new(self.mesh.clone(), self.times.clone(), comb(&self.values, &other.values), &self.provenance)?;
        if let (Some(a), Some(b)) = (&self.dt_values, &other.dt_values) {
            out.dt_values = Some(comb(a, b));
        }
        if let (Some(a), Some(b)) = (&self.gradients, &other.gradients) {
            out.gradients = Some(a.iter().zip(b).map(|(x, y)| x + c * y).collect());
        }
        Ok(out)
    }

    /// `∂_t` by second-order differences on the (possibly non-uniform)
    /// sample times.
    pub fn differenced_dt(&self) -> Result<Vec<Vec3>> {
        if self.times.len() < 3 {
            return invalid("differencing needs at least three samples");
        }
        let ts = &self.times;
        let n = self.n_nodes();
        let k = ts.len();
        let mut out = vec![Vec3::zeros(); self.values.len()];
        for m in 0..k {
            let (a, b, c, wa, wb, wc) = if m == 0 {
                let (h1, h2) = (ts[1] - ts[0], ts[2] - ts[1]);
                (0, 1, 2, -(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2)))
            } else if m == k - 1 {
                let (h1, h2) = (ts[m - 1] - ts[m - 2], ts[m] - ts[m - 1]);
                (m - 2, m - 1, m, h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (h1 + 2.0 * h2) / (h2 * (h1 + h2)))
            } else {
                let (h1, h2) = (ts[m] - ts[m - 1], ts[m + 1] - ts[m]);
                (m - 1, m, m + 1, -h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))
            };
            for i in 0..n {
                out[m * n + i] = wa * self.values[a * n + i] + wb * self.values[b * n + i] + wc * self.values[c * n + i];
            }
        }
        Ok(out)
    }
}
