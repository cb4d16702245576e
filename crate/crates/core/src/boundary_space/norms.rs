use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{invalid, Error, Result};
use crate::geometry::{BoundaryMesh, Vec3};
use crate::kernels::Mat3;

/// P1 stiffness on the flat triangles of the mesh.
fn stiffness(mesh: &BoundaryMesh) -> DMatrix<f64> {
    let n = mesh.len();
    let mut s = DMatrix::zeros(n, n);
    for tri in &mesh.triangles {
        let p = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        // edge opposite vertex i
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        let area = 0.5 * e[0].cross(&e[1]).norm();
        if area == 0.0 {
            continue;
        }
        for a in 0..3 {
            for b in 0..3 {
                s[(tri[a], tri[b])] += e[a].dot(&e[b]) / (4.0 * area);
            }
        }
    }
    s
}

/// Discrete `H¹(∂Ω)` inner product `M + S` (lumped mass, P1 stiffness),
/// factored once; read-only use is thread safe.
pub struct RieszMap {
    weights: Vec<f64>,
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    condition: f64,
}

impl RieszMap {
    pub fn new(mesh: &BoundaryMesh) -> Result<Self> {
        let mut gram = stiffness(mesh);
        for (i, w) in mesh.weights.iter().enumerate() {
            gram[(i, i)] += w;
        }
        let factor = Cholesky::new(gram.clone()).ok_or_else(|| Error::Solve("H1 Gram matrix is not positive definite".into()))?;
        let d = factor.l_dirty().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Ok(Self { weights: mesh.weights.clone(), gram, factor, condition: (hi / lo).powi(2) })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Condition estimate from the Cholesky diagonal (a lower bound).
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return invalid(format!("{len} nodal values for a mesh with {} nodes", self.len()));
        }
        Ok(())
    }

    /// `(uᵀ(M+S)u)^{1/2}` for a scalar nodal field.
    pub fn norm(&self, u: &[f64]) -> Result<f64> {
        self.check(u.len())?;
        let v = DVector::from_column_slice(u);
        Ok(v.dot(&(&self.gram * &v)).max(0.0).sqrt())
    }

    pub fn norm_vec(&self, u: &[Vec3]) -> Result<f64> {
        let mut s = 0.0;
        for c in 0..3 {
            let comp: Vec<f64> = u.iter().map(|v| v[c]).collect();
            s += self.norm(&comp)?.powi(2);
        }
        Ok(s.sqrt())
    }

    /// Nodal representative `(M+S)^{-1} g` of the functional with loads `g`.
    pub fn riesz(&self, loads: &[f64]) -> Result<Vec<f64>> {
        self.check(loads.len())?;
        Ok(self.factor.solve(&DVector::from_column_slice(loads)).as_slice().to_vec())
    }

    /// `(gᵀ(M+S)^{-1}g)^{1/2}`, the dual norm of the functional with loads `g`.
    pub fn dual_norm(&self, loads: &[f64]) -> Result<f64> {
        let r = self.riesz(loads)?;
        Ok(loads.iter().zip(&r).map(|(g, v)| g * v).sum::<f64>().max(0.0).sqrt())
    }

    /// Loads of `V ↦ ∫ w V do` for a nodal density `w` (lumped).
    pub fn loads(&self, density: &[f64]) -> Result<Vec<f64>> {
        self.check(density.len())?;
        Ok(density.iter().zip(&self.weights).map(|(d, w)| d * w).collect())
    }
}

/// `(‖u‖²_{L²} + ‖∇_tan u‖²_{L²})^{1/2}` by nodal quadrature, the tangential
/// gradient taken from ambient Jacobians `J[(j, k)] = ∂_j u_k`.
pub fn h1_norm_from_gradients(mesh: &BoundaryMesh, values: &[Vec3], gradients: &[Mat3]) -> Result<f64> {
    if values.len() != mesh.len() || gradients.len() != mesh.len() {
        return invalid("nodal values and gradients must match the mesh");
    }
    let mut s = 0.0;
    for i in 0..mesh.len() {
        let n = mesh.normals[i];
        let j = gradients[i];
        let tangential = j - n * (n.transpose() * j);
        s += mesh.weights[i] * (values[i].norm_squared() + tangential.norm_squared());
    }
    Ok(s.sqrt())
}

/// `‖u‖_{H¹(∂Ω)}`: from ambient Jacobians when given, else with the P1
/// stiffness of `riesz`.
pub fn h1_boundary_norm(mesh: &BoundaryMesh, riesz: &RieszMap, values: &[Vec3], gradients: Option<&[Mat3]>) -> Result<f64> {
    match gradients {
        Some(g) => h1_norm_from_gradients(mesh, values, g),
        None => riesz.norm_vec(values),
    }
}

/// `‖F‖_{H¹(∂Ω)'}` for the scalar functional with loads `g`.
pub fn h1_dual_norm(riesz: &RieszMap, loads: &[f64]) -> Result<f64> {
    riesz.dual_norm(loads)
}
