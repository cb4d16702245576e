//! Exterior-domain geometry: the wake weight, boundary meshes for the test
//! obstacles and sampled checks of the weight inequalities.

mod inequalities;
mod mesh;

pub use inequalities::{
    exterior_wake_integral, probe_nu_inequalities, sphere_wake_integral, InequalityEntry, InequalityReport, DIVERGENCE_FACTOR,
};
pub use mesh::{build_boundary_mesh, BoundaryMesh, Shape, SurfacePoint};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Point3 = nalgebra::Vector3<f64>;
/// Vector-valued field samples share the point representation.
pub type Vec3 = Point3;

/// Unit vector of the free stream direction.
pub fn e1() -> Point3 {
    Point3::new(1.0, 0.0, 0.0)
}

/// The anisotropic wake weight `1 + |x| - x1`.
///
/// Equal to 1 on the downstream half-axis and of order `|x|` elsewhere.
pub fn wake_weight(x: &Point3) -> f64 {
    1.0 + x.norm() - x[0]
}

/// Spatial derivative multi-index `alpha` together with a time-derivative
/// order `l`; only first-order derivatives are supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub alpha: [u8; 3],
    pub l: u8,
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { alpha: [0, 0, 0], l: 0 };
    pub const DT: MultiIndex = MultiIndex { alpha: [0, 0, 0], l: 1 };

    pub fn new(alpha: [u8; 3], l: u8) -> Result<Self> {
        let m = MultiIndex { alpha, l };
        if m.order() > 1 {
            return invalid(format!("derivative order |alpha|+l = {} exceeds 1", m.order()));
        }
        Ok(m)
    }

    /// First derivative in direction `i` (0-based).
    pub fn dx(i: usize) -> Self {
        let mut alpha = [0; 3];
        alpha[i] = 1;
        MultiIndex { alpha, l: 0 }
    }

    pub fn spatial_order(&self) -> u32 {
        self.alpha.iter().map(|&a| a as u32).sum()
    }

    pub fn order(&self) -> u32 {
        self.spatial_order() + self.l as u32
    }

    /// Index of the differentiated coordinate for a first spatial derivative.
    pub fn direction(&self) -> Option<usize> {
        self.alpha.iter().position(|&a| a == 1)
    }

    pub fn all_first_order() -> [MultiIndex; 5] {
        [MultiIndex::ZERO, Self::dx(0), Self::dx(1), Self::dx(2), Self::DT]
    }
}
