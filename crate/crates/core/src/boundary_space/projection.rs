use crate::potentials::{slab_flux, SurfaceDensity};

/// Removes the normal mean from every slab so that `∮ n·ψ do = 0`.
pub fn project_zero_flux(density: &SurfaceDensity) -> SurfaceDensity {
    let mesh = density.mesh.clone();
    let area = mesh.area();
    let mut out = density.clone();
    for k in 0..out.grid.n_slabs {
        let slab = out.slab_mut(k);
        let c = slab_flux(&mesh, slab) / area;
        if c != 0.0 {
            for (v, n) in slab.iter_mut().zip(&mesh.normals) {
                *v -= c * n;
            }
        }
    }
    out.zero_flux = true;
    out
}
