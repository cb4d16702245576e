//! Numerical identity checks of the fundamental solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{heat, heat_kernel, oseen_kernel, stokes_kernel, Mat3};
use crate::error::Result;
use crate::geometry::{MultiIndex, Point3};
use crate::quadrature::GaussLegendre;

/// `∫ h(z, t) dz` by tensor Gauss panels over `[-12√t, 12√t]³`.
pub fn heat_mass(t: f64) -> Result<f64> {
    let g = GaussLegendre::new(12);
    let l = 12.0 * t.sqrt();
    let panels = 8;
    let width = 2.0 * l / panels as f64;
    let pts: Vec<(f64, f64)> = (0..panels).flat_map(|p| g.mapped(-l + width * p as f64, -l + width * (p + 1) as f64)).collect();
    let mut sum = 0.0;
    for &(x, wx) in &pts {
        for &(y, wy) in &pts {
            for &(z, wz) in &pts {
                sum += wx * wy * wz * heat_kernel(&Point3::new(x, y, z), t, MultiIndex::ZERO)?;
            }
        }
    }
    Ok(sum)
}

/// `δ_jk h(z, t) + ∫_t^∞ ∂_j∂_k h(z, s) ds`, with the time integral done
/// on geometrically growing Gauss panels up to `t + 1e3` and by the
/// substitution `s = S/w` beyond.
pub fn time_integrated_stokes(z: &Point3, t: f64) -> Mat3 {
    let g = GaussLegendre::new(20);
    let r2 = z.norm_squared();
    let f = |s: f64| {
        let h = heat(r2, s);
        Mat3::from_fn(|j, k| h * (z[j] * z[k] / (4.0 * s * s) - if j == k { 0.5 / s } else { 0.0 }))
    };
    let mut m = Mat3::identity() * heat(r2, t);
    let end = t + 1e3;
    let mut a = t;
    let mut step = t.min(0.05);
    while a < end {
        let b = (a + step).min(end);
        for (s, w) in g.mapped(a, b) {
            m += w * f(s);
        }
        a = b;
        step *= 1.5;
    }
    let mut hi = 1.0;
    for _ in 0..30 {
        let lo = 0.5 * hi;
        for (w, wt) in g.mapped(lo, hi) {
            m += wt * end / (w * w) * f(end / w);
        }
        hi = lo;
    }
    m
}

/// `max_k |Σ_j ∂_j K_jk(z)|` relative to the largest gradient block norm.
pub fn divergence_residual(kernel: impl Fn(&Point3, MultiIndex) -> Result<Mat3>, z: &Point3) -> Result<f64> {
    let grads = [kernel(z, MultiIndex::dx(0))?, kernel(z, MultiIndex::dx(1))?, kernel(z, MultiIndex::dx(2))?];
    let scale = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let div = (0..3).map(|k| (0..3).map(|j| grads[j][(j, k)]).sum::<f64>().abs()).fold(0.0, f64::max);
    Ok(if scale > 0.0 { div / scale } else { div })
}

/// Outcome of one identity check: the worst deviation over its samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub name: String,
    pub tag: String,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl KernelCheck {
    fn new(name: &str, tag: &str, deviations: &[f64], tolerance: f64) -> Self {
        let worst = deviations.iter().copied().fold(0.0, f64::max);
        Self { name: name.into(), tag: tag.into(), samples: deviations.len(), worst, tolerance, pass: worst <= tolerance }
    }
}

fn random_point(rng: &mut ChaCha8Rng, half_width: f64) -> Point3 {
    Point3::new(
        rng.gen_range(-half_width..half_width),
        rng.gen_range(-half_width..half_width),
        rng.gen_range(-half_width..half_width),
    )
}

/// Unit mass of the heat kernel at `t ∈ {0.1, 1, 10}`, divergence-free
/// columns of Γ and Λ at 100 random points each, the closed-form Γ against
/// its time-integral definition at 20 points, and exact symmetry.
pub fn kernel_identity_suite(tau: f64, tolerance: f64, seed: u64) -> Result<Vec<KernelCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = [0.1, 1.0, 10.0].iter().map(|&t| Ok((heat_mass(t)? - 1.0).abs())).collect::<Result<Vec<f64>>>()?;
    let mut div_stokes = Vec::new();
    let mut div_oseen = Vec::new();
    let mut symmetry = Vec::new();
    for _ in 0..100 {
        let z = random_point(&mut rng, 5.0);
        let t = rng.gen_range(-3.0f64..3.0).exp();
        div_stokes.push(divergence_residual(|z, d| stokes_kernel(z, t, d), &z)?);
        div_oseen.push(divergence_residual(|z, d| oseen_kernel(z, t, tau, d), &z)?);
        let m = oseen_kernel(&z, t, tau, MultiIndex::ZERO)?;
        symmetry.push((m - m.transpose()).norm());
    }
    let mut closed = Vec::new();
    for _ in 0..20 {
        let z = random_point(&mut rng, 3.0);
        let t = rng.gen_range(-2.0f64..2.0).exp();
        let want = time_integrated_stokes(&z, t);
        closed.push((stokes_kernel(&z, t, MultiIndex::ZERO)? - want).norm() / want.norm());
    }
    Ok(vec![
        KernelCheck::new("heat kernel mass", "Lem1040", &mass, tolerance),
        KernelCheck::new("Stokes tensor divergence", "Lem1050", &div_stokes, tolerance),
        KernelCheck::new("Oseen tensor divergence", "Cor1060", &div_oseen, tolerance),
        KernelCheck::new("closed form vs time integral", "Sec4", &closed, tolerance),
        KernelCheck::new("Oseen tensor symmetry", "Sec4", &symmetry, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_reproducible() {
        let a = kernel_identity_suite(1.0, 1e-6, 4).unwrap();
        assert!(a.iter().all(|c| c.pass), "{a:?}");
        assert_eq!(a, kernel_identity_suite(1.0, 1e-6, 4).unwrap());
        assert_eq!(a.iter().map(|c| c.samples).collect::<Vec<_>>(), [3, 100, 100, 20, 100]);
    }
}
