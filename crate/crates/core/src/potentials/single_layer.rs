use log::warn;
use rayon::prelude::*;

use super::density::SurfaceDensity;
use crate::boundary_space::BoundaryTrace;
use crate::error::{invalid, Result};
use crate::geometry::{BoundaryMesh, MultiIndex, Point3, Vec3};
use crate::kernels::{oseen_sym, oseen_unchecked, sym_mul, Mat3, Sym3};
use crate::quadrature::{duffy, gauss, subdivided_cached, TriPoint};

/// A triangle is integrated with the nodal rule once its size is below
/// `1/NEAR_RATIO` of the local kernel length scale.
pub const NEAR_RATIO: f64 = 3.0;
pub const MAX_SUBDIVISION: u32 = 3;
pub const TIME_ORDER: usize = 6;
const DUFFY_RADIAL: usize = 10;
const DUFFY_ANGULAR: usize = 10;

/// Where a single layer is evaluated: a free point or a mesh node (trace).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Point(Point3),
    Node(usize),
}

fn duffy_rules() -> &'static [Vec<TriPoint>; 3] {
    static RULES: std::sync::OnceLock<[Vec<TriPoint>; 3]> = std::sync::OnceLock::new();
    RULES.get_or_init(|| [0, 1, 2].map(|v| duffy(v, DUFFY_RADIAL, DUFFY_ANGULAR)))
}

/// Visits the nodes of a rule for `∫_{ua}^{ub} g(u) du` where `g` is the
/// Oseen kernel at distance `r`. Below `u = r²/64` the heat part has died
/// out and the rest is smooth, so panels double from there (or from `ua`)
/// toward `ub`.
pub fn time_rule(r: f64, ua: f64, ub: f64, mut visit: impl FnMut(f64, f64)) {
    if ub <= ua {
        return;
    }
    let g = gauss(TIME_ORDER);
    let floor = (r * r / 64.0).max(ub * 1e-18);
    let mut lo = ua;
    if ua < floor {
        let hi = floor.min(ub);
        for (u, w) in g.mapped(ua, hi) {
            visit(u, w);
        }
        lo = hi;
    }
    while lo < ub {
        let mut hi = (2.0 * lo).min(ub);
        if ub < 1.25 * hi {
            hi = ub;
        }
        for (u, w) in g.mapped(lo, hi) {
            visit(u, w);
        }
        lo = hi;
    }
}

/// `∫_{ua}^{ub} Λ(z, u, τ) du` in symmetric storage.
pub fn slab_kernel(z: &Point3, ua: f64, ub: f64, tau: f64) -> Sym3 {
    let mut acc = [0.0; 6];
    time_rule(z.norm(), ua, ub, |u, w| {
        let k = oseen_sym(z, u, tau);
        for c in 0..6 {
            acc[c] += w * k[c];
        }
    });
    acc
}

/// `∫_{ua}^{ub} ∂^α Λ(z, u, τ) du` for a spatial derivative `d`.
pub fn slab_kernel_derivative(z: &Point3, ua: f64, ub: f64, tau: f64, d: MultiIndex) -> Mat3 {
    let mut acc = Mat3::zeros();
    time_rule(z.norm(), ua, ub, |u, w| acc += w * oseen_unchecked(z, u, tau, d));
    acc
}

/// Spatial quadrature for one target: per-triangle distances are computed
/// once and the rule for each triangle is chosen per time interval.
pub struct LayerQuadrature<'m> {
    mesh: &'m BoundaryMesh,
    pub x: Point3,
    pub node: Option<usize>,
    tri_dist: Vec<f64>,
    tri_size: Vec<f64>,
    far_w: Vec<f64>,
}

impl<'m> LayerQuadrature<'m> {
    pub fn new(mesh: &'m BoundaryMesh, target: Target) -> Self {
        let (x, node) = match target {
            Target::Point(x) => (x, None),
            Target::Node(i) => (mesh.nodes[i], Some(i)),
        };
        let nt = mesh.triangles.len();
        let tri_dist = (0..nt)
            .map(|t| if node.is_some_and(|n| mesh.triangles[t].contains(&n)) { 0.0 } else { mesh.distance_to_triangle(&x, t) })
            .collect();
        let tri_size = (0..nt).map(|t| mesh.triangle_size(t)).collect();
        Self { mesh, x, node, tri_dist, tri_size, far_w: vec![0.0; mesh.len()] }
    }

    pub fn min_distance(&self) -> f64 {
        self.tri_dist.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Calls `visit(y, contributions)` for every quadrature point `y` of the
    /// rule for `∫_{∂Ω} k(x - y) ψ(y) do_y`, where `contributions` lists
    /// `(node, weight)` pairs: the hat function of `node` at `y` times the
    /// surface weight. `ua` is the smallest time lag of the kernel; when it
    /// is zero and the target is a node, its triangles get the Duffy rule.
    pub fn for_each_point(&mut self, ua: f64, mut visit: impl FnMut(&Point3, &[(usize, f64)])) {
        let mesh = self.mesh;
        let sqrt_ua = ua.max(0.0).sqrt();
        self.far_w.iter_mut().for_each(|w| *w = 0.0);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let own = self.node.and_then(|n| tri.iter().position(|&v| v == n));
            let rule: &[TriPoint] = match own {
                Some(v) if ua <= 0.0 => &duffy_rules()[v],
                _ => {
                    let scale = self.tri_dist[t].max(sqrt_ua);
                    let h = self.tri_size[t];
                    if NEAR_RATIO * h <= scale {
                        let a = mesh.triangle_areas[t] / 3.0;
                        for &v in tri {
                            self.far_w[v] += a;
                        }
                        continue;
                    }
                    let lev = if scale > 0.0 { (NEAR_RATIO * h / scale).log2().ceil().max(0.0) as u32 } else { MAX_SUBDIVISION };
                    subdivided_cached(lev.min(MAX_SUBDIVISION))
                }
            };
            for p in rule {
                let sp = mesh.surface_point(t, p.bary);
                let w = p.weight * sp.jacobian;
                let c = [(tri[0], w * p.bary[0]), (tri[1], w * p.bary[1]), (tri[2], w * p.bary[2])];
                visit(&sp.x, &c);
            }
        }
        for (i, &w) in self.far_w.iter().enumerate() {
            if w > 0.0 {
                visit(&mesh.nodes[i], &[(i, w)]);
            }
        }
    }
}

fn interpolate(values: &[Vec3], c: &[(usize, f64)]) -> Vec3 {
    c.iter().fold(Vec3::zeros(), |acc, &(i, w)| acc + w * values[i])
}

/// Whether `x` lies in the zone `dist(x, ∂Ω) < 2h` where the off-surface
/// rules lose accuracy.
pub fn near_boundary(mesh: &BoundaryMesh, x: &Point3) -> bool {
    mesh.distance_to_surface(x) < 2.0 * mesh.h
}

/// `∂_t^l ∂_x^α V(φ)(x, t)` for the discrete density `φ`.
///
/// Off-surface targets accept all first-order derivatives. Node targets
/// (the boundary trace) accept derivatives only for times where the
/// kernel stays regular, that is when no density jump or slab ends at `t`.
pub fn eval_single_layer(phi: &SurfaceDensity, target: Target, t: f64, tau: f64, d: MultiIndex) -> Result<Vec3> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("evaluation time must be positive, got {t}"));
    }
    if d.order() > 1 {
        return invalid(format!("derivative order {} not supported", d.order()));
    }
    let mesh = &*phi.mesh;
    if let Target::Node(i) = target {
        if i >= mesh.len() {
            return invalid(format!("node index {i} out of range"));
        }
    }
    if let Target::Point(x) = target {
        if near_boundary(mesh, &x) {
            warn!("single layer evaluated at distance < 2h from the boundary: {x:?}");
        }
    }
    let grid = phi.grid;
    let mut quad = LayerQuadrature::new(mesh, target);
    let x = quad.x;
    let on_surface = quad.node.is_some();
    let mut out = Vec3::zeros();
    let last = grid.n_slabs.min((t / grid.dt).ceil() as usize);
    if d.l == 1 {
        let zero = vec![Vec3::zeros(); mesh.len()];
        for k in 0..last {
            let prev = if k == 0 { &zero[..] } else { phi.slab(k - 1) };
            let jump: Vec<Vec3> = phi.slab(k).iter().zip(prev).map(|(a, b)| a - b).collect();
            if jump.iter().all(|v| *v == Vec3::zeros()) {
                continue;
            }
            let u = t - grid.slab_start(k);
            if on_surface && u <= 0.0 {
                return invalid("time derivative of the trace at a density jump");
            }
            let u = u.max(1e-300);
            quad.for_each_point(u, |y, c| {
                let k = oseen_sym(&(x - y), u, tau);
                let p = interpolate(&jump, c);
                let r = sym_mul(&k, &[p[0], p[1], p[2]]);
                out += Vec3::new(r[0], r[1], r[2]);
            });
        }
        return Ok(out);
    }
    for k in 0..last {
        let slab = phi.slab(k);
        if slab.iter().all(|v| *v == Vec3::zeros()) {
            continue;
        }
        let ua = (t - grid.slab_start(k + 1)).max(0.0);
        let ub = t - grid.slab_start(k);
        match d.direction() {
            None => quad.for_each_point(ua, |y, c| {
                let kern = slab_kernel(&(x - y), ua, ub, tau);
                let p = interpolate(slab, c);
                let r = sym_mul(&kern, &[p[0], p[1], p[2]]);
                out += Vec3::new(r[0], r[1], r[2]);
            }),
            Some(_) => {
                if on_surface && ua <= 0.0 {
                    return invalid("spatial derivative of the trace inside the density support");
                }
                quad.for_each_point(ua, |y, c| {
                    let kern = slab_kernel_derivative(&(x - y), ua, ub, tau, d);
                    out += kern * interpolate(slab, c);
                });
            }
        }
    }
    Ok(out)
}

/// Boundary trace of `V(φ)` at all mesh nodes and the given times.
pub fn single_layer_trace(phi: &SurfaceDensity, times: &[f64], tau: f64) -> Result<BoundaryTrace> {
    let n = phi.n_nodes();
    let per_node: Vec<Vec<Vec3>> = (0..n)
        .into_par_iter()
        .map(|i| times.iter().map(|&t| eval_single_layer(phi, Target::Node(i), t, tau, MultiIndex::ZERO)).collect())
        .collect::<Result<_>>()?;
    let mut values = vec![Vec3::zeros(); n * times.len()];
    for (i, col) in per_node.into_iter().enumerate() {
        for (m, v) in col.into_iter().enumerate() {
            values[m * n + i] = v;
        }
    }
    BoundaryTrace::new(phi.mesh.clone(), times.to_vec(), values, "single layer")
}
