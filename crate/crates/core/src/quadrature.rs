//! One-dimensional and triangle quadrature rules used by the potential
//! evaluators.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Shared Gauss-Legendre rule with `n <= 64` nodes.
pub fn gauss(n: usize) -> &'static GaussLegendre {
    static CACHE: [OnceLock<GaussLegendre>; 65] = [const { OnceLock::new() }; 65];
    CACHE[n].get_or_init(|| GaussLegendre::new(n))
}

/// Shared subdivided seven-point rule, `levels <= 4`.
pub fn subdivided_cached(levels: u32) -> &'static [TriPoint] {
    static CACHE: [OnceLock<Vec<TriPoint>>; 5] = [const { OnceLock::new() }; 5];
    CACHE[levels as usize].get_or_init(|| subdivided(levels))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates `f` over [a, b] with geometrically graded panels clustered at
/// `a`; the smallest panel has width `(b - a) * ratio^levels`.
pub fn graded_toward_left(rule: &GaussLegendre, a: f64, b: f64, levels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let len = b - a;
    let mut sum = 0.0;
    let mut hi = len;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        sum += rule.integrate(a + lo, a + hi, &mut f);
        hi = lo;
    }
    sum + rule.integrate(a, a + hi, &mut f)
}

/// A quadrature point on the reference triangle in barycentric coordinates;
/// the weights of a rule sum to 1 (the reference area is factored out).
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Degree-5 seven-point rule.
pub fn dunavant7() -> Vec<TriPoint> {
    let a1 = 0.059_715_871_789_769_82;
    let b1 = 0.470_142_064_105_115_1;
    let a2 = 0.797_426_985_353_087_3;
    let b2 = 0.101_286_507_323_456_3;
    let w0 = 0.225;
    let w1 = 0.132_394_152_788_506_2;
    let w2 = 0.125_939_180_544_827_2;
    let mut pts = vec![TriPoint { bary: [1.0 / 3.0; 3], weight: w0 }];
    for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
        pts.push(TriPoint { bary: [a, b, b], weight: w });
        pts.push(TriPoint { bary: [b, a, b], weight: w });
        pts.push(TriPoint { bary: [b, b, a], weight: w });
    }
    pts
}

/// The seven-point rule applied on each of the 4^levels congruent
/// sub-triangles of the reference triangle.
pub fn subdivided(levels: u32) -> Vec<TriPoint> {
    let base = dunavant7();
    let mut tris: Vec<[[f64; 3]; 3]> = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            let m = |a: usize, b: usize| -> [f64; 3] {
                [0.5 * (t[a][0] + t[b][0]), 0.5 * (t[a][1] + t[b][1]), 0.5 * (t[a][2] + t[b][2])]
            };
            let (m01, m12, m20) = (m(0, 1), m(1, 2), m(2, 0));
            next.push([t[0], m01, m20]);
            next.push([m01, t[1], m12]);
            next.push([m20, m12, t[2]]);
            next.push([m01, m12, m20]);
        }
        tris = next;
    }
    let scale = 1.0 / tris.len() as f64;
    let mut out = Vec::with_capacity(tris.len() * base.len());
    for t in &tris {
        for p in &base {
            let mut bary = [0.0; 3];
            for (k, b) in bary.iter_mut().enumerate() {
                *b = p.bary[0] * t[0][k] + p.bary[1] * t[1][k] + p.bary[2] * t[2][k];
            }
            out.push(TriPoint { bary, weight: p.weight * scale });
        }
    }
    out
}

/// Duffy-collapsed rule with the singular point at barycentric vertex
/// `vertex`; the Jacobian of the collapse cancels a 1/r singularity there.
pub fn duffy(vertex: usize, n_radial: usize, n_angular: usize) -> Vec<TriPoint> {
    let gr = GaussLegendre::new(n_radial);
    let ga = GaussLegendre::new(n_angular);
    let mut out = Vec::with_capacity(n_radial * n_angular);
    let (o1, o2) = ((vertex + 1) % 3, (vertex + 2) % 3);
    for (s, ws) in gr.mapped(0.0, 1.0) {
        for (w, ww) in ga.mapped(0.0, 1.0) {
            let mut bary = [0.0; 3];
            bary[vertex] = 1.0 - s;
            bary[o1] = s * (1.0 - w);
            bary[o2] = s * w;
            // reference area 1/2 is factored out: weight = 2 * s * ws * ww / 2
            out.push(TriPoint { bary, weight: 2.0 * s * ws * ww });
        }
    }
    out
}
