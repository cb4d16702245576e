//! Data fields for the volume and initial potentials, with the spatial
//! quadrature rules that resolve them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{wake_weight, Point3, Vec3};
use crate::kernels::Mat3;
use crate::quadrature::gauss;

/// Relative size of the envelope at which global fields are truncated.
pub const TRUNCATION: f64 = 1e-10;

/// Quadrature nodes `(y, weight)` in space.
pub type VolumeRule = Vec<(Point3, f64)>;

fn bump3(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        q * q * q
    }
}

/// Quintic smoothstep: 0 below 0, 1 above 1, C² in between.
pub(crate) fn smooth_step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s2 = s * s;
        (s2 * s * (10.0 - 15.0 * s + 6.0 * s2), 30.0 * s2 * (1.0 - s) * (1.0 - s), 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s))
    }
}

/// `n` points per direction at quadrature level `level`.
pub(crate) fn points_per_level(level: u32) -> usize {
    4usize << level
}

fn sphere_directions(n_polar: usize) -> Vec<(Point3, f64)> {
    let g = gauss(n_polar);
    let n_az = 2 * n_polar;
    let mut out = Vec::with_capacity(n_polar * n_az);
    for (c, wc) in g.mapped(-1.0, 1.0) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for j in 0..n_az {
            let ph = 2.0 * PI * (j as f64 + 0.5) / n_az as f64;
            out.push((Point3::new(s * ph.cos(), s * ph.sin(), c), wc * 2.0 * PI / n_az as f64));
        }
    }
    out
}

/// Ball of radius `r` around `c`, resolving smooth fields on its own scale.
pub(crate) fn ball_rule(c: &Point3, r: f64, level: u32) -> VolumeRule {
    let n = points_per_level(level);
    let dirs = sphere_directions(n);
    let mut out = Vec::with_capacity(n * dirs.len());
    for (rho, wr) in gauss(n).mapped(0.0, r) {
        for (d, wd) in &dirs {
            out.push((c + rho * d, wr * rho * rho * wd));
        }
    }
    out
}

/// Ball of radius `outer` around `c` with radial panels doubling from
/// `inner`; resolves integrands concentrated at `c`.
pub(crate) fn centred_rule(c: &Point3, inner: f64, outer: f64, level: u32) -> VolumeRule {
    let n = points_per_level(level);
    let dirs = sphere_directions(n);
    let g = gauss((n / 2).max(4));
    let mut out = Vec::new();
    let mut lo = 0.0;
    let mut hi = inner.min(outer);
    loop {
        for (rho, wr) in g.mapped(lo, hi) {
            for (d, wd) in &dirs {
                out.push((c + rho * d, wr * rho * rho * wd));
            }
        }
        if hi >= outer {
            break;
        }
        lo = hi;
        hi = (2.0 * hi).min(outer);
        if outer < 1.25 * hi {
            hi = outer;
        }
    }
    out
}

/// Shell `core <= |y| <= outer` about the origin with radial panels doubling
/// from `core`. With `wake_grading` the polar angle about `+e1` is graded
/// toward the downstream axis, where `ν(y)^{-B}` concentrates.
pub(crate) fn shell_rule(core: f64, outer: f64, level: u32, wake_grading: bool) -> VolumeRule {
    let n = points_per_level(level);
    let g = gauss((n / 2).max(4));
    let mut radii = Vec::new();
    let (mut lo, mut hi) = (core, 2.0 * core);
    while lo < outer {
        hi = hi.min(outer);
        radii.extend(g.mapped(lo, hi));
        lo = hi;
        hi *= 2.0;
    }
    // directions as (unit vector, solid-angle weight), polar axis e1
    let n_az = 2 * n;
    let mut polar: Vec<(f64, f64)> = Vec::new();
    if wake_grading {
        let mut edges = vec![0.0, (1.0 / outer.sqrt()).clamp(1e-3, 0.2)];
        while *edges.last().unwrap() < PI {
            let next = (2.0 * edges.last().unwrap()).min(PI);
            edges.push(if PI - next < 0.25 * next { PI } else { next });
        }
        for w in edges.windows(2) {
            for (th, wt) in g.mapped(w[0], w[1]) {
                polar.push((th, wt * th.sin()));
            }
        }
    } else {
        for (c, wc) in gauss(n).mapped(-1.0, 1.0) {
            polar.push((c.acos(), wc));
        }
    }
    let mut out = Vec::with_capacity(radii.len() * polar.len() * n_az);
    for &(r, wr) in &radii {
        for &(th, wt) in &polar {
            let (st, ct) = th.sin_cos();
            for j in 0..n_az {
                let ph = 2.0 * PI * (j as f64 + 0.5) / n_az as f64;
                let y = r * Point3::new(ct, st * ph.cos(), st * ph.sin());
                out.push((y, wr * r * r * wt * 2.0 * PI / n_az as f64));
            }
        }
    }
    out
}

fn radius_checked(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return invalid(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

/// Force density `f(y, σ)` of the volume potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceField {
    /// `amplitude (1 - |y-c|²/R₀²)³ χ(σ/T₀)` on `B_{R₀}(c) × (0, T₀)` with
    /// `χ(s) = 16 s² (1-s)²`.
    CompactBump {
        center: [f64; 3],
        radius: f64,
        horizon: f64,
        amplitude: [f64; 3],
    },
    /// `amplitude (1+σ)^{-g} χ(|y|) (1+|y|²)^{-A/2} ν(y)^{-B}` where `χ`
    /// switches on between `core_radius` and twice that, so
    /// `|f| <= |amplitude| (1+σ)^{-g} |y|^{-A} ν(y)^{-B}`.
    WakeDecaying {
        amplitude: [f64; 3],
        spatial_exponent: f64,
        wake_exponent: f64,
        time_exponent: f64,
        core_radius: f64,
    },
    Superposition {
        parts: Vec<SourceField>,
    },
}

impl SourceField {
    pub fn validate(&self) -> Result<()> {
        match self {
            SourceField::CompactBump { radius, horizon, amplitude, center } => {
                radius_checked("source radius", *radius)?;
                radius_checked("source horizon", *horizon)?;
                if amplitude.iter().chain(center).any(|v| !v.is_finite()) {
                    return invalid("source amplitude and centre must be finite");
                }
            }
            SourceField::WakeDecaying { amplitude, spatial_exponent, wake_exponent, time_exponent, core_radius } => {
                radius_checked("source core radius", *core_radius)?;
                radius_checked("spatial exponent A", *spatial_exponent)?;
                if !(*wake_exponent >= 0.0) || !(*time_exponent >= 0.0) {
                    return invalid("wake and time exponents must be non-negative");
                }
                if amplitude.iter().any(|v| !v.is_finite()) {
                    return invalid("source amplitude must be finite");
                }
            }
            SourceField::Superposition { parts } => parts.iter().try_for_each(|p| p.validate())?,
        }
        Ok(())
    }

    /// The decay conditions `A + min{1, B} > 3` and `A + B >= 7/2` of the
    /// wake-decaying case; always true for compact parts.
    pub fn decay_conditions_hold(&self) -> bool {
        match self {
            SourceField::CompactBump { .. } => true,
            SourceField::WakeDecaying { spatial_exponent: a, wake_exponent: b, .. } => a + b.min(1.0) > 3.0 && a + b >= 3.5,
            SourceField::Superposition { parts } => parts.iter().all(|p| p.decay_conditions_hold()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceField::CompactBump { amplitude, .. } | SourceField::WakeDecaying { amplitude, .. } => {
                amplitude.iter().all(|&v| v == 0.0)
            }
            SourceField::Superposition { parts } => parts.iter().all(|p| p.is_zero()),
        }
    }

    /// End of the time support, if finite.
    pub fn horizon(&self) -> Option<f64> {
        match self {
            SourceField::CompactBump { horizon, .. } => Some(*horizon),
            SourceField::WakeDecaying { .. } => None,
            SourceField::Superposition { parts } => {
                parts.iter().map(|p| p.horizon()).try_fold(0.0f64, |acc, h| h.map(|h| acc.max(h)))
            }
        }
    }

    /// Scalar time factor of a single part.
    pub(crate) fn time_factor(&self, s: f64) -> f64 {
        match *self {
            SourceField::CompactBump { horizon, .. } => {
                let x = s / horizon;
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    16.0 * x * x * (1.0 - x) * (1.0 - x)
                }
            }
            SourceField::WakeDecaying { time_exponent, .. } => {
                if s <= 0.0 {
                    0.0
                } else {
                    (1.0 + s).powf(-time_exponent)
                }
            }
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    /// Scalar space factor of a single part.
    pub(crate) fn space_factor(&self, y: &Point3) -> f64 {
        match *self {
            SourceField::CompactBump { center, radius, .. } => bump3((y - Point3::from(center)).norm() / radius),
            SourceField::WakeDecaying { spatial_exponent, wake_exponent, core_radius, .. } => {
                let r = y.norm();
                let (chi, _, _) = smooth_step((r - core_radius) / core_radius);
                if chi == 0.0 {
                    return 0.0;
                }
                chi * (1.0 + r * r).powf(-0.5 * spatial_exponent) * wake_weight(y).powf(-wake_exponent)
            }
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    pub(crate) fn amplitude(&self) -> Vec3 {
        match self {
            SourceField::CompactBump { amplitude, .. } | SourceField::WakeDecaying { amplitude, .. } => Vec3::from(*amplitude),
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    /// Single (non-superposed) parts.
    pub(crate) fn parts(&self) -> Vec<&SourceField> {
        match self {
            SourceField::Superposition { parts } => parts.iter().flat_map(|p| p.parts()).collect(),
            other => vec![other],
        }
    }

    pub fn value(&self, y: &Point3, s: f64) -> Vec3 {
        self.parts().into_iter().map(|p| p.amplitude() * (p.space_factor(y) * p.time_factor(s))).sum()
    }

    /// Radius beyond which a wake-decaying part is below [`TRUNCATION`].
    pub(crate) fn truncation_radius(&self) -> f64 {
        match *self {
            SourceField::CompactBump { center, radius, .. } => Point3::from(center).norm() + radius,
            SourceField::WakeDecaying { spatial_exponent, .. } => {
                (TRUNCATION.powf(-2.0 / spatial_exponent) - 1.0).max(1.0).sqrt()
            }
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    /// Distance from `x` to the spatial support of a single part.
    pub(crate) fn support_distance(&self, x: &Point3) -> f64 {
        match *self {
            SourceField::CompactBump { center, radius, .. } => ((x - Point3::from(center)).norm() - radius).max(0.0),
            SourceField::WakeDecaying { core_radius, .. } => (core_radius - x.norm()).max(0.0),
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    /// Support-centred rule of a single part.
    pub(crate) fn source_rule(&self, level: u32) -> VolumeRule {
        match *self {
            SourceField::CompactBump { center, radius, .. } => ball_rule(&Point3::from(center), radius, level),
            SourceField::WakeDecaying { core_radius, wake_exponent, .. } => {
                shell_rule(core_radius, self.truncation_radius(), level, wake_exponent > 0.0)
            }
            SourceField::Superposition { .. } => unreachable!("superpositions are evaluated part by part"),
        }
    }

    /// `‖f‖_{q,s}`: `L^s` in time of the `L^q` norm in space (`s = ∞`
    /// allowed).
    pub fn norm_qs(&self, q: f64, s: f64) -> Result<f64> {
        if !(q >= 1.0) || !(s >= 1.0) {
            return invalid("norm exponents must be at least 1");
        }
        let parts = self.parts();
        if parts.len() != 1 {
            return invalid("mixed norms are only available for single fields");
        }
        let p = parts[0];
        let amp = p.amplitude().norm();
        let rule = p.source_rule(3);
        let space = rule.iter().map(|(y, w)| w * p.space_factor(y).abs().powf(q)).sum::<f64>().powf(1.0 / q);
        let time = match *p {
            SourceField::CompactBump { horizon, .. } => {
                if s.is_infinite() {
                    1.0
                } else {
                    gauss(32).integrate(0.0, horizon, |t| p.time_factor(t).powf(s)).powf(1.0 / s)
                }
            }
            SourceField::WakeDecaying { time_exponent, .. } => {
                if s.is_infinite() {
                    1.0
                } else if time_exponent * s <= 1.0 {
                    return Ok(f64::INFINITY);
                } else {
                    (1.0 / (time_exponent * s - 1.0)).powf(1.0 / s)
                }
            }
            SourceField::Superposition { .. } => unreachable!(),
        };
        Ok(amp * space * time)
    }
}

/// Initial velocity `a(y)` of the initial-data potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialField {
    /// `curl(ψ m)` with `ψ = R₀ (1 - |y-c|²/R₀²)⁴`; divergence free with
    /// zero mean.
    CompactBump {
        center: [f64; 3],
        radius: f64,
        axis: [f64; 3],
    },
    /// `curl(χ(|y|) (1+|y|²)^{-κ-1/2} m)`, vanishing inside `core_radius`;
    /// decays like `(|y|ν(y))^{-1-|α|/2-κ}` with its first derivatives.
    AlgebraicDecay {
        axis: [f64; 3],
        kappa: f64,
        core_radius: f64,
    },
    /// `amplitude (1 - |y-c|²/R₀²)³`. Not divergence free; carries the mass
    /// `amplitude · 64πR₀³/315`, which makes the `p = 1` heat decay sharp.
    MassBump {
        center: [f64; 3],
        radius: f64,
        amplitude: [f64; 3],
    },
    Superposition {
        parts: Vec<InitialField>,
    },
}

/// `ψ'(r)/r` and `(ψ'' - ψ'/r)/r²` of a radial potential.
struct Radial {
    p: f64,
    q: f64,
}

impl InitialField {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialField::CompactBump { radius, .. } | InitialField::MassBump { radius, .. } => {
                radius_checked("initial field radius", *radius)
            }
            InitialField::AlgebraicDecay { kappa, core_radius, .. } => {
                radius_checked("decay exponent kappa", *kappa)?;
                radius_checked("core radius", *core_radius)?;
                if *core_radius < 1.0 {
                    return invalid("core radius must be at least 1 so that |y|ν(y) <= 3|y|² on the support");
                }
                Ok(())
            }
            InitialField::Superposition { parts } => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InitialField::CompactBump { axis, .. } | InitialField::AlgebraicDecay { axis, .. } => axis.iter().all(|&v| v == 0.0),
            InitialField::MassBump { amplitude, .. } => amplitude.iter().all(|&v| v == 0.0),
            InitialField::Superposition { parts } => parts.iter().all(|p| p.is_zero()),
        }
    }

    pub fn is_solenoidal(&self) -> bool {
        match self {
            InitialField::MassBump { amplitude, .. } => amplitude.iter().all(|&v| v == 0.0),
            InitialField::Superposition { parts } => parts.iter().all(|p| p.is_solenoidal()),
            _ => true,
        }
    }

    pub(crate) fn parts(&self) -> Vec<&InitialField> {
        match self {
            InitialField::Superposition { parts } => parts.iter().flat_map(|p| p.parts()).collect(),
            other => vec![other],
        }
    }

    fn radial(&self, r: f64) -> Radial {
        match *self {
            InitialField::CompactBump { radius, .. } => {
                let s2 = r * r / (radius * radius);
                if s2 >= 1.0 {
                    return Radial { p: 0.0, q: 0.0 };
                }
                let w = 1.0 - s2;
                Radial { p: -8.0 / radius * w * w * w, q: 48.0 / radius.powi(3) * w * w }
            }
            InitialField::AlgebraicDecay { kappa, core_radius, .. } => {
                let (chi, dchi, ddchi) = smooth_step((r - core_radius) / core_radius);
                if chi == 0.0 && dchi == 0.0 {
                    return Radial { p: 0.0, q: 0.0 };
                }
                let (dchi, ddchi) = (dchi / core_radius, ddchi / (core_radius * core_radius));
                let k = kappa + 0.5;
                let b = 1.0 + r * r;
                let g = b.powf(-k);
                let dg = -2.0 * k * r * g / b;
                let ddg = -2.0 * k * g / b + 4.0 * k * (k + 1.0) * r * r * g / (b * b);
                let d1 = dchi * g + chi * dg;
                let d2 = ddchi * g + 2.0 * dchi * dg + chi * ddg;
                let p = d1 / r;
                Radial { p, q: (d2 - p) / (r * r) }
            }
            _ => unreachable!("not a curl field"),
        }
    }

    fn centre_axis(&self) -> (Point3, Vec3) {
        match *self {
            InitialField::CompactBump { center, axis, .. } => (Point3::from(center), Vec3::from(axis)),
            InitialField::AlgebraicDecay { axis, .. } => (Point3::zeros(), Vec3::from(axis)),
            _ => unreachable!("not a curl field"),
        }
    }

    pub(crate) fn value_part(&self, y: &Point3) -> Vec3 {
        match *self {
            InitialField::MassBump { center, radius, amplitude } => {
                Vec3::from(amplitude) * bump3((y - Point3::from(center)).norm() / radius)
            }
            InitialField::Superposition { .. } => unreachable!(),
            _ => {
                let (c, m) = self.centre_axis();
                let z = y - c;
                let rad = self.radial(z.norm());
                (rad.p * z).cross(&m)
            }
        }
    }

    pub fn value(&self, y: &Point3) -> Vec3 {
        self.parts().into_iter().map(|p| p.value_part(y)).sum()
    }

    /// `J[(j, k)] = ∂_j a_k`.
    pub fn gradient(&self, y: &Point3) -> Mat3 {
        let mut out = Mat3::zeros();
        for part in self.parts() {
            match *part {
                InitialField::MassBump { center, radius, amplitude } => {
                    let z = y - Point3::from(center);
                    let s2 = z.norm_squared() / (radius * radius);
                    if s2 < 1.0 {
                        let w = 1.0 - s2;
                        let grad = -6.0 * w * w / (radius * radius) * z;
                        out += grad * Vec3::from(amplitude).transpose();
                    }
                }
                _ => {
                    let (c, m) = part.centre_axis();
                    let z = y - c;
                    let rad = part.radial(z.norm());
                    // ∂_j (∇ψ × m)_k with ∂_j ∂_i ψ = p δ_ij + q z_i z_j
                    for j in 0..3 {
                        let row = rad.p * Vec3::ith(j, 1.0) + rad.q * z[j] * z;
                        let d = row.cross(&m);
                        for k in 0..3 {
                            out[(j, k)] += d[k];
                        }
                    }
                }
            }
        }
        out
    }

    /// Constant `δ₀` with `|∂^α a(y)| <= δ₀ (|y|ν(y))^{-1-|α|/2-κ₀}` for
    /// `|α| <= 1`, from explicit bounds on the radial potential.
    pub fn decay_constant(&self) -> Option<(f64, f64)> {
        match *self {
            InitialField::AlgebraicDecay { axis, kappa, .. } => {
                let k = kappa + 0.5;
                let m = Vec3::from(axis).norm();
                // |ψ'| <= c1 r^{-2k-1}, |∇²ψ| <= c2 r^{-2k-2} on r >= core >= 1
                let c1 = 15.0 / 4.0 + 2.0 * k;
                let c2 = 4.0 * 10.0 / 3f64.sqrt() + 2.0 * (15.0 / 4.0) * 2.0 * k + 2.0 * k * (2.0 * k + 3.0) + c1;
                // factor 2 covers the Frobenius norm of the rank-limited gradient
                let d = 2.0 * (c1 * 3f64.powf(1.0 + kappa)).max(c2 * 3f64.powf(1.5 + kappa));
                Some((m * d, kappa))
            }
            _ => None,
        }
    }

    /// Smallest integrability exponent: `a ∈ L^p` for `p` above it (or equal
    /// for compact fields).
    pub fn min_integrability(&self) -> f64 {
        self.parts()
            .iter()
            .map(|p| match **p {
                InitialField::AlgebraicDecay { kappa, .. } => (3.0 / (2.0 + 2.0 * kappa)).max(1.0),
                _ => 1.0,
            })
            .fold(1.0, f64::max)
    }

    pub(crate) fn truncation_radius(&self) -> f64 {
        match *self {
            InitialField::AlgebraicDecay { kappa, .. } => TRUNCATION.powf(-1.0 / (2.0 + 2.0 * kappa)),
            InitialField::CompactBump { center, radius, .. } | InitialField::MassBump { center, radius, .. } => {
                Point3::from(center).norm() + radius
            }
            InitialField::Superposition { .. } => unreachable!(),
        }
    }

    pub(crate) fn source_rule(&self, level: u32) -> VolumeRule {
        match *self {
            InitialField::CompactBump { center, radius, .. } | InitialField::MassBump { center, radius, .. } => {
                ball_rule(&Point3::from(center), radius, level)
            }
            InitialField::AlgebraicDecay { core_radius, .. } => shell_rule(core_radius, self.truncation_radius(), level, false),
            InitialField::Superposition { .. } => unreachable!(),
        }
    }

    /// Rule centred at the heat kernel peak `p` (width `√t`) when the
    /// support-centred rule is too coarse there.
    pub(crate) fn local_rule(&self, p: &Point3, width: f64, level: u32) -> Option<VolumeRule> {
        let n = points_per_level(level) as f64;
        match *self {
            InitialField::CompactBump { center, radius, .. } | InitialField::MassBump { center, radius, .. } => {
                let d = (p - Point3::from(center)).norm();
                if width < 0.25 * radius && d < radius + 8.0 * width {
                    Some(centred_rule(p, 0.5 * width, 10.0 * width, level))
                } else {
                    None
                }
            }
            InitialField::AlgebraicDecay { core_radius, .. } => {
                let spacing = p.norm().max(core_radius) * PI / n;
                if width < 0.5 * spacing {
                    Some(centred_rule(p, 0.5 * width, 10.0 * width, level))
                } else {
                    None
                }
            }
            InitialField::Superposition { .. } => unreachable!(),
        }
    }

    /// `‖a‖_p` by quadrature.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return invalid("integrability exponent must be at least 1");
        }
        let parts = self.parts();
        if parts.len() != 1 {
            return invalid("norms are only available for single fields");
        }
        if p <= self.min_integrability() && matches!(parts[0], InitialField::AlgebraicDecay { .. }) {
            return Ok(f64::INFINITY);
        }
        let rule = parts[0].source_rule(3);
        Ok(rule.iter().map(|(y, w)| w * parts[0].value_part(y).norm().powf(p)).sum::<f64>().powf(1.0 / p))
    }

    /// `∫ a dy`.
    pub fn mass(&self) -> Vec3 {
        self.parts()
            .into_iter()
            .map(|p| match *p {
                InitialField::MassBump { radius, amplitude, .. } => Vec3::from(amplitude) * (64.0 * PI * radius.powi(3) / 315.0),
                _ => Vec3::zeros(),
            })
            .sum()
    }
}
