//! Scaling probe for windowed convolutions of `|∂^α Λ|` with a source.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::{ball_rule, centred_rule, SourceField};
use super::volume::lag_rule;
use crate::error::{invalid, Error, Result};
use crate::geometry::{MultiIndex, Point3, Vec3};
use crate::kernels::oseen_unchecked;
use crate::quadrature::gauss;

/// Range of the time lag `t - σ` kept by the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// `(0, M)`
    Below,
    /// `(M, ∞)`
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Spatial integrability of the source, in `[1, ∞)`.
    pub q: f64,
    /// Temporal integrability of the source, in `[1, ρ]`.
    pub s: f64,
    /// Outer time exponent, in `(1, ∞]`.
    pub rho: f64,
    pub alpha: [u8; 3],
    pub window: Window,
    /// Window sizes compared; the source is rescaled parabolically with them.
    pub m_pair: (f64, f64),
    pub tau: f64,
    /// Base quadrature level (checked against one level finer).
    pub level: u32,
    pub tolerance: f64,
}

impl ProbeParams {
    pub fn new(q: f64, s: f64, rho: f64, alpha: [u8; 3], window: Window) -> Self {
        Self { q, s, rho, alpha, window, m_pair: (1.0, 2.0), tau: 1.0, level: 1, tolerance: 0.02 }
    }

    /// `1 - |α|/2 - 3/(2q) - 1/s + 1/ρ`.
    pub fn exponent(&self) -> f64 {
        let a: f64 = self.alpha.iter().map(|&v| v as f64).sum();
        1.0 - 0.5 * a - 1.5 / self.q - 1.0 / self.s + 1.0 / self.rho
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return invalid(format!("q must lie in [1, ∞), got {}", self.q));
        }
        if !(self.rho > 1.0) {
            return invalid(format!("rho must lie in (1, ∞], got {}", self.rho));
        }
        if !(self.s >= 1.0) || self.s > self.rho {
            return invalid(format!("s must lie in [1, rho], got {}", self.s));
        }
        if self.alpha.iter().map(|&v| v as u32).sum::<u32>() > 1 {
            return invalid("only |alpha| <= 1 is covered");
        }
        let (m1, m2) = self.m_pair;
        if !(m1 > 0.0) || !(m2 > m1) || !m2.is_finite() {
            return invalid("window sizes must satisfy 0 < M1 < M2 < ∞");
        }
        if !(self.tau >= 0.0) {
            return invalid("Reynolds number must be non-negative");
        }
        let e = self.exponent();
        match self.window {
            Window::Below if e <= 0.0 => invalid(format!("exponent {e} is not positive; the window (0, M) does not apply")),
            Window::Above if e >= 0.0 => invalid(format!("exponent {e} is not negative; the window (M, ∞) does not apply")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub theorem_exponent: f64,
    /// `log(J₂/‖h₂‖ ÷ J₁/‖h₁‖) / log(M₂/M₁)`.
    pub measured_exponent: f64,
    /// Windowed convolution norms at `M₁`, `M₂`.
    pub convolution: (f64, f64),
    /// `‖h‖_{q,s}` of the two rescaled sources.
    pub source_norm: (f64, f64),
    /// Largest relative change under refinement.
    pub refinement: f64,
    pub pass: bool,
}

/// Tolerance on the measured exponent.
pub const PROBE_MARGIN: f64 = 0.1;

struct Bump {
    center: Point3,
    radius: f64,
    horizon: f64,
    field: SourceField,
}

impl Bump {
    fn scaled(h: &SourceField, lambda: f64) -> Result<Self> {
        match *h {
            SourceField::CompactBump { center, radius, horizon, amplitude } => {
                let field =
                    SourceField::CompactBump { center, radius: radius * lambda.sqrt(), horizon: horizon * lambda, amplitude };
                Ok(Bump { center: Point3::from(center), radius: radius * lambda.sqrt(), horizon: horizon * lambda, field })
            }
            _ => invalid("the scaling probe needs a single compact-bump source"),
        }
    }

    fn modulus(&self, y: &Point3, sigma: f64) -> f64 {
        self.field.space_factor(y) * self.field.time_factor(sigma)
    }
}

/// Sample targets in units of the support radius and horizon.
fn base_samples(window: Window) -> Vec<(Vec3, f64)> {
    let offsets = [
        Vec3::zeros(),
        Vec3::new(0.5, 0.0, 0.0),
        Vec3::new(-0.5, 0.0, 0.0),
        Vec3::new(0.0, 0.5, 0.0),
        Vec3::new(2.0, 0.0, 0.0),
        Vec3::new(-2.0, 0.0, 0.0),
        Vec3::new(0.0, 2.0, 0.0),
    ];
    // times in horizons, shifted by the window size for (M, ∞)
    let times: &[f64] = match window {
        Window::Below => &[0.5, 1.0, 1.5, 2.0, 3.0],
        Window::Above => &[1.5, 2.0, 3.0, 5.0, 8.0],
    };
    offsets.iter().flat_map(|o| times.iter().map(move |&t| (*o, t))).collect()
}

/// `max_jk ∫∫ χ_W(t-σ) |∂^α Λ_jk(x-y, t-σ)| |h(y,σ)| dy dσ`.
fn windowed(b: &Bump, x: &Point3, t: f64, m: f64, p: &ProbeParams, d: MultiIndex, level: u32) -> f64 {
    let (wlo, whi) = match p.window {
        Window::Below => (0.0, m),
        Window::Above => (m, f64::INFINITY),
    };
    let ua = wlo.max(t - b.horizon).max(0.0);
    let ub = whi.min(t);
    if ub <= ua {
        return 0.0;
    }
    let dist = ((x - b.center).norm() - b.radius).max(0.0);
    let far = dist > 0.5 * b.radius;
    let source = ball_rule(&b.center, b.radius, level);
    let mut acc = [0.0; 9];
    for (u, wu) in lag_rule(dist, ua, ub, 4 + 2 * level as usize) {
        let sigma = t - u;
        let local;
        let rule = if far {
            &source
        } else {
            let outer = (x - b.center).norm() + b.radius;
            local = centred_rule(x, 0.25 * u.sqrt().min(b.radius), outer, level);
            &local
        };
        for (y, w) in rule {
            let hm = b.modulus(y, sigma);
            if hm == 0.0 {
                continue;
            }
            let k = oseen_unchecked(&(x - y), u, p.tau, d);
            for (a, v) in acc.iter_mut().zip(k.iter()) {
                *a += wu * w * hm * v.abs();
            }
        }
    }
    acc.iter().fold(0.0, |a, &v| a.max(v))
}

/// `sup` over the samples (`ρ = ∞`) or `sup_x` of the `L^ρ` norm in `t`.
fn convolution_norm(b: &Bump, m: f64, p: &ProbeParams, level: u32) -> f64 {
    let d = MultiIndex { alpha: p.alpha, l: 0 };
    let samples = base_samples(p.window);
    let shift = if p.window == Window::Above { m } else { 0.0 };
    if p.rho.is_infinite() {
        return samples
            .par_iter()
            .map(|(o, tt)| {
                let x = b.center + b.radius * o;
                windowed(b, &x, tt * b.horizon + shift, m, p, d, level)
            })
            .reduce(|| 0.0, f64::max);
    }
    // L^ρ in time over (0, t_max]; the tail past t_max is dropped
    let t_max = 64.0 * (b.horizon + m);
    let g = gauss(8);
    let mut edges = vec![0.0, b.horizon.min(m) / 8.0];
    while *edges.last().unwrap() < t_max {
        edges.push((2.0 * edges.last().unwrap()).min(t_max));
    }
    let nodes: Vec<(f64, f64)> = edges.windows(2).flat_map(|e| g.mapped(e[0], e[1]).collect::<Vec<_>>()).collect();
    let mut xs: Vec<Vec3> = samples.iter().map(|s| s.0).collect();
    xs.dedup();
    xs.par_iter()
        .map(|o| {
            let x = b.center + b.radius * o;
            nodes.iter().map(|&(t, w)| w * windowed(b, &x, t, m, p, d, level).powf(p.rho)).sum::<f64>().powf(1.0 / p.rho)
        })
        .reduce(|| 0.0, f64::max)
}

/// Measures how the windowed convolution norm of `|∂^α Λ|` against a
/// compact source scales when the window and the source are rescaled
/// together (`h_M(y, σ) = h(c + (y-c)/√M, σ/M)`), and compares with the
/// theorem exponent. For `τ = 0` the measured exponent equals the theorem
/// exponent; the drift only lowers it.
pub fn convolution_scaling_probe(p: &ProbeParams, h: &SourceField) -> Result<ScalingProbe> {
    p.validate()?;
    let (m1, m2) = p.m_pair;
    let b1 = Bump::scaled(h, 1.0)?;
    let b2 = Bump::scaled(h, m2 / m1)?;
    if h.is_zero() {
        return invalid("the scaling probe needs a nonzero source");
    }
    let mut refinement = 0.0f64;
    let mut measure = |b: &Bump, m: f64| -> Result<f64> {
        let coarse = convolution_norm(b, m, p, p.level);
        let fine = convolution_norm(b, m, p, p.level + 1);
        let diff = (fine - coarse).abs() / fine.max(f64::MIN_POSITIVE);
        refinement = refinement.max(diff);
        if diff > p.tolerance {
            return Err(Error::Quadrature(format!("windowed convolution changed by {diff:.2e} under refinement")));
        }
        Ok(fine)
    };
    let j1 = measure(&b1, m1)?;
    let j2 = measure(&b2, m2)?;
    let n1 = b1.field.norm_qs(p.q, p.s)?;
    let n2 = b2.field.norm_qs(p.q, p.s)?;
    let measured = ((j2 / n2) / (j1 / n1)).ln() / (m2 / m1).ln();
    let theorem = p.exponent();
    Ok(ScalingProbe {
        theorem_exponent: theorem,
        measured_exponent: measured,
        convolution: (j1, j2),
        source_norm: (n1, n2),
        refinement,
        pass: measured <= theorem + PROBE_MARGIN,
    })
}
