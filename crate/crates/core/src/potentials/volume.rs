use serde::{Deserialize, Serialize};

use super::fields::{InitialField, SourceField, VolumeRule};
use crate::error::{invalid, Error, Result};
use crate::geometry::{MultiIndex, Point3, Vec3};
use crate::kernels::{heat, oseen_sym, oseen_unchecked, Mat3};
use crate::quadrature::gauss;

/// Accuracy controls shared by the volume and initial potentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialOptions {
    /// Base quadrature level; the check compares it with `level + 1`.
    pub level: u32,
    /// Relative self-convergence tolerance.
    pub tolerance: f64,
    /// Differences below this absolute size count as converged.
    pub abs_floor: f64,
    pub check: bool,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self { level: 1, tolerance: 0.01, abs_floor: 1e-14, check: true }
    }
}

/// A potential value with its self-convergence record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    /// Value at the finest level computed.
    pub value: Vec3,
    /// `|v_fine - v_coarse| / |v_fine|` (zero when unchecked).
    pub difference: f64,
    pub converged: bool,
}

fn check_target(x: &Point3, t: f64, d: MultiIndex) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("evaluation time must be positive, got {t}"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("evaluation point must be finite");
    }
    if d.order() > 1 {
        return invalid(format!("derivative order {} not supported", d.order()));
    }
    Ok(())
}

fn self_converged(opts: &PotentialOptions, mut at: impl FnMut(u32) -> Vec3) -> Evaluation {
    let coarse = at(opts.level);
    if !opts.check {
        return Evaluation { value: coarse, difference: 0.0, converged: true };
    }
    let fine = at(opts.level + 1);
    let diff = (fine - coarse).norm();
    let scale = fine.norm();
    let difference = if scale > 0.0 { diff / scale } else { 0.0 };
    let converged = diff <= opts.tolerance * scale || diff <= opts.abs_floor;
    Evaluation { value: fine, difference, converged }
}

fn into_result(e: Evaluation, what: &str) -> Result<Vec3> {
    if e.converged {
        Ok(e.value)
    } else {
        Err(Error::Quadrature(format!("{what}: refinement changed the value by {:.2e} (relative)", e.difference)))
    }
}

/// Lag nodes on `[ua, ub]` graded toward `ua` below the scale `dist²`.
pub(crate) fn lag_rule(dist: f64, ua: f64, ub: f64, order: usize) -> Vec<(f64, f64)> {
    let g = gauss(order);
    let mut out = Vec::new();
    if ub <= ua {
        return out;
    }
    let floor = (dist * dist / 64.0).max(ub * 1e-6);
    let mut lo = ua;
    if ua < floor {
        let hi = floor.min(ub);
        out.extend(g.mapped(ua, hi));
        lo = hi;
    }
    while lo < ub {
        let mut hi = (2.0 * lo).min(ub);
        if ub < 1.25 * hi {
            hi = ub;
        }
        out.extend(g.mapped(lo, hi));
        lo = hi;
    }
    out
}

/// `∂_t^l ∂_x^α R(f)(x, t) = ∫_0^t ∫ ∂^α Λ(x - y, t - σ, τ) f(y, σ) dy dσ`.
///
/// Time derivatives are available past the time support of `f` only.
pub fn eval_volume_potential(f: &SourceField, x: &Point3, t: f64, tau: f64, d: MultiIndex) -> Result<Vec3> {
    into_result(eval_volume_potential_with(f, x, t, tau, d, &PotentialOptions::default())?, "volume potential")
}

pub fn eval_volume_potential_with(
    f: &SourceField,
    x: &Point3,
    t: f64,
    tau: f64,
    d: MultiIndex,
    opts: &PotentialOptions,
) -> Result<Evaluation> {
    check_target(x, t, d)?;
    if !(tau >= 0.0) {
        return invalid("Reynolds number must be non-negative");
    }
    if d.l == 1 {
        match f.horizon() {
            Some(h) if t > h => {}
            _ => return invalid("time derivative of the volume potential needs t beyond the source horizon"),
        }
    }
    if f.is_zero() {
        return Ok(Evaluation { value: Vec3::zeros(), difference: 0.0, converged: true });
    }
    let parts = f.parts();
    Ok(self_converged(opts, |level| parts.iter().map(|p| volume_part(p, x, t, tau, d, level)).sum()))
}

fn accumulate(
    rule: &[(Point3, f64)],
    x: &Point3,
    u: f64,
    tau: f64,
    d: MultiIndex,
    mut weight: impl FnMut(&Point3) -> f64,
) -> Mat3 {
    if d.order() == 0 {
        let mut s = [0.0; 6];
        for (y, w) in rule {
            let c = w * weight(y);
            if c == 0.0 {
                continue;
            }
            let k = oseen_sym(&(x - y), u, tau);
            for q in 0..6 {
                s[q] += c * k[q];
            }
        }
        Mat3::new(s[0], s[3], s[4], s[3], s[1], s[5], s[4], s[5], s[2])
    } else {
        let mut m = Mat3::zeros();
        for (y, w) in rule {
            let c = w * weight(y);
            if c != 0.0 {
                m += c * oseen_unchecked(&(x - y), u, tau, d);
            }
        }
        m
    }
}

fn volume_part(f: &SourceField, x: &Point3, t: f64, tau: f64, d: MultiIndex, level: u32) -> Vec3 {
    if f.amplitude() == Vec3::zeros() {
        return Vec3::zeros();
    }
    let ua = f.horizon().map_or(0.0, |h| (t - h).max(0.0));
    let lags = lag_rule(f.support_distance(x), ua, t, 4 + 2 * level as usize);
    let source: VolumeRule = f.source_rule(level);
    let mut acc = Mat3::zeros();
    for (u, wu) in lags {
        let tf = f.time_factor(t - u);
        if tf == 0.0 {
            continue;
        }
        let inner = accumulate(&source, x, u, tau, d, |y| f.space_factor(y));
        acc += (wu * tf) * inner;
    }
    acc * f.amplitude()
}

/// `∂_t^l ∂_x^α I(a)(x, t) = ∫ ∂^α 𝔥(x - y - τt e1, t) a(y) dy`.
pub fn eval_initial_potential(a: &InitialField, x: &Point3, t: f64, tau: f64, d: MultiIndex) -> Result<Vec3> {
    into_result(eval_initial_potential_with(a, x, t, tau, d, &PotentialOptions::default())?, "initial potential")
}

pub fn eval_initial_potential_with(
    a: &InitialField,
    x: &Point3,
    t: f64,
    tau: f64,
    d: MultiIndex,
    opts: &PotentialOptions,
) -> Result<Evaluation> {
    check_target(x, t, d)?;
    if !(tau >= 0.0) {
        return invalid("Reynolds number must be non-negative");
    }
    if a.is_zero() {
        return Ok(Evaluation { value: Vec3::zeros(), difference: 0.0, converged: true });
    }
    let parts = a.parts();
    Ok(self_converged(opts, |level| parts.iter().map(|p| initial_part(p, x, t, tau, d, level)).sum()))
}

fn initial_part(a: &InitialField, x: &Point3, t: f64, tau: f64, d: MultiIndex, level: u32) -> Vec3 {
    let p = Point3::new(x[0] - tau * t, x[1], x[2]);
    let rule = a.local_rule(&p, t.sqrt(), level).unwrap_or_else(|| a.source_rule(level));
    let mut acc = Vec3::zeros();
    for (y, w) in &rule {
        let z = p - y;
        let r2 = z.norm_squared();
        let h = heat(r2, t);
        if h == 0.0 {
            continue;
        }
        let k = if d.l == 1 {
            h * (r2 / (4.0 * t * t) - 1.5 / t + tau * z[0] / (2.0 * t))
        } else if let Some(i) = d.direction() {
            -z[i] / (2.0 * t) * h
        } else {
            h
        };
        acc += (w * k) * a.value_part(y);
    }
    acc
}
