use log::warn;
use serde::{Deserialize, Serialize};

use super::half::{abel_weights, apply_abel};
use super::norms::{h1_boundary_norm, RieszMap};
use super::BoundaryTrace;
use crate::decay_lab::{fit_power_law, FitCheck, FitOptions};
use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;

/// Largest acceptable share of the extrapolated tail in the total.
pub const TAIL_SHARE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailParts {
    /// `(∫ ‖Ψ(t)‖²_{H¹} dt)^{1/2}`
    pub h1: f64,
    /// `(∫ ‖∂_4W(t)‖²_2 dt)^{1/2}` with `W = ∫_0^t (t-r)^{-1/2} Ψ(r) dr`
    pub half_derivative: f64,
    /// `(∫ ‖n·∂_tΨ(t)‖²_{H¹'} dt)^{1/2}`
    pub normal_dt_dual: f64,
}

/// Power law fitted to the late integrand of one part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub r2: f64,
    /// Analytic integral of the fitted law beyond the last sample.
    pub extrapolated: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HTailNorm {
    pub lower: f64,
    pub total: f64,
    pub parts: TailParts,
    /// Last sample time; beyond it the fitted tails are used.
    pub t_max: f64,
    /// Share of `total²` contributed by the extrapolated tails.
    pub tail_share: f64,
    /// `None` for parts that vanish identically.
    pub fits: [Option<TailFit>; 3],
    /// Whether `∂_tΨ` came from finite differences of the samples.
    pub differenced_dt: bool,
}

impl HTailNorm {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `∫_a^b f` for `f` positive and locally a power law, else trapezoidal.
fn power_segment(a: f64, b: f64, fa: f64, fb: f64) -> f64 {
    if fa > 0.0 && fb > 0.0 && a > 0.0 {
        let p = (fb / fa).ln() / (b / a).ln();
        if (p + 1.0).abs() > 1e-9 {
            fa * a / (p + 1.0) * ((b / a).powf(p + 1.0) - 1.0)
        } else {
            fa * a * (b / a).ln()
        }
    } else {
        0.5 * (b - a) * (fa + fb)
    }
}

fn integrate(lower: f64, ts: &[f64], fs: &[f64]) -> f64 {
    // the first sample past `lower` is extended linearly back to it
    let slope = (fs[1] - fs[0]) / (ts[1] - ts[0]);
    let f_lower = (fs[0] - slope * (ts[0] - lower)).max(0.0);
    let mut s = 0.5 * (ts[0] - lower) * (f_lower + fs[0]);
    for k in 1..ts.len() {
        s += power_segment(ts[k - 1], ts[k], fs[k - 1], fs[k]);
    }
    s
}

fn tail_fit(ts: &[f64], fs: &[f64]) -> Result<Option<TailFit>> {
    if fs.iter().all(|&f| f == 0.0) {
        return Ok(None);
    }
    let t_max = *ts.last().unwrap();
    let mut from = ts.partition_point(|&t| t < 0.25 * t_max);
    from = from.min(ts.len().saturating_sub(3));
    let opts = FitOptions { predicted: -1.0, tolerance: 0.0, check: FitCheck::Bound, min_points: 3, knee: false };
    let fit = fit_power_law(&ts[from..], &fs[from..], opts)?;
    if fit.slope >= -1.0 {
        return Err(Error::Fit(format!("tail integrand decays like t^{:.3}, which is not integrable", fit.slope)));
    }
    let f_last = *fs.last().unwrap();
    Ok(Some(TailFit { slope: fit.slope, r2: fit.r2, extrapolated: f_last * t_max / (-fit.slope - 1.0) }))
}

/// `‖Ψ|S_{T,∞}‖_{H_{T,∞}}` from the trace samples past `T`, with the part
/// beyond the last sample extrapolated from fitted power laws.
///
/// `∂_tΨ` is taken from the trace when attached, otherwise from second-order
/// differences of the samples.
pub fn h_tail_norm_with(trace: &BoundaryTrace, lower: f64, riesz: &RieszMap) -> Result<HTailNorm> {
    let mesh = &*trace.mesh;
    if riesz.len() != mesh.len() {
        return invalid("Riesz map built for a different mesh");
    }
    let t_max = *trace.times.last().ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let zero_parts = TailParts { h1: 0.0, half_derivative: 0.0, normal_dt_dual: 0.0 };
    if trace.values.iter().all(|v| *v == Vec3::zeros()) {
        return Ok(HTailNorm {
            lower,
            total: 0.0,
            parts: zero_parts,
            t_max,
            tail_share: 0.0,
            fits: [None; 3],
            differenced_dt: false,
        });
    }
    let first = trace.times.partition_point(|&t| t <= lower * (1.0 + 1e-12));
    if trace.times.len() - first < 3 {
        return invalid(format!("fewer than three trace samples after T = {lower}"));
    }
    let differenced_dt = trace.dt_values.is_none();
    let filled;
    let trace = if differenced_dt {
        warn!("no time derivative attached to the trace; using finite differences");
        filled = trace.clone().with_dt(trace.differenced_dt()?)?;
        &filled
    } else {
        trace
    };
    let ts = &trace.times[first..];
    let mut f = [Vec::new(), Vec::new(), Vec::new()];
    for (k, &t) in ts.iter().enumerate() {
        let m = first + k;
        f[0].push(h1_boundary_norm(mesh, riesz, trace.slice(m), trace.gradient_slice(m))?.powi(2));
        let (wv, wd) = abel_weights(&trace.times, lower, t)?;
        let w = apply_abel(trace, &wv, &wd)?;
        f[1].push(w.iter().zip(&mesh.weights).map(|(v, a)| a * v.norm_squared()).sum::<f64>());
        let d = trace.dt_slice(m).expect("time derivative attached above");
        let normal: Vec<f64> = d.iter().zip(&mesh.normals).map(|(v, n)| v.dot(n)).collect();
        f[2].push(riesz.dual_norm(&riesz.loads(&normal)?)?.powi(2));
    }
    let mut squares = [0.0; 3];
    let mut fits = [None; 3];
    let mut tail = 0.0;
    for p in 0..3 {
        let fit = tail_fit(ts, &f[p])?;
        let extra = fit.map_or(0.0, |x| x.extrapolated);
        squares[p] = integrate(lower, ts, &f[p]) + extra;
        tail += extra;
        fits[p] = fit;
    }
    let total2: f64 = squares.iter().sum();
    let tail_share = if total2 > 0.0 { tail / total2 } else { 0.0 };
    if tail_share > TAIL_SHARE {
        warn!("extrapolated tail carries {:.1}% of the norm at T = {lower}", 100.0 * tail_share);
    }
    Ok(HTailNorm {
        lower,
        total: total2.sqrt(),
        parts: TailParts { h1: squares[0].sqrt(), half_derivative: squares[1].sqrt(), normal_dt_dual: squares[2].sqrt() },
        t_max,
        tail_share,
        fits,
        differenced_dt,
    })
}

pub fn h_tail_norm(trace: &BoundaryTrace, lower: f64) -> Result<HTailNorm> {
    h_tail_norm_with(trace, lower, &RieszMap::new(&trace.mesh)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_segments_are_exact_for_power_laws() {
        let f = |t: f64| t.powf(-2.5);
        let exact = (1.0f64.powf(-1.5) - 3.0f64.powf(-1.5)) / 1.5;
        assert!((power_segment(1.0, 3.0, f(1.0), f(3.0)) - exact).abs() < 1e-14);
        let g = |t: f64| 1.0 / t;
        assert!((power_segment(2.0, 5.0, g(2.0), g(5.0)) - (2.5f64).ln()).abs() < 1e-14);
        assert_eq!(power_segment(0.0, 1.0, 0.0, 2.0), 1.0);
    }

    #[test]
    fn slow_tails_are_flagged() {
        let ts: Vec<f64> = (1..20).map(|k| k as f64).collect();
        let fs: Vec<f64> = ts.iter().map(|t| t.powf(-0.8)).collect();
        assert!(tail_fit(&ts, &fs).is_err());
        let fs: Vec<f64> = ts.iter().map(|t| t.powf(-3.0)).collect();
        let fit = tail_fit(&ts, &fs).unwrap().unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-10);
        assert!((fit.extrapolated - 0.5 * 19f64.powi(-2)).abs() < 1e-12);
    }
}
