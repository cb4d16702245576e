use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decay_lab::{fit_power_law, DecayFit, FitCheck, FitOptions};
use crate::error::{invalid, Result};
use crate::geometry::{MultiIndex, Vec3};
use crate::potentials::{eval_single_layer, SurfaceDensity, Target};

/// Fraction of the horizon excluded from tail fits.
pub const HORIZON_GUARD: f64 = 0.2;
pub const TAIL_TOLERANCE: f64 = 0.2;
pub const TAIL_MIN_POINTS: usize = 4;

/// Exterior values `V(φ)(x + δn, t)` against the on-surface trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConsistency {
    pub offsets: Vec<f64>,
    /// Relative mismatch of the raw exterior values, one per offset.
    pub mismatch: Vec<f64>,
    /// Relative mismatch of the values extrapolated to offset zero.
    pub extrapolated: f64,
}

/// Where [`trace_consistency`] samples: node indices (all nodes when
/// empty), times and the Reynolds number.
#[derive(Clone, Debug)]
pub struct TraceProbe {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub tau: f64,
}

/// Weights of the polynomial through `(offsets[i], ·)` evaluated at zero.
fn extrapolation_weights(offsets: &[f64]) -> Vec<f64> {
    (0..offsets.len())
        .map(|i| offsets.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d / (d - offsets[i])).product())
        .collect()
}

pub fn trace_consistency(phi: &SurfaceDensity, offsets: &[f64], probe: &TraceProbe) -> Result<TraceConsistency> {
    let mesh = &*phi.mesh;
    if offsets.is_empty() || offsets.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("offsets must be non-empty and strictly decreasing");
    }
    let smallest = *offsets.last().unwrap();
    if smallest < 0.5 * mesh.h {
        return invalid(format!("smallest offset {smallest} is below half the mesh size {}", 0.5 * mesh.h));
    }
    if probe.times.is_empty() {
        return invalid("no probe times");
    }
    let nodes: Vec<usize> = if probe.nodes.is_empty() { (0..mesh.len()).collect() } else { probe.nodes.clone() };
    if nodes.iter().any(|&n| n >= mesh.len()) {
        return invalid("probe node out of range");
    }
    if phi.is_zero() {
        return Ok(TraceConsistency { offsets: offsets.to_vec(), mismatch: vec![0.0; offsets.len()], extrapolated: 0.0 });
    }
    let weights = extrapolation_weights(offsets);
    let pairs: Vec<(usize, f64)> = nodes.iter().flat_map(|&n| probe.times.iter().map(move |&t| (n, t))).collect();
    // (on-surface value, exterior values per offset)
    let samples: Vec<(Vec3, Vec<Vec3>)> = pairs
        .par_iter()
        .map(|&(n, t)| {
            let on = eval_single_layer(phi, Target::Node(n), t, probe.tau, MultiIndex::ZERO)?;
            let x = mesh.nodes[n];
            let nrm = mesh.normals[n];
            let off = offsets
                .iter()
                .map(|&d| eval_single_layer(phi, Target::Point(x + d * nrm), t, probe.tau, MultiIndex::ZERO))
                .collect::<Result<Vec<_>>>()?;
            Ok((on, off))
        })
        .collect::<Result<_>>()?;
    let mut num = vec![0.0; offsets.len()];
    let mut num0 = 0.0;
    let mut den = 0.0;
    for (on, off) in &samples {
        den += on.norm_squared();
        let mut ex = Vec3::zeros();
        for (i, v) in off.iter().enumerate() {
            num[i] += (v - on).norm_squared();
            ex += weights[i] * v;
        }
        num0 += (ex - on).norm_squared();
    }
    let den = den.max(f64::MIN_POSITIVE);
    Ok(TraceConsistency {
        offsets: offsets.to_vec(),
        mismatch: num.iter().map(|v| (v / den).sqrt()).collect(),
        extrapolated: (num0 / den).sqrt(),
    })
}

/// Result of [`density_tail_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityTail {
    /// The density vanishes identically; no slope is defined.
    ZeroDensity,
    Fit {
        fit: DecayFit,
        times: Vec<f64>,
        norms: Vec<f64>,
    },
}

impl DensityTail {
    pub fn pass(&self) -> bool {
        match self {
            DensityTail::ZeroDensity => true,
            DensityTail::Fit { fit, .. } => fit.pass,
        }
    }
}

/// Fits `‖φ|S_{T,T_h}‖₂ ~ (1+T)^slope` over `t_list` and checks
/// `slope <= -zeta + 0.2`. Times in the last fifth of the horizon are
/// dropped.
pub fn density_tail_fit(phi: &SurfaceDensity, t_list: &[f64], zeta: f64) -> Result<DensityTail> {
    if phi.is_zero() {
        return Ok(DensityTail::ZeroDensity);
    }
    let horizon = phi.grid.horizon();
    let limit = (1.0 - HORIZON_GUARD) * horizon;
    let times: Vec<f64> = t_list.iter().copied().filter(|&t| t >= 0.0 && t <= limit).collect();
    if times.len() < t_list.len() {
        warn!("{} tail times beyond {limit} dropped", t_list.len() - times.len());
    }
    let norms: Vec<f64> = times.iter().map(|&t| phi.l2_norm_window(t, horizon)).collect();
    let xs: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
    let fit = fit_power_law(
        &xs,
        &norms,
        FitOptions {
            predicted: -zeta,
            tolerance: TAIL_TOLERANCE,
            check: FitCheck::Bound,
            min_points: TAIL_MIN_POINTS,
            knee: false,
        },
    )?;
    Ok(DensityTail::Fit { fit, times, norms })
}
