use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

use super::BoundaryTrace;

/// Weights `(on values, on time derivatives)` such that
/// `∂_4W(t) = Σ_k wv[k] φ(t_k) + Σ_k wd[k] φ'(t_k)` for the piecewise linear
/// interpolant of the samples, linearly extrapolated from the first two
/// samples down to `r = 0`.
///
/// `∂_4W(t) = (t-m)^{-1/2} φ(m) - ½∫_0^m (t-r)^{-3/2} φ dr + ∫_m^t (t-r)^{-1/2} φ' dr`
/// with `m = (t+T)/2`; both integrals use exact moments on each piece.
pub(crate) fn abel_weights(times: &[f64], lower: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t > lower) {
        return invalid(format!("half derivative needs t > T, got t = {t}, T = {lower}"));
    }
    if times.len() < 2 {
        return invalid("half derivative needs at least two time samples");
    }
    if !(lower >= 0.0) || times[0] < 0.0 {
        return invalid("half derivative needs T >= 0 and non-negative sample times");
    }
    let last = *times.last().unwrap();
    if t > last * (1.0 + 1e-12) {
        return invalid(format!("trace ends at {last}, before t = {t}"));
    }
    let n = times.len();
    let mut wv = vec![0.0; n];
    let mut wd = vec![0.0; n];
    let m = 0.5 * (t + lower);

    // interval [times[j], times[j+1]] holding r; j = 0 also covers r < times[0]
    let locate = |r: f64| -> usize {
        let k = times.partition_point(|&s| s <= r);
        k.saturating_sub(1).min(n - 2)
    };
    let interp = |r: f64| -> [(usize, f64); 2] {
        let j = locate(r);
        let (a, b) = (times[j], times[j + 1]);
        let s = (r - a) / (b - a);
        [(j, 1.0 - s), (j + 1, s)]
    };

    for (k, c) in interp(m) {
        wv[k] += c / (t - m).sqrt();
    }

    // breakpoints of a piecewise linear function on [lo, hi]
    let pieces = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let mut pts = vec![lo];
        pts.extend(times.iter().copied().filter(|&s| s > lo && s < hi));
        pts.push(hi);
        pts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect()
    };

    // -½ ∫_a^b (t-r)^{-3/2} φ(r) dr
    for (a, b) in pieces(0.0, m) {
        let (sa, sb) = (t - a, t - b);
        let m0 = 2.0 * (sb.powf(-0.5) - sa.powf(-0.5));
        let m1 = sa * m0 - 2.0 * (sa.sqrt() - sb.sqrt());
        let (ca, cb) = (m0 - m1 / (b - a), m1 / (b - a));
        for (k, c) in interp(a) {
            wv[k] -= 0.5 * ca * c;
        }
        for (k, c) in interp(b) {
            wv[k] -= 0.5 * cb * c;
        }
    }
    // ∫_a^b (t-r)^{-1/2} φ'(r) dr
    for (a, b) in pieces(m, t) {
        let (sa, sb) = (t - a, t - b);
        let m0 = 2.0 * (sa.sqrt() - sb.sqrt());
        let m1 = sa * m0 - 2.0 / 3.0 * (sa.powf(1.5) - sb.powf(1.5));
        let (ca, cb) = (m0 - m1 / (b - a), m1 / (b - a));
        for (k, c) in interp(a) {
            wd[k] += ca * c;
        }
        for (k, c) in interp(b) {
            wd[k] += cb * c;
        }
    }
    Ok((wv, wd))
}

/// Applies weights from [`abel_weights`] node by node.
pub(crate) fn apply_abel(trace: &BoundaryTrace, wv: &[f64], wd: &[f64]) -> Result<Vec<Vec3>> {
    let n = trace.n_nodes();
    let mut out = vec![Vec3::zeros(); n];
    for (m, &w) in wv.iter().enumerate() {
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(trace.slice(m)) {
                *o += w * v;
            }
        }
    }
    if wd.iter().any(|&w| w != 0.0) {
        for (m, &w) in wd.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let Some(d) = trace.dt_slice(m) else {
                return invalid("half derivative needs time-derivative samples past T; none attached to the trace");
            };
            for (o, v) in out.iter_mut().zip(d) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// `∂_t^{1/2} φ(t)` at every node, for a trace that is smooth on `(T, ∞)`.
pub fn half_derivative(trace: &BoundaryTrace, lower: f64, t: f64) -> Result<Vec<Vec3>> {
    let (wv, wd) = abel_weights(&trace.times, lower, t)?;
    let mut out = apply_abel(trace, &wv, &wd)?;
    let scale = 1.0 / PI.sqrt();
    for v in &mut out {
        *v *= scale;
    }
    Ok(out)
}
