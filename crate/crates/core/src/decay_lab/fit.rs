use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default slope tolerances.
pub const SPATIAL_TOLERANCE: f64 = 0.15;
pub const TEMPORAL_TOLERANCE: f64 = 0.1;
/// Minimum window length of the knee detector.
pub const MIN_WINDOW: usize = 5;
/// Windows whose r² is within this margin of the best are considered
/// equally straight; the longest of them wins.
pub const R2_MARGIN: f64 = 1e-4;

/// How a fitted slope is compared with the predicted exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitCheck {
    /// `slope <= predicted + tolerance` (the estimates are upper bounds).
    Bound,
    /// `|slope - predicted| <= tolerance`.
    Match,
}

/// Log-log regression `log y = intercept + slope log x` over a window of
/// samples, with its verdict against a predicted exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive range of the abscissa covered by the fit window.
    pub window: (f64, f64),
    pub points: usize,
    pub predicted_exponent: f64,
    pub tolerance: f64,
    pub check: FitCheck,
    pub pass: bool,
}

impl DecayFit {
    pub fn verdict(slope: f64, predicted: f64, tolerance: f64, check: FitCheck) -> bool {
        match check {
            FitCheck::Bound => slope <= predicted + tolerance,
            FitCheck::Match => (slope - predicted).abs() <= tolerance,
        }
    }

    /// Recomputes `pass` from the other fields.
    pub fn consistent(&self) -> bool {
        self.pass == Self::verdict(self.slope, self.predicted_exponent, self.tolerance, self.check)
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn regress(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
    Line { slope, intercept, r2 }
}

/// Options for [`fit_power_law`].
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub predicted: f64,
    pub tolerance: f64,
    pub check: FitCheck,
    /// Minimum number of usable samples.
    pub min_points: usize,
    /// Select the straightest contiguous window of at least
    /// [`MIN_WINDOW`] points instead of using all samples.
    pub knee: bool,
}

/// Fits `y ~ x^slope` on positive samples. Non-positive or non-finite
/// values (below the noise floor) are dropped; the fit is rejected when
/// fewer than `min_points` remain or the abscissa does not vary.
pub fn fit_power_law(xs: &[f64], ys: &[f64], opts: FitOptions) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < opts.min_points.max(2) {
        return Err(Error::Fit(format!("{} usable samples, need {}", pts.len(), opts.min_points.max(2))));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1).collect();
    if lx.iter().all(|&v| v == lx[0]) {
        return Err(Error::Fit("abscissa does not vary".into()));
    }
    let (a, b) = if opts.knee && lx.len() > MIN_WINDOW {
        let mut cands = Vec::new();
        for s in 0..lx.len() {
            for e in s + MIN_WINDOW..=lx.len() {
                cands.push((s, e, regress(&lx[s..e], &ly[s..e]).r2));
            }
        }
        let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        cands
            .into_iter()
            .filter(|c| c.2 >= best - R2_MARGIN)
            .max_by(|p, q| (p.1 - p.0).cmp(&(q.1 - q.0)).then(p.0.cmp(&q.0)))
            .map(|c| (c.0, c.1))
            .unwrap_or((0, lx.len()))
    } else {
        (0, lx.len())
    };
    let line = regress(&lx[a..b], &ly[a..b]);
    let pass = DecayFit::verdict(line.slope, opts.predicted, opts.tolerance, opts.check);
    Ok(DecayFit {
        slope: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        window: (lx[a].exp(), lx[b - 1].exp()),
        points: b - a,
        predicted_exponent: opts.predicted,
        tolerance: opts.tolerance,
        check: opts.check,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn opts(predicted: f64) -> FitOptions {
        FitOptions { predicted, tolerance: 0.1, check: FitCheck::Bound, min_points: 4, knee: true }
    }

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (0..10).map(|i| 2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let f = fit_power_law(&xs, &ys, opts(-1.5)).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && f.pass && f.points == 10);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn knee_drops_preasymptotic_points() {
        let xs: Vec<f64> = (0..14).map(|i| 2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(-2.0) * (1.0 + 50.0 / x)).collect();
        let f = fit_power_law(&xs, &ys, opts(-2.0)).unwrap();
        assert!((f.slope + 2.0).abs() < 0.05, "{f:?}");
        assert!(f.window.0 > 1.0);
    }

    #[test]
    fn noise_floor_and_rejection() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys = [1.0, 0.5, 0.0, -1.0, 0.0];
        assert!(fit_power_law(&xs, &ys, opts(-1.0)).is_err());
        assert!(fit_power_law(&[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0], opts(0.0)).is_err());
    }

    proptest! {
        #[test]
        fn pass_is_function_of_fields(slope in -4.0f64..1.0, pred in -3.0f64..0.0) {
            let xs: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x.powf(slope)).collect();
            let f = fit_power_law(&xs, &ys, opts(pred)).unwrap();
            prop_assert!(f.consistent());
        }
    }
}
