use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, DecayFit, FitCheck, FitOptions, MIN_WINDOW};
use crate::error::{invalid, Error, Result};
use crate::geometry::{wake_weight, MultiIndex, Point3, Vec3};
use crate::potentials::{
    eval_initial_potential_with, eval_single_layer, eval_volume_potential_with, Evaluation, InitialField, PotentialOptions,
    SourceField, SurfaceDensity, Target,
};
use crate::solver::{eval_velocity, SolutionHandle};

/// Anything that evaluates `∂^α` of a velocity field.
pub trait FieldProbe: Sync {
    fn eval(&self, x: &Point3, t: f64, d: MultiIndex) -> Result<Vec3>;
}

impl<F> FieldProbe for F
where
    F: Fn(&Point3, f64, MultiIndex) -> Result<Vec3> + Sync,
{
    fn eval(&self, x: &Point3, t: f64, d: MultiIndex) -> Result<Vec3> {
        self(x, t, d)
    }
}

/// The potentials and the full velocity as probes. Volume evaluations that
/// miss their self-convergence tolerance fail with a quadrature error.
pub enum Field<'a> {
    Volume { source: &'a SourceField, tau: f64, options: PotentialOptions },
    Initial { initial: &'a InitialField, tau: f64, options: PotentialOptions },
    Layer { density: &'a SurfaceDensity, tau: f64 },
    Velocity(&'a SolutionHandle),
}

fn converged(e: Evaluation, what: &str, x: &Point3, t: f64) -> Result<Vec3> {
    if e.converged {
        Ok(e.value)
    } else {
        Err(Error::Quadrature(format!("{what} at {:?}, t = {t}: change {:.2e}", x.as_slice(), e.difference)))
    }
}

impl FieldProbe for Field<'_> {
    fn eval(&self, x: &Point3, t: f64, d: MultiIndex) -> Result<Vec3> {
        match self {
            Field::Volume { source, tau, options } => {
                converged(eval_volume_potential_with(source, x, t, *tau, d, options)?, "volume potential", x, t)
            }
            Field::Initial { initial, tau, options } => {
                converged(eval_initial_potential_with(initial, x, t, *tau, d, options)?, "initial potential", x, t)
            }
            Field::Layer { density, tau } => eval_single_layer(density, Target::Point(*x), t, *tau, d),
            Field::Velocity(h) => eval_velocity(h, x, t, d),
        }
    }
}

/// `|u|` for order 0, the Frobenius norm of `∇u` for order 1.
pub fn magnitude(probe: &dyn FieldProbe, x: &Point3, t: f64, order: u8) -> Result<f64> {
    match order {
        0 => Ok(probe.eval(x, t, MultiIndex::ZERO)?.norm()),
        1 => {
            let mut sq = 0.0;
            for i in 0..3 {
                sq += probe.eval(x, t, MultiIndex::dx(i))?.norm_squared();
            }
            Ok(sq.sqrt())
        }
        _ => invalid("derivative order must be 0 or 1"),
    }
}

/// Predicted spatial exponent `-1 - |α|/2` against `|x| ν(x)`.
pub fn spatial_rate(order: u8) -> f64 {
    -1.0 - order as f64 / 2.0
}

/// Temporal exponent `-3/(2p) - |α|/2 - l` of the initial potential.
pub fn initial_rate(p: f64, order: u8, l: u8) -> f64 {
    -1.5 / p - order as f64 / 2.0 - l as f64
}

/// Temporal exponent `-3/(2q) - 1/s + 1 - |α|/2 - l` of the volume
/// potential after its source has switched off.
pub fn volume_rate(q: f64, s: f64, order: u8, l: u8) -> f64 {
    -1.5 / q - 1.0 / s + 1.0 - order as f64 / 2.0 - l as f64
}

/// Temporal exponent of the single layer after its density has switched
/// off.
pub const LAYER_RATE: f64 = -1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RayDirection {
    Downstream,
    Upstream,
    Transverse,
    Custom([f64; 3]),
}

impl RayDirection {
    pub fn unit(&self) -> Result<Vec3> {
        Ok(match self {
            RayDirection::Downstream => Vec3::x(),
            RayDirection::Upstream => -Vec3::x(),
            RayDirection::Transverse => Vec3::y(),
            RayDirection::Custom(v) => {
                let v = Vec3::from(*v);
                if !((v.norm() - 1.0).abs() < 1e-9) {
                    return invalid(format!("ray direction {v:?} is not a unit vector"));
                }
                v
            }
        })
    }
}

/// Points `r e` on a ray, with radii in geometric progression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySpec {
    pub direction: RayDirection,
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
    pub times: Vec<f64>,
}

impl RaySpec {
    pub fn radii(&self) -> Vec<f64> {
        let ratio = (self.r_max / self.r_min).powf(1.0 / (self.count - 1) as f64);
        (0..self.count).map(|i| if i + 1 == self.count { self.r_max } else { self.r_min * ratio.powi(i as i32) }).collect()
    }

    pub fn points(&self) -> Result<Vec<Point3>> {
        let e = self.direction.unit()?;
        Ok(self.radii().into_iter().map(|r| Point3::from(e * r)).collect())
    }

    /// `enclosing` is the radius of a ball containing the obstacle and the
    /// data supports.
    pub fn validate(&self, enclosing: f64) -> Result<()> {
        self.direction.unit()?;
        if !(self.r_min > enclosing) || !(self.r_max > self.r_min) || !self.r_max.is_finite() {
            return invalid(format!("ray needs {enclosing} < r_min < r_max, got [{}, {}]", self.r_min, self.r_max));
        }
        if self.count < MIN_WINDOW {
            return invalid(format!("ray needs at least {MIN_WINDOW} radii"));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return invalid("ray needs positive sample times");
        }
        Ok(())
    }
}

/// One sampled magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub t: f64,
    /// `|x| ν(x)` for spatial fits, `t` for temporal fits.
    pub abscissa: f64,
    pub value: f64,
    /// False when the evaluation hit the quadrature noise floor.
    pub accepted: bool,
}

/// Samples and the fit made from the accepted ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayExperiment {
    pub label: String,
    pub samples: Vec<DecaySample>,
    pub fit: DecayFit,
}

impl DecayExperiment {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(s).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn fit_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.fit)?)
    }
}

fn sample(probe: &dyn FieldProbe, x: &Point3, t: f64, order: u8, abscissa: f64) -> Result<DecaySample> {
    let (value, accepted) = match magnitude(probe, x, t, order) {
        Ok(v) => (v, v > 0.0 && v.is_finite()),
        Err(Error::Quadrature(_)) => (f64::NAN, false),
        Err(e) => return Err(e),
    };
    Ok(DecaySample { x1: x[0], x2: x[1], x3: x[2], t, abscissa, value, accepted })
}

fn fit_samples(label: String, samples: Vec<DecaySample>, predicted: f64, tolerance: f64) -> Result<DecayExperiment> {
    let used: Vec<&DecaySample> = samples.iter().filter(|s| s.accepted).collect();
    let xs: Vec<f64> = used.iter().map(|s| s.abscissa).collect();
    let ys: Vec<f64> = used.iter().map(|s| s.value).collect();
    let opts = FitOptions { predicted, tolerance, check: FitCheck::Bound, min_points: MIN_WINDOW, knee: true };
    let fit = fit_power_law(&xs, &ys, opts).map_err(|e| {
        Error::Fit(format!("{label}: {e} ({} of {} samples below the noise floor)", samples.len() - used.len(), samples.len()))
    })?;
    Ok(DecayExperiment { label, samples, fit })
}

fn span_check(values: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(hi >= 10.0 * lo) {
        return invalid(format!("{what} spans [{lo}, {hi}], less than one decade"));
    }
    Ok(())
}

/// Fits `log|∂^α u|` against `log(|x| ν(x))` along a ray, one fit per
/// sample time. The verdict is `slope <= -1 - |α|/2 + tolerance`.
pub fn fit_spatial_decay(
    probe: &dyn FieldProbe,
    order: u8,
    ray: &RaySpec,
    enclosing: f64,
    tolerance: f64,
) -> Result<Vec<DecayExperiment>> {
    ray.validate(enclosing)?;
    let points = ray.points()?;
    let abscissa: Vec<f64> = points.iter().map(|x| x.norm() * wake_weight(x)).collect();
    span_check(abscissa.iter().copied(), "|x| ν(x) along the ray")?;
    ray.times
        .iter()
        .map(|&t| {
            let samples =
                points.par_iter().zip(&abscissa).map(|(x, &a)| sample(probe, x, t, order, a)).collect::<Result<Vec<_>>>()?;
            fit_samples(format!("{:?} ray, order {order}, t = {t}", ray.direction), samples, spatial_rate(order), tolerance)
        })
        .collect()
}

/// Where a temporal fit samples the field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalTarget {
    Fixed([f64; 3]),
    /// Maximum over `τ t e₁ + √(1+t) o` for the offsets `o`: a cloud that
    /// follows the drifting, spreading heat core.
    MovingSup {
        offsets: Vec<[f64; 3]>,
        drift: f64,
    },
}

impl TemporalTarget {
    fn points(&self, t: f64) -> Vec<Point3> {
        match self {
            TemporalTarget::Fixed(x) => vec![Point3::from(*x)],
            TemporalTarget::MovingSup { offsets, drift } => {
                let spread = (1.0 + t).sqrt();
                offsets.iter().map(|o| Point3::new(drift * t, 0.0, 0.0) + Vec3::from(*o) * spread).collect()
            }
        }
    }
}

/// Fits `log|∂^α u|` against `log t`; the verdict is
/// `slope <= predicted + tolerance`.
pub fn fit_temporal_decay(
    probe: &dyn FieldProbe,
    order: u8,
    target: &TemporalTarget,
    times: &[f64],
    predicted: f64,
    tolerance: f64,
) -> Result<DecayExperiment> {
    if times.len() < MIN_WINDOW || times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return invalid(format!("temporal fit needs at least {MIN_WINDOW} positive times"));
    }
    span_check(times.iter().copied(), "sample times")?;
    let samples = times
        .par_iter()
        .map(|&t| {
            let mut best: Option<DecaySample> = None;
            for x in target.points(t) {
                let s = sample(probe, &x, t, order, t)?;
                let better = match &best {
                    None => true,
                    Some(b) => !b.accepted || (s.accepted && s.value > b.value),
                };
                if better {
                    best = Some(s);
                }
            }
            best.ok_or_else(|| Error::InvalidArgument("temporal target has no points".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_samples(format!("order {order} at {target:?}"), samples, predicted, tolerance)
}

/// `n` times in geometric progression from `t0` to `t1`.
pub fn geometric_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let ratio = (t1 / t0).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| if i + 1 == n { t1 } else { t0 * ratio.powi(i as i32) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `|x|^{-3} (1+t)^{-2}` with gradient norm `3|x|^{-4}(1+t)^{-2}`.
    fn model(x: &Point3, t: f64, d: MultiIndex) -> Result<Vec3> {
        let r = x.norm();
        let s = (1.0 + t).powi(-2);
        Ok(match d.direction() {
            None => Vec3::new(r.powi(-3) * s, 0.0, 0.0),
            Some(i) => Vec3::new(-3.0 * r.powi(-5) * x[i] * s, 0.0, 0.0),
        })
    }

    fn ray(direction: RayDirection) -> RaySpec {
        RaySpec { direction, r_min: 10.0, r_max: 80.0, count: 7, times: vec![1.0, 5.0] }
    }

    #[test]
    fn transverse_model_slopes() {
        let fits = fit_spatial_decay(&model, 0, &ray(RayDirection::Transverse), 2.0, 0.15).unwrap();
        assert_eq!(fits.len(), 2);
        // |x| ν ≈ r² transversally
        assert!((fits[0].fit.slope + 1.5).abs() < 0.05 && fits[0].fit.pass);
        let grad = fit_spatial_decay(&model, 1, &ray(RayDirection::Transverse), 2.0, 0.15).unwrap();
        assert!((grad[1].fit.slope + 2.0).abs() < 0.05 && grad[1].fit.pass);
        let mut csv = Vec::new();
        fits[0].write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 8);
        assert!(fits[0].fit_json().unwrap().contains("slope"));
    }

    #[test]
    fn downstream_ray_spans_too_little() {
        // ν = 1 on the downstream axis, so |x| ν only spans a factor 8
        assert!(fit_spatial_decay(&model, 0, &ray(RayDirection::Downstream), 2.0, 0.15).is_err());
    }

    #[test]
    fn temporal_model_slope() {
        let times = geometric_times(10.0, 1000.0, 9);
        let x = TemporalTarget::Fixed([0.0, 5.0, 0.0]);
        let fit = fit_temporal_decay(&model, 0, &x, &times, -1.5, 0.1).unwrap();
        assert!((fit.fit.slope + 2.0).abs() < 0.05 && fit.fit.pass);
        let cloud = TemporalTarget::MovingSup { offsets: vec![[0.0, 3.0, 0.0], [0.0, 0.0, 6.0]], drift: 0.0 };
        let sup = fit_temporal_decay(&model, 0, &cloud, &times, -1.5, 0.1).unwrap();
        assert!((sup.fit.slope + 3.5).abs() < 0.1);
        assert!(sup.samples.iter().all(|s| s.x2 > 0.0));
    }

    #[test]
    fn invalid_setups() {
        let mut r = ray(RayDirection::Custom([1.0, 1.0, 0.0]));
        assert!(fit_spatial_decay(&model, 0, &r, 2.0, 0.15).is_err());
        r.direction = RayDirection::Transverse;
        assert!(fit_spatial_decay(&model, 0, &r, 20.0, 0.15).is_err());
        assert!(fit_spatial_decay(&model, 2, &r, 2.0, 0.15).is_err());
        let few = geometric_times(1.0, 5.0, 6);
        assert!(fit_temporal_decay(&model, 0, &TemporalTarget::Fixed([5.0, 0.0, 0.0]), &few, -1.5, 0.1).is_err());
    }

    #[test]
    fn noise_floor_samples_are_dropped() {
        let noisy = |x: &Point3, t: f64, d: MultiIndex| {
            if x.norm() > 40.0 {
                Err(Error::Quadrature("floor".into()))
            } else {
                model(x, t, d)
            }
        };
        let spec = RaySpec { r_min: 5.0, count: 9, ..ray(RayDirection::Transverse) };
        let fits = fit_spatial_decay(&noisy, 0, &spec, 2.0, 0.15).unwrap();
        let rejected = fits[0].samples.iter().filter(|s| !s.accepted).count();
        assert!(rejected > 0 && fits[0].fit.points <= 9 - rejected);
        let worse =
            |x: &Point3, t: f64, d: MultiIndex| if x[1] > 6.0 { Err(Error::Quadrature("floor".into())) } else { model(x, t, d) };
        assert!(matches!(fit_spatial_decay(&worse, 0, &spec, 2.0, 0.15), Err(Error::Fit(_))));
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(spatial_rate(1), -1.5);
        assert_eq!(initial_rate(1.0, 0, 0), -1.5);
        assert_eq!(volume_rate(1.0, 1.0, 0, 0), -1.5);
        assert_eq!(volume_rate(1.0, 1.0, 1, 0), -2.0);
    }
}
