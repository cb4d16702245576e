use serde::{Deserialize, Serialize};

use crate::geometry::{wake_weight, Point3};

/// Two-term space-time envelope
/// `c [ d^{se} (1+t)^{-ζ} + d^{se(1-ε)} (1+t)^{te·ε} ]` with `d = |x| ν(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Empirical constant.
    pub constant: f64,
    /// Spatial exponent `se`, typically `-1 - |α|/2`.
    pub spatial_exponent: f64,
    /// Decay rate `ζ` of the first term.
    pub zeta: f64,
    /// Temporal exponent `te` of the second term, typically negative.
    pub temporal_exponent: f64,
}

impl Envelope {
    /// The two terms without the constant.
    pub fn terms(&self, x: &Point3, t: f64, epsilon: f64) -> (f64, f64) {
        let d = x.norm() * wake_weight(x);
        let s = 1.0 + t;
        (
            d.powf(self.spatial_exponent) * s.powf(-self.zeta),
            d.powf(self.spatial_exponent * (1.0 - epsilon)) * s.powf(self.temporal_exponent * epsilon),
        )
    }

    pub fn eval(&self, x: &Point3, t: f64, epsilon: f64) -> f64 {
        let (a, b) = self.terms(x, t, epsilon);
        self.constant * (a + b)
    }
}

/// Free-function form of [`Envelope::eval`].
pub fn interpolation_envelope(x: &Point3, t: f64, epsilon: f64, envelope: &Envelope) -> f64 {
    envelope.eval(x, t, epsilon)
}
