use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent parameters of the linear and nonlinear decay-rate formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateInputs {
    /// Temporal decay of the source tail norms.
    pub zeta1: f64,
    /// Temporal decay of the boundary data tail norm.
    pub zeta2: f64,
    pub q0: f64,
    pub s0: f64,
    /// Integrability of the initial velocity.
    pub p0: f64,
    /// Energy decay exponent of the nonlinear solution.
    pub kappa1: f64,
    pub q1: f64,
    pub q1_hat: f64,
    pub q1_bar: f64,
    /// Order `|α|` of the spatial derivative, 0 or 1.
    pub alpha: u8,
}

impl Default for RateInputs {
    fn default() -> Self {
        Self { zeta1: 2.0, zeta2: 0.5, q0: 1.1, s0: 1.1, p0: 1.1, kappa1: 1.0, q1: 1.25, q1_hat: 1.25, q1_bar: 4.0, alpha: 0 }
    }
}

fn open(v: f64, lo: f64, hi: f64) -> bool {
    v > lo && v < hi
}

impl RateInputs {
    /// Parameters for data of compact support: `q₀ = s₀ = p₀` just above 1,
    /// `ζ₁ = 2` and `ζ₂ = ζ`. The linear rates are then exactly
    /// `(ζ, 1 + |α|/2)`.
    pub fn compact_support(zeta: f64, alpha: u8) -> Result<Self> {
        if !(0.5..1.0).contains(&zeta) {
            return Err(Error::Domain(format!("compact-support regime needs ζ ∈ [1/2, 1), got {zeta}")));
        }
        let near_one = 1.0 + (1.0 - zeta) / 4.0;
        let inputs = Self { zeta1: 2.0, zeta2: zeta, q0: near_one, s0: near_one, p0: near_one, alpha, ..Self::default() };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Every violated constraint, linear ones first; the nonlinear ones
    /// only when `nonlinear` is set.
    pub fn violations(&self, nonlinear: bool) -> Vec<String> {
        let Self { zeta1, zeta2, q0, s0, p0, kappa1, q1, q1_hat, q1_bar, alpha } = *self;
        let mut out = Vec::new();
        let mut need = |ok: bool, what: &str| {
            if !ok {
                out.push(what.to_string());
            }
        };
        need(alpha <= 1, "|α| must be 0 or 1");
        need(zeta1 > 0.0 && zeta1.is_finite(), "ζ₁ must be positive");
        need(open(zeta2, 0.0, 1.0), "ζ₂ must lie in (0, 1)");
        need(open(q0, 1.0, 1.5), "q₀ must lie in (1, 3/2)");
        need(s0 > 1.0 && s0.is_finite(), "s₀ must lie in (1, ∞)");
        need(1.5 / q0 + 1.0 / s0 > 1.5, "3/(2q₀) + 1/s₀ must exceed 3/2");
        need(p0 > 1.0 && p0 <= 2.0, "p₀ must lie in (1, 2]");
        if nonlinear {
            need(kappa1 > 0.0 && kappa1.is_finite(), "κ₁ must be positive");
            need(open(q1, 1.0, 1.5), "q₁ must lie in (1, 3/2)");
            need(open(q1_hat, 1.0, 1.5), "q̂₁ must lie in (1, 3/2)");
            need(q1_bar >= 2.0 && q1_bar.is_finite(), "q̄₁ must be at least 2");
            need(3.0 / (2.0 - alpha.min(1) as f64) < q1_bar, "q̄₁ must exceed 3/(2 - |α|)");
        }
        out
    }

    fn check(&self, nonlinear: bool) -> Result<()> {
        match self.violations(nonlinear).into_iter().next() {
            Some(v) => Err(Error::Domain(v)),
            None => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check(true)
    }
}

/// `(ρ₁, ρ₂)`: the temporal exponents of the far-field and interpolated
/// terms of the linear pointwise bound.
pub fn predict_linear_rates(inputs: &RateInputs) -> Result<(f64, f64)> {
    inputs.check(false)?;
    let RateInputs { zeta1, zeta2, q0, s0, p0, alpha, .. } = *inputs;
    let half_alpha = alpha as f64 / 2.0;
    let rho1 = [zeta1, zeta2, 1.5 / q0 + 1.0 / s0 - 1.5, 1.0 / s0, 1.5 / p0 - 0.5].into_iter().fold(f64::INFINITY, f64::min);
    let rho2 = [zeta1, 1.0 + half_alpha, 1.5 / q0 + 1.0 / s0 - 1.0 + half_alpha, 1.5 / p0 + half_alpha]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((rho1, rho2))
}

/// Temporal exponents of the nonlinear pointwise bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRates {
    /// Exponent of the far-field term.
    pub first: f64,
    /// Exponent raised to `ε` in the interpolated term.
    pub second: f64,
    /// Limits for bounded compactly supported data, before the `δ` shift:
    /// `min{1/2, κ₁}` and `min{1 + |α|/2, k(α)}` with `k = κ₁` for `α = 0`
    /// and `2κ₁/3` for `|α| = 1`.
    pub limit_first: f64,
    pub limit_second: f64,
}

impl NonlinearRates {
    /// The limiting pair with the small loss `δ > 0` applied as in the
    /// bound: `limit_first - δ` and `limit_second + δ`.
    pub fn limits_with(&self, delta: f64) -> (f64, f64) {
        (self.limit_first - delta, self.limit_second + delta)
    }
}

pub fn predict_nonlinear_rates(inputs: &RateInputs) -> Result<NonlinearRates> {
    inputs.check(true)?;
    let (rho1, rho2) = predict_linear_rates(inputs)?;
    let RateInputs { kappa1, q1, q1_hat, q1_bar, alpha, .. } = *inputs;
    let half_alpha = alpha as f64 / 2.0;
    let first = [rho1, 1.5 / q1 - 1.0, 3.0 * kappa1 * (1.0 - 1.0 / q1_hat), kappa1].into_iter().fold(f64::INFINITY, f64::min);
    let second = [rho2, 1.5 / q1 - 0.5 + half_alpha, 2.0 * kappa1 / q1_bar].into_iter().fold(f64::INFINITY, f64::min);
    let k = if alpha == 0 { kappa1 } else { 2.0 * kappa1 / 3.0 };
    Ok(NonlinearRates { first, second, limit_first: kappa1.min(0.5), limit_second: (1.0 + half_alpha).min(k) })
}

/// `φ(ε)` of the exponent bookkeeping lemma.
pub fn exponent_margin(epsilon: f64) -> f64 {
    if epsilon > 0.5 {
        epsilon - 0.5
    } else {
        (1.0 / 12.0f64).min(epsilon / 4.0)
    }
}

/// The integer `k` with `kε ≤ 1 < (k+1)ε`.
pub fn step_count(epsilon: f64) -> usize {
    let mut k = (1.0 / epsilon).floor() as usize;
    while k as f64 * epsilon > 1.0 {
        k -= 1;
    }
    while (k + 1) as f64 * epsilon <= 1.0 {
        k += 1;
    }
    k
}

/// `Z(j) = -1/2 + j/(2k) + 1/k - (j+1)ε/k`.
pub fn exponent_sum(epsilon: f64, k: usize, j: usize) -> f64 {
    let (k, j) = (k as f64, j as f64);
    -0.5 + j / (2.0 * k) + 1.0 / k - (j + 1.0) * epsilon / k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub epsilon: f64,
    pub k: usize,
    pub j: usize,
    pub z: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExponentSumReport {
    pub epsilons: usize,
    pub pairs: usize,
    /// Smallest `-φ(ε) - Z(j)` over all pairs; zero means equality.
    pub min_slack: f64,
    pub counterexamples: Vec<Counterexample>,
}

/// Rounding allowance for the equality cases.
const SLACK: f64 = 1e-12;

/// Checks `Z(j) ≤ -φ(ε)` for every `j < k` and every `ε` of the grid.
pub fn verify_exponent_sums(epsilons: &[f64]) -> Result<ExponentSumReport> {
    let mut report = ExponentSumReport { min_slack: f64::INFINITY, ..Default::default() };
    for &eps in epsilons {
        if !open(eps, 0.0, 1.0) {
            return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {eps}")));
        }
        let k = step_count(eps);
        let margin = exponent_margin(eps);
        for j in 0..k {
            let z = exponent_sum(eps, k, j);
            let slack = -margin - z;
            report.min_slack = report.min_slack.min(slack);
            report.pairs += 1;
            if slack < -SLACK {
                report.counterexamples.push(Counterexample { epsilon: eps, k, j, z, margin });
            }
        }
        report.epsilons += 1;
    }
    Ok(report)
}

/// `n` equally spaced values `i/(n+1)`, `i = 1..=n`.
pub fn epsilon_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}
