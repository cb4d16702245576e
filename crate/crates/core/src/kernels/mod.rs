//! Heat, unsteady Stokes and Oseen fundamental solutions with first
//! derivatives.
//!
//! The Stokes tensor is written as `Γ_jk = δ_jk (h + A) + B z_j z_k` where
//! `A = Φ'/r`, `B = A'/r` and `Φ(r) = erf(r / (2√t)) / (4π r)` is the time
//! integral of the heat kernel from `t` to infinity. Its spatial gradient
//! needs one more radial coefficient `C = B'/r`. All three suffer from
//! cancellation for small `r / √t`, where a power series is used instead.

pub mod checks;

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::geometry::{wake_weight, InequalityEntry, InequalityReport, MultiIndex, Point3};

pub type Mat3 = Matrix3<f64>;

/// Symmetric 3x3 matrix stored as `[11, 22, 33, 12, 13, 23]`.
pub type Sym3 = [f64; 6];

/// `x = r / (2√t)` below which the series branch is used.
pub const SERIES_SWITCH: f64 = 1.0;
const SERIES_TERMS: usize = 26;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return invalid(format!("kernel time argument must be positive, got {t}"));
    }
    Ok(())
}

fn check_order(d: &MultiIndex) -> Result<()> {
    if d.order() > 1 {
        return invalid(format!("derivative order {} not supported", d.order()));
    }
    Ok(())
}

/// Heat kernel value without argument checks.
#[inline]
pub fn heat(r2: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-1.5) * (-r2 / (4.0 * t)).exp()
}

/// `∂_t^l ∂_z^α` of the heat kernel `(4πt)^{-3/2} exp(-|z|²/4t)`.
pub fn heat_kernel(z: &Point3, t: f64, d: MultiIndex) -> Result<f64> {
    check_time(t)?;
    check_order(&d)?;
    let r2 = z.norm_squared();
    let h = heat(r2, t);
    Ok(if d.l == 1 {
        h * (r2 / (4.0 * t * t) - 1.5 / t)
    } else if let Some(i) = d.direction() {
        -z[i] / (2.0 * t) * h
    } else {
        h
    })
}

struct SeriesCoeffs {
    a: [f64; SERIES_TERMS],
    b: [f64; SERIES_TERMS],
    c: [f64; SERIES_TERMS],
}

fn series_coeffs() -> &'static SeriesCoeffs {
    static COEFFS: OnceLock<SeriesCoeffs> = OnceLock::new();
    COEFFS.get_or_init(|| {
        // erf(x)/x = (2/√π) Σ c_n x^{2n}, c_n = (-1)^n / (n! (2n+1))
        let mut c = [0.0; SERIES_TERMS + 3];
        let mut fact = 1.0;
        for (n, cn) in c.iter_mut().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            *cn = sign / (fact * (2 * n + 1) as f64);
        }
        let mut s = SeriesCoeffs { a: [0.0; SERIES_TERMS], b: [0.0; SERIES_TERMS], c: [0.0; SERIES_TERMS] };
        for m in 0..SERIES_TERMS {
            // coefficient of x^{2m}
            let n1 = (m + 1) as f64;
            let n2 = (m + 2) as f64;
            let n3 = (m + 3) as f64;
            s.a[m] = 2.0 * n1 * c[m + 1];
            s.b[m] = 2.0 * n2 * (2.0 * n2 - 2.0) * c[m + 2];
            s.c[m] = 2.0 * n3 * (2.0 * n3 - 2.0) * (2.0 * n3 - 4.0) * c[m + 3];
        }
        s
    })
}

fn horner(coef: &[f64], x2: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x2 + c)
}

/// Radial coefficients `(A, B, C)` of the Stokes tensor. `C` is only
/// computed when `need_c` is set.
#[inline]
pub fn radial_coeffs(r2: f64, t: f64, need_c: bool) -> (f64, f64, f64) {
    let s = 0.5 / t.sqrt();
    let s2 = s * s;
    let x2 = s2 * r2;
    if x2 < SERIES_SWITCH * SERIES_SWITCH {
        let k = 0.5 * PI.powf(-1.5);
        let co = series_coeffs();
        let s3 = s2 * s;
        let a = k * s3 * horner(&co.a, x2);
        let b = k * s3 * s2 * horner(&co.b, x2);
        let c = if need_c { k * s3 * s2 * s2 * horner(&co.c, x2) } else { 0.0 };
        return (a, b, c);
    }
    let r = r2.sqrt();
    let e = libm::erf(s * r);
    let g = 2.0 * s / PI.sqrt() * (-x2).exp();
    let q = g * r - e;
    let inv4pi = 0.25 / PI;
    let a = inv4pi * q / (r2 * r);
    let b = inv4pi * (-2.0 * s2 * g - 3.0 * q / (r2 * r)) / r2;
    let c =
        if need_c { inv4pi * (4.0 * s2 * s2 * g / r2 + 10.0 * s2 * g / (r2 * r2) + 15.0 * q / (r2 * r2 * r2 * r)) } else { 0.0 };
    (a, b, c)
}

/// Stokes tensor value in symmetric storage, no argument checks.
#[inline]
pub fn stokes_sym(z: &Point3, t: f64) -> Sym3 {
    let r2 = z.norm_squared();
    let h = heat(r2, t);
    let (a, b, _) = radial_coeffs(r2, t, false);
    let d = h + a;
    [d + b * z[0] * z[0], d + b * z[1] * z[1], d + b * z[2] * z[2], b * z[0] * z[1], b * z[0] * z[2], b * z[1] * z[2]]
}

/// Oseen tensor value in symmetric storage, no argument checks.
#[inline]
pub fn oseen_sym(z: &Point3, t: f64, tau: f64) -> Sym3 {
    stokes_sym(&Point3::new(z[0] - t * tau, z[1], z[2]), t)
}

pub fn sym_to_mat(s: &Sym3) -> Mat3 {
    Mat3::new(s[0], s[3], s[4], s[3], s[1], s[5], s[4], s[5], s[2])
}

/// `S v` for symmetric storage.
#[inline]
pub fn sym_mul(s: &Sym3, v: &[f64; 3]) -> [f64; 3] {
    [s[0] * v[0] + s[3] * v[1] + s[4] * v[2], s[3] * v[0] + s[1] * v[1] + s[5] * v[2], s[4] * v[0] + s[5] * v[1] + s[2] * v[2]]
}

fn stokes_unchecked(z: &Point3, t: f64, d: MultiIndex) -> Mat3 {
    let r2 = z.norm_squared();
    let h = heat(r2, t);
    if d.l == 1 {
        let t2 = 4.0 * t * t;
        let diag = h * (r2 / t2 - 1.0 / t);
        return Mat3::from_fn(|j, k| if j == k { diag } else { 0.0 } - h * (z[j] * z[k]) / t2);
    }
    match d.direction() {
        None => sym_to_mat(&stokes_sym(z, t)),
        Some(i) => {
            let (_, b, c) = radial_coeffs(r2, t, true);
            let dh = -z[i] / (2.0 * t) * h;
            Mat3::from_fn(|j, k| {
                let mut v = c * z[i] * (z[j] * z[k]);
                if j == k {
                    v += dh + b * z[i];
                }
                if i == j {
                    v += b * z[k];
                }
                if i == k {
                    v += b * z[j];
                }
                v
            })
        }
    }
}

/// `∂_t^l ∂_z^α Γ(z, t)` for the unsteady Stokes velocity tensor.
pub fn stokes_kernel(z: &Point3, t: f64, d: MultiIndex) -> Result<Mat3> {
    check_time(t)?;
    check_order(&d)?;
    Ok(stokes_unchecked(z, t, d))
}

/// `∂_t^l ∂_z^α Λ(z, t, τ)` with `Λ(z, t, τ) = Γ(z - tτe1, t)`.
pub fn oseen_kernel(z: &Point3, t: f64, tau: f64, d: MultiIndex) -> Result<Mat3> {
    check_time(t)?;
    check_order(&d)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return invalid(format!("Reynolds number must be non-negative, got {tau}"));
    }
    Ok(oseen_unchecked(z, t, tau, d))
}

pub(crate) fn oseen_unchecked(z: &Point3, t: f64, tau: f64, d: MultiIndex) -> Mat3 {
    let w = Point3::new(z[0] - t * tau, z[1], z[2]);
    let m = stokes_unchecked(&w, t, d);
    if d.l == 1 && tau != 0.0 {
        m - tau * stokes_unchecked(&w, t, MultiIndex::dx(0))
    } else {
        m
    }
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0, |a, &v| a.max(v.abs()))
}

/// `γ_K(z)`: `|z|²` inside the ball of radius `K`, `|z| ν(z)` outside.
pub fn gamma_k(z: &Point3, k: f64) -> f64 {
    let r = z.norm();
    if r < k {
        r * r
    } else {
        r * wake_weight(z)
    }
}

/// Right-hand side of the anisotropic Oseen kernel bound without its
/// constant.
pub fn oseen_bound(z: &Point3, t: f64, k: f64, d: MultiIndex) -> f64 {
    let g = gamma_k(z, k) + t;
    let mut b = g.powf(-1.5 - 0.5 * d.spatial_order() as f64 - d.l as f64);
    if d.l == 1 {
        b += g.powi(-2);
    }
    b
}

fn sample_z(rng: &mut ChaCha8Rng, k: f64, inside: bool) -> Point3 {
    let r = if inside { k * rng.gen_range(0.0f64..1.0).cbrt() } else { (rng.gen_range(k.ln()..(1e3 * k).ln())).exp() };
    let mut d = loop {
        let v = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    if rng.gen_bool(0.3) {
        // concentrate on the wake
        let spread = (rng.gen_range((1e-3f64).ln()..0.0)).exp();
        d = (Point3::new(1.0, 0.0, 0.0) + spread * d).normalize();
    }
    r * d
}

fn sup_bound_ratio(rng: &mut ChaCha8Rng, n: usize, tau: f64, k: f64, inside: bool, d: MultiIndex) -> f64 {
    (0..n)
        .map(|_| {
            let z = sample_z(rng, k, inside);
            let t = (rng.gen_range((1e-3f64).ln()..(1e4f64).ln())).exp();
            max_abs(&oseen_unchecked(&z, t, tau, d)) / oseen_bound(&z, t, k, d)
        })
        .fold(0.0, f64::max)
}

/// Sampled suprema of `|∂^l ∂^α Λ| / bound` for every first-order
/// derivative, split into samples inside `B_K` and outside, each at
/// `sample_count` and `2 * sample_count` samples.
pub fn kernel_bound_report(tau: f64, k: f64, sample_count: usize, seed: u64) -> Result<InequalityReport> {
    if !(k > 0.0) {
        return invalid(format!("ball radius K must be positive, got {k}"));
    }
    if !(tau > 0.0) {
        return invalid(format!("Reynolds number must be positive, got {tau}"));
    }
    let n = sample_count.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for d in MultiIndex::all_first_order() {
        for inside in [true, false] {
            let a = sup_bound_ratio(&mut rng, n, tau, k, inside, d);
            let b = a.max(sup_bound_ratio(&mut rng, n, tau, k, inside, d));
            let region = if inside { "inside B_K" } else { "outside B_K" };
            entries.push(InequalityEntry::new(
                &format!("|d Lambda| / (gamma_K + t)^(-3/2-|alpha|/2-l), alpha={:?} l={} {region}", d.alpha, d.l),
                "Cor1060",
                n,
                a,
                b,
                format!("tau = {tau}, K = {k}"),
            ));
        }
    }
    Ok(InequalityReport { entries })
}
