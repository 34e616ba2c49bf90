//! Special functions: Gamma, modified Bessel `K_ν`, Mittag-Leffler `E_γ`.

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate_adaptive;

/// `Γ(x)` for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("gamma_fn needs a positive argument, got {x}"));
    }
    Ok(libm::tgamma(x))
}

/// Value of `K_ν(y)` together with an underflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselK {
    pub value: f64,
    /// `e^y K_ν(y)`, finite even when `value` underflows.
    pub scaled: f64,
    pub underflow: bool,
}

const BESSEL_UNDERFLOW: f64 = 700.0;

/// Modified Bessel function of the second kind, `K_ν(y)` for `y > 0`.
///
/// Returns 0 for `y > 700`; use [`bessel_k_full`] to see the flag and the
/// exponentially scaled value.
pub fn bessel_k(nu: f64, y: f64) -> Result<f64> {
    Ok(bessel_k_full(nu, y)?.value)
}

/// `K_ν(y) = ∫_0^∞ e^{−y cosh t} cosh(νt) dt`, evaluated by the trapezoidal
/// rule with step halving. The integrand is analytic and decays doubly
/// exponentially, so the rule converges geometrically in the step size.
pub fn bessel_k_full(nu: f64, y: f64) -> Result<BesselK> {
    if !(y > 0.0) || !y.is_finite() {
        return invalid(format!("bessel_k needs y > 0, got {y}"));
    }
    if !nu.is_finite() {
        return invalid("bessel_k order must be finite");
    }
    let nu = nu.abs();
    // g(t) = e^{−y(cosh t − 1)} cosh(νt); e^{-y} is factored out
    let g = |t: f64| {
        let e = -y * (t.cosh() - 1.0) + nu * t;
        0.5 * (e.exp() + (-y * (t.cosh() - 1.0) - nu * t).exp())
    };
    // cut the tail where the integrand is below e^{-45} of its peak scale
    let mut t_max = 1.0;
    while -y * (f64::cosh(t_max) - 1.0) + nu * t_max > -45.0 {
        t_max += 0.5;
    }
    let mut h = 0.5;
    let mut prev = trapezoid(&g, h, t_max);
    let mut scaled = prev;
    for _ in 0..12 {
        h *= 0.5;
        scaled = trapezoid(&g, h, t_max);
        if (scaled - prev).abs() <= 1e-15 * scaled.abs() {
            break;
        }
        prev = scaled;
    }
    let underflow = y > BESSEL_UNDERFLOW;
    let value = if underflow { 0.0 } else { scaled * (-y).exp() };
    Ok(BesselK {
        value,
        scaled,
        underflow,
    })
}

fn trapezoid(g: &impl Fn(f64) -> f64, h: f64, t_max: f64) -> f64 {
    let n = (t_max / h).ceil() as usize;
    let mut sum = 0.5 * g(0.0);
    for i in 1..=n {
        sum += g(i as f64 * h);
    }
    sum * h
}

/// Radius below which the power series is used.
const ML_SERIES_RADIUS: f64 = 0.5;
/// Largest `|z|` accepted.
pub const ML_MAX_ABS: f64 = 50.0;

/// Mittag-Leffler function `E_γ(z)` for `γ ∈ (0,1]` and `−50 ≤ z ≤ 0`.
///
/// Small `|z|` use the power series `Σ z^k/Γ(γk+1)` with compensated
/// summation. Larger `|z|` use the Laplace representation
/// `E_γ(−t^γ) = (sin γπ / γπ) ∫_0^∞ e^{−t u^{1/γ}} / (u² + 2u cos γπ + 1) du`,
/// whose integrand is positive (no cancellation); the half line is folded
/// onto `[0, 1]` by `u ↦ 1/u`.
pub fn mittag_leffler(gamma: f64, z: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return invalid(format!("Mittag-Leffler order must lie in (0,1], got {gamma}"));
    }
    if !(z <= 0.0) || z < -ML_MAX_ABS {
        return Err(Error::Domain(format!(
            "Mittag-Leffler argument {z} outside [-{ML_MAX_ABS}, 0]"
        )));
    }
    if gamma == 1.0 {
        return Ok(z.exp());
    }
    if -z <= ML_SERIES_RADIUS {
        Ok(mittag_leffler_series(gamma, z))
    } else {
        Ok(mittag_leffler_integral(gamma, -z))
    }
}

/// Power series with Neumaier summation.
pub fn mittag_leffler_series(gamma: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut zk = 1.0;
    for k in 0..400 {
        let term = zk / libm::tgamma(gamma * k as f64 + 1.0);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if k > 2 && term.abs() < 1e-18 * (sum + comp).abs() {
            break;
        }
        zk *= z;
    }
    sum + comp
}

/// Laplace representation for `E_γ(−x)`, `x > 0`, `γ ∈ (0,1)`.
pub fn mittag_leffler_integral(gamma: f64, x: f64) -> f64 {
    let t = x.powf(1.0 / gamma);
    let c = (gamma * std::f64::consts::PI).cos();
    let p = 1.0 / gamma;
    let lower = |u: f64| (-t * u.powf(p)).exp() / (u * u + 2.0 * u * c + 1.0);
    let upper = |w: f64| {
        if w <= 0.0 {
            0.0
        } else {
            (-t * w.powf(-p)).exp() / (1.0 + 2.0 * w * c + w * w)
        }
    };
    let total = integrate_adaptive(lower, 0.0, 1.0, 1e-15) + integrate_adaptive(upper, 0.0, 1.0, 1e-15);
    (gamma * std::f64::consts::PI).sin() / (gamma * std::f64::consts::PI) * total
}
