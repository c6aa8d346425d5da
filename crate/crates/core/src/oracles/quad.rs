use std::collections::BTreeMap;

use crate::error::{Error, Result};

const HALF_WIDTH: f64 = 8.0;

/// `V(x) = -x²/2 + x⁴/4` shifted so its minimum is 0.
fn potential_shifted(x: f64) -> f64 {
    let x2 = x * x;
    0.25 * (x2 - 1.0) * (x2 - 1.0)
}

/// Double-exponential quadrature, bisected until each piece meets its share
/// of the absolute tolerance.
fn integrate_adaptive<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth == 0 {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    integrate_adaptive(f, a, m, 0.5 * tol, depth - 1) + integrate_adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// Stationary moments `⟨x^k⟩` of `dX = (X - X³) dt + sqrt(2D) dW`, i.e. of
/// the density `∝ exp(-V(x)/D)`, on `[-8, 8]` to relative accuracy ~1e-10.
/// Odd orders are exactly 0.
pub fn boltzmann_moments(noise: f64, orders: &[u32]) -> Result<BTreeMap<u32, f64>> {
    boltzmann_moments_with_tolerance(noise, orders, 1e-10)
}

pub fn boltzmann_moments_with_tolerance(
    noise: f64,
    orders: &[u32],
    rel_tol: f64,
) -> Result<BTreeMap<u32, f64>> {
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise intensity D must be > 0, got {noise}")));
    }
    // Break points at the wells and the barrier keep each piece smooth.
    let breaks = [-HALF_WIDTH, -1.0, 0.0, 1.0, HALF_WIDTH];
    let integrate = |k: u32, abs_tol: f64| -> f64 {
        let f = move |x: f64| x.powi(k as i32) * (-potential_shifted(x) / noise).exp();
        breaks
            .windows(2)
            .map(|w| integrate_adaptive(f, w[0], w[1], abs_tol / 4.0, 12))
            .sum()
    };
    // The integrand peaks at 1; the mass is at least ~sqrt(D), so an absolute
    // tolerance scaled by a first estimate gives the relative target.
    let z0 = integrate(0, 1e-6);
    let z = integrate(0, rel_tol * z0 * 0.1);
    let mut out = BTreeMap::new();
    for &k in orders {
        let v = if k % 2 == 1 {
            0.0
        } else {
            integrate(k, rel_tol * z * 0.1) / z
        };
        out.insert(k, v);
    }
    Ok(out)
}
