use std::f64::consts::PI;

use crate::error::{Error, Result};

/// First-harmonic projection `(a1, b1) = (1/T) ∫ (cos Ωt, sin Ωt) m(t) dt`
/// over one forcing period, by the trapezoidal rule. `times` must be uniform
/// and span exactly `T = 2π/Ω`, endpoints included.
pub fn fourier_project(times: &[f64], values: &[f64], omega: f64) -> Result<(f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::Usage(format!(
            "fourier_project: {} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 3 {
        return Err(Error::Usage("fourier_project: need at least 3 samples".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::Usage(format!("fourier_project: omega must be > 0, got {omega}")));
    }
    let period = 2.0 * PI / omega;
    let n = times.len() - 1;
    let h = period / n as f64;
    let span = times[n] - times[0];
    if (span - period).abs() > 1e-9 * period {
        return Err(Error::Usage(format!(
            "fourier_project: window spans {span}, expected one period {period}"
        )));
    }
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h)
    {
        return Err(Error::Usage("fourier_project: samples are not uniform".into()));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for (k, (&t, &v)) in times.iter().zip(values).enumerate() {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let phase = omega * t;
        a += w * phase.cos() * v;
        b += w * phase.sin() * v;
    }
    Ok((a * h / period, b * h / period))
}
