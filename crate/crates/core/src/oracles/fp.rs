use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForcedDoubleWellParams;

use super::fourier::fourier_project;
use super::{Observables, OracleEstimate, OracleMethod};

const MASS_TOL: f64 = 1e-8;
const NEGATIVITY_TOL: f64 = -1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpSettings {
    pub x_min: f64,
    pub x_max: f64,
    pub n_grid: usize,
    /// BDF2 steps per forcing period.
    pub steps_per_period: usize,
    /// First horizon, in periods; doubled until equilibrium or `max_periods`.
    pub initial_periods: usize,
    pub max_periods: usize,
    /// Largest change of `(P, a1, b1)` between the last two periods at equilibrium.
    pub equilibrium_tol: f64,
    pub initial_center: f64,
    pub initial_width: f64,
    /// Also solve at half resolution in space and time to estimate the error.
    pub error_proxy: bool,
    /// Keep the density at every step of the last period.
    #[serde(default)]
    pub record_final_period: bool,
}

impl Default for FpSettings {
    fn default() -> Self {
        FpSettings {
            x_min: -5.0,
            x_max: 5.0,
            n_grid: 2001,
            steps_per_period: 1000,
            initial_periods: 8,
            max_periods: 400,
            equilibrium_tol: 1e-6,
            initial_center: 0.0,
            initial_width: 1.0,
            error_proxy: true,
            record_final_period: false,
        }
    }
}

impl FpSettings {
    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.x_min < self.x_max) {
            return invalid(format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max));
        }
        if self.n_grid < 3 {
            return invalid(format!("n_grid must be >= 3, got {}", self.n_grid));
        }
        if self.steps_per_period < 2 {
            return invalid(format!("steps_per_period must be >= 2, got {}", self.steps_per_period));
        }
        if self.initial_periods < 2 || self.max_periods < self.initial_periods {
            return invalid(format!(
                "need 2 <= initial_periods <= max_periods, got {} and {}",
                self.initial_periods, self.max_periods
            ));
        }
        if !(self.initial_width > 0.0) {
            return invalid(format!("initial_width must be > 0, got {}", self.initial_width));
        }
        Ok(())
    }

    fn coarsened(&self) -> FpSettings {
        FpSettings {
            n_grid: (self.n_grid - 1) / 2 + 1,
            steps_per_period: (self.steps_per_period / 2).max(2),
            error_proxy: false,
            record_final_period: false,
            ..self.clone()
        }
    }
}

/// Result of a Fokker–Planck run: the estimate plus the final-period mean
/// trajectory and the final density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpRun {
    pub estimate: OracleEstimate,
    /// `(t, ⟨X⟩(t), ⟨X²⟩(t))` over the last period, endpoints included.
    pub trajectory: Vec<(f64, f64, f64)>,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Densities at the trajectory times; empty unless
    /// `record_final_period` was set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub final_period: Vec<Vec<f64>>,
}

impl FpRun {
    /// Trapezoid-rule weights of the grid, i.e. the control-volume widths.
    pub fn cell_weights(&self) -> Vec<f64> {
        let n = self.grid.len();
        let dx = self.grid[1] - self.grid[0];
        (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * dx } else { dx }).collect()
    }
}

struct Evolution {
    values: Observables,
    trajectory: Vec<(f64, f64, f64)>,
    grid: Vec<f64>,
    density: Vec<f64>,
    final_period: Vec<Vec<f64>>,
    periods: usize,
    equilibrated: bool,
    max_mass_drift: f64,
    min_density: f64,
}

/// Tridiagonal solve; `lower[0]` and `upper[n-1]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

fn evolve(params: &ForcedDoubleWellParams, s: &FpSettings) -> Result<Evolution> {
    let n = s.n_grid;
    let dx = (s.x_max - s.x_min) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| s.x_min + i as f64 * dx).collect();
    // trapezoid weights = control-volume widths
    let weights: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx })
        .collect();
    let noise = params.noise_f64();
    let amp = params.amplitude_f64();
    let omega = params.omega_f64();
    let period = params.period();
    let spp = s.steps_per_period;
    let dt = period / spp as f64;

    // Face flux J_{i+1/2} = a_i p_i + b_i p_{i+1}, central in the drift.
    let (a0, b0): (Vec<f64>, Vec<f64>) = (0..n - 1)
        .map(|i| {
            let xm = grid[i] + 0.5 * dx;
            let mu = xm - xm * xm * xm;
            (0.5 * mu + noise / dx, 0.5 * mu - noise / dx)
        })
        .unzip();

    let mut p: Vec<f64> = grid
        .iter()
        .map(|x| (-0.5 * ((x - s.initial_center) / s.initial_width).powi(2)).exp())
        .collect();
    let mass0: f64 = p.iter().zip(&weights).map(|(p, w)| p * w).sum();
    p.iter_mut().for_each(|v| *v /= mass0);
    let mut p_prev: Option<Vec<f64>> = None;

    let moments = |p: &[f64]| -> (f64, f64, f64) {
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for ((pi, wi), xi) in p.iter().zip(&weights).zip(&grid) {
            let q = pi * wi;
            m0 += q;
            m1 += q * xi;
            m2 += q * xi * xi;
        }
        (m0, m1, m2)
    };

    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut max_mass_drift: f64 = 0.0;
    // over the last simulated period
    let mut min_density;

    let mut horizon = s.initial_periods;
    let mut history: Vec<Observables> = Vec::new();
    let mut trajectory = Vec::with_capacity(spp + 1);
    let mut final_period: Vec<Vec<f64>> = Vec::new();
    let mut equilibrated = false;
    let mut period_index = 0usize;
    loop {
        let t0 = period_index as f64 * period;
        trajectory.clear();
        final_period.clear();
        if s.record_final_period {
            final_period.push(p.clone());
        }
        let mut period_min = p.iter().copied().fold(f64::INFINITY, f64::min);
        let (_, m1, m2) = moments(&p);
        trajectory.push((t0, m1, m2));
        for k in 1..=spp {
            let t = t0 + k as f64 * dt;
            let half_forcing = 0.5 * amp * (omega * t).cos();
            // Implicit Euler through the first period damps the start-up
            // transient; BDF2 afterwards.
            let bdf2 = period_index > 0;
            let (c, h) = if bdf2 { (3.0, 2.0 * dt) } else { (1.0, dt) };
            for i in 0..n {
                let mut d = 0.0;
                lower[i] = 0.0;
                upper[i] = 0.0;
                if i > 0 {
                    let a = a0[i - 1] + half_forcing;
                    let b = b0[i - 1] + half_forcing;
                    lower[i] = -h * a / weights[i];
                    d += b;
                }
                if i + 1 < n {
                    let a = a0[i] + half_forcing;
                    let b = b0[i] + half_forcing;
                    upper[i] = h * b / weights[i];
                    d -= a;
                }
                diag[i] = c - h * d / weights[i];
                rhs[i] = match (&p_prev, bdf2) {
                    (Some(prev), true) => 4.0 * p[i] - prev[i],
                    _ => p[i],
                };
            }
            thomas(&lower, &diag, &upper, &mut rhs, &mut scratch);
            let old = std::mem::replace(&mut p, rhs.clone());
            p_prev = Some(old);

            let (m0, m1, m2) = moments(&p);
            max_mass_drift = max_mass_drift.max((m0 - 1.0).abs());
            period_min = p.iter().copied().fold(period_min, f64::min);
            if !m0.is_finite() {
                return Err(Error::Instability(format!(
                    "Fokker-Planck density became non-finite at t = {t:.6}"
                )));
            }
            trajectory.push((t, m1, m2));
            if s.record_final_period {
                final_period.push(p.clone());
            }
        }
        period_index += 1;

        let times: Vec<f64> = trajectory.iter().map(|r| r.0 - t0).collect();
        let mean_x: Vec<f64> = trajectory.iter().map(|r| r.1).collect();
        let (a1, b1) = fourier_project(&times, &mean_x, omega)?;
        let pw: f64 = trajectory
            .iter()
            .enumerate()
            .map(|(k, r)| if k == 0 || k == spp { 0.5 * r.2 } else { r.2 })
            .sum::<f64>()
            / spp as f64;
        history.push(Observables { p: pw, a1, b1 });
        min_density = period_min;

        if period_index >= horizon {
            let last = history[history.len() - 1];
            let before = history[history.len() - 2];
            let change = (last.p - before.p)
                .abs()
                .max((last.a1 - before.a1).abs())
                .max((last.b1 - before.b1).abs());
            if change < s.equilibrium_tol {
                equilibrated = true;
                break;
            }
            if horizon >= s.max_periods {
                break;
            }
            horizon = (2 * horizon).min(s.max_periods);
        }
    }
    Ok(Evolution {
        values: *history.last().expect("at least one period"),
        trajectory,
        grid,
        density: p,
        final_period,
        periods: period_index,
        equilibrated,
        max_mass_drift,
        min_density,
    })
}

/// Time-periodic equilibrium of the Fokker–Planck equation
/// `∂t p = -∂x((x - x³ + A cos Ωt) p) + D ∂x² p` with zero-flux walls.
///
/// Space is discretized by central finite volumes on a uniform grid (end
/// cells of half width, so the discrete mass is the trapezoid rule and is
/// conserved exactly), time by BDF2 with an integer number of steps per
/// period. `(P, a1, b1)` are extracted from the last simulated period, which
/// is also where the density is checked for negativity.
pub fn fp_solve(params: &ForcedDoubleWellParams, settings: &FpSettings) -> Result<FpRun> {
    params.validate()?;
    settings.validate()?;
    let fine = evolve(params, settings)?;
    let coarse = if settings.error_proxy {
        Some(evolve(params, &settings.coarsened())?)
    } else {
        None
    };

    let mut diagnostics = Vec::new();
    let mut converged = true;
    let mut check = |ev: &Evolution, label: &str| {
        if !ev.equilibrated {
            converged = false;
            diagnostics.push(format!(
                "{label}: no equilibrium within {} periods (tolerance {:e})",
                ev.periods, settings.equilibrium_tol
            ));
        }
        if ev.max_mass_drift > MASS_TOL {
            converged = false;
            diagnostics.push(format!("{label}: mass drift {:e} exceeds {MASS_TOL:e}", ev.max_mass_drift));
        }
        if ev.min_density < NEGATIVITY_TOL {
            converged = false;
            diagnostics.push(format!("{label}: density reached {:e}", ev.min_density));
        }
    };
    check(&fine, "fine grid");
    if let Some(c) = &coarse {
        check(c, "coarse grid");
    }

    let error_proxy = coarse.as_ref().map(|c| Observables {
        p: (fine.values.p - c.values.p).abs(),
        a1: (fine.values.a1 - c.values.a1).abs(),
        b1: (fine.values.b1 - c.values.b1).abs(),
    });
    let estimate = OracleEstimate {
        method: OracleMethod::Fp,
        values: fine.values,
        std_err: None,
        error_proxy,
        converged,
        diagnostics,
        metadata: serde_json::json!({
            "params": params,
            "settings": settings,
            "dt": 2.0 * PI / params.omega_f64() / settings.steps_per_period as f64,
            "periods": fine.periods,
            "coarse_periods": coarse.as_ref().map(|c| c.periods),
            "max_mass_drift": fine.max_mass_drift,
            "min_density": fine.min_density,
        }),
    };
    Ok(FpRun {
        estimate,
        trajectory: fine.trajectory,
        grid: fine.grid,
        density: fine.density,
        final_period: fine.final_period,
    })
}
