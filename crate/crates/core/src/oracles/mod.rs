//! Independent numerical baselines for the forced double well: an
//! Euler–Maruyama ensemble, a finite-volume Fokker–Planck solver, and
//! Boltzmann quadrature for the unforced case.

mod em;
mod fourier;
mod fp;
mod quad;

use serde::{Deserialize, Serialize};

pub use em::{em_simulate, EmSettings};
pub use fourier::fourier_project;
pub use fp::{fp_solve, FpRun, FpSettings};
pub use quad::{boltzmann_moments, boltzmann_moments_with_tolerance};

/// Time-averaged `P = ⟨⟨X²⟩⟩`, `a1 = ⟨⟨X cos Ωt⟩⟩`, `b1 = ⟨⟨X sin Ωt⟩⟩`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    #[serde(rename = "P")]
    pub p: f64,
    pub a1: f64,
    pub b1: f64,
}

impl Observables {
    pub fn b2(&self) -> f64 {
        self.a1 * self.a1 + self.b1 * self.b1
    }

    pub fn max_abs(&self) -> f64 {
        self.p.abs().max(self.a1.abs()).max(self.b1.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Em,
    Fp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub method: OracleMethod,
    pub values: Observables,
    /// Across-path standard errors (Euler–Maruyama).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Observables>,
    /// `|fine - coarse|` between two resolutions (Fokker–Planck).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_proxy: Option<Observables>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// Parameters and settings the estimate was produced with.
    pub metadata: serde_json::Value,
}

impl OracleEstimate {
    /// The per-quantity uncertainty used for containment checks:
    /// `k` standard errors for EM, the discretization proxy for FP.
    pub fn uncertainty(&self, k: f64) -> Observables {
        match (self.std_err, self.error_proxy) {
            (Some(se), _) => Observables {
                p: k * se.p,
                a1: k * se.a1,
                b1: k * se.b1,
            },
            (None, Some(proxy)) => proxy,
            (None, None) => Observables::default(),
        }
    }
}
