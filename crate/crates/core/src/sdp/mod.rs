//! Moment relaxations of stationary SDE measures and their solution.
//!
//! [`assemble`] builds the degree-`d` problem (moment matrix, stationarity,
//! localization and normalization rows). [`solve`] reduces it exactly to a
//! small linear matrix inequality and runs an interior-point method on it.
//! [`Relaxation`] caches that reduction so a model can be queried for many
//! objectives and both senses.

pub mod extended_real;
mod index;
mod ipm;
mod problem;
mod reduce;
pub mod sdpa;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::poly::{Polynomial, Rational};

pub use index::MomentIndex;
pub use ipm::{solve_lmi, IpmOutcome, IpmSettings, Lmi};
pub use problem::{
    assemble, assemble_with, linearize_objective, localization_rows, stationarity_rows,
    Constraints, EqualityRow, MomentProblem, OddMoments, PsdEntry, RowKind, Sense,
};
pub use reduce::{AffineMoment, InconsistentRows, ReducedObjective, Reduction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// `X = Z = λI` at the start.
    pub initial_scale: f64,
    pub step_fraction: f64,
    /// Optional per-moment scale `y_id = s_id · ŷ_id`, indexed by moment id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_scale: Option<Vec<f64>>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let ipm = IpmSettings::default();
        SolverSettings {
            tol_feas: ipm.tol_feas,
            tol_gap: ipm.tol_gap,
            max_iter: ipm.max_iter,
            initial_scale: ipm.initial_scale,
            step_fraction: ipm.step_fraction,
            variable_scale: None,
        }
    }
}

impl SolverSettings {
    fn ipm(&self) -> IpmSettings {
        IpmSettings {
            tol_feas: self.tol_feas,
            tol_gap: self.tol_gap,
            max_iter: self.max_iter,
            initial_scale: self.initial_scale,
            step_fraction: self.step_fraction,
            ..IpmSettings::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Objective at the returned moment point.
    #[serde(with = "extended_real")]
    pub primal_objective: f64,
    /// Objective certified by the dual matrix.
    #[serde(with = "extended_real")]
    pub dual_objective: f64,
    #[serde(with = "extended_real")]
    pub relative_gap: f64,
    #[serde(with = "extended_real")]
    pub primal_infeasibility: f64,
    #[serde(with = "extended_real")]
    pub dual_infeasibility: f64,
    pub free_variables: usize,
    pub block_dim: usize,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    /// Optimal value for `Optimal`; `∓∞` for `Unbounded`, `±∞` for
    /// `Infeasible`; the solver's last estimate otherwise.
    pub value: f64,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Interval for one objective from a minimize/maximize pair. Bounds whose
/// status is not optimal are reported as `∓∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub objective: String,
    pub degree: u32,
    #[serde(with = "extended_real")]
    pub lower: f64,
    #[serde(with = "extended_real")]
    pub upper: f64,
    pub status_lower: SolveStatus,
    pub status_upper: SolveStatus,
    pub stats_lower: SolveStats,
    pub stats_upper: SolveStats,
}

impl BoundResult {
    pub fn both_optimal(&self) -> bool {
        self.status_lower.is_optimal() && self.status_upper.is_optimal()
    }

    pub fn wall_time_s(&self) -> f64 {
        self.stats_lower.wall_time_s + self.stats_upper.wall_time_s
    }
}

/// Moment index with symmetry-odd moments eliminated.
pub fn build_moment_index(model: &SdeModel, degree: u32) -> Result<MomentIndex> {
    MomentIndex::new(model, degree, true)
}

/// Solves a single assembled problem.
pub fn solve(problem: &MomentProblem, settings: &SolverSettings) -> Result<SolveOutcome> {
    let start = Instant::now();
    let reduction = Reduction::new(
        problem.index.num_moments(),
        &problem.rows,
        &problem.psd_block,
        problem.block_dim(),
    );
    solve_reduced(reduction.as_ref(), &problem.objective, problem.sense, settings, start)
}

/// Lower/upper bounds of `objective` at degree `d`.
pub fn bound_pair(
    model: &SdeModel,
    degree: u32,
    objective: &Polynomial,
    settings: &SolverSettings,
) -> Result<BoundResult> {
    let relaxation = Relaxation::new(model, degree)?;
    let name = objective.display_with(&model.names()).to_string();
    relaxation.bound(&name, objective, settings)
}

/// A model's degree-`d` constraint set with its exact reduction, reusable
/// across objectives.
#[derive(Clone, Debug)]
pub struct Relaxation {
    model: SdeModel,
    constraints: Constraints,
    reduction: std::result::Result<Reduction, InconsistentRows>,
}

impl Relaxation {
    pub fn new(model: &SdeModel, degree: u32) -> Result<Self> {
        Self::with_odd_moments(model, degree, OddMoments::Eliminate)
    }

    pub fn with_odd_moments(model: &SdeModel, degree: u32, odd: OddMoments) -> Result<Self> {
        let constraints = Constraints::build(model, degree, odd)?;
        let reduction = Reduction::new(
            constraints.index.num_moments(),
            &constraints.rows,
            &constraints.psd_block,
            constraints.index.basis().len(),
        );
        Ok(Relaxation {
            model: model.clone(),
            constraints,
            reduction,
        })
    }

    pub fn degree(&self) -> u32 {
        self.constraints.index.degree()
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn reduction(&self) -> Option<&Reduction> {
        self.reduction.as_ref().ok()
    }

    pub fn problem(&self, objective: &Polynomial, sense: Sense) -> Result<MomentProblem> {
        let obj = linearize_objective(&self.model, &self.constraints.index, objective)?;
        Ok(self.constraints.with_objective(obj, sense))
    }

    pub fn solve(
        &self,
        objective: &Polynomial,
        sense: Sense,
        settings: &SolverSettings,
    ) -> Result<SolveOutcome> {
        let start = Instant::now();
        let obj = linearize_objective(&self.model, &self.constraints.index, objective)?;
        solve_reduced(self.reduction.as_ref(), &obj, sense, settings, start)
    }

    pub fn bound(
        &self,
        name: &str,
        objective: &Polynomial,
        settings: &SolverSettings,
    ) -> Result<BoundResult> {
        let lo = self.solve(objective, Sense::Minimize, settings)?;
        let hi = self.solve(objective, Sense::Maximize, settings)?;
        Ok(BoundResult {
            objective: name.to_string(),
            degree: self.degree(),
            lower: if lo.status.is_optimal() { lo.value } else { f64::NEG_INFINITY },
            upper: if hi.status.is_optimal() { hi.value } else { f64::INFINITY },
            status_lower: lo.status,
            status_upper: hi.status,
            stats_lower: lo.stats,
            stats_upper: hi.stats,
        })
    }
}

fn solve_reduced(
    reduction: std::result::Result<&Reduction, &InconsistentRows>,
    objective: &[(usize, Rational)],
    sense: Sense,
    settings: &SolverSettings,
    start: Instant,
) -> Result<SolveOutcome> {
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let infinite = |status: SolveStatus, value: f64, stats: SolveStats| SolveOutcome {
        value,
        status,
        stats: SolveStats {
            wall_time_s: start.elapsed().as_secs_f64(),
            ..stats
        },
    };
    let Ok(red) = reduction else {
        return Ok(infinite(SolveStatus::Infeasible, sign * f64::INFINITY, SolveStats::default()));
    };
    let base_stats = SolveStats {
        free_variables: red.num_free(),
        block_dim: red.kept.len(),
        ..SolveStats::default()
    };

    let obj = red.objective(objective);
    let scale: Vec<f64> = match &settings.variable_scale {
        None => vec![1.0; red.num_free()],
        Some(s) => {
            if s.len() != red.affine.len() {
                return Err(Error::DimensionMismatch {
                    expected: red.affine.len(),
                    found: s.len(),
                });
            }
            red.free.iter().map(|&id| s[id]).collect()
        }
    };
    if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidParameter("variable scales must be positive".into()));
    }

    // Free moments that no longer enter the matrix are unconstrained.
    let mut active = Vec::new();
    for (k, fk) in red.f.iter().enumerate() {
        if fk.iter().any(|v| *v != 0.0) {
            active.push(k);
        } else if obj.coeffs[k] != 0.0 {
            return Ok(infinite(SolveStatus::Unbounded, -sign * f64::INFINITY, base_stats));
        }
    }
    let lmi = Lmi {
        c0: sign * obj.constant,
        c: DVector::from_iterator(
            active.len(),
            active.iter().map(|&k| sign * obj.coeffs[k] * scale[k]),
        ),
        f0: red.f0.clone(),
        f: active.iter().map(|&k| &red.f[k] * scale[k]).collect(),
    };
    let out = solve_lmi(&lmi, &settings.ipm());
    let stats = SolveStats {
        iterations: out.iterations,
        primal_objective: sign * out.moment_objective,
        dual_objective: sign * out.certificate_objective,
        relative_gap: out.relative_gap,
        primal_infeasibility: out.primal_infeasibility,
        dual_infeasibility: out.dual_infeasibility,
        wall_time_s: start.elapsed().as_secs_f64(),
        ..base_stats
    };
    let value = match out.status {
        SolveStatus::Unbounded => -sign * f64::INFINITY,
        SolveStatus::Infeasible => sign * f64::INFINITY,
        _ => sign * out.lower_bound(),
    };
    Ok(SolveOutcome {
        value,
        status: out.status,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lift_forced_double_well, ornstein_uhlenbeck, ForcedDoubleWellParams};
    use crate::poly::rational;

    #[test]
    fn ou_second_moment_is_exact() {
        let ou = ornstein_uhlenbeck(rational(1, 4)).unwrap();
        let x2 = Polynomial::parse("x^2", &["x"]).unwrap();
        for sense in [Sense::Minimize, Sense::Maximize] {
            let p = assemble(&ou, 2, &x2, sense).unwrap();
            let out = solve(&p, &SolverSettings::default()).unwrap();
            assert_eq!(out.status, SolveStatus::Optimal);
            assert!((out.value - 0.25).abs() < 1e-6, "{sense:?} {}", out.value);
        }
    }

    #[test]
    fn circle_marginal_is_forced() {
        let m = lift_forced_double_well(&ForcedDoubleWellParams::reference(rational(1, 2)).unwrap())
            .unwrap();
        let y2 = Polynomial::parse("y^2", &["X", "y", "z"]).unwrap();
        let b = bound_pair(&m, 3, &y2, &SolverSettings::default()).unwrap();
        assert!(b.both_optimal());
        assert!((b.lower - 0.5).abs() < 1e-6);
        assert!((b.upper - 0.5).abs() < 1e-6);
    }
}
