use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::poly::{enumerate_monomials, MultiIndex, Polynomial, Rational};

use super::index::MomentIndex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Where an equality row comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// `⟨⟨1⟩⟩ = 1`
    Normalization,
    /// `⟨⟨L Y^α⟩⟩ = 0`
    Stationarity(MultiIndex),
    /// `⟨⟨Y^β g_k⟩⟩ = 0` for constraint `k`
    Localization { constraint: usize, beta: MultiIndex },
    /// `⟨⟨Y^γ⟩⟩ = 0` for a symmetry-odd `γ` kept as a variable
    Symmetry(MultiIndex),
}

/// `Σ coeff · y_id = rhs` over moment ids, sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityRow {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, Rational)>,
    pub rhs: Rational,
}

/// Entry of the moment matrix in terms of moment ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsdEntry {
    Zero,
    One,
    Moment(usize),
}

/// How symmetry-odd moments are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OddMoments {
    /// Removed from the variable set.
    #[default]
    Eliminate,
    /// Kept as variables and pinned to zero by explicit rows.
    PinWithRows,
}

/// The degree-`d` moment relaxation for one objective.
#[derive(Clone, Debug)]
pub struct MomentProblem {
    pub index: MomentIndex,
    /// Row-major `n × n` with `n = basis.len()`.
    pub psd_block: Vec<PsdEntry>,
    pub rows: Vec<EqualityRow>,
    pub objective: Vec<(usize, Rational)>,
    pub sense: Sense,
}

impl MomentProblem {
    pub fn block_dim(&self) -> usize {
        self.index.basis().len()
    }

    pub fn entry(&self, i: usize, j: usize) -> PsdEntry {
        self.psd_block[i * self.block_dim() + j]
    }
}

/// One `⟨⟨L Y^α⟩⟩ = 0` row per admissible α, i.e. `|α| + max(d_μ - 1, d_D - 2) ≤ 2d`.
/// Rows that vanish identically after odd-moment elimination are dropped.
pub fn stationarity_rows(model: &SdeModel, index: &MomentIndex) -> Result<Vec<EqualityRow>> {
    let limit = 2 * index.degree() as i64 - model.generator_degree_shift();
    if limit < 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for alpha in enumerate_monomials(model.nvars(), limit as u32) {
        let f = Polynomial::monomial(model.nvars(), alpha.clone(), Rational::one());
        let lf = model.generator_apply(&f)?;
        let coeffs = index.linearize(&lf)?;
        if !coeffs.is_empty() {
            rows.push(EqualityRow {
                kind: RowKind::Stationarity(alpha),
                coeffs,
                rhs: Rational::from_integer(0.into()),
            });
        }
    }
    Ok(rows)
}

/// `⟨⟨Y^β g⟩⟩ = 0` for every constraint `g` and `|β| ≤ 2d - deg g`.
pub fn localization_rows(model: &SdeModel, index: &MomentIndex) -> Result<Vec<EqualityRow>> {
    let mut rows = Vec::new();
    for (k, g) in model.constraints().iter().enumerate() {
        let Some(dg) = g.degree() else { continue };
        let limit = 2 * index.degree() as i64 - dg as i64;
        if limit < 0 {
            continue;
        }
        for beta in enumerate_monomials(model.nvars(), limit as u32) {
            let coeffs = index.linearize(&g.shift(&beta)?)?;
            if !coeffs.is_empty() {
                rows.push(EqualityRow {
                    kind: RowKind::Localization {
                        constraint: k,
                        beta,
                    },
                    coeffs,
                    rhs: Rational::from_integer(0.into()),
                });
            }
        }
    }
    Ok(rows)
}

fn normalization_row(index: &MomentIndex) -> EqualityRow {
    let one = MultiIndex::zero(index.nvars());
    EqualityRow {
        kind: RowKind::Normalization,
        coeffs: vec![(index.id(&one).expect("constant moment is never odd"), Rational::one())],
        rhs: Rational::one(),
    }
}

fn symmetry_rows(model: &SdeModel, index: &MomentIndex) -> Vec<EqualityRow> {
    let Some(signs) = model.sign_symmetry() else {
        return Vec::new();
    };
    index
        .moments()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_odd_under(signs))
        .map(|(id, a)| EqualityRow {
            kind: RowKind::Symmetry(a.clone()),
            coeffs: vec![(id, Rational::one())],
            rhs: Rational::from_integer(0.into()),
        })
        .collect()
}

fn moment_matrix(index: &MomentIndex) -> Vec<PsdEntry> {
    let basis = index.basis();
    let mut out = Vec::with_capacity(basis.len() * basis.len());
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            out.push(if i == 0 && j == 0 {
                PsdEntry::One
            } else {
                match index.id(&a.add(b)) {
                    Some(id) => PsdEntry::Moment(id),
                    None => PsdEntry::Zero,
                }
            });
        }
    }
    out
}

/// Checks an objective against the relaxation and linearizes it.
pub fn linearize_objective(
    model: &SdeModel,
    index: &MomentIndex,
    objective: &Polynomial,
) -> Result<Vec<(usize, Rational)>> {
    if objective.nvars() != model.nvars() {
        return Err(Error::DimensionMismatch {
            expected: model.nvars(),
            found: objective.nvars(),
        });
    }
    let limit = 2 * index.degree();
    if let Some(deg) = objective.degree() {
        if deg > limit {
            return Err(Error::ObjectiveDegree { degree: deg, limit });
        }
    }
    if let Some(signs) = model.sign_symmetry() {
        let (_, odd) = objective.parity_parts(signs);
        if !odd.is_zero() {
            let names = model.names();
            return Err(Error::OddObjective(format!(
                "`{}` is odd under the sign symmetry {:?}; its stationary expectation is identically 0",
                odd.display_with(&names),
                signs
            )));
        }
    }
    index.linearize(objective)
}

/// The constraint part of a relaxation (everything but the objective).
#[derive(Clone, Debug)]
pub struct Constraints {
    pub index: MomentIndex,
    pub psd_block: Vec<PsdEntry>,
    pub rows: Vec<EqualityRow>,
}

impl Constraints {
    pub fn build(model: &SdeModel, degree: u32, odd: OddMoments) -> Result<Self> {
        let index = MomentIndex::new(model, degree, odd == OddMoments::Eliminate)?;
        let mut rows = vec![normalization_row(&index)];
        rows.extend(stationarity_rows(model, &index)?);
        rows.extend(localization_rows(model, &index)?);
        if odd == OddMoments::PinWithRows {
            rows.extend(symmetry_rows(model, &index));
        }
        let psd_block = moment_matrix(&index);
        Ok(Constraints {
            index,
            psd_block,
            rows,
        })
    }

    pub fn with_objective(&self, objective: Vec<(usize, Rational)>, sense: Sense) -> MomentProblem {
        MomentProblem {
            index: self.index.clone(),
            psd_block: self.psd_block.clone(),
            rows: self.rows.clone(),
            objective,
            sense,
        }
    }
}

/// Assembles the full relaxation with odd moments eliminated.
pub fn assemble(
    model: &SdeModel,
    degree: u32,
    objective: &Polynomial,
    sense: Sense,
) -> Result<MomentProblem> {
    assemble_with(model, degree, objective, sense, OddMoments::Eliminate)
}

pub fn assemble_with(
    model: &SdeModel,
    degree: u32,
    objective: &Polynomial,
    sense: Sense,
    odd: OddMoments,
) -> Result<MomentProblem> {
    let cons = Constraints::build(model, degree, odd)?;
    let obj = linearize_objective(model, &cons.index, objective)?;
    Ok(cons.with_objective(obj, sense))
}
