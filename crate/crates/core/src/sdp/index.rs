use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::poly::{enumerate_monomials, MultiIndex, Polynomial, Rational};

/// Indexing of a degree-`d` moment relaxation: the moment-matrix basis
/// (monomials of degree ≤ d) and a dense id for every surviving moment of
/// degree ≤ 2d.
#[derive(Clone, Debug)]
pub struct MomentIndex {
    nvars: usize,
    degree: u32,
    basis: Vec<MultiIndex>,
    moments: Vec<MultiIndex>,
    ids: HashMap<MultiIndex, usize>,
    eliminated: BTreeSet<MultiIndex>,
}

impl MomentIndex {
    /// Builds the index. With `eliminate_odd`, moments that are odd under the
    /// model's sign symmetry are pinned to zero by removal.
    pub fn new(model: &SdeModel, degree: u32, eliminate_odd: bool) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("relaxation degree must be >= 1".into()));
        }
        let nvars = model.nvars();
        let basis = enumerate_monomials(nvars, degree);
        let signs = if eliminate_odd {
            model.sign_symmetry()
        } else {
            None
        };
        let mut moments = Vec::new();
        let mut ids = HashMap::new();
        let mut eliminated = BTreeSet::new();
        for alpha in enumerate_monomials(nvars, 2 * degree) {
            match signs {
                Some(s) if alpha.is_odd_under(s) => {
                    eliminated.insert(alpha);
                }
                _ => {
                    ids.insert(alpha.clone(), moments.len());
                    moments.push(alpha);
                }
            }
        }
        Ok(MomentIndex {
            nvars,
            degree,
            basis,
            moments,
            ids,
            eliminated,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Rows/columns of the moment matrix.
    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Multi-index of each moment id, in id order.
    pub fn moments(&self) -> &[MultiIndex] {
        &self.moments
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn id(&self, alpha: &MultiIndex) -> Option<usize> {
        self.ids.get(alpha).copied()
    }

    pub fn is_eliminated(&self, alpha: &MultiIndex) -> bool {
        self.eliminated.contains(alpha)
    }

    pub fn eliminated(&self) -> &BTreeSet<MultiIndex> {
        &self.eliminated
    }

    /// Expresses `⟨⟨p⟩⟩` as a sparse combination of moment ids, dropping
    /// eliminated moments. Coefficients are sorted by id; an empty result
    /// means the expectation vanishes identically.
    pub fn linearize(&self, p: &Polynomial) -> Result<Vec<(usize, Rational)>> {
        let mut out: Vec<(usize, Rational)> = Vec::new();
        for (alpha, c) in p.terms() {
            if let Some(id) = self.id(alpha) {
                out.push((id, c.clone()));
            } else if !self.is_eliminated(alpha) {
                return Err(Error::InvalidParameter(format!(
                    "monomial of degree {} exceeds the relaxation's 2d = {}",
                    alpha.degree(),
                    2 * self.degree
                )));
            }
        }
        out.sort_by_key(|(id, _)| *id);
        out.retain(|(_, c)| !c.is_zero());
        Ok(out)
    }
}
