//! Exact preprocessing of a moment problem into a small linear matrix
//! inequality `F(w) = F0 + Σ w_k F_k ⪰ 0` over the free moments `w`.
//!
//! The equality rows are eliminated in exact rational arithmetic, so every
//! moment becomes an affine function of the free ones. The common kernel of
//! the resulting affine matrix family (for the lifted model: the vectors
//! `Y^β (y² + z² - 1)`) is then removed by deleting basis coordinates, which
//! restores strict feasibility for the interior-point solver.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::poly::{rational_to_f64, Rational};

use super::problem::{EqualityRow, PsdEntry};

/// The equality rows admit no solution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InconsistentRows;

/// `y = constant + Σ_k coeffs[k] · w_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMoment {
    pub constant: Rational,
    pub coeffs: Vec<(usize, Rational)>,
}

#[derive(Clone, Debug)]
pub struct Reduction {
    /// Moment id of each free variable `w_k`.
    pub free: Vec<usize>,
    /// Affine expression of every moment id.
    pub affine: Vec<AffineMoment>,
    /// Basis positions kept after removing the common kernel.
    pub kept: Vec<usize>,
    pub f0: DMatrix<f64>,
    pub f: Vec<DMatrix<f64>>,
}

/// An objective `c0 + Σ c_k w_k` over the free moments.
#[derive(Clone, Debug)]
pub struct ReducedObjective {
    pub constant: f64,
    pub coeffs: DVector<f64>,
}

impl Reduction {
    pub fn new(
        num_moments: usize,
        rows: &[EqualityRow],
        psd_block: &[PsdEntry],
        block_dim: usize,
    ) -> Result<Self, InconsistentRows> {
        let (free, affine) = eliminate(num_moments, rows)?;
        let nfree = free.len();
        let entry_affine = |e: PsdEntry| -> (Rational, Vec<(usize, Rational)>) {
            match e {
                PsdEntry::Zero => (Rational::zero(), Vec::new()),
                PsdEntry::One => (Rational::one(), Vec::new()),
                PsdEntry::Moment(id) => (affine[id].constant.clone(), affine[id].coeffs.clone()),
            }
        };
        let mut f0 = vec![Rational::zero(); block_dim * block_dim];
        let mut fk = vec![vec![Rational::zero(); block_dim * block_dim]; nfree];
        for (pos, &e) in psd_block.iter().enumerate() {
            let (c, coeffs) = entry_affine(e);
            f0[pos] = c;
            for (k, v) in coeffs {
                fk[k][pos] = v;
            }
        }
        let kept = kept_coordinates(block_dim, std::iter::once(&f0).chain(fk.iter()));
        let restrict = |m: &[Rational]| {
            DMatrix::from_fn(kept.len(), kept.len(), |i, j| {
                rational_to_f64(&m[kept[i] * block_dim + kept[j]])
            })
        };
        Ok(Reduction {
            f0: restrict(&f0),
            f: fk.iter().map(|m| restrict(m)).collect(),
            free,
            affine,
            kept,
        })
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Projects a linear functional over moment ids onto the free moments.
    pub fn objective(&self, objective: &[(usize, Rational)]) -> ReducedObjective {
        let mut constant = Rational::zero();
        let mut coeffs = vec![Rational::zero(); self.free.len()];
        for (id, c) in objective {
            let a = &self.affine[*id];
            constant += c * &a.constant;
            for (k, v) in &a.coeffs {
                coeffs[*k] += c * v;
            }
        }
        ReducedObjective {
            constant: rational_to_f64(&constant),
            coeffs: DVector::from_iterator(coeffs.len(), coeffs.iter().map(rational_to_f64)),
        }
    }

    /// Moments implied by a value of the free variables.
    pub fn moments(&self, w: &[f64]) -> Vec<f64> {
        self.affine
            .iter()
            .map(|a| {
                rational_to_f64(&a.constant)
                    + a.coeffs
                        .iter()
                        .map(|(k, v)| rational_to_f64(v) * w[*k])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Gaussian elimination pivoting on the highest moment id of each row, so
/// the free variables are the lowest-degree moments.
fn eliminate(
    num_moments: usize,
    rows: &[EqualityRow],
) -> Result<(Vec<usize>, Vec<AffineMoment>), InconsistentRows> {
    // pivot column -> (row normalized to 1 at the pivot, rhs)
    let mut pivots: HashMap<usize, (BTreeMap<usize, Rational>, Rational)> = HashMap::new();
    for row in rows {
        let mut r: BTreeMap<usize, Rational> = row
            .coeffs
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(id, c)| (*id, c.clone()))
            .collect();
        let mut rhs = row.rhs.clone();
        while let Some(col) = r.keys().rev().find(|k| pivots.contains_key(k)).copied() {
            let factor = r.remove(&col).expect("present");
            let (prow, prhs) = &pivots[&col];
            for (j, v) in prow {
                if *j == col {
                    continue;
                }
                let entry = r.entry(*j).or_insert_with(Rational::zero);
                *entry -= &factor * v;
                if entry.is_zero() {
                    r.remove(j);
                }
            }
            rhs -= &factor * prhs;
        }
        let Some((&col, lead)) = r.iter().next_back() else {
            if rhs.is_zero() {
                continue;
            }
            return Err(InconsistentRows);
        };
        let lead = lead.clone();
        for v in r.values_mut() {
            *v /= &lead;
        }
        rhs /= &lead;
        pivots.insert(col, (r, rhs));
    }

    let free: Vec<usize> = (0..num_moments).filter(|id| !pivots.contains_key(id)).collect();
    let free_pos: HashMap<usize, usize> = free.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut affine: Vec<Option<AffineMoment>> = vec![None; num_moments];
    for (&id, &k) in &free_pos {
        affine[id] = Some(AffineMoment {
            constant: Rational::zero(),
            coeffs: vec![(k, Rational::one())],
        });
    }
    // Each pivot row only references ids at or below its pivot.
    for id in 0..num_moments {
        let Some((prow, prhs)) = pivots.get(&id) else { continue };
        let mut constant = prhs.clone();
        let mut acc = vec![Rational::zero(); free.len()];
        for (j, v) in prow {
            if *j == id {
                continue;
            }
            let a = affine[*j].as_ref().expect("lower ids resolved first");
            constant -= v * &a.constant;
            for (k, c) in &a.coeffs {
                acc[*k] -= v * c;
            }
        }
        affine[id] = Some(AffineMoment {
            constant,
            coeffs: acc
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        });
    }
    Ok((free, affine.into_iter().map(|a| a.expect("all ids resolved")).collect()))
}

const PRIME: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

fn to_mod(q: &Rational) -> u64 {
    let p = BigInt::from(PRIME);
    let n = q.numer().mod_floor(&p).to_u64().expect("reduced");
    let d = q.denom().mod_floor(&p).to_u64().expect("reduced");
    mul_mod(n, pow_mod(d, PRIME - 2))
}

/// Basis coordinates to keep: the pivot columns of the row space spanned by
/// all rows of all matrices, computed modulo a large prime. A reduction of
/// rank modulo the prime can only delete extra coordinates, and a principal
/// submatrix of a PSD matrix is PSD, so the result stays a valid relaxation.
fn kept_coordinates<'a>(n: usize, mats: impl Iterator<Item = &'a Vec<Rational>>) -> Vec<usize> {
    // pivot column -> reduced row (entry 1 at the pivot)
    let mut basis: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for m in mats {
        for i in 0..n {
            let src = &m[i * n..(i + 1) * n];
            if src.iter().all(Zero::is_zero) {
                continue;
            }
            let mut row: Vec<u64> = src.iter().map(to_mod).collect();
            for (&col, prow) in &basis {
                let f = row[col];
                if f != 0 {
                    for (x, y) in row.iter_mut().zip(prow) {
                        *x = (*x + PRIME - mul_mod(f, *y)) % PRIME;
                    }
                }
            }
            let Some(col) = row.iter().position(|&x| x != 0) else { continue };
            let inv = pow_mod(row[col], PRIME - 2);
            for x in row.iter_mut() {
                *x = mul_mod(*x, inv);
            }
            for prow in basis.values_mut() {
                let f = prow[col];
                if f != 0 {
                    for (x, y) in prow.iter_mut().zip(&row) {
                        *x = (*x + PRIME - mul_mod(f, *y)) % PRIME;
                    }
                }
            }
            basis.insert(col, row);
            if basis.len() == n {
                return (0..n).collect();
            }
        }
    }
    basis.into_keys().collect()
}
