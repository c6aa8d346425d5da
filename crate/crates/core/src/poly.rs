//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Monomials are ordered graded-lexicographically: lower total degree first,
//! and within one degree the larger exponent on an earlier variable comes
//! first. For three variables `(x, y, z)` this gives `1, x, y, z, x^2, x*y, ...`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Builds the rational `num / den`.
pub fn rational(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses an exact rational from `p/q`, an integer, or a finite decimal
/// (optionally with an exponent, e.g. `3e-1`). `0.3` parses to exactly `3/10`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(n / d);
    }
    let (neg, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = body[pos + 1..].parse().map_err(|_| bad())?;
            (&body[..pos], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -value } else { value })
}

/// Nearest `f64` to an exact rational.
pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exponent vector of a monomial `Y^α`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(nvars: usize) -> Self {
        MultiIndex(vec![0; nvars])
    }

    /// The unit exponent `e_var`.
    pub fn unit(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        MultiIndex(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `α + β`. Both must have the same length.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.0.len(), other.0.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Whether `Y^α` flips sign under `Y -> s∘Y`.
    pub fn is_odd_under(&self, signs: &[i8]) -> bool {
        self.0
            .iter()
            .zip(signs)
            .filter(|(_, s)| **s < 0)
            .map(|(a, _)| *a)
            .sum::<u32>()
            % 2
            == 1
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All multi-indices of `nvars` variables with total degree at most
/// `max_degree`, in graded lexicographic order.
pub fn enumerate_monomials(nvars: usize, max_degree: u32) -> Vec<MultiIndex> {
    assert!(nvars >= 1, "enumerate_monomials needs at least one variable");
    fn fill(rest: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if rest == 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            fill(rest - 1, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(nvars);
    for deg in 0..=max_degree {
        fill(nvars, deg, &mut prefix, &mut out);
    }
    out
}

/// A polynomial in `nvars` variables. The zero polynomial has no terms.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars >= 1);
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        Self::monomial(nvars, MultiIndex::zero(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Rational::one())
    }

    /// The single variable `Y_var`.
    pub fn var(nvars: usize, var: usize) -> Self {
        Self::monomial(nvars, MultiIndex::unit(nvars, var), Rational::one())
    }

    pub fn monomial(nvars: usize, alpha: MultiIndex, c: Rational) -> Self {
        assert_eq!(alpha.nvars(), nvars);
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(alpha, c);
        }
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, summing
    /// duplicates and dropping zeros.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    found: e.len(),
                });
            }
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }

    fn add_term(&mut self, alpha: MultiIndex, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(alpha) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in graded lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Rational {
        self.terms.get(alpha).cloned().unwrap_or_else(Rational::zero)
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(a, c)| (a.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(a, v)| (a.clone(), v * c)).collect(),
        }
    }

    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = Self::zero(self.nvars);
        for (a, c) in &self.terms {
            for (b, d) in &other.terms {
                out.add_term(a.add(b), c * d);
            }
        }
        Ok(out)
    }

    /// Multiplies by the monomial `Y^alpha`.
    pub fn shift(&self, alpha: &MultiIndex) -> Result<Polynomial> {
        if alpha.nvars() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: alpha.nvars(),
            });
        }
        Ok(Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| (a.add(alpha), c.clone()))
                .collect(),
        })
    }

    /// Partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial> {
        if var >= self.nvars {
            return Err(Error::VariableOutOfRange {
                var,
                nvars: self.nvars,
            });
        }
        let mut out = Self::zero(self.nvars);
        for (a, c) in &self.terms {
            let e = a.0[var];
            if e == 0 {
                continue;
            }
            let mut b = a.clone();
            b.0[var] -= 1;
            out.add_term(b, c * rational_int(e as i64));
        }
        Ok(out)
    }

    pub fn evaluate(&self, point: &[Rational]) -> Result<Rational> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        let mut total = Rational::zero();
        for (a, c) in &self.terms {
            let mut term = c.clone();
            for (x, &e) in point.iter().zip(&a.0) {
                if e > 0 {
                    term *= num_traits::pow(x.clone(), e as usize);
                }
            }
            total += term;
        }
        Ok(total)
    }

    pub fn evaluate_f64(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(a, c)| {
                a.0.iter()
                    .zip(point)
                    .fold(rational_to_f64(c), |acc, (&e, x)| acc * x.powi(e as i32))
            })
            .sum())
    }

    /// `p(s∘Y)` for a sign vector `s`.
    pub fn substitute_signs(&self, signs: &[i8]) -> Result<Polynomial> {
        if signs.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: signs.len(),
            });
        }
        Ok(Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(a, c)| {
                    if a.is_odd_under(signs) {
                        (a.clone(), -c)
                    } else {
                        (a.clone(), c.clone())
                    }
                })
                .collect(),
        })
    }

    /// Splits into the parts even and odd under `Y -> s∘Y`.
    pub fn parity_parts(&self, signs: &[i8]) -> (Polynomial, Polynomial) {
        let mut even = Self::zero(self.nvars);
        let mut odd = Self::zero(self.nvars);
        for (a, c) in &self.terms {
            if a.is_odd_under(signs) {
                odd.terms.insert(a.clone(), c.clone());
            } else {
                even.terms.insert(a.clone(), c.clone());
            }
        }
        (even, odd)
    }

    /// Parses text like `X - X^3 + 3/10*y` over the given variable names.
    pub fn parse(text: &str, names: &[&str]) -> Result<Polynomial> {
        parse::parse_polynomial(text, names)
    }

    /// Human-readable rendering with the given variable names.
    pub fn display_with<'a>(&'a self, names: &'a [&'a str]) -> impl fmt::Display + 'a {
        Rendered { poly: self, names }
    }
}

fn default_names(nvars: usize) -> Vec<String> {
    match nvars {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        n => (0..n).map(|i| format!("x{i}")).collect(),
    }
}

struct Rendered<'a> {
    poly: &'a Polynomial,
    names: &'a [&'a str],
}

impl fmt::Display for Rendered<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self.poly, self.names, f)
    }
}

fn render(p: &Polynomial, names: &[&str], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if p.is_zero() {
        return write!(f, "0");
    }
    let mut terms: Vec<_> = p.terms.iter().collect();
    terms.sort_by_key(|(a, _)| std::cmp::Reverse(a.degree()));
    for (i, (a, c)) in terms.into_iter().enumerate() {
        let negative = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if negative {
                write!(f, "-")?;
            }
        } else {
            write!(f, "{}", if negative { " - " } else { " + " })?;
        }
        let factors: Vec<String> = a
            .0
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(v, &e)| {
                let name = names.get(v).copied().unwrap_or("?");
                if e == 1 {
                    name.to_string()
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if factors.is_empty() {
            write!(f, "{mag}")?;
        } else if mag.is_one() {
            write!(f, "{}", factors.join("*"))?;
        } else {
            write!(f, "{mag}*{}", factors.join("*"))?;
        }
    }
    Ok(())
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let owned = default_names(self.nvars);
        let names: Vec<&str> = owned.iter().map(String::as_str).collect();
        render(self, &names, f)
    }
}

mod parse {
    use super::*;

    pub(super) fn parse_polynomial(text: &str, names: &[&str]) -> Result<Polynomial> {
        let nvars = names.len();
        if nvars == 0 {
            return Err(Error::Parse("no variables declared".into()));
        }
        let src: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if src.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        let mut out = Polynomial::zero(nvars);
        let bytes = src.as_bytes();
        let mut start = 0;
        let mut i = 0;
        // Split into signed terms, ignoring signs that belong to an exponent
        // marker such as `1e-3`.
        while i <= bytes.len() {
            let at_split = i == bytes.len() || {
                let b = bytes[i];
                (b == b'+' || b == b'-')
                    && i > start
                    && !matches!(bytes[i - 1], b'*' | b'/' | b'^')
                    && !(matches!(bytes[i - 1], b'e' | b'E')
                        && preceded_by_number(&bytes[start..i - 1]))
            };
            if at_split {
                let term = &src[start..i];
                out = out.add(&parse_term(term, names)?)?;
                start = i;
            }
            i += 1;
        }
        Ok(out)
    }

    fn preceded_by_number(prefix: &[u8]) -> bool {
        // Decides whether the `e` at the end of `prefix` belongs to a number
        // like `2.5e-3` rather than a variable name.
        let tail: Vec<u8> = prefix
            .iter()
            .rev()
            .take_while(|b| !matches!(b, b'*' | b'+' | b'-' | b'/' | b'^'))
            .copied()
            .collect();
        !tail.is_empty() && tail.iter().all(|b| b.is_ascii_digit() || *b == b'.')
    }

    fn parse_term(term: &str, names: &[&str]) -> Result<Polynomial> {
        let nvars = names.len();
        let (sign, body) = match term.as_bytes().first() {
            Some(b'-') => (-1, &term[1..]),
            Some(b'+') => (1, &term[1..]),
            _ => (1, term),
        };
        if body.is_empty() {
            return Err(Error::Parse(format!("dangling sign in {term:?}")));
        }
        let mut coef = rational_int(sign);
        let mut exps = vec![0u32; nvars];
        let mut pending_div = false;
        for factor in split_factors(body) {
            match factor {
                Factor::Div => pending_div = true,
                Factor::Item(item) => {
                    if item.is_empty() {
                        return Err(Error::Parse(format!("empty factor in {term:?}")));
                    }
                    let (base, exp) = match item.split_once('^') {
                        Some((b, e)) => (
                            b,
                            e.parse::<u32>().map_err(|_| {
                                Error::Parse(format!("bad exponent in {item:?}"))
                            })?,
                        ),
                        None => (item, 1),
                    };
                    if let Some(v) = names.iter().position(|n| *n == base) {
                        if pending_div {
                            return Err(Error::Parse(format!(
                                "division by a variable in {term:?}"
                            )));
                        }
                        exps[v] += exp;
                    } else {
                        let value = num_traits::pow(parse_rational(base)?, exp as usize);
                        if pending_div {
                            if value.is_zero() {
                                return Err(Error::Parse(format!("division by zero in {term:?}")));
                            }
                            coef /= value;
                        } else {
                            coef *= value;
                        }
                    }
                    pending_div = false;
                }
            }
        }
        Polynomial::from_terms(nvars, [(exps, coef)])
    }

    enum Factor<'a> {
        Item(&'a str),
        Div,
    }

    fn split_factors(body: &str) -> Vec<Factor<'_>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, ch) in body.char_indices() {
            if ch == '*' || ch == '/' {
                out.push(Factor::Item(&body[start..i]));
                if ch == '/' {
                    out.push(Factor::Div);
                }
                start = i + 1;
            }
        }
        out.push(Factor::Item(&body[start..]));
        out
    }
}
