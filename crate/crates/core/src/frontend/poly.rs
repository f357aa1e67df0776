//! Sparse real polynomials in a fixed number of variables.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// `Σ coef · Π y_i^{e_i}` over a sparse set of exponent vectors.
///
/// Zero coefficients are never stored, so the zero polynomial has no terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariatePolynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultivariatePolynomial {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate projection `y_i`.
    pub fn variable(dim: usize, i: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(exps, 1.0);
        p
    }

    /// `Σ_k y_k²`.
    pub fn squared_norm(dim: usize) -> Self {
        let mut p = Self::zero(dim);
        for k in 0..dim {
            let mut exps = vec![0; dim];
            exps[k] = 2;
            p.add_term(exps, 1.0);
        }
        p
    }

    /// Affine form `Σ a_k y_k + c`.
    pub fn affine(coeffs: &[f64], c: f64) -> Self {
        let dim = coeffs.len();
        let mut p = Self::constant(dim, c);
        for (k, &a) in coeffs.iter().enumerate() {
            let mut exps = vec![0; dim];
            exps[k] = 1;
            p.add_term(exps, a);
        }
        p
    }

    /// Univariate `Σ_k coeffs[k] y^k`.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let mut p = Self::zero(1);
        for (k, &c) in coeffs.iter().enumerate() {
            p.add_term(vec![k as u32], c);
        }
        p
    }

    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(dim);
        for (exps, coef) in terms {
            if exps.len() != dim {
                return invalid(format!("exponent vector {exps:?} does not have length {dim}"));
            }
            if !coef.is_finite() {
                return invalid("polynomial coefficient is not finite");
            }
            p.add_term(exps, coef);
        }
        Ok(p)
    }

    fn add_term(&mut self, exps: Vec<u32>, coef: f64) {
        debug_assert_eq!(exps.len(), self.dim);
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                if coef != 0.0 {
                    v.insert(coef);
                }
            }
            Entry::Occupied(mut o) => {
                let sum = *o.get() + coef;
                if sum == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Highest total degree among stored terms; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return invalid(format!("point has dimension {}, polynomial expects {}", y.len(), self.dim));
        }
        Ok(self.eval_unchecked(y))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(exps, c)| {
                exps.iter()
                    .zip(y)
                    .filter(|(e, _)| **e > 0)
                    .fold(*c, |acc, (&e, &v)| acc * v.powi(e as i32))
            })
            .sum()
    }

    /// Gradient at `y`.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (exps, c) in &self.terms {
            for k in 0..self.dim {
                if exps[k] == 0 {
                    continue;
                }
                let mut v = c * exps[k] as f64;
                for (i, (&e, &yi)) in exps.iter().zip(y).enumerate() {
                    let e = if i == k { e - 1 } else { e };
                    if e > 0 {
                        v *= yi.powi(e as i32);
                    }
                }
                g[k] += v;
            }
        }
        g
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "polynomial dimension mismatch");
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "polynomial dimension mismatch");
        let mut p = Self::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.dim, 1.0), |acc, _| acc.mul(self))
    }

    /// Substitutes `z_i = substitutions[i]` (each a polynomial in a common
    /// set of variables) and expands.
    pub fn compose(&self, substitutions: &[MultivariatePolynomial]) -> Result<Self> {
        if substitutions.len() != self.dim {
            return invalid(format!("need {} substitutions, got {}", self.dim, substitutions.len()));
        }
        let Some(out_dim) = substitutions.first().map(|s| s.dim) else {
            return invalid("cannot compose a polynomial in zero variables");
        };
        if substitutions.iter().any(|s| s.dim != out_dim) {
            return invalid("substitutions must share one dimension");
        }
        let mut out = Self::zero(out_dim);
        for (exps, c) in &self.terms {
            let mut term = Self::constant(out_dim, *c);
            for (sub, &e) in substitutions.iter().zip(exps) {
                if e > 0 {
                    term = term.mul(&sub.pow(e));
                }
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    /// Coefficients `[c_0, c_1, …]` of a univariate polynomial.
    pub fn univariate_coefficients(&self) -> Option<Vec<f64>> {
        if self.dim != 1 {
            return None;
        }
        let mut c = vec![0.0; self.degree() as usize + 1];
        for (e, v) in &self.terms {
            c[e[0] as usize] = *v;
        }
        Some(c)
    }

    /// `Some((a, c))` when the polynomial is `⟨a, y⟩ + c`.
    pub fn as_affine(&self) -> Option<(Vec<f64>, f64)> {
        if self.degree() > 1 {
            return None;
        }
        let mut a = vec![0.0; self.dim];
        let mut c = 0.0;
        for (e, v) in &self.terms {
            match e.iter().position(|&x| x == 1) {
                Some(k) => a[k] = *v,
                None => c = *v,
            }
        }
        Some((a, c))
    }
}

impl fmt::Display for MultivariatePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "·Y{}", i + 1)?,
                    _ => write!(f, "·Y{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    exps: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct PolyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    terms: Vec<TermDoc>,
}

impl Serialize for MultivariatePolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyDoc {
            dim: self.terms.is_empty().then_some(self.dim),
            terms: self.terms.iter().map(|(e, c)| TermDoc { exps: e.clone(), coef: *c }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultivariatePolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = PolyDoc::deserialize(d)?;
        let dim = doc
            .dim
            .or_else(|| doc.terms.first().map(|t| t.exps.len()))
            .ok_or_else(|| serde::de::Error::custom("polynomial without terms needs an explicit dim"))?;
        MultivariatePolynomial::from_terms(dim, doc.terms.into_iter().map(|t| (t.exps, t.coef)))
            .map_err(serde::de::Error::custom)
    }
}
