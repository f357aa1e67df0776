//! Combinatorics of quantization regions: hyperplane arrangements and their
//! cell counts, the lifting of Scenario V comparators to hyperplanes, and the
//! high-SNR code constructions.

mod cells;
mod code;
mod paraboloid;
mod shatter;

pub use cells::{enumerate_cells_oracle, enumerate_cells_with, CellEnumeration};
pub use code::RegionCode;
pub use paraboloid::{
    adjudicate_theorem4, build_paraboloid_code, build_paraboloid_code_with, lifted_arrangement, AdjudicationRow,
    ParaboloidOptions,
};
pub use shatter::{
    build_shattering_code, count_shatter_formula, monomial_exponents, realized_labelings, shattering_rates,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::task_rng;
use crate::frontend::{MultivariatePolynomial, ScenarioVFunction};

/// Determinant tolerance for general-position checks.
pub const GENERAL_POSITION_TOLERANCE: f64 = 1e-10;

/// `{z : ⟨normal, z⟩ = offset}`; a point is on the positive side when
/// `⟨normal, z⟩ > offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) || !norm.is_finite() || !offset.is_finite() {
            return invalid("hyperplane needs a finite non-zero normal and finite offset");
        }
        Ok(Self { normal, offset })
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `⟨normal, z⟩ − offset`.
    pub fn value(&self, z: &[f64]) -> f64 {
        self.normal.iter().zip(z).map(|(a, z)| a * z).sum::<f64>() - self.offset
    }

    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean distance of `z` from the hyperplane.
    pub fn distance(&self, z: &[f64]) -> f64 {
        self.value(z).abs() / self.norm()
    }

    /// The Scenario V comparator `f(y) > t` whose decision on `y` equals this
    /// hyperplane's side at `lift_paraboloid(y)`.
    pub fn to_comparator(&self) -> (ScenarioVFunction, f64) {
        let r = self.dim() - 1;
        (ScenarioVFunction { linear: self.normal[..r].to_vec(), radial: self.normal[r] }, self.offset)
    }

    pub fn from_comparator(f: &ScenarioVFunction, threshold: f64) -> Result<Self> {
        let mut normal = f.linear.clone();
        normal.push(f.radial);
        Self::new(normal, threshold)
    }
}

/// Finite set of hyperplanes in `ℝ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    dim: usize,
    hyperplanes: Vec<Hyperplane>,
    general_position: bool,
    central: bool,
}

impl Arrangement {
    pub fn new(hyperplanes: Vec<Hyperplane>) -> Result<Self> {
        let Some(dim) = hyperplanes.first().map(Hyperplane::dim) else {
            return invalid("an arrangement needs at least one hyperplane");
        };
        if dim == 0 || hyperplanes.iter().any(|h| h.dim() != dim) {
            return invalid("hyperplanes must share a positive dimension");
        }
        let central = hyperplanes.iter().all(|h| h.offset.abs() <= 1e-12 * h.norm());
        let general_position = check_general_position(&hyperplanes, dim, central);
        Ok(Self { dim, hyperplanes, general_position, central })
    }

    /// `n` hyperplanes with uniform unit normals and offsets uniform in
    /// `[-1, 1]` (zero when `central`), redrawn until in general position.
    pub fn random(dim: usize, n: usize, central: bool, seed: u64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return invalid("dimension and hyperplane count must be positive");
        }
        for attempt in 0..100 {
            let mut rng = task_rng(seed, attempt);
            let hyperplanes = (0..n)
                .map(|_| {
                    let mut normal: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                    normal.iter_mut().for_each(|v| *v /= norm);
                    let offset = if central { 0.0 } else { rng.random_range(-1.0..1.0) };
                    Hyperplane { normal, offset }
                })
                .collect::<Vec<_>>();
            if hyperplanes.iter().any(|h| !(h.norm() > 1e-12)) {
                continue;
            }
            let arr = Self::new(hyperplanes)?;
            if arr.general_position {
                return Ok(arr);
            }
        }
        Err(Error::Degenerate(format!("no generic arrangement of {n} hyperplanes in R^{dim} after 100 draws")))
    }

    pub fn generic(dim: usize, n: usize, seed: u64) -> Result<Self> {
        Self::random(dim, n, false, seed)
    }

    pub fn generic_central(dim: usize, n: usize, seed: u64) -> Result<Self> {
        Self::random(dim, n, true, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.hyperplanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperplanes.is_empty()
    }

    pub fn hyperplanes(&self) -> &[Hyperplane] {
        &self.hyperplanes
    }

    pub fn is_general_position(&self) -> bool {
        self.general_position
    }

    pub fn is_central(&self) -> bool {
        self.central
    }

    /// Positive-side indicator per hyperplane.
    pub fn sign_vector(&self, z: &[f64]) -> Vec<bool> {
        self.hyperplanes.iter().map(|h| h.value(z) > 0.0).collect()
    }

    /// Smallest distance from `z` to any hyperplane.
    pub fn min_distance(&self, z: &[f64]) -> f64 {
        self.hyperplanes.iter().map(|h| h.distance(z)).fold(f64::INFINITY, f64::min)
    }

    /// The same arrangement moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let hyperplanes = self
            .hyperplanes
            .iter()
            .map(|h| {
                let along: f64 = h.normal.iter().zip(shift).map(|(a, s)| a * s).sum();
                Hyperplane { normal: h.normal.clone(), offset: h.offset + along }
            })
            .collect();
        Self::new(hyperplanes).expect("translation preserves validity")
    }
}

fn unit_rows(hs: &[Hyperplane], augmented: bool) -> Vec<Vec<f64>> {
    hs.iter()
        .map(|h| {
            let mut row = h.normal.clone();
            if augmented {
                row.push(-h.offset);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

/// Every `k`-subset of `0..n`, lexicographically.
pub(crate) fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Gram determinant of the selected rows.
fn gram_det(rows: &[Vec<f64>], subset: &[usize]) -> f64 {
    let k = subset.len();
    let g = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        rows[subset[i]].iter().zip(&rows[subset[j]]).map(|(a, b)| a * b).sum::<f64>()
    });
    g.determinant()
}

fn check_general_position(hs: &[Hyperplane], dim: usize, central: bool) -> bool {
    let tol2 = GENERAL_POSITION_TOLERANCE * GENERAL_POSITION_TOLERANCE;
    let normals = unit_rows(hs, false);
    let k = hs.len().min(dim);
    if !subsets(hs.len(), k).iter().all(|s| gram_det(&normals, s) >= tol2) {
        return false;
    }
    if !central && hs.len() > dim {
        // no dim + 1 hyperplanes through a common point
        let aug = unit_rows(hs, true);
        return subsets(hs.len(), dim + 1).iter().all(|s| gram_det(&aug, s) >= tol2);
    }
    true
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `Σ_{i=0}^{d} C(n, i)`: cells of `n` generic affine hyperplanes in `ℝ^d`.
pub fn total_cells_formula(dim: u64, n: u64) -> u128 {
    (0..=dim).map(|i| binomial(n, i)).sum()
}

/// Bounded-cell counts for `n` generic hyperplanes in `ℝ^dim`: the
/// general-position count `C(n−1, dim)` and the printed `C(n−1, dim−1)`.
pub fn bounded_cells_formula(dim: u64, n: u64) -> (u128, u128) {
    let m = n.saturating_sub(1);
    (binomial(m, dim), binomial(m, dim.saturating_sub(1)))
}

/// Region counts for Scenario V comparators at rank `rank`: the printed
/// high-SNR count `Σ_{i≤rank+1} C(n_q, i) − C(n_q−1, rank)` and the central
/// arrangement count `α = 2 Σ_{i≤rank} C(n_q−1, i)`.
pub fn count_regions_theorem4(rank: u64, n_q: u64) -> (u128, u128) {
    let printed = total_cells_formula(rank + 1, n_q) - binomial(n_q - 1, rank);
    (printed, alpha(rank, n_q))
}

/// `α = 2 Σ_{i=0}^{rank} C(n_q − 1, i)`.
pub fn alpha(rank: u64, n_q: u64) -> u128 {
    2 * (0..=rank).map(|i| binomial(n_q - 1, i)).sum::<u128>()
}

/// `x ↦ (x, ‖x‖²)`.
pub fn lift_paraboloid(x: &[f64]) -> Vec<f64> {
    let mut z = x.to_vec();
    z.push(x.iter().map(|v| v * v).sum());
    z
}

/// Scenario V polynomial `⟨normal[..r], y⟩ + normal[r] ‖y‖²` of a lifted hyperplane.
pub fn comparator_polynomial(h: &Hyperplane) -> MultivariatePolynomial {
    h.to_comparator().0.to_polynomial()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(1, 2), 0);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn theorem4_counts() {
        assert_eq!(count_regions_theorem4(1, 2), (3, 4));
        assert_eq!(count_regions_theorem4(1, 1).1, 2);
        assert_eq!(count_regions_theorem4(2, 3).1, 8);
        assert_eq!(bounded_cells_formula(2, 2), (0, 1));
        assert_eq!(bounded_cells_formula(2, 3), (1, 2));
        assert_eq!(bounded_cells_formula(3, 3).0, 0);
    }

    #[test]
    fn alpha_is_total_minus_standard_bounded() {
        for rank in 1..=4u64 {
            for n in 1..=12u64 {
                let total = total_cells_formula(rank + 1, n);
                let bounded = bounded_cells_formula(rank + 1, n).0;
                assert_eq!(alpha(rank, n), total - bounded, "rank {rank}, n {n}");
            }
        }
    }

    #[test]
    fn lifting() {
        assert_eq!(lift_paraboloid(&[0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(lift_paraboloid(&[2.0]), vec![2.0, 4.0]);
    }

    proptest! {
        #[test]
        fn lifted_hyperplane_matches_comparator(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            t in -2.0f64..2.0,
            x in proptest::collection::vec(-5.0f64..5.0, 2),
        ) {
            prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
            let h = Hyperplane::new(a, t).unwrap();
            let poly = comparator_polynomial(&h);
            let lhs = h.value(&lift_paraboloid(&x));
            let rhs = poly.eval(&x).unwrap() - t;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn general_position_detection() {
        let parallel = Arrangement::new(vec![
            Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap(),
            Hyperplane::new(vec![1.0, 0.0], 1.0).unwrap(),
        ])
        .unwrap();
        assert!(!parallel.is_general_position());
        let concurrent = Arrangement::new(vec![
            Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap(),
            Hyperplane::new(vec![0.0, 1.0], 0.0).unwrap(),
            Hyperplane::new(vec![1.0, 1.0], 0.0).unwrap(),
        ])
        .unwrap();
        assert!(concurrent.is_central());
        assert!(concurrent.is_general_position());
        let shifted = Arrangement::new(vec![
            Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap(),
            Hyperplane::new(vec![0.0, 1.0], 0.0).unwrap(),
            Hyperplane::new(vec![1.0, 1.0], 1e-11).unwrap(),
        ])
        .unwrap();
        assert!(!shifted.is_general_position());
        let g = Arrangement::generic(3, 5, 9).unwrap();
        assert!(g.is_general_position() && !g.is_central());
        assert_eq!(g, Arrangement::generic(3, 5, 9).unwrap());
    }
}
