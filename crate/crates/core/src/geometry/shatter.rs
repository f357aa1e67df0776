use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{binomial, RegionCode};
use crate::error::{invalid, Error, Result};
use crate::exec::{derive_seed, task_rng};
use crate::frontend::{pattern_bits, FrontendSpec, MultivariatePolynomial, Scenario};

/// `C(rank + d, d)`: monomials of degree at most `d` in `rank` variables.
pub fn count_shatter_formula(rank: u64, d: u64) -> u128 {
    binomial(rank + d, d)
}

/// Constructive high-SNR rate `min(n_q, log2 C(rank+d, d))` and the printed
/// `max(n_q, log2 C(rank+d, d))`, in bits.
pub fn shattering_rates(rank: u64, d: u64, n_q: u64) -> (f64, f64) {
    let vc = (count_shatter_formula(rank, d) as f64).log2();
    let n = n_q as f64;
    (n.min(vc), n.max(vc))
}

/// Exponent vectors of total degree at most `d`, by degree then lexicographically.
pub fn monomial_exponents(rank: usize, d: u32) -> Vec<Vec<u32>> {
    fn go(rank: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == rank {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            go(rank, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(rank, d, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.iter().sum::<u32>().cmp(&b.iter().sum::<u32>()).then_with(|| b.cmp(a)));
    out
}

fn feature_matrix(points: &[Vec<f64>], exps: &[Vec<u32>]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), exps.len(), |i, j| {
        points[i].iter().zip(&exps[j]).map(|(x, &e)| x.powi(e as i32)).product()
    })
}

fn solve_signs(phi: &DMatrix<f64>, targets: &[f64]) -> Option<DVector<f64>> {
    phi.clone().lu().solve(&DVector::from_column_slice(targets))
}

/// Number of the `2^ℓ` sign labelings of `points` realized by polynomials of
/// degree at most `d` (thresholded at zero).
///
/// Each labeling is fitted by least squares, which is exact when there are
/// as many points as monomials and a lower bound otherwise.
pub fn realized_labelings(points: &[Vec<f64>], d: u32) -> Result<usize> {
    let l = points.len();
    if l == 0 || l > 12 {
        return invalid("labeling check supports 1 to 12 points");
    }
    let rank = points[0].len();
    let exps = monomial_exponents(rank, d);
    let phi = feature_matrix(points, &exps);
    let pinv = phi.clone().pseudo_inverse(1e-12).map_err(|e| Error::Singular(e.to_string()))?;
    let mut realized = 0;
    for mask in 0..1usize << l {
        let y: Vec<f64> = (0..l).map(|i| if (mask >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let c = &pinv * DVector::from_column_slice(&y);
        let fit = &phi * c;
        if fit.iter().zip(&y).all(|(f, t)| f * t > 0.0) {
            realized += 1;
        }
    }
    Ok(realized)
}

/// `ℓ = C(rank+d, d)` generic points with `n_q` degree-`d` discriminants
/// whose signs spell each point's index in binary (ADC 1 most significant).
pub fn build_shattering_code(rank: usize, d: u32, n_q: usize, seed: u64) -> Result<RegionCode> {
    if rank == 0 || d == 0 {
        return invalid("rank and degree must be positive");
    }
    let l = count_shatter_formula(rank as u64, d as u64);
    if l > 1 << 20 {
        return invalid("too many shattered points");
    }
    let l = l as usize;
    let needed = (l as f64).log2().ceil() as usize;
    if n_q < needed {
        return Err(Error::InsufficientAdcs { needed, available: n_q });
    }
    if n_q > 31 {
        return invalid("at most 31 ADCs");
    }
    let exps = monomial_exponents(rank, d);
    let mut chosen = None;
    for attempt in 0..100 {
        let mut rng = task_rng(derive_seed(seed, attempt), 0);
        let points: Vec<Vec<f64>> = (0..l).map(|_| (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let phi = feature_matrix(&points, &exps);
        let sv = phi.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if hi > 0.0 && lo / hi > 1e-10 {
            chosen = Some((points, phi));
            break;
        }
    }
    let (points, phi) = chosen.ok_or_else(|| Error::Singular("feature matrix singular after 100 draws; re-seed".into()))?;

    let mut functions = Vec::with_capacity(n_q);
    for k in 0..n_q {
        let targets: Vec<f64> = (1..=l)
            .map(|t| if pattern_bits((t % (1usize << n_q)) as u32, n_q)[k] { 1.0 } else { -1.0 })
            .collect();
        let c = solve_signs(&phi, &targets).ok_or_else(|| Error::Singular("feature matrix not invertible".into()))?;
        let f = MultivariatePolynomial::from_terms(rank, exps.iter().cloned().zip(c.iter().copied()))?;
        functions.push(f);
    }
    let frontend = FrontendSpec::new(Scenario::IV, functions, vec![0.0; n_q], Some(d))?;
    let mut map = BTreeMap::new();
    for t in 1..=l {
        map.insert(pattern_bits((t % (1usize << n_q)) as u32, n_q), t - 1);
    }
    let code = RegionCode::new(points, frontend, map)?;
    code.round_trip(None)?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{apply_frontend, pattern_string};

    #[test]
    fn counts() {
        assert_eq!(count_shatter_formula(1, 1), 2);
        assert_eq!(count_shatter_formula(1, 2), 3);
        assert_eq!(count_shatter_formula(2, 2), 6);
        assert_eq!(monomial_exponents(2, 2).len(), 6);
        assert_eq!(monomial_exponents(3, 3).len(), 20);
        let (c, p) = shattering_rates(1, 2, 2);
        assert!((c - 3f64.log2()).abs() < 1e-15 && p == 2.0);
    }

    #[test]
    fn one_linear_discriminant() {
        let code = build_shattering_code(1, 1, 1, 0).unwrap();
        assert_eq!(code.message_count(), 2);
    }

    #[test]
    fn quadratic_siso_patterns() {
        let code = build_shattering_code(1, 2, 2, 3).unwrap();
        assert_eq!(code.message_count(), 3);
        let pats: Vec<String> = (0..3)
            .map(|m| pattern_string(&apply_frontend(code.frontend(), &code.constellation()[m]).unwrap()))
            .collect();
        assert_eq!(pats, vec!["01", "10", "11"]);
    }

    #[test]
    fn conics_in_the_plane() {
        let code = build_shattering_code(2, 2, 3, 8).unwrap();
        assert_eq!(code.message_count(), 6);
        code.round_trip(None).unwrap();
        assert!(code.frontend().validates_as(Scenario::IV, Some(2)));
        assert_eq!(realized_labelings(code.constellation(), 2).unwrap(), 64);
    }

    #[test]
    fn too_few_adcs() {
        assert!(matches!(
            build_shattering_code(2, 2, 2, 0),
            Err(Error::InsufficientAdcs { needed: 3, available: 2 })
        ));
    }

    #[test]
    fn excess_points_are_not_shattered() {
        // four points on a line cannot all be shattered by quadratics
        let pts: Vec<Vec<f64>> = [-1.0, -0.3, 0.4, 0.9].iter().map(|x| vec![*x]).collect();
        assert!(realized_labelings(&pts, 2).unwrap() < 16);
        assert_eq!(realized_labelings(&pts[..3], 2).unwrap(), 8);
    }
}
