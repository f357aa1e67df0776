//! Analog front-ends: the five function families, one-bit threshold
//! quantization, induced one-dimensional partitions, distance-sign functions
//! and Bernstein approximation.

mod bernstein;
mod partition;
mod poly;

pub use bernstein::{bernstein_approximate, BernsteinApproximation, BernsteinPolynomial};
pub use partition::{
    check_binary_indexing, distance_sign_function, induced_partition_1d, CellDescriptor, LabeledPartitionRd, Partition1D,
    SignConstraint,
};
pub use poly::MultivariatePolynomial;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelModel};
use crate::error::{invalid, Error, Result};
use crate::exec::task_rng;
use crate::rates::InputDistribution;

/// Families of implementable analog functions, ordered by inclusion
/// `I ⊂ II ⊂ V ⊂ IV ⊂ III`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// No analog processing; each antenna feeds one ADC.
    I,
    /// Linear combiners.
    II,
    /// Polynomials of any degree.
    III,
    /// Polynomials of degree at most `d`.
    IV,
    /// Span of the coordinates and the squared norm.
    V,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::I => "I",
            Scenario::II => "II",
            Scenario::III => "III",
            Scenario::IV => "IV",
            Scenario::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Scenario::I),
            "II" | "2" => Ok(Scenario::II),
            "III" | "3" => Ok(Scenario::III),
            "IV" | "4" => Ok(Scenario::IV),
            "V" | "5" => Ok(Scenario::V),
            other => invalid(format!("unknown scenario '{other}'")),
        }
    }
}

/// Structural form of a Scenario V function:
/// `Σ_k linear[k] Y_k + radial · Σ_k Y_k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioVFunction {
    pub linear: Vec<f64>,
    pub radial: f64,
}

impl ScenarioVFunction {
    pub fn to_polynomial(&self) -> MultivariatePolynomial {
        let dim = self.linear.len();
        MultivariatePolynomial::affine(&self.linear, 0.0)
            .add(&MultivariatePolynomial::squared_norm(dim).scale(self.radial))
    }

    /// Recovers the structural form, or `None` if `p` is outside the span.
    pub fn from_polynomial(p: &MultivariatePolynomial) -> Option<Self> {
        let dim = p.dim();
        let mut linear = vec![0.0; dim];
        let mut radial: Option<f64> = None;
        let mut squares = 0;
        for (exps, c) in p.terms() {
            let total: u32 = exps.iter().sum();
            let nonzero = exps.iter().filter(|&&e| e > 0).count();
            match (total, nonzero) {
                (1, 1) => linear[exps.iter().position(|&e| e == 1).unwrap()] = c,
                (2, 1) => {
                    if radial.is_some_and(|r| r != c) {
                        return None;
                    }
                    radial = Some(c);
                    squares += 1;
                }
                _ => return None,
            }
        }
        if squares != 0 && squares != dim {
            return None;
        }
        Some(Self { linear, radial: radial.unwrap_or(0.0) })
    }
}

/// Analog functions feeding `n_q` one-bit ADCs, plus the ADC thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrontendDoc", into = "FrontendDoc")]
pub struct FrontendSpec {
    scenario: Scenario,
    functions: Vec<MultivariatePolynomial>,
    thresholds: Vec<f64>,
    degree_bound: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct FrontendDoc {
    scenario: Scenario,
    n_q: usize,
    functions: Vec<MultivariatePolynomial>,
    thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree_bound: Option<u32>,
}

impl TryFrom<FrontendDoc> for FrontendSpec {
    type Error = Error;

    fn try_from(doc: FrontendDoc) -> Result<Self> {
        if doc.n_q != doc.functions.len() {
            return invalid(format!("n_q = {} but {} functions given", doc.n_q, doc.functions.len()));
        }
        FrontendSpec::new(doc.scenario, doc.functions, doc.thresholds, doc.degree_bound)
    }
}

impl From<FrontendSpec> for FrontendDoc {
    fn from(s: FrontendSpec) -> Self {
        FrontendDoc {
            scenario: s.scenario,
            n_q: s.functions.len(),
            functions: s.functions,
            thresholds: s.thresholds,
            degree_bound: s.degree_bound,
        }
    }
}

impl FrontendSpec {
    /// Validates the functions against `scenario` and builds the front-end.
    pub fn new(
        scenario: Scenario,
        functions: Vec<MultivariatePolynomial>,
        thresholds: Vec<f64>,
        degree_bound: Option<u32>,
    ) -> Result<Self> {
        if functions.is_empty() {
            return invalid("a front-end needs at least one ADC");
        }
        if functions.len() != thresholds.len() {
            return invalid(format!(
                "{} functions but {} thresholds",
                functions.len(),
                thresholds.len()
            ));
        }
        if functions.len() > 32 {
            return invalid("at most 32 ADCs are supported");
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return invalid("thresholds must be finite");
        }
        let dim = functions[0].dim();
        if functions.iter().any(|f| f.dim() != dim) {
            return invalid("all analog functions must act on the same number of antennas");
        }
        let spec = Self { scenario, functions, thresholds, degree_bound };
        spec.check_membership(scenario, degree_bound)?;
        Ok(spec)
    }

    /// Scenario I: identity front-end on `n_r` antennas.
    pub fn scenario_i(n_r: usize, thresholds: Vec<f64>) -> Result<Self> {
        let functions = (0..n_r).map(|i| MultivariatePolynomial::variable(n_r, i)).collect();
        Self::new(Scenario::I, functions, thresholds, None)
    }

    /// Scenario V front-end from structural coefficients.
    pub fn scenario_v(functions: &[ScenarioVFunction], thresholds: Vec<f64>) -> Result<Self> {
        Self::new(Scenario::V, functions.iter().map(|f| f.to_polynomial()).collect(), thresholds, None)
    }

    /// Checks that every function belongs to the given family.
    pub fn check_membership(&self, scenario: Scenario, degree_bound: Option<u32>) -> Result<()> {
        let n_r = self.n_r();
        let violation = |msg: String| Err(Error::ScenarioViolation(msg));
        match scenario {
            Scenario::I => {
                if self.n_q() != n_r {
                    return violation(format!("Scenario I needs n_q = n_r, got {} vs {n_r}", self.n_q()));
                }
                for (i, f) in self.functions.iter().enumerate() {
                    if *f != MultivariatePolynomial::variable(n_r, i) {
                        return violation(format!("function {} is not the projection Y{}", i + 1, i + 1));
                    }
                }
            }
            Scenario::II => {
                for (i, f) in self.functions.iter().enumerate() {
                    if f.terms().any(|(e, _)| e.iter().sum::<u32>() != 1) {
                        return violation(format!("function {} is not linear: {f}", i + 1));
                    }
                }
            }
            Scenario::V => {
                for (i, f) in self.functions.iter().enumerate() {
                    if ScenarioVFunction::from_polynomial(f).is_none() {
                        return violation(format!("function {} is outside span(Y, ‖Y‖²): {f}", i + 1));
                    }
                }
            }
            Scenario::IV => {
                let Some(d) = degree_bound else {
                    return violation("Scenario IV needs a degree bound".into());
                };
                for (i, f) in self.functions.iter().enumerate() {
                    if f.degree() > d {
                        return violation(format!("function {} has degree {} > {d}", i + 1, f.degree()));
                    }
                }
            }
            Scenario::III => {}
        }
        Ok(())
    }

    /// Whether this front-end also validates as a member of `scenario`.
    pub fn validates_as(&self, scenario: Scenario, degree_bound: Option<u32>) -> bool {
        self.check_membership(scenario, degree_bound).is_ok()
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn n_q(&self) -> usize {
        self.functions.len()
    }

    /// Number of antenna inputs the functions act on.
    pub fn n_r(&self) -> usize {
        self.functions[0].dim()
    }

    pub fn functions(&self) -> &[MultivariatePolynomial] {
        &self.functions
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn degree_bound(&self) -> Option<u32> {
        self.degree_bound
    }

    /// Front-end that induces the same partition for inputs scaled by `s`.
    ///
    /// A comparator `f(y) > t` whose highest degree is `D` becomes
    /// `s^D f(y / s) > s^D t`, so homogeneous linear thresholds scale by `s`
    /// and homogeneous quadratic thresholds by `s²`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut functions = Vec::with_capacity(self.n_q());
        let mut thresholds = Vec::with_capacity(self.n_q());
        for (f, &t) in self.functions.iter().zip(&self.thresholds) {
            let top = f.degree() as i32;
            let terms: Vec<(Vec<u32>, f64)> = f
                .terms()
                .map(|(e, c)| {
                    let deg = e.iter().sum::<u32>() as i32;
                    (e.to_vec(), c * s.powi(top - deg))
                })
                .collect();
            functions.push(MultivariatePolynomial::from_terms(f.dim(), terms).expect("same shape"));
            thresholds.push(t * s.powi(top));
        }
        Self { scenario: self.scenario, functions, thresholds, degree_bound: self.degree_bound }
    }
}

/// One-bit threshold ADCs: bit `j` is `w[j] > t[j]` (ties give 0).
pub fn quantize(w: &[f64], t: &[f64]) -> Result<Vec<bool>> {
    if w.len() != t.len() {
        return invalid(format!("{} analog outputs but {} thresholds", w.len(), t.len()));
    }
    Ok(w.iter().zip(t).map(|(w, t)| w > t).collect())
}

/// Runs `y` through the analog functions and the ADCs.
pub fn apply_frontend(spec: &FrontendSpec, y: &[f64]) -> Result<Vec<bool>> {
    if y.len() != spec.n_r() {
        return invalid(format!("output has dimension {}, front-end expects {}", y.len(), spec.n_r()));
    }
    Ok(spec
        .functions
        .iter()
        .zip(&spec.thresholds)
        .map(|(f, t)| f.eval_unchecked(y) > *t)
        .collect())
}

/// ADC outputs packed into an integer, ADC 1 in the most significant bit.
pub fn pattern_index(bits: &[bool]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

pub fn pattern_bits(index: u32, n_q: usize) -> Vec<bool> {
    (0..n_q).map(|j| (index >> (n_q - 1 - j)) & 1 == 1).collect()
}

/// `"0110"`-style rendering, ADC 1 first.
pub fn pattern_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_pattern(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => invalid(format!("bad bit pattern '{s}'")),
        })
        .collect()
}

/// Truncation radius `L = γ_Y n_q / ε` that makes the Markov tail term
/// `γ_Y n_q / L` at most `ε`.
pub fn choose_truncation_l(gamma_y: f64, n_q: usize, eps: f64) -> Result<f64> {
    if !(gamma_y > 0.0 && eps > 0.0 && n_q > 0) {
        return invalid("gamma_Y, n_q and eps must be positive");
    }
    Ok(gamma_y * n_q as f64 / eps)
}

/// Monte Carlo estimate of `γ_Y = (1/n_r) Σ_i E|Y_i|` for inputs drawn from `dist`.
pub fn estimate_gamma_y(channel: &ChannelModel, dist: &InputDistribution, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return invalid("need at least one sample");
    }
    let mut rng = task_rng(seed, 0);
    let mut total = 0.0;
    for _ in 0..samples {
        let x = dist.sample(&mut rng);
        let y = apply_channel(channel, x, &mut rng)?;
        total += y.iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok(total / (samples as f64 * channel.n_r() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::gaussian::normal_cdf;
    use proptest::prelude::*;

    fn y() -> MultivariatePolynomial {
        MultivariatePolynomial::variable(1, 0)
    }

    fn y2() -> MultivariatePolynomial {
        MultivariatePolynomial::squared_norm(1)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), vec![true, false]);
        assert_eq!(quantize(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), vec![false, false]);
        assert_eq!(quantize(&[0.5, 1.5], &[0.0, 1.0]).unwrap(), vec![true, true]);
        assert_eq!(quantize(&[-0.5, 0.25], &[0.0, 1.0]).unwrap(), vec![false, false]);
        assert!(quantize(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn figure_one_b_frontend() {
        let spec = FrontendSpec::new(Scenario::V, vec![y(), y2()], vec![0.0, 1.0], None).unwrap();
        assert_eq!(apply_frontend(&spec, &[1.5]).unwrap(), vec![true, true]);
        assert_eq!(apply_frontend(&spec, &[-0.5]).unwrap(), vec![false, false]);
    }

    #[test]
    fn scenario_i_gives_sign_bits() {
        let spec = FrontendSpec::scenario_i(3, vec![0.0; 3]).unwrap();
        assert_eq!(apply_frontend(&spec, &[0.2, -4.0, 9.0]).unwrap(), vec![true, false, true]);
        assert!(FrontendSpec::new(Scenario::I, vec![y(), y()], vec![0.0, 1.0], None).is_err());
    }

    #[test]
    fn membership_rules() {
        let lin_const = MultivariatePolynomial::affine(&[1.0], 2.0);
        assert!(FrontendSpec::new(Scenario::II, vec![lin_const.clone()], vec![0.0], None).is_err());
        assert!(FrontendSpec::new(Scenario::IV, vec![lin_const], vec![0.0], Some(1)).is_ok());
        // anisotropic quadratic is not in Scenario V
        let aniso = MultivariatePolynomial::from_terms(2, [(vec![2, 0], 1.0), (vec![0, 2], 2.0)]).unwrap();
        assert!(FrontendSpec::new(Scenario::V, vec![aniso.clone()], vec![0.0], None).is_err());
        assert!(FrontendSpec::new(Scenario::IV, vec![aniso.clone()], vec![0.0], Some(1)).is_err());
        assert!(FrontendSpec::new(Scenario::IV, vec![aniso], vec![0.0], Some(2)).is_ok());
        let cross = MultivariatePolynomial::from_terms(2, [(vec![1, 1], 1.0)]).unwrap();
        assert!(FrontendSpec::new(Scenario::V, vec![cross], vec![0.0], None).is_err());
    }

    #[test]
    fn family_nesting() {
        let s1 = FrontendSpec::scenario_i(2, vec![0.0, 0.5]).unwrap();
        let s2 = FrontendSpec::new(
            Scenario::II,
            vec![MultivariatePolynomial::affine(&[1.0, -2.0], 0.0)],
            vec![0.1],
            None,
        )
        .unwrap();
        let s5 = FrontendSpec::scenario_v(
            &[ScenarioVFunction { linear: vec![0.5, 1.0], radial: -3.0 }],
            vec![0.0],
        )
        .unwrap();
        let s4 = FrontendSpec::new(
            Scenario::IV,
            vec![MultivariatePolynomial::from_terms(2, [(vec![3, 0], 1.0), (vec![0, 0], 1.0)]).unwrap()],
            vec![0.0],
            Some(3),
        )
        .unwrap();
        assert!(s1.validates_as(Scenario::II, None));
        assert!(s2.validates_as(Scenario::V, None));
        assert!(s1.validates_as(Scenario::V, None));
        assert!(s5.validates_as(Scenario::IV, Some(2)));
        assert!(s5.validates_as(Scenario::III, None));
        assert!(s4.validates_as(Scenario::III, None));
        assert!(!s5.validates_as(Scenario::II, None));
        assert!(!s4.validates_as(Scenario::V, None));
    }

    #[test]
    fn frontend_json_round_trip() {
        let spec = FrontendSpec::new(Scenario::V, vec![y(), y2()], vec![0.0, 1.0], None).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.starts_with(r#"{"scenario":"V","n_q":2,"functions":[{"terms":[{"exps":[1],"coef":1.0}]}"#));
        let back: FrontendSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let wrong_nq = text.replace(r#""n_q":2"#, r#""n_q":3"#);
        assert!(serde_json::from_str::<FrontendSpec>(&wrong_nq).is_err());
    }

    #[test]
    fn covariant_scaling_keeps_patterns() {
        let spec = FrontendSpec::new(
            Scenario::V,
            vec![y(), y2(), y2().add(&y().scale(-0.5))],
            vec![0.0, 1.0, 0.3],
            None,
        )
        .unwrap();
        let scaled = spec.scaled(20.0);
        assert_eq!(scaled.thresholds()[1], 400.0);
        for &v in &[-1.7, -0.9, -0.2, 0.1, 0.6, 1.3, 2.2] {
            assert_eq!(
                apply_frontend(&spec, &[v]).unwrap(),
                apply_frontend(&scaled, &[20.0 * v]).unwrap()
            );
        }
    }

    #[test]
    fn pattern_helpers() {
        let bits = vec![false, true, true];
        assert_eq!(pattern_index(&bits), 3);
        assert_eq!(pattern_bits(3, 3), bits);
        assert_eq!(pattern_string(&bits), "011");
        assert_eq!(parse_pattern("011").unwrap(), bits);
        assert!(parse_pattern("01x").is_err());
    }

    #[test]
    fn truncation_radius() {
        assert!((choose_truncation_l(1.0, 2, 0.1).unwrap() - 20.0).abs() < 1e-12);
        let a = choose_truncation_l(0.7, 3, 0.2).unwrap();
        let b = choose_truncation_l(0.7, 3, 0.1).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
        assert!(choose_truncation_l(0.0, 3, 0.1).is_err());
    }

    #[test]
    fn truncation_radius_from_estimated_gamma() {
        // Y = X + N with X = ±1: E|Y| is the folded-normal mean at μ = 1, σ = 1
        let folded = (2.0 / std::f64::consts::PI).sqrt() * (-0.5f64).exp() + (1.0 - 2.0 * normal_cdf(-1.0));
        let ch = ChannelModel::siso(1.0, 1.0).unwrap();
        let dist = InputDistribution::scalar(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let gamma = estimate_gamma_y(&ch, &dist, 100_000, 11).unwrap();
        let l = choose_truncation_l(gamma, 2, 0.1).unwrap();
        let expected = folded * 2.0 / 0.1;
        assert!((l - expected).abs() / expected < 0.05, "{l} vs {expected}");
    }

    proptest! {
        #[test]
        fn raising_a_threshold_never_sets_a_bit(
            w in proptest::collection::vec(-5.0f64..5.0, 4),
            t in proptest::collection::vec(-5.0f64..5.0, 4),
            bump in 0.0f64..3.0,
            k in 0usize..4,
        ) {
            let before = quantize(&w, &t).unwrap();
            let mut t2 = t.clone();
            t2[k] += bump;
            let after = quantize(&w, &t2).unwrap();
            for j in 0..4 {
                prop_assert!(!(after[j] && !before[j]));
            }
        }
    }
}
