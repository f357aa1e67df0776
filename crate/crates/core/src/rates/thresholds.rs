use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blahut::{blahut_arimoto, candidate_grid, BlahutArimoto};
use super::{dmc_from_partition, mutual_information_probs, InputDistribution};
use crate::error::{invalid, Error, Result};
use crate::exec::{derive_seed, task_rng, Exec};
use crate::frontend::{FrontendSpec, MultivariatePolynomial, Partition1D, Scenario};

/// Interval-partition families reachable by `n` comparators on a scalar
/// subchannel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `n` threshold comparators: `n + 1` intervals.
    Linear,
    /// Mixed linear and quadratic comparators: `2n` intervals, all labels distinct.
    QuadraticV,
    /// Quadratic comparators only: `2n + 1` intervals whose two outer
    /// intervals share a label, so `2n` labels.
    AllQuadratic,
    /// Unrestricted polynomial comparators: `2^n` intervals.
    Arbitrary,
}

impl Family {
    pub fn from_scenario(scenario: Scenario) -> Result<Self> {
        match scenario {
            Scenario::II => Ok(Family::Linear),
            Scenario::V => Ok(Family::QuadraticV),
            Scenario::III => Ok(Family::Arbitrary),
            other => Err(Error::UnsupportedFamily(format!(
                "no threshold optimizer for Scenario {other}; use Scenario II, V or III"
            ))),
        }
    }

    pub fn num_boundaries(self, n: usize) -> usize {
        match self {
            Family::Linear => n,
            Family::QuadraticV => 2 * n - 1,
            Family::AllQuadratic => 2 * n,
            Family::Arbitrary => (1 << n) - 1,
        }
    }

    /// Output label of each interval, left to right.
    pub fn labels(self, n: usize) -> Vec<usize> {
        let m = self.num_boundaries(n) + 1;
        match self {
            Family::AllQuadratic => (0..m).map(|i| if i == m - 1 { 0 } else { i }).collect(),
            _ => (0..m).collect(),
        }
    }

    pub fn num_labels(self, n: usize) -> usize {
        match self {
            Family::Linear => n + 1,
            Family::QuadraticV | Family::AllQuadratic => 2 * n,
            Family::Arbitrary => 1 << n,
        }
    }

    fn partition(self, n: usize, boundaries: &[f64]) -> Partition1D {
        Partition1D::new(boundaries.to_vec(), self.labels(n)).expect("boundaries kept strictly increasing")
    }

    /// Comparators `f_i(Y) > t_i` inducing the family's partition with the
    /// given boundaries.
    pub fn realize(self, n: usize, boundaries: &[f64]) -> Result<FrontendSpec> {
        if n == 0 {
            return invalid("need at least one ADC");
        }
        if boundaries.len() != self.num_boundaries(n) {
            return invalid(format!("{self} with {n} ADCs needs {} boundaries", self.num_boundaries(n)));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("boundaries must be strictly increasing");
        }
        let y = MultivariatePolynomial::variable(1, 0);
        // (y - r1)(y - r2) > 0 outside [r1, r2]
        let outside = |r1: f64, r2: f64| (MultivariatePolynomial::univariate(&[0.0, -(r1 + r2), 1.0]), -r1 * r2);
        let (functions, thresholds): (Vec<_>, Vec<_>) = match self {
            Family::Linear => boundaries.iter().map(|&b| (y.clone(), b)).unzip(),
            Family::QuadraticV => {
                let mut pairs = vec![(y.clone(), boundaries[n - 1])];
                for k in 1..n {
                    pairs.push(outside(boundaries[n - 1 - k], boundaries[n - 1 + k]));
                }
                pairs.into_iter().unzip()
            }
            Family::AllQuadratic => (0..n).map(|k| outside(boundaries[k], boundaries[n + k])).unzip(),
            Family::Arbitrary => {
                // interval i carries the reflected Gray code of i; bit j of
                // the code flips exactly at the boundaries listed for j
                let mut functions = Vec::with_capacity(n);
                for j in 0..n {
                    let bit = n - 1 - j;
                    let mut f = MultivariatePolynomial::constant(1, 1.0);
                    for (i, &b) in boundaries.iter().enumerate() {
                        let (g0, g1) = (i ^ (i >> 1), (i + 1) ^ ((i + 1) >> 1));
                        if ((g0 ^ g1) >> bit) & 1 == 1 {
                            f = f.mul(&MultivariatePolynomial::univariate(&[-b, 1.0]));
                        }
                    }
                    // far left the product has sign (−1)^deg and the code bit is 0
                    if f.degree() % 2 == 0 {
                        f = f.scale(-1.0);
                    }
                    functions.push(f);
                }
                let thresholds = vec![0.0; n];
                let scenario = Scenario::III;
                return FrontendSpec::new(scenario, functions, thresholds, None);
            }
        };
        let scenario = if self == Family::Linear { Scenario::II } else { Scenario::V };
        FrontendSpec::new(scenario, functions, thresholds, None)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::QuadraticV => "quadratic-v",
            Family::AllQuadratic => "all-quadratic",
            Family::Arbitrary => "arbitrary",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Family::Linear),
            "quadratic-v" | "quadratic" => Ok(Family::QuadraticV),
            "all-quadratic" => Ok(Family::AllQuadratic),
            "arbitrary" => Ok(Family::Arbitrary),
            other => invalid(format!("unknown family '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdOptions {
    pub starts: usize,
    pub grid_points: usize,
    pub refinements: usize,
    pub shrink: f64,
    pub candidates: usize,
    pub candidate_span: f64,
    pub max_alternations: usize,
    /// Controls for the capacity evaluations inside the search.
    pub search: BlahutArimoto,
    /// Controls for the final evaluation of the winning boundaries.
    pub blahut: BlahutArimoto,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            grid_points: 257,
            refinements: 2,
            shrink: 0.25,
            candidates: 129,
            candidate_span: 3.0,
            max_alternations: 4,
            search: BlahutArimoto { tol: 1e-6, max_iter: 1000 },
            blahut: BlahutArimoto::default(),
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub partition: Partition1D,
    pub rate_bits: f64,
    /// Input distribution over the candidate grid.
    pub distribution: InputDistribution,
    pub iterations: usize,
    /// Whether every Blahut–Arimoto run was monotone.
    pub monotone: bool,
}

/// Best partition of the family for `Ỹ = σ X̃ + N` with `E[X̃²] ≤ power`,
/// together with its rate.
pub fn optimize_thresholds(sigma: f64, power: f64, n: usize, family: Family) -> Result<ThresholdResult> {
    optimize_thresholds_with(sigma, power, n, family, &ThresholdOptions::default())
}

struct Candidate {
    rate: f64,
    boundaries: Vec<f64>,
    probs: Vec<f64>,
}

struct Problem<'a> {
    sigma: f64,
    n: usize,
    family: Family,
    grid: Vec<f64>,
    power: f64,
    range: f64,
    opts: &'a ThresholdOptions,
}

impl Problem<'_> {
    fn capacity(&self, b: &[f64], ctl: BlahutArimoto, iterations: &mut usize, monotone: &mut bool) -> Result<Candidate> {
        let dmc = dmc_from_partition(self.sigma, &self.grid, &self.family.partition(self.n, b));
        let r = blahut_arimoto(&dmc, &self.grid, self.power, ctl)?;
        *iterations += r.iterations;
        *monotone &= r.monotone;
        Ok(Candidate { rate: r.capacity_bits, boundaries: b.to_vec(), probs: r.distribution.probs })
    }

    fn fixed_input_rate(&self, b: &[f64], probs: &[f64]) -> f64 {
        let dmc = dmc_from_partition(self.sigma, &self.grid, &self.family.partition(self.n, b));
        mutual_information_probs(&dmc, probs)
    }

    /// Coordinate descent over the boundaries with the input held fixed.
    fn descend(&self, start: &[f64], probs: &[f64]) -> Vec<f64> {
        let support: Vec<usize> = (0..probs.len()).filter(|&j| probs[j] > 1e-12).collect();
        let xs: Vec<f64> = support.iter().map(|&j| self.grid[j]).collect();
        let ps: Vec<f64> = support.iter().map(|&j| probs[j]).collect();
        let labels = self.family.labels(self.n);
        let eval = |b: &[f64]| {
            let part = Partition1D::new(b.to_vec(), labels.clone()).expect("ordered");
            mutual_information_probs(&dmc_from_partition(self.sigma, &xs, &part), &ps)
        };
        let mut b = start.to_vec();
        let mut current = eval(&b);
        let m = self.opts.grid_points.max(2);
        for pass in 0..=self.opts.refinements {
            let width = 2.0 * self.range * self.opts.shrink.powi(pass as i32);
            for _sweep in 0..4 {
                let mut moved = false;
                for i in 0..b.len() {
                    let center = if pass == 0 { 0.0 } else { b[i] };
                    let left = if i == 0 { f64::NEG_INFINITY } else { b[i - 1] };
                    let right = b.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let mut best = (current, b[i]);
                    for k in 0..m {
                        let v = center - 0.5 * width + width * k as f64 / (m - 1) as f64;
                        if v <= left || v >= right || v == b[i] {
                            continue;
                        }
                        let mut trial = b.clone();
                        trial[i] = v;
                        let r = eval(&trial);
                        if r > best.0 + 1e-13 {
                            best = (r, v);
                        }
                    }
                    if best.1 != b[i] {
                        b[i] = best.1;
                        current = best.0;
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        b
    }

    fn run_start(&self, start: Vec<f64>) -> Result<(Candidate, usize, bool)> {
        let mut iterations = 0;
        let mut monotone = true;
        let mut best = self.capacity(&start, self.opts.search, &mut iterations, &mut monotone)?;
        for _ in 0..self.opts.max_alternations {
            let moved = self.descend(&best.boundaries, &best.probs);
            if self.fixed_input_rate(&moved, &best.probs) <= self.fixed_input_rate(&best.boundaries, &best.probs) + 1e-12 {
                break;
            }
            let next = self.capacity(&moved, self.opts.search, &mut iterations, &mut monotone)?;
            if next.rate <= best.rate + 1e-12 {
                break;
            }
            best = next;
        }
        Ok((best, iterations, monotone))
    }

    fn random_start(&self, index: u64) -> Vec<f64> {
        let mut rng = task_rng(derive_seed(self.opts.seed, self.n as u64), index);
        let half = 1.5 * self.sigma * self.power.sqrt() + 1.0;
        loop {
            let mut b: Vec<f64> = (0..self.family.num_boundaries(self.n)).map(|_| rng.random_range(-half..half)).collect();
            b.sort_by(f64::total_cmp);
            if b.windows(2).all(|w| w[0] < w[1]) {
                return b;
            }
        }
    }
}

/// Strictly increasing refinement of `b` to `target` boundaries, adding
/// points in the widest gaps (the outer gaps extend to `±range`).
fn refine(b: &[f64], target: usize, range: f64) -> Vec<f64> {
    let mut out = b.to_vec();
    while out.len() < target {
        let lo = out.first().map_or(-range, |v| v.min(range) - range.max(1.0));
        let hi = out.last().map_or(range, |v| v.max(-range) + range.max(1.0));
        let mut edges = vec![lo];
        edges.extend_from_slice(&out);
        edges.push(hi);
        let (i, _) = edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[1] - w[0]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        out.insert(i, 0.5 * (edges[i] + edges[i + 1]));
    }
    out
}

pub fn optimize_thresholds_with(
    sigma: f64,
    power: f64,
    n: usize,
    family: Family,
    opts: &ThresholdOptions,
) -> Result<ThresholdResult> {
    if n == 0 {
        return invalid("need at least one ADC");
    }
    if family == Family::Arbitrary && n > 6 {
        return invalid("arbitrary family supports at most 6 ADCs per subchannel");
    }
    if !(sigma >= 0.0 && sigma.is_finite() && power >= 0.0 && power.is_finite()) {
        return invalid("sigma and power must be finite and non-negative");
    }
    if family == Family::QuadraticV && n == 1 {
        // one comparator in span(Y, Y²) with two distinct labels is a threshold
        return optimize_thresholds_with(sigma, power, 1, Family::Linear, opts);
    }
    let nb = family.num_boundaries(n);
    if sigma == 0.0 || power == 0.0 {
        let boundaries: Vec<f64> = (0..nb).map(|i| i as f64).collect();
        return Ok(ThresholdResult {
            partition: family.partition(n, &boundaries),
            rate_bits: 0.0,
            distribution: InputDistribution::scalar(vec![0.0], vec![1.0])?,
            iterations: 0,
            monotone: true,
        });
    }
    let problem = Problem {
        sigma,
        n,
        family,
        grid: candidate_grid(power, opts.candidates, opts.candidate_span),
        power,
        range: sigma * opts.candidate_span * power.sqrt() + 5.0,
        opts,
    };

    // seed candidates evaluated exactly and kept as fall-backs
    let mut seeds: Vec<Candidate> = Vec::new();
    let mut iterations = 0;
    let mut monotone = true;
    let special = match family {
        Family::Linear => {
            let amp = sigma * power.sqrt();
            let b: Vec<f64> = (1..=n).map(|i| amp * (-1.0 + 2.0 * i as f64 / (n + 1) as f64)).collect();
            let mut probs = vec![0.0; problem.grid.len()];
            for (j, x) in problem.grid.iter().enumerate() {
                if (x.abs() - power.sqrt()).abs() <= 1e-12 * power.sqrt() {
                    probs[j] = 0.5;
                }
            }
            seeds.push(Candidate { rate: problem.fixed_input_rate(&b, &probs), boundaries: b.clone(), probs });
            b
        }
        Family::QuadraticV | Family::Arbitrary => {
            let inner = if family == Family::Arbitrary && n > 1 { Family::QuadraticV } else { Family::Linear };
            let base = optimize_thresholds_with(sigma, power, n, inner, opts)?;
            iterations += base.iterations;
            monotone &= base.monotone;
            let b = refine(base.partition.boundaries(), nb, problem.range);
            let probs = base.distribution.probs.clone();
            seeds.push(Candidate { rate: problem.fixed_input_rate(&b, &probs), boundaries: b.clone(), probs });
            b
        }
        Family::AllQuadratic => {
            let amp = sigma * power.sqrt() + 1.0;
            (1..=nb).map(|i| amp * (-1.0 + 2.0 * i as f64 / (nb + 1) as f64)).collect()
        }
    };
    let starts: Vec<Vec<f64>> = std::iter::once(special)
        .chain((1..opts.starts.max(1)).map(|s| problem.random_start(s as u64)))
        .collect();
    let runs = opts.exec.map_slice(&starts, |b| problem.run_start(b.clone()));
    let mut all = seeds;
    for run in runs {
        let (cand, it, mono) = run?;
        iterations += it;
        monotone &= mono;
        all.push(cand);
    }
    let best = all
        .into_iter()
        .reduce(|a, b| if b.rate > a.rate { b } else { a })
        .expect("at least one start");
    let polished = problem.capacity(&best.boundaries, opts.blahut, &mut iterations, &mut monotone)?;
    let best = if polished.rate >= best.rate { polished } else { best };
    let points = problem.grid.iter().map(|x| vec![*x]).collect();
    Ok(ThresholdResult {
        partition: family.partition(n, &best.boundaries),
        rate_bits: best.rate,
        distribution: InputDistribution { points, probs: best.probs },
        iterations,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{apply_frontend, induced_partition_1d};
    use std::collections::HashMap;

    fn check_realization(family: Family, n: usize) {
        let nb = family.num_boundaries(n);
        let b: Vec<f64> = (0..nb).map(|i| i as f64 * 1.5 - 2.0).collect();
        let spec = family.realize(n, &b).unwrap();
        assert_eq!(spec.n_q(), n);
        let labels = family.labels(n);
        let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
        let mut mids = vec![b[0] - 1.0];
        mids.extend(b.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        mids.push(b[nb - 1] + 1.0);
        for (mid, label) in mids.iter().zip(&labels) {
            let bits = apply_frontend(&spec, &[*mid]).unwrap();
            let prev = seen.insert(bits, *label);
            assert!(prev.is_none() || prev == Some(*label), "{family} n={n}: pattern reused across labels");
        }
        assert_eq!(seen.len(), family.num_labels(n));
        if family != Family::Arbitrary || n <= 2 {
            let induced = induced_partition_1d(&spec, (-100.0, 100.0)).unwrap();
            assert_eq!(induced.num_labels(), family.num_labels(n));
            assert_eq!(induced.boundaries().len(), nb);
        }
    }

    #[test]
    fn realizations_induce_the_family_partition() {
        for n in 1..=4 {
            check_realization(Family::Linear, n);
            check_realization(Family::QuadraticV, n);
            check_realization(Family::AllQuadratic, n);
            check_realization(Family::Arbitrary, n);
        }
    }

    #[test]
    fn realizations_stay_in_their_scenario() {
        let lin = Family::Linear.realize(2, &[0.0, 1.0]).unwrap();
        assert!(lin.validates_as(Scenario::II, None));
        let quad = Family::QuadraticV.realize(2, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(quad.validates_as(Scenario::V, None));
        let allq = Family::AllQuadratic.realize(2, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(allq.validates_as(Scenario::V, None));
        assert!(!allq.validates_as(Scenario::II, None));
    }

    #[test]
    fn refinement_keeps_order_and_original_points() {
        let b = refine(&[0.5], 3, 10.0);
        assert_eq!(b.len(), 3);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.contains(&0.5));
        assert_eq!(refine(&[], 2, 1.0).len(), 2);
    }

    #[test]
    fn one_comparator_at_high_snr() {
        let r = optimize_thresholds(1.0, 1e4, 1, Family::Linear).unwrap();
        assert!((r.rate_bits - 1.0).abs() < 0.01, "{}", r.rate_bits);
        assert!(r.monotone);
        assert!(r.distribution.second_moment() <= 1e4 * (1.0 + 1e-9));
    }

    #[test]
    fn quadratic_two_comparators_reach_two_bits() {
        let q = optimize_thresholds(1.0, 1e4, 2, Family::QuadraticV).unwrap();
        let l = optimize_thresholds(1.0, 1e4, 2, Family::Linear).unwrap();
        assert!((q.rate_bits - 2.0).abs() < 0.02, "{}", q.rate_bits);
        assert!((l.rate_bits - 3f64.log2()).abs() < 0.02, "{}", l.rate_bits);
        assert!(q.rate_bits > l.rate_bits);
    }
}
