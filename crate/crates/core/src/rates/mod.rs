//! Induced discrete channels, mutual information, input optimization and
//! the SVD-based inner bounds with ADC and power allocation.

mod allocation;
mod blahut;
pub mod gaussian;
mod thresholds;

pub use allocation::{
    allocate_and_bound, allocate_and_bound_with, scenario1_baseline, AllocationOptions, AllocationPlan,
    AllocationResult, SubchannelReport,
};
pub use blahut::{blahut_arimoto, candidate_grid, BlahutArimoto, BlahutArimotoResult};
pub use thresholds::{optimize_thresholds, optimize_thresholds_with, Family, ThresholdOptions, ThresholdResult};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::frontend::Partition1D;
use gaussian::normal_interval;

/// Finite-support input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub points: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl InputDistribution {
    pub fn new(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return invalid(format!("{} points with {} probabilities", points.len(), probs.len()));
        }
        let dim = points[0].len();
        if points.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
            return invalid("mass points must be finite and of equal length");
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return invalid("probabilities must be non-negative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { points, probs })
    }

    /// Distribution over scalar mass points.
    pub fn scalar(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::new(points.into_iter().map(|x| vec![x]).collect(), probs)
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// First coordinate of every point.
    pub fn scalars(&self) -> Vec<f64> {
        self.points.iter().map(|x| x[0]).collect()
    }

    /// `E‖X‖²`.
    pub fn second_moment(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| p * x.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Points carrying more than `threshold` probability, renormalized.
    pub fn support(&self, threshold: f64) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.probs[i] > threshold).collect();
        let total: f64 = keep.iter().map(|&i| self.probs[i]).sum();
        Self {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            probs: keep.iter().map(|&i| self.probs[i] / total).collect(),
        }
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R) -> &'a [f64] {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in self.points.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return x;
            }
        }
        // rounding left the cumulative sum just below 1
        let last = self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(self.len() - 1);
        &self.points[last]
    }
}

/// Transition matrix `P(V = ℓ | X = x_j)` of a finite-alphabet channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedDMC {
    transition: Vec<Vec<f64>>,
}

impl InducedDMC {
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        let Some(width) = transition.first().map(Vec::len) else {
            return invalid("a channel needs at least one input");
        };
        if width == 0 {
            return invalid("a channel needs at least one output");
        }
        for (j, row) in transition.iter().enumerate() {
            if row.len() != width {
                return invalid("transition rows have unequal lengths");
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return invalid(format!("row {j} has entries outside [0, 1]"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return invalid(format!("row {j} sums to {total}"));
            }
        }
        Ok(Self { transition })
    }

    pub fn identity(n: usize) -> Self {
        Self { transition: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() }
    }

    pub fn num_inputs(&self) -> usize {
        self.transition.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.transition[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.transition[j]
    }

    /// Sub-channel on the listed inputs.
    pub fn restrict(&self, inputs: &[usize]) -> Self {
        Self { transition: inputs.iter().map(|&j| self.transition[j].clone()).collect() }
    }
}

/// Channel from scalar inputs `x_j` to the interval labels of `part` under
/// `Y = σ x + N`, `N ~ N(0, 1)`.
pub fn dmc_from_partition(sigma: f64, points: &[f64], part: &Partition1D) -> InducedDMC {
    let width = part.num_labels();
    let transition = points
        .iter()
        .map(|&x| {
            let mean = sigma * x;
            let mut row = vec![0.0; width];
            for (lo, hi, label) in part.intervals() {
                row[label] += normal_interval(lo - mean, hi - mean);
            }
            row.iter_mut().for_each(|v| *v = v.min(1.0));
            row
        })
        .collect();
    InducedDMC { transition }
}

/// `I(X; V)` in bits for input probabilities `probs`.
pub fn mutual_information_probs(dmc: &InducedDMC, probs: &[f64]) -> f64 {
    let width = dmc.num_outputs();
    let mut q = vec![0.0; width];
    for (row, &p) in dmc.transition.iter().zip(probs) {
        for (qv, t) in q.iter_mut().zip(row) {
            *qv += p * t;
        }
    }
    let mut mi = 0.0;
    for (row, &p) in dmc.transition.iter().zip(probs) {
        if p == 0.0 {
            continue;
        }
        for (t, qv) in row.iter().zip(&q) {
            if *t > 0.0 {
                mi += p * t * (t / qv).log2();
            }
        }
    }
    mi.max(0.0)
}

/// `I(X; V)` in bits.
pub fn mutual_information(dmc: &InducedDMC, dist: &InputDistribution) -> Result<f64> {
    if dist.len() != dmc.num_inputs() {
        return invalid(format!("distribution has {} points, channel {} inputs", dist.len(), dmc.num_inputs()));
    }
    Ok(mutual_information_probs(dmc, &dist.probs))
}

#[cfg(test)]
mod tests {
    use super::gaussian::{binary_entropy, normal_cdf};
    use super::*;
    use crate::exec::task_rng;
    use proptest::prelude::*;

    fn sign_partition() -> Partition1D {
        Partition1D::distinct(vec![0.0]).unwrap()
    }

    #[test]
    fn dmc_examples() {
        let d = dmc_from_partition(1.0, &[0.0, 1.0], &sign_partition());
        assert_eq!(d.row(0), &[0.5, 0.5]);
        assert!((d.row(1)[0] - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((d.row(1)[1] - 0.841_344_746_068_542_9).abs() < 1e-15);
        let hi = dmc_from_partition(100.0, &[-1.0, 1.0], &sign_partition());
        assert!((hi.row(0)[0] - 1.0).abs() < 1e-9 && hi.row(0)[1] < 1e-9);
        assert!((hi.row(1)[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shared_labels_accumulate() {
        let part = Partition1D::new(vec![-1.0, 1.0], vec![0, 1, 0]).unwrap();
        let d = dmc_from_partition(1.0, &[0.0], &part);
        let inner = normal_cdf(1.0) - normal_cdf(-1.0);
        assert!((d.row(0)[1] - inner).abs() < 1e-15);
        assert!((d.row(0)[0] - (1.0 - inner)).abs() < 1e-15);
    }

    #[test]
    fn mi_examples() {
        let uniform2 = InputDistribution::scalar(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert!((mutual_information(&InducedDMC::identity(2), &uniform2).unwrap() - 1.0).abs() < 1e-15);
        let flat = InducedDMC::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(mutual_information(&flat, &uniform2).unwrap(), 0.0);
        let anti = InputDistribution::scalar(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let d = dmc_from_partition(1.0, &[-1.0, 1.0], &sign_partition());
        let expected = 1.0 - binary_entropy(normal_cdf(-1.0));
        let mi = mutual_information(&d, &anti).unwrap();
        assert!((mi - expected).abs() < 1e-14);
        assert!((mi - 0.368_91).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(InputDistribution::scalar(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(InputDistribution::scalar(vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(InducedDMC::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(InducedDMC::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn sampling_matches_probabilities() {
        let d = InputDistribution::scalar(vec![-1.0, 0.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = task_rng(11, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let x = d.sample(&mut rng)[0];
            counts[[-1.0, 0.0, 2.0].iter().position(|v| *v == x).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(&d.probs) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(
            sigma in 0.01f64..100.0,
            x in -10.0f64..10.0,
            mut cuts in proptest::collection::vec(-20.0f64..20.0, 1..8),
        ) {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let part = Partition1D::distinct(cuts).unwrap();
            let d = dmc_from_partition(sigma, &[x], &part);
            let total: f64 = d.row(0).iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(d.row(0).iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
