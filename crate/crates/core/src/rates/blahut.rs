use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use super::{mutual_information_probs, InducedDMC, InputDistribution};
use crate::error::{invalid, Error, Result};

/// Iteration controls for [`blahut_arimoto`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlahutArimoto {
    /// Stop once the fixed-price duality gap, or the gain over a block of
    /// iterations, falls below this many bits.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BlahutArimoto {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct BlahutArimotoResult {
    /// Optimized probabilities over the candidate points.
    pub distribution: InputDistribution,
    pub capacity_bits: f64,
    /// Iterations summed over all multiplier values tried.
    pub iterations: usize,
    /// Final power price (nats per unit power).
    pub lambda: f64,
    /// Whether `I − λ E[X²]` was non-decreasing in every iteration of every run.
    pub monotone: bool,
    /// Objective trace (bits) of the unconstrained run.
    pub trace: Vec<f64>,
}

/// `n` equispaced points on `[−c√P, c√P]`, plus `±√P` when not already present.
pub fn candidate_grid(power: f64, n: usize, c: f64) -> Vec<f64> {
    let amp = power.max(0.0).sqrt();
    if amp == 0.0 || n < 2 {
        return vec![0.0];
    }
    let mut grid: Vec<f64> = (0..n).map(|i| -c * amp + 2.0 * c * amp * i as f64 / (n - 1) as f64).collect();
    for x in [-amp, amp] {
        if grid.iter().all(|g| (g - x).abs() > 1e-12 * amp) {
            grid.push(x);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid
}

struct Run {
    probs: Vec<f64>,
    power: f64,
    /// `max_j s_j` at the final iterate, in nats.
    upper: f64,
    iterations: usize,
    monotone: bool,
    trace: Vec<f64>,
}

/// Flattened channel with the row terms `Σ_l W ln W` precomputed.
struct Kernel<'a> {
    w: Vec<f64>,
    width: usize,
    neg_entropy: Vec<f64>,
    cost: &'a [f64],
}

impl<'a> Kernel<'a> {
    fn new(dmc: &InducedDMC, cost: &'a [f64]) -> Self {
        let width = dmc.num_outputs();
        let w: Vec<f64> = dmc.rows().iter().flatten().copied().collect();
        let neg_entropy = dmc.rows().iter().map(|r| r.iter().filter(|t| **t > 0.0).map(|t| t * t.ln()).sum()).collect();
        Self { w, width, neg_entropy, cost }
    }

    /// Per-input scores `D(W_j ‖ q) − λ c_j` into `score`; returns the
    /// objective `I − λ E[c]` in nats.
    fn eval(&self, p: &[f64], lambda: f64, q: &mut [f64], score: &mut [f64]) -> f64 {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (row, &pj) in self.w.chunks_exact(self.width).zip(p) {
            if pj > 0.0 {
                for (qv, t) in q.iter_mut().zip(row) {
                    *qv += pj * t;
                }
            }
        }
        q.iter_mut().for_each(|v| *v = if *v > 0.0 { v.ln() } else { 0.0 });
        let mut objective = 0.0;
        for (j, row) in self.w.chunks_exact(self.width).enumerate() {
            let cross: f64 = row.iter().zip(q.iter()).map(|(t, lq)| t * lq).sum();
            score[j] = self.neg_entropy[j] - cross - lambda * self.cost[j];
            objective += p[j] * score[j];
        }
        objective
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.w[j * self.width..(j + 1) * self.width]
    }

    /// Newton direction for the stationarity conditions `s_j = ν` over
    /// `support`, with `1ᵀΔ = 0`.
    fn newton(&self, p: &[f64], score: &[f64], support: &[usize]) -> Option<Vec<f64>> {
        let m = support.len();
        let mut q = vec![0.0; self.width];
        for (j, &pj) in p.iter().enumerate().filter(|(_, pj)| **pj > 0.0) {
            q.iter_mut().zip(self.row(j)).for_each(|(qv, t)| *qv += pj * t);
        }
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (i, &j) in support.iter().enumerate() {
            for (k, &l) in support.iter().enumerate().skip(i) {
                let h: f64 = -(self.row(j).iter().zip(self.row(l)).zip(&q))
                    .filter(|(_, qv)| **qv > 0.0)
                    .map(|((a, b), qv)| a * b / qv)
                    .sum::<f64>();
                a[(i, k)] = h;
                a[(k, i)] = h;
            }
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
            rhs[i] = -score[j];
        }
        let sol = a.svd(true, true).solve(&rhs, 1e-14).ok()?;
        sol.iter().all(|v| v.is_finite()).then(|| sol.rows(0, m).iter().copied().collect())
    }
}

/// `out ∝ p · exp(step · (score − top))`.
fn update(p: &[f64], score: &[f64], step: f64, out: &mut [f64]) {
    let top = score.iter().zip(p).filter(|(_, pj)| **pj > 0.0).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for ((o, pj), s) in out.iter_mut().zip(p).zip(score) {
        *o = pj * (step * (s - top)).max(-700.0).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Iterations between active-set polishing attempts.
const POLISH_EVERY: usize = 10;
/// Largest support handed to the dense Newton solve.
const POLISH_MAX: usize = 64;

/// Projects onto the inputs carrying mass (plus any zero-mass input whose
/// score beats the support) and takes a damped Newton step there. Returns
/// the candidate only when it raises the objective.
fn polish(kernel: &Kernel, lambda: f64, p: &[f64], score: &[f64], objective: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = p.len();
    let pmax = p.iter().fold(0.0f64, |m, v| m.max(*v));
    let top = (0..n).filter(|&j| p[j] > 0.0).map(|j| score[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut q = vec![0.0; kernel.width];
    // revive the most violated zero-mass input first
    let zero_top = (0..n).filter(|&j| p[j] == 0.0 && score[j] > top + 1e-12).max_by(|&a, &b| score[a].total_cmp(&score[b]));
    if let Some(v) = zero_top {
        if let Some(found) = toward(kernel, lambda, p, v, objective) {
            return Some(found);
        }
    }
    let support: Vec<usize> = (0..n).filter(|&j| p[j] > 1e-3 * pmax || (p[j] == 0.0 && score[j] > top)).collect();
    if support.len() > POLISH_MAX {
        return None;
    }
    let mut base = vec![0.0; n];
    support.iter().for_each(|&j| base[j] = p[j]);
    let total: f64 = base.iter().sum();
    base.iter_mut().for_each(|v| *v /= total);
    let mut base_score = vec![0.0; n];
    let base_obj = kernel.eval(&base, lambda, &mut q, &mut base_score);
    let dir = kernel.newton(&base, &base_score, &support)?;
    let reach = support
        .iter()
        .zip(&dir)
        .filter(|(_, d)| **d < 0.0)
        .map(|(&j, d)| -base[j] / d)
        .fold(1.0f64, f64::min);
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut t = reach;
    for _ in 0..8 {
        let mut cand = base.clone();
        for (&j, d) in support.iter().zip(&dir) {
            cand[j] = (base[j] + t * d).max(0.0);
            if t == reach && (base[j] + t * d) <= 1e-15 {
                cand[j] = 0.0;
            }
        }
        let total: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|v| *v /= total);
        let mut cs = vec![0.0; n];
        let obj = kernel.eval(&cand, lambda, &mut q, &mut cs);
        if obj > objective {
            best = Some((cand, cs, obj));
            break;
        }
        t *= 0.5;
    }
    best.or_else(|| (base_obj > objective).then_some((base, base_score, base_obj))).or_else(|| {
        let v = (0..n).max_by(|&a, &b| score[a].total_cmp(&score[b]))?;
        toward(kernel, lambda, p, v, objective)
    })
}

/// Conditional-gradient step `p → (1 − η) p + η e_v` with a halving line
/// search; `None` unless the objective rises.
fn toward(kernel: &Kernel, lambda: f64, p: &[f64], v: usize, objective: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let mut q = vec![0.0; kernel.width];
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut eta = 0.5;
    for _ in 0..40 {
        let mut cand: Vec<f64> = p.iter().map(|x| (1.0 - eta) * x).collect();
        cand[v] += eta;
        let mut cs = vec![0.0; p.len()];
        let obj = kernel.eval(&cand, lambda, &mut q, &mut cs);
        if obj > best.as_ref().map_or(objective, |b| b.2) {
            best = Some((cand, cs, obj));
        } else if best.is_some() {
            break;
        }
        eta *= 0.5;
    }
    best
}

/// Largest over-relaxation factor tried for the exponentiated update.
const MAX_STEP: f64 = 64.0;

/// The price search stops once the duality gap is below this multiple of
/// the per-run tolerance.
const DUAL_GAP: f64 = 100.0;

/// Blahut–Arimoto at a fixed power price. Each iteration also tries an
/// over-relaxed update `p ∝ p exp(μ s)` and keeps it only when it beats the
/// plain update, so the objective still never decreases.
fn run_fixed(kernel: &Kernel, lambda: f64, start: &[f64], ctl: BlahutArimoto) -> Run {
    let n = start.len();
    let mut p = start.to_vec();
    let mut q = vec![0.0; kernel.width];
    let mut score = vec![0.0; n];
    let (mut plain, mut plain_score) = (vec![0.0; n], vec![0.0; n]);
    let (mut fast, mut fast_score) = (vec![0.0; n], vec![0.0; n]);
    let mut objective = kernel.eval(&p, lambda, &mut q, &mut score);
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut step = 2.0;
    let mut upper;
    let mut block_start = objective;
    loop {
        let bits = objective / LN_2;
        trace.push(bits);
        if bits < prev - 1e-12 * prev.abs().max(1.0) {
            monotone = false;
        }
        // `max_j s_j` bounds the fixed-price optimum from above
        upper = score.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let gap = (upper - objective) / LN_2;
        if gap < ctl.tol || iterations >= ctl.max_iter {
            break;
        }
        prev = bits;
        iterations += 1;
        if iterations % POLISH_EVERY == 0 {
            let stalled = (objective - block_start) / LN_2 < ctl.tol && iterations > POLISH_EVERY;
            block_start = objective;
            match polish(kernel, lambda, &p, &score, objective) {
                Some((cand, cs, obj)) if (obj - objective) / LN_2 >= ctl.tol || !stalled => {
                    p = cand;
                    score = cs;
                    objective = obj;
                    continue;
                }
                _ if stalled => break,
                _ => {}
            }
        }
        update(&p, &score, 1.0, &mut plain);
        let plain_obj = kernel.eval(&plain, lambda, &mut q, &mut plain_score);
        update(&p, &score, step, &mut fast);
        let fast_obj = kernel.eval(&fast, lambda, &mut q, &mut fast_score);
        if fast_obj > plain_obj {
            std::mem::swap(&mut p, &mut fast);
            std::mem::swap(&mut score, &mut fast_score);
            objective = fast_obj;
            step = (step * 2.0).min(MAX_STEP);
        } else {
            std::mem::swap(&mut p, &mut plain);
            std::mem::swap(&mut score, &mut plain_score);
            objective = plain_obj;
            step = (step * 0.5).max(2.0);
        }
    }
    let power = p.iter().zip(kernel.cost).map(|(pj, c)| pj * c).sum();
    Run { probs: p, power, upper, iterations, monotone, trace }
}

/// Capacity of `dmc` over inputs at `candidates` subject to `E[X²] ≤ power_limit`.
///
/// Runs the alternating maximization at a fixed power price `λ`, searches
/// `λ` by doubling and bisection, and finally mixes the two bracketing
/// solutions so the power constraint holds with equality.
pub fn blahut_arimoto(
    dmc: &InducedDMC,
    candidates: &[f64],
    power_limit: f64,
    ctl: BlahutArimoto,
) -> Result<BlahutArimotoResult> {
    if candidates.len() != dmc.num_inputs() {
        return invalid(format!("{} candidates for a channel with {} inputs", candidates.len(), dmc.num_inputs()));
    }
    let cost: Vec<f64> = candidates.iter().map(|x| x * x).collect();
    let slack = 1e-12 * power_limit.abs().max(1.0);
    if !cost.iter().any(|c| *c <= power_limit + slack) {
        return Err(Error::InfeasiblePower(power_limit));
    }
    let n = candidates.len();
    let uniform = vec![1.0 / n as f64; n];
    let kernel = Kernel::new(dmc, &cost);
    let base = run_fixed(&kernel, 0.0, &uniform, ctl);
    let mut iterations = base.iterations;
    let mut monotone = base.monotone;
    let trace = base.trace.clone();
    let finish = |probs: Vec<f64>, lambda: f64, iterations: usize, monotone: bool, trace: Vec<f64>| {
        let capacity_bits = mutual_information_probs(dmc, &probs);
        let points = candidates.iter().map(|x| vec![*x]).collect();
        BlahutArimotoResult {
            distribution: InputDistribution { points, probs },
            capacity_bits,
            iterations,
            lambda,
            monotone,
            trace,
        }
    };
    if base.power <= power_limit + slack {
        return Ok(finish(base.probs, 0.0, iterations, monotone, trace));
    }

    let warm = |p: &[f64]| -> Vec<f64> { p.iter().zip(&uniform).map(|(a, u)| 0.999 * a + 0.001 * u).collect() };
    // weak duality: C(P) ≤ max_j s_j(λ) + λP for every run
    let mut bound = base.upper;
    let mut lo = (0.0, base);
    let mut lambda = 1.0 / power_limit.max(1e-12);
    let mut hi = loop {
        let run = run_fixed(&kernel, lambda, &warm(&lo.1.probs), ctl);
        iterations += run.iterations;
        monotone &= run.monotone;
        bound = bound.min(run.upper + lambda * power_limit);
        if run.power <= power_limit + slack {
            break (lambda, run);
        }
        lo = (lambda, run);
        lambda *= 2.0;
        if lambda > 1e12 {
            return Err(Error::Numeric("power price search diverged".into()));
        }
    };
    let feasible = |lo: &Run, hi: &Run| -> (Vec<f64>, f64) {
        let theta = ((power_limit - hi.power) / (lo.power - hi.power)).clamp(0.0, 1.0);
        let mixed: Vec<f64> = lo.probs.iter().zip(&hi.probs).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        let (m, h) = (mutual_information_probs(dmc, &mixed), mutual_information_probs(dmc, &hi.probs));
        if m >= h {
            (mixed, m)
        } else {
            (hi.probs.clone(), h)
        }
    };
    let mut best = feasible(&lo.1, &hi.1);
    for _ in 0..40 {
        if hi.0 - lo.0 <= 1e-6 * hi.0 || bound / LN_2 - best.1 < DUAL_GAP * ctl.tol {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let run = run_fixed(&kernel, mid, &warm(&hi.1.probs), ctl);
        iterations += run.iterations;
        monotone &= run.monotone;
        bound = bound.min(run.upper + mid * power_limit);
        if run.power <= power_limit + slack {
            hi = (mid, run);
        } else {
            lo = (mid, run);
        }
        best = feasible(&lo.1, &hi.1);
    }
    let best = best.0;
    Ok(finish(best, hi.0, iterations, monotone, trace))
}

#[cfg(test)]
mod tests {
    use super::super::gaussian::{binary_entropy, normal_cdf};
    use super::super::{dmc_from_partition, mutual_information};
    use super::*;
    use crate::frontend::Partition1D;

    #[test]
    fn antipodal_symmetric_channel_is_uniform() {
        let part = Partition1D::distinct(vec![0.0]).unwrap();
        let pts = [-1.0, 1.0];
        let dmc = dmc_from_partition(0.7, &pts, &part);
        let r = blahut_arimoto(&dmc, &pts, 1.0, BlahutArimoto::default()).unwrap();
        assert!((r.distribution.probs[0] - 0.5).abs() < 1e-9);
        let uniform = InputDistribution::scalar(pts.to_vec(), vec![0.5, 0.5]).unwrap();
        assert!((r.capacity_bits - mutual_information(&dmc, &uniform).unwrap()).abs() < 1e-12);
        assert!(r.monotone);
    }

    #[test]
    fn noiseless_quaternary() {
        let pts = [0.0, 1.0, 2.0, 3.0];
        let r = blahut_arimoto(&InducedDMC::identity(4), &pts, 100.0, BlahutArimoto::default()).unwrap();
        assert!((r.capacity_bits - 2.0).abs() < 1e-9);
        assert!(r.distribution.probs.iter().all(|p| (p - 0.25).abs() < 1e-9));
    }

    #[test]
    fn one_bit_siso_concentrates_on_extremes() {
        let part = Partition1D::distinct(vec![0.0]).unwrap();
        let grid: Vec<f64> = (0..129).map(|i| -1.0 + 2.0 * i as f64 / 128.0).collect();
        let dmc = dmc_from_partition(1.0, &grid, &part);
        let r = blahut_arimoto(&dmc, &grid, 1.0, BlahutArimoto::default()).unwrap();
        let closed = 1.0 - binary_entropy(normal_cdf(-1.0));
        assert!((r.capacity_bits - closed).abs() < 1e-6, "{} vs {closed}", r.capacity_bits);
        let p = &r.distribution.probs;
        assert!(p[0] + p[128] >= 0.99);
        assert!(r.monotone);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn power_constraint_is_met_and_binding() {
        let part = Partition1D::distinct(vec![-1.0, 0.0, 1.0]).unwrap();
        let grid = candidate_grid(1.0, 129, 3.0);
        assert_eq!(grid.len(), 131);
        let dmc = dmc_from_partition(2.0, &grid, &part);
        let r = blahut_arimoto(&dmc, &grid, 1.0, BlahutArimoto::default()).unwrap();
        assert!(r.lambda > 0.0);
        let power = r.distribution.second_moment();
        assert!(power <= 1.0 + 1e-9, "{power}");
        assert!(power >= 1.0 - 1e-6);
        assert!(r.monotone);
        // more power never hurts
        let loose = blahut_arimoto(&dmc, &grid, 4.0, BlahutArimoto::default()).unwrap();
        assert!(loose.capacity_bits >= r.capacity_bits - 1e-9);
    }

    #[test]
    fn infeasible_candidates_are_rejected() {
        let dmc = InducedDMC::identity(2);
        assert!(matches!(
            blahut_arimoto(&dmc, &[2.0, 3.0], 1.0, BlahutArimoto::default()),
            Err(Error::InfeasiblePower(_))
        ));
    }
}
