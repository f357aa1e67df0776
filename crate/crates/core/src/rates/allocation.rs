use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gaussian::normal_interval;
use super::thresholds::{optimize_thresholds_with, Family, ThresholdOptions};
use super::{mutual_information_probs, InducedDMC};
use crate::channel::{svd_decompose, ChannelModel};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::frontend::Partition1D;

/// ADC counts and power shares per subchannel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub nq_split: Vec<usize>,
    pub power_split: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubchannelReport {
    pub sigma: f64,
    pub n_q: usize,
    pub power: f64,
    pub rate_bits: f64,
    pub boundaries: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocationResult {
    pub plan: AllocationPlan,
    pub rate_bits: f64,
    pub subchannels: Vec<SubchannelReport>,
    /// Blahut–Arimoto iterations over every optimizer call.
    pub iterations: usize,
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AllocationOptions {
    pub thresholds: ThresholdOptions,
    pub exec: Exec,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self { thresholds: ThresholdOptions::default(), exec: Exec::default() }
    }
}

/// Power-simplex resolution for `s` subchannels.
fn power_levels(s: usize) -> Result<usize> {
    match s {
        0..=3 => Ok(21),
        4 => Ok(11),
        _ => Err(Error::UnsupportedDimension(format!(
            "allocation search supports at most 4 subchannels, channel has {s}"
        ))),
    }
}

/// All vectors of `parts` non-negative integers summing to `total`, in
/// lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            go(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Inner bound `max Σ_i I(X̃_i; V_i)` over ADC splits and a power-simplex grid.
pub fn allocate_and_bound(channel: &ChannelModel, n_q: usize, family: Family) -> Result<AllocationResult> {
    allocate_and_bound_with(channel, n_q, family, &AllocationOptions::default())
}

pub fn allocate_and_bound_with(
    channel: &ChannelModel,
    n_q: usize,
    family: Family,
    opts: &AllocationOptions,
) -> Result<AllocationResult> {
    if n_q == 0 {
        return invalid("need at least one ADC");
    }
    let subs = svd_decompose(channel)?;
    let sigmas: Vec<f64> = subs.sigmas.iter().map(|s| s / channel.noise_var().sqrt()).collect();
    let s = sigmas.len();
    if s == 0 {
        return Ok(AllocationResult {
            plan: AllocationPlan { nq_split: vec![], power_split: vec![] },
            rate_bits: 0.0,
            subchannels: vec![],
            iterations: 0,
            monotone: true,
        });
    }
    let levels = power_levels(s)? - 1;
    let power = channel.power();
    let splits = compositions(n_q, s);
    let grids = compositions(levels, s);

    // distinct (sigma, power level, ADC count) sub-problems, shared between
    // subchannels with equal gains
    let mut keys: BTreeMap<(u64, usize, usize), usize> = BTreeMap::new();
    for split in &splits {
        for grid in &grids {
            for i in 0..s {
                if split[i] > 0 && grid[i] > 0 {
                    let next = keys.len();
                    keys.entry((sigmas[i].to_bits(), grid[i], split[i])).or_insert(next);
                }
            }
        }
    }
    let tasks: Vec<(u64, usize, usize)> = {
        let mut t = vec![(0, 0, 0); keys.len()];
        for (k, &i) in &keys {
            t[i] = *k;
        }
        t
    };
    let mut topts = opts.thresholds;
    // the outer loop already spreads work across workers
    if opts.exec == Exec::Parallel {
        topts.exec = Exec::Sequential;
    }
    let solved = opts.exec.map_slice(&tasks, |&(sigma_bits, level, n)| {
        let p = power * level as f64 / levels as f64;
        optimize_thresholds_with(f64::from_bits(sigma_bits), p, n, family, &topts)
    });
    let solved: Vec<_> = solved.into_iter().collect::<Result<_>>()?;
    let mut iterations = 0;
    let mut monotone = true;
    for r in &solved {
        iterations += r.iterations;
        monotone &= r.monotone;
    }
    let value = |sigma: f64, level: usize, n: usize| -> Option<&super::ThresholdResult> {
        (n > 0 && level > 0).then(|| &solved[keys[&(sigma.to_bits(), level, n)]])
    };

    let mut best: Option<(f64, &Vec<usize>, &Vec<usize>)> = None;
    for split in &splits {
        for grid in &grids {
            let rate: f64 =
                (0..s).map(|i| value(sigmas[i], grid[i], split[i]).map_or(0.0, |r| r.rate_bits)).sum();
            // strict comparison keeps the lexicographically first plan on ties
            if best.is_none_or(|(b, _, _)| rate > b) {
                best = Some((rate, split, grid));
            }
        }
    }
    let (rate_bits, split, grid) = best.expect("at least one plan");
    let power_split: Vec<f64> = grid.iter().map(|&g| power * g as f64 / levels as f64).collect();
    let subchannels = (0..s)
        .map(|i| {
            let r = value(sigmas[i], grid[i], split[i]);
            SubchannelReport {
                sigma: subs.sigmas[i],
                n_q: split[i],
                power: power_split[i],
                rate_bits: r.map_or(0.0, |r| r.rate_bits),
                boundaries: r.map_or_else(Vec::new, |r| r.partition.boundaries().to_vec()),
            }
        })
        .collect();
    Ok(AllocationResult {
        plan: AllocationPlan { nq_split: split.clone(), power_split },
        rate_bits,
        subchannels,
        iterations,
        monotone,
    })
}

/// Rate with no analog processing: one zero-threshold ADC per antenna and
/// inputs uniform over `{±√P}^{n_t}`, evaluated as the joint mutual
/// information of the product channel.
pub fn scenario1_baseline(channel: &ChannelModel, n_q: usize) -> Result<f64> {
    if n_q != channel.n_r() {
        return Err(Error::ScenarioViolation(format!(
            "Scenario I needs one ADC per antenna: n_q = {n_q}, n_r = {}",
            channel.n_r()
        )));
    }
    let (n_t, n_r) = (channel.n_t(), channel.n_r());
    if n_t > 12 || n_r > 12 {
        return invalid("baseline enumeration supports at most 12 transmit and receive antennas");
    }
    let amp = channel.power().sqrt();
    let std = channel.noise_var().sqrt();
    let sign = Partition1D::distinct(vec![0.0])?;
    let rows: Vec<Vec<f64>> = (0..1usize << n_t)
        .map(|m| {
            let x: Vec<f64> = (0..n_t).map(|i| if (m >> i) & 1 == 1 { amp } else { -amp }).collect();
            let mean = channel.transmit(&x).expect("length matches");
            let per_antenna: Vec<[f64; 2]> = mean
                .iter()
                .map(|mu| {
                    let mut p = [0.0; 2];
                    for (lo, hi, label) in sign.intervals() {
                        p[label] += normal_interval((lo - mu) / std, (hi - mu) / std);
                    }
                    p
                })
                .collect();
            (0..1usize << n_r)
                .map(|v| (0..n_r).map(|i| per_antenna[i][(v >> i) & 1]).product())
                .collect()
        })
        .collect();
    let dmc = InducedDMC::new(rows)?;
    let probs = vec![1.0 / dmc.num_inputs() as f64; dmc.num_inputs()];
    Ok(mutual_information_probs(&dmc, &probs))
}
