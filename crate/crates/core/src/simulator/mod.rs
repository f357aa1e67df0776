//! Seeded Monte Carlo runs of the full encode → channel → front-end → ADC →
//! decode pipeline.
//!
//! Trials are split into fixed-size batches, each drawing from its own
//! generator stream, and batch counts are summed. Reports therefore depend
//! only on the seed, never on the number of worker threads.

use std::f64::consts::LN_2;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelModel};
use crate::error::{invalid, Error, Result};
use crate::exec::{task_rng, Exec};
use crate::frontend::{apply_frontend, pattern_bits, pattern_index, FrontendSpec};
use crate::geometry::RegionCode;

/// Trials per generator stream.
pub const BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub label: String,
    pub power: f64,
    pub trials: u64,
    pub ser: f64,
    pub empirical_mi_bits: f64,
    /// `1.96 √(ser (1 − ser) / trials)`.
    pub ci95_ser: f64,
    pub seed: u64,
    pub wall_ms: u64,
}

/// Equality of outcomes; `wall_ms` is ignored.
impl PartialEq for TrialReport {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.power.to_bits() == other.power.to_bits()
            && self.trials == other.trials
            && self.ser.to_bits() == other.ser.to_bits()
            && self.empirical_mi_bits.to_bits() == other.empirical_mi_bits.to_bits()
            && self.ci95_ser.to_bits() == other.ci95_ser.to_bits()
            && self.seed == other.seed
    }
}

impl TrialReport {
    pub const CSV_HEADER: &'static str = "label,P,trials,ser,ci95_ser,empirical_mi_bits,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.label, self.power, self.trials, self.ser, self.ci95_ser, self.empirical_mi_bits, self.seed
        )
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Plug-in mutual information (bits) of a joint count table with the
/// Miller–Madow correction `(K−1)(L−1) / (2N ln 2)`, where `K` and `L`
/// count the non-empty rows and columns. Clamped at zero.
pub fn empirical_mi(joint_counts: &[Vec<u64>]) -> f64 {
    let n: u64 = joint_counts.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let width = joint_counts.iter().map(Vec::len).max().unwrap_or(0);
    let rows: Vec<u64> = joint_counts.iter().map(|r| r.iter().sum()).collect();
    let mut cols = vec![0u64; width];
    for r in joint_counts {
        for (c, v) in cols.iter_mut().zip(r) {
            *c += v;
        }
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for (r, &rs) in joint_counts.iter().zip(&rows) {
        for (&c, &cs) in r.iter().zip(&cols) {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (rs as f64 * cs as f64)).log2();
            }
        }
    }
    let k = rows.iter().filter(|&&v| v > 0).count() as f64;
    let l = cols.iter().filter(|&&v| v > 0).count() as f64;
    let correction = (k - 1.0).max(0.0) * (l - 1.0).max(0.0) / (2.0 * nf * LN_2);
    (mi - correction).max(0.0)
}

/// What a trial transmits and how the receiver decodes it.
struct Pipeline<'a> {
    inputs: &'a [Vec<f64>],
    /// Cumulative message probabilities; `None` means uniform.
    cumulative: Option<Vec<f64>>,
    frontend: &'a FrontendSpec,
    decoder: Vec<usize>,
}

impl Pipeline<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.cumulative {
            None => rng.random_range(0..self.inputs.len()),
            Some(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
            }
        }
    }

    fn run(&self, channel: &ChannelModel, trials: u64, seed: u64, exec: Exec) -> Result<(u64, Vec<Vec<u64>>)> {
        let width = self.decoder.len();
        let m = self.inputs.len();
        for (i, x) in self.inputs.iter().enumerate() {
            let y = channel.transmit(x)?;
            for f in self.frontend.functions() {
                if !f.eval(&y)?.is_finite() {
                    return Err(Error::Numeric(format!("front-end output overflows at input {}", i + 1)));
                }
            }
        }
        let batches = trials.div_ceil(BATCH_SIZE as u64) as usize;
        let parts = exec.map(batches, |b| -> Result<(u64, Vec<Vec<u64>>)> {
            let mut rng = task_rng(seed, b as u64);
            let count = (trials - (b * BATCH_SIZE) as u64).min(BATCH_SIZE as u64);
            let mut errors = 0;
            let mut joint = vec![vec![0u64; width]; m];
            for _ in 0..count {
                let msg = self.draw(&mut rng);
                let y = apply_channel(channel, &self.inputs[msg], &mut rng)?;
                let bits = apply_frontend(self.frontend, &y)?;
                let idx = pattern_index(&bits) as usize;
                joint[msg][idx] += 1;
                errors += (self.decoder[idx] != msg) as u64;
            }
            Ok((errors, joint))
        });
        let mut errors = 0;
        let mut joint = vec![vec![0u64; width]; m];
        for part in parts {
            let (e, j) = part?;
            errors += e;
            for (row, add) in joint.iter_mut().zip(j) {
                for (a, b) in row.iter_mut().zip(add) {
                    *a += b;
                }
            }
        }
        Ok((errors, joint))
    }
}

fn check_shapes(inputs: &[Vec<f64>], frontend: &FrontendSpec, channel: &ChannelModel) -> Result<()> {
    if inputs.iter().any(|x| x.len() != channel.n_t()) {
        return invalid(format!("constellation points must have length n_t = {}", channel.n_t()));
    }
    if frontend.n_r() != channel.n_r() {
        return invalid(format!("front-end acts on {} antennas, channel has {}", frontend.n_r(), channel.n_r()));
    }
    if frontend.n_q() > 20 {
        return invalid("simulation supports at most 20 ADCs");
    }
    Ok(())
}

fn report(label: &str, power: f64, trials: u64, seed: u64, errors: u64, joint: &[Vec<u64>], start: Instant) -> TrialReport {
    let ser = errors as f64 / trials as f64;
    TrialReport {
        label: label.to_string(),
        power,
        trials,
        ser,
        empirical_mi_bits: empirical_mi(joint),
        ci95_ser: 1.96 * (ser * (1.0 - ser) / trials as f64).sqrt(),
        seed,
        wall_ms: start.elapsed().as_millis() as u64,
    }
}

/// Sends uniformly drawn messages of `code` through `channel`.
pub fn simulate_code(code: &RegionCode, channel: &ChannelModel, trials: u64, seed: u64) -> Result<TrialReport> {
    simulate_code_with(code, channel, trials, seed, Exec::default())
}

pub fn simulate_code_with(
    code: &RegionCode,
    channel: &ChannelModel,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<TrialReport> {
    if code.pattern_map().is_empty() {
        return Err(Error::InvalidCode("empty pattern map".into()));
    }
    if trials == 0 {
        return invalid("need at least one trial");
    }
    check_shapes(code.constellation(), code.frontend(), channel)?;
    let start = Instant::now();
    let pipeline =
        Pipeline { inputs: code.constellation(), cumulative: None, frontend: code.frontend(), decoder: code.decoder_table() };
    let (errors, joint) = pipeline.run(channel, trials, seed, exec)?;
    Ok(report("code", channel.power(), trials, seed, errors, &joint, start))
}

/// Sweep subject: a region code, or mass points with a front-end (for
/// example an optimized scalar partition).
#[derive(Debug, Clone)]
pub enum SweepTarget {
    Code(RegionCode),
    Partition { frontend: FrontendSpec, points: Vec<Vec<f64>>, probs: Vec<f64> },
}

impl SweepTarget {
    /// Inputs, probabilities and front-end at unit average power.
    fn normalized(&self) -> (Vec<Vec<f64>>, Option<Vec<f64>>, FrontendSpec) {
        match self {
            SweepTarget::Code(code) => {
                let c = code.normalized();
                (c.constellation().to_vec(), None, c.frontend().clone())
            }
            SweepTarget::Partition { frontend, points, probs } => {
                let n_t = points[0].len() as f64;
                let p: f64 =
                    points.iter().zip(probs).map(|(x, p)| p * x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n_t;
                let s = if p > 0.0 { 1.0 / p.sqrt() } else { 1.0 };
                let pts = points.iter().map(|x| x.iter().map(|v| v * s).collect()).collect();
                (pts, Some(probs.clone()), frontend.scaled(s))
            }
        }
    }
}

/// Nearest noiseless pattern decoding table for arbitrary inputs.
fn decoder_for(inputs: &[Vec<f64>], frontend: &FrontendSpec, channel: &ChannelModel) -> Result<Vec<usize>> {
    let n = frontend.n_q();
    let clean: Vec<Vec<bool>> = inputs
        .iter()
        .map(|x| apply_frontend(frontend, &channel.transmit(x)?))
        .collect::<Result<_>>()?;
    Ok((0..1u32 << n)
        .map(|i| {
            let bits = pattern_bits(i, n);
            let mut best = (usize::MAX, 0);
            for (m, p) in clean.iter().enumerate() {
                let d = p.iter().zip(&bits).filter(|(a, b)| a != b).count();
                if d < best.0 {
                    best = (d, m);
                }
            }
            best.1
        })
        .collect())
}

/// One report per power in `power_grid`, with inputs scaled by `√P`
/// relative to unit average power and the front-end scaled covariantly.
pub fn highsnr_sweep(
    target: &SweepTarget,
    channel: &ChannelModel,
    power_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<TrialReport>> {
    highsnr_sweep_with(target, channel, power_grid, trials, seed, Exec::default())
}

pub fn highsnr_sweep_with(
    target: &SweepTarget,
    channel: &ChannelModel,
    power_grid: &[f64],
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<TrialReport>> {
    if power_grid.is_empty() || power_grid.iter().any(|p| !(*p > 0.0)) {
        return invalid("power grid must be positive");
    }
    if power_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("power grid must be increasing");
    }
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let (unit_points, probs, unit_frontend) = target.normalized();
    check_shapes(&unit_points, &unit_frontend, channel)?;
    let label = match target {
        SweepTarget::Code(_) => "code",
        SweepTarget::Partition { .. } => "partition",
    };
    let cumulative = probs.map(|p| {
        p.iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect::<Vec<f64>>()
    });
    let mut out = Vec::with_capacity(power_grid.len());
    for &power in power_grid {
        let start = Instant::now();
        let s = power.sqrt();
        let inputs: Vec<Vec<f64>> = unit_points.iter().map(|x| x.iter().map(|v| v * s).collect()).collect();
        let frontend = unit_frontend.scaled(s);
        let ch = channel.with_power(power)?;
        let decoder = decoder_for(&inputs, &frontend, &ch)?;
        let pipeline = Pipeline { inputs: &inputs, cumulative: cumulative.clone(), frontend: &frontend, decoder };
        let (errors, joint) = pipeline.run(&ch, trials, seed, exec)?;
        out.push(report(label, power, trials, seed, errors, &joint, start));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{dmc_from_partition, mutual_information_probs};
    use crate::frontend::Partition1D;

    #[test]
    fn mi_of_diagonal_and_independent_tables() {
        let diag = vec![vec![250_000, 0, 0, 0], vec![0, 250_000, 0, 0], vec![0, 0, 250_000, 0], vec![0, 0, 0, 250_000]];
        assert!((empirical_mi(&diag) - 2.0).abs() < 1e-4);
        let indep = vec![vec![1000, 3000], vec![2000, 6000]];
        assert_eq!(empirical_mi(&indep), 0.0);
        assert_eq!(empirical_mi(&[vec![0, 0]]), 0.0);
    }

    #[test]
    fn mi_matches_a_known_channel() {
        let part = Partition1D::distinct(vec![-0.5, 0.5]).unwrap();
        let xs = [-1.0, 0.0, 1.0];
        let dmc = dmc_from_partition(1.3, &xs, &part);
        let probs = [0.3, 0.3, 0.4];
        let analytic = mutual_information_probs(&dmc, &probs);
        let mut rng = task_rng(5, 0);
        let mut joint = vec![vec![0u64; 3]; 3];
        for _ in 0..1_000_000 {
            let u: f64 = rng.random();
            let j = if u < 0.3 { 0 } else if u < 0.6 { 1 } else { 2 };
            let v: f64 = rng.random();
            let row = dmc.row(j);
            let l = if v < row[0] { 0 } else if v < row[0] + row[1] { 1 } else { 2 };
            joint[j][l] += 1;
        }
        assert!((empirical_mi(&joint) - analytic).abs() < 0.01);
    }

    #[test]
    fn noiseless_runs_are_error_free() {
        let code = RegionCode::figure1b();
        let ch = ChannelModel::siso(1.0, 1.0).unwrap().noiseless();
        let r = simulate_code(&code, &ch, 20_000, 3).unwrap();
        assert_eq!(r.ser, 0.0);
        assert_eq!(r.ci95_ser, 0.0);
    }

    #[test]
    fn reports_do_not_depend_on_strategy() {
        let code = RegionCode::figure1a().scaled(2.0);
        let ch = ChannelModel::siso(1.0, 1.0).unwrap();
        let a = simulate_code_with(&code, &ch, 30_000, 9, Exec::Sequential).unwrap();
        let b = simulate_code_with(&code, &ch, 30_000, 9, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.ser > 0.0);
        let c = simulate_code_with(&code, &ch, 30_000, 10, Exec::Parallel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let code = RegionCode::figure1a();
        let ch = ChannelModel::diagonal(&[1.0, 1.0], 1.0).unwrap();
        assert!(simulate_code(&code, &ch, 10, 0).is_err());
        let siso = ChannelModel::siso(1.0, 1.0).unwrap();
        assert!(highsnr_sweep(&SweepTarget::Code(code.clone()), &siso, &[10.0, 1.0], 10, 0).is_err());
        assert!(simulate_code(&code, &siso, 0, 0).is_err());
        let huge = RegionCode::figure1b().scaled(1e200);
        assert!(matches!(simulate_code(&huge, &siso, 10, 0), Err(Error::Numeric(_))));
    }

    #[test]
    fn csv_and_json() {
        let r = simulate_code(&RegionCode::figure1a().scaled(20.0), &ChannelModel::siso(1.0, 400.0).unwrap(), 100, 1)
            .unwrap();
        assert_eq!(r.csv_row().split(',').count(), TrialReport::CSV_HEADER.split(',').count());
        let back: TrialReport = serde_json::from_str(&r.json_line()).unwrap();
        assert_eq!(back, r);
    }
}
