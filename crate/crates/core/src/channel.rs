//! Real MIMO channel `Y = h X + N`, its SVD into parallel scalar
//! subchannels, and the average power constraint.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rates::InputDistribution;

/// Singular values below `RANK_TOLERANCE * sigma_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Fixed real channel with an average power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    h: DMatrix<f64>,
    power: f64,
    noise_var: f64,
}

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    n_t: usize,
    n_r: usize,
    h: Vec<Vec<f64>>,
    power: f64,
    #[serde(default = "unit")]
    noise_var: f64,
}

fn unit() -> f64 {
    1.0
}

impl ChannelModel {
    /// Builds a channel from row-major gains (`n_r` rows of `n_t` entries).
    pub fn new(rows: &[Vec<f64>], power: f64, noise_var: f64) -> Result<Self> {
        let n_r = rows.len();
        if n_r == 0 {
            return invalid("channel matrix has no rows");
        }
        let n_t = rows[0].len();
        if n_t == 0 || rows.iter().any(|r| r.len() != n_t) {
            return invalid("channel matrix rows must be non-empty and of equal length");
        }
        let h = DMatrix::from_fn(n_r, n_t, |i, j| rows[i][j]);
        Self::from_matrix(h, power, noise_var)
    }

    pub fn from_matrix(h: DMatrix<f64>, power: f64, noise_var: f64) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return invalid("channel matrix has non-finite entries");
        }
        if h.nrows() == 0 || h.ncols() == 0 {
            return invalid("channel matrix is empty");
        }
        if !(power > 0.0 && power.is_finite()) {
            return invalid(format!("power must be positive, got {power}"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return invalid(format!("noise variance must be positive, got {noise_var}"));
        }
        Ok(Self { h, power, noise_var })
    }

    /// Scalar channel `Y = gain X + N` with unit noise.
    pub fn siso(gain: f64, power: f64) -> Result<Self> {
        Self::new(&[vec![gain]], power, 1.0)
    }

    /// Diagonal `n × n` channel with unit noise.
    pub fn diagonal(gains: &[f64], power: f64) -> Result<Self> {
        let n = gains.len();
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| if i == j { gains[i] } else { 0.0 }), power, 1.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChannelDoc = serde_json::from_str(text)?;
        if doc.h.len() != doc.n_r || doc.h.iter().any(|r| r.len() != doc.n_t) {
            return invalid(format!(
                "channel matrix shape does not match n_r = {} rows of n_t = {} entries",
                doc.n_r, doc.n_t
            ));
        }
        Self::new(&doc.h, doc.power, doc.noise_var)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let doc = ChannelDoc {
            n_t: self.n_t(),
            n_r: self.n_r(),
            h: (0..self.n_r()).map(|i| self.h.row(i).iter().copied().collect()).collect(),
            power: self.power,
            noise_var: self.noise_var,
        };
        serde_json::to_string(&doc).expect("channel document serializes")
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::from_matrix(self.h.clone(), power, self.noise_var)
    }

    /// Copy of the channel with the noise switched off. Only meaningful for
    /// noiseless round-trip checks.
    pub fn noiseless(&self) -> Self {
        Self { h: self.h.clone(), power: self.power, noise_var: 0.0 }
    }

    pub fn rank(&self) -> usize {
        svd_decompose(self).map(|s| s.len()).unwrap_or(0)
    }

    /// Noiseless output `h x`.
    pub fn transmit(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_t() {
            return invalid(format!("input has length {}, channel expects {}", x.len(), self.n_t()));
        }
        Ok((0..self.n_r())
            .map(|i| (0..self.n_t()).map(|j| self.h[(i, j)] * x[j]).sum())
            .collect())
    }
}

/// `h = U Σ Vᵀ` restricted to the singular values above tolerance.
#[derive(Debug, Clone)]
pub struct SubchannelSet {
    /// Singular values in non-increasing order.
    pub sigmas: Vec<f64>,
    /// `n_r × s`, orthonormal columns.
    pub left_basis: DMatrix<f64>,
    /// `n_t × s`, orthonormal columns.
    pub right_basis: DMatrix<f64>,
}

impl SubchannelSet {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.sigmas));
        &self.left_basis * sigma * self.right_basis.transpose()
    }

    /// Projection `Uᵀ y` of a channel output onto the subchannel coordinates.
    pub fn project_output(&self, y: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| (0..y.len()).map(|i| self.left_basis[(i, k)] * y[i]).sum())
            .collect()
    }

    /// Channel input `V x̃` that drives subchannel `k` with `x̃_k`.
    pub fn precode(&self, x_tilde: &[f64]) -> Vec<f64> {
        (0..self.right_basis.nrows())
            .map(|i| (0..self.len()).map(|k| self.right_basis[(i, k)] * x_tilde[k]).sum())
            .collect()
    }
}

/// Splits the channel into `rank(h)` parallel scalar subchannels.
///
/// Signs are normalized so that the largest-magnitude entry of every left
/// singular vector is positive; diagonal channels with sorted positive gains
/// therefore get `U = I`.
pub fn svd_decompose(channel: &ChannelModel) -> Result<SubchannelSet> {
    let h = channel.gains();
    if h.iter().any(|v| !v.is_finite()) {
        return invalid("channel matrix has non-finite entries");
    }
    let svd = h.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numeric("SVD did not produce U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD did not produce Vᵀ".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| sigma_max > 0.0 && svd.singular_values[i] > RANK_TOLERANCE * sigma_max)
        .collect();
    let s = keep.len();
    let mut left = DMatrix::zeros(h.nrows(), s);
    let mut right = DMatrix::zeros(h.ncols(), s);
    let mut sigmas = Vec::with_capacity(s);
    for (k, &i) in keep.iter().enumerate() {
        let ucol = u.column(i);
        let pivot = ucol.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        left.set_column(k, &(ucol * sign));
        right.set_column(k, &(v_t.row(i).transpose() * sign));
        sigmas.push(svd.singular_values[i]);
    }
    Ok(SubchannelSet { sigmas, left_basis: left, right_basis: right })
}

/// One channel use: `h x + n` with iid `N(0, noise_var)` noise drawn from `rng`.
pub fn apply_channel<R: Rng + ?Sized>(channel: &ChannelModel, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut y = channel.transmit(x)?;
    let std = channel.noise_var().sqrt();
    for yi in &mut y {
        let n: f64 = rng.sample(StandardNormal);
        *yi += std * n;
    }
    Ok(y)
}

/// Checks `(1/n_t) Σ_i E[X_i²] ≤ P` (with slack `1e-9`).
pub fn validate_power(dist: &InputDistribution, channel: &ChannelModel) -> bool {
    average_power(dist, channel.n_t()) <= channel.power() + 1e-9
}

/// `(1/n_t) Σ_points p_j ‖x_j‖²`.
pub fn average_power(dist: &InputDistribution, n_t: usize) -> f64 {
    dist.points
        .iter()
        .zip(&dist.probs)
        .map(|(x, p)| p * x.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / n_t as f64
}
