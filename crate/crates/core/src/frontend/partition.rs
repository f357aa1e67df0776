//! Partitions of the receiver output space: interval partitions of the real
//! line and labeled cell partitions of `ℝ^d`, together with the distance-sign
//! functions that encode a cell index in the signs of `n_q` continuous
//! functions.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply_frontend, FrontendSpec, MultivariatePolynomial};
use crate::error::{invalid, Error, Result};
use crate::exec::task_rng;

/// Root deduplication tolerance for induced partitions.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Intervals `(-∞, b_1), (b_1, b_2), …, (b_{m-1}, ∞)`, each carrying an
/// output-symbol label. Labels need not be distinct across intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition1D {
    boundaries: Vec<f64>,
    labels: Vec<usize>,
}

impl Partition1D {
    pub fn new(boundaries: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != boundaries.len() + 1 {
            return invalid(format!(
                "{} boundaries need {} labels, got {}",
                boundaries.len(),
                boundaries.len() + 1,
                labels.len()
            ));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return invalid("partition boundaries must be finite");
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("partition boundaries must be strictly increasing");
        }
        let alphabet = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; alphabet];
        for &l in &labels {
            seen[l] = true;
        }
        if seen.iter().any(|s| !s) {
            return invalid("every output symbol must label at least one interval");
        }
        Ok(Self { boundaries, labels })
    }

    /// Interval partition with a distinct label per interval.
    pub fn distinct(boundaries: Vec<f64>) -> Result<Self> {
        let labels = (0..=boundaries.len()).collect();
        Self::new(boundaries, labels)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_intervals(&self) -> usize {
        self.labels.len()
    }

    /// Size of the output alphabet.
    pub fn num_labels(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// `(lo, hi, label)` per interval, with infinite outer ends.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.labels.len()).map(move |i| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.boundaries[i - 1] };
            let hi = self.boundaries.get(i).copied().unwrap_or(f64::INFINITY);
            (lo, hi, self.labels[i])
        })
    }

    /// Label of the interval containing `y`; a boundary point belongs to
    /// the interval on its left.
    pub fn label_of(&self, y: f64) -> usize {
        self.labels[self.boundaries.partition_point(|&b| b < y)]
    }

    /// The same labeling with boundaries multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { boundaries: self.boundaries.iter().map(|b| b * s).collect(), labels: self.labels.clone() }
    }
}

/// Interval partition induced on the real line by univariate comparators of
/// degree at most two.
///
/// Boundaries are the sign-changing real roots of `f_i(y) - t_i` strictly
/// inside `domain`; labels number the distinct ADC patterns by first
/// appearance from the left.
pub fn induced_partition_1d(spec: &FrontendSpec, domain: (f64, f64)) -> Result<Partition1D> {
    let (lo, hi) = domain;
    if !(lo < hi) {
        return invalid("domain must be a non-empty interval");
    }
    if spec.n_r() != 1 {
        return Err(Error::UnsupportedFamily(format!(
            "induced 1-D partitions need scalar inputs, front-end has {} inputs",
            spec.n_r()
        )));
    }
    let mut roots = Vec::new();
    for (f, &t) in spec.functions().iter().zip(spec.thresholds()) {
        if f.degree() > 2 {
            return Err(Error::UnsupportedFamily(format!("comparator of degree {} (> 2)", f.degree())));
        }
        let mut c = f.univariate_coefficients().expect("scalar polynomial");
        c.resize(3, 0.0);
        roots.extend(quadratic_sign_changes(c[2], c[1], c[0] - t));
    }
    roots.retain(|r| *r > lo && *r < hi);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_TOLERANCE);

    let mut edges = Vec::with_capacity(roots.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(&roots);
    edges.push(hi);
    let mut seen: Vec<Vec<bool>> = Vec::new();
    let mut labels = Vec::with_capacity(roots.len() + 1);
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let bits = apply_frontend(spec, &[mid])?;
        let label = match seen.iter().position(|b| *b == bits) {
            Some(l) => l,
            None => {
                seen.push(bits);
                seen.len() - 1
            }
        };
        labels.push(label);
    }
    Partition1D::new(roots, labels)
}

/// Real roots of `a y² + b y + c` at which the sign changes.
fn quadratic_sign_changes(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return Vec::new();
    }
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b = 0 and c = 0 would make disc = 0, so this is b = 0
        let r = (-c / a).sqrt();
        return vec![-r, r];
    }
    let (r1, r2) = (q / a, c / q);
    if r1 < r2 {
        vec![r1, r2]
    } else {
        vec![r2, r1]
    }
}

/// `poly(y) > 0` when `positive`, else `poly(y) < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignConstraint {
    pub poly: MultivariatePolynomial,
    pub positive: bool,
}

impl SignConstraint {
    fn margin(&self, y: &[f64]) -> f64 {
        let v = self.poly.eval_unchecked(y);
        if self.positive {
            v
        } else {
            -v
        }
    }

    /// Euclidean distance from `y` to the zero set of the constraint.
    fn boundary_distance(&self, y: &[f64]) -> Result<f64> {
        if let Some((a, c)) = self.poly.as_affine() {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(f64::INFINITY);
            }
            let v: f64 = a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>() + c;
            return Ok(v.abs() / norm);
        }
        if self.poly.dim() == 1 && self.poly.degree() <= 2 {
            let mut c = self.poly.univariate_coefficients().expect("scalar polynomial");
            c.resize(3, 0.0);
            return Ok(quadratic_sign_changes(c[2], c[1], c[0])
                .into_iter()
                .map(|r| (y[0] - r).abs())
                .fold(f64::INFINITY, f64::min));
        }
        Err(Error::UnsupportedFamily(format!(
            "boundary distance needs affine or univariate quadratic constraints, got {}",
            self.poly
        )))
    }
}

/// A cell: a finite intersection of polynomial sign constraints, carrying a
/// 1-based index `k ∈ [2^{n_q}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDescriptor {
    pub index: usize,
    pub constraints: Vec<SignConstraint>,
}

impl CellDescriptor {
    pub fn contains(&self, y: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.margin(y) > 0.0)
    }
}

/// Labeled partition of `ℝ^dim` into at most `2^{n_q}` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPartitionRd {
    dim: usize,
    n_q: usize,
    cells: Vec<CellDescriptor>,
}

impl LabeledPartitionRd {
    pub fn new(dim: usize, n_q: usize, cells: Vec<CellDescriptor>) -> Result<Self> {
        if dim == 0 || n_q == 0 || n_q > 31 {
            return invalid("partition needs dim ≥ 1 and 1 ≤ n_q ≤ 31");
        }
        let mut indices: Vec<usize> = cells.iter().map(|c| c.index).collect();
        if indices.iter().any(|&k| k == 0 || k > 1 << n_q) {
            return invalid(format!("cell indices must lie in 1..={}", 1usize << n_q));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("cell indices must be distinct");
        }
        if cells.iter().flat_map(|c| &c.constraints).any(|c| c.poly.dim() != dim) {
            return invalid("constraint dimension does not match the partition");
        }
        Ok(Self { dim, n_q, cells })
    }

    /// Interval cells of a 1-D partition; interval `i` gets index `indices[i]`.
    pub fn from_intervals(boundaries: &[f64], indices: Vec<usize>, n_q: usize) -> Result<Self> {
        if indices.len() != boundaries.len() + 1 {
            return invalid("need one index per interval");
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("boundaries must be strictly increasing");
        }
        let cells = indices
            .into_iter()
            .enumerate()
            .map(|(i, index)| {
                let mut constraints = Vec::new();
                if i > 0 {
                    constraints.push(SignConstraint {
                        poly: MultivariatePolynomial::affine(&[1.0], -boundaries[i - 1]),
                        positive: true,
                    });
                }
                if i < boundaries.len() {
                    constraints.push(SignConstraint {
                        poly: MultivariatePolynomial::affine(&[1.0], -boundaries[i]),
                        positive: false,
                    });
                }
                CellDescriptor { index, constraints }
            })
            .collect();
        Self::new(1, n_q, cells)
    }

    /// Axis-aligned grid of boxes from per-axis cut points; cells are
    /// enumerated in row-major order (last axis fastest) and take their
    /// index from `indices`.
    pub fn rectangular(cuts: &[Vec<f64>], indices: Vec<usize>, n_q: usize) -> Result<Self> {
        let dim = cuts.len();
        if dim == 0 {
            return invalid("need at least one axis");
        }
        if cuts.iter().any(|c| c.windows(2).any(|w| w[0] >= w[1])) {
            return invalid("cut points must be strictly increasing");
        }
        let counts: Vec<usize> = cuts.iter().map(|c| c.len() + 1).collect();
        let total: usize = counts.iter().product();
        if indices.len() != total {
            return invalid(format!("{total} cells need {total} indices, got {}", indices.len()));
        }
        let mut cells = Vec::with_capacity(total);
        for (flat, index) in indices.into_iter().enumerate() {
            let mut rem = flat;
            let mut pos = vec![0; dim];
            for axis in (0..dim).rev() {
                pos[axis] = rem % counts[axis];
                rem /= counts[axis];
            }
            let mut constraints = Vec::new();
            for axis in 0..dim {
                let mut unit = vec![0.0; dim];
                unit[axis] = 1.0;
                let i = pos[axis];
                if i > 0 {
                    constraints.push(SignConstraint {
                        poly: MultivariatePolynomial::affine(&unit, -cuts[axis][i - 1]),
                        positive: true,
                    });
                }
                if i < cuts[axis].len() {
                    constraints.push(SignConstraint {
                        poly: MultivariatePolynomial::affine(&unit, -cuts[axis][i]),
                        positive: false,
                    });
                }
            }
            cells.push(CellDescriptor { index, constraints });
        }
        Self::new(dim, n_q, cells)
    }

    /// Seeded grid partition of `[-half_width, half_width]^dim` with
    /// `cuts_per_axis` uniform cut points per axis and cell indices drawn
    /// without replacement from `1..=2^{n_q}`, where `n_q` is the fewest bits
    /// that index every cell.
    pub fn random_rectangular(dim: usize, cuts_per_axis: usize, half_width: f64, seed: u64) -> Result<Self> {
        if dim == 0 || !(half_width > 0.0) {
            return invalid("need dim ≥ 1 and a positive half-width");
        }
        let mut rng = task_rng(seed, 0);
        let cuts: Vec<Vec<f64>> = (0..dim)
            .map(|_| {
                let mut c: Vec<f64> =
                    (0..cuts_per_axis).map(|_| rng.random_range(-half_width..half_width)).collect();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let total = (cuts_per_axis + 1).pow(dim as u32);
        let n_q = (usize::BITS - (total - 1).leading_zeros()).max(1) as usize;
        let mut pool: Vec<usize> = (1..=1usize << n_q).collect();
        pool.shuffle(&mut rng);
        pool.truncate(total);
        Self::rectangular(&cuts, pool, n_q)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn cells(&self) -> &[CellDescriptor] {
        &self.cells
    }

    /// Index of the cell containing `y`, if exactly one does.
    pub fn locate(&self, y: &[f64]) -> Option<usize> {
        let mut hits = self.cells.iter().filter(|c| c.contains(y));
        let first = hits.next()?;
        hits.next().is_none().then_some(first.index)
    }

    /// Samples `samples` points uniformly in `[-half_width, half_width]^dim`
    /// and fails if any point falls into two cells.
    pub fn check_disjoint(&self, samples: usize, half_width: f64, seed: u64) -> Result<()> {
        let mut rng = task_rng(seed, 0);
        let mut y = vec![0.0; self.dim];
        for _ in 0..samples {
            for v in &mut y {
                *v = rng.random_range(-half_width..half_width);
            }
            if self.cells.iter().filter(|c| c.contains(&y)).count() > 1 {
                return invalid(format!("cells overlap at {y:?}"));
            }
        }
        Ok(())
    }
}

/// `f_j(y) = ±‖y − ∂A_k‖₂` for the cell `A_k` containing `y`, positive iff
/// bit `j` of `k − 1` is set.
///
/// The signs of `f_0, …, f_{n_q−1}` therefore spell out the binary
/// representation of `k − 1`, least significant bit first.
pub fn distance_sign_function(part: &LabeledPartitionRd, j: usize, y: &[f64]) -> Result<f64> {
    if j >= part.n_q {
        return invalid(format!("bit index {j} out of range for n_q = {}", part.n_q));
    }
    if y.len() != part.dim {
        return invalid(format!("point has dimension {}, partition has {}", y.len(), part.dim));
    }
    let mut containing = part.cells.iter().filter(|c| c.contains(y));
    let cell = match (containing.next(), containing.next()) {
        (Some(c), None) => c,
        (None, _) => {
            // either on a boundary or outside every cell
            let near = part
                .cells
                .iter()
                .flat_map(|c| &c.constraints)
                .map(|c| c.boundary_distance(y))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if near <= ROOT_TOLERANCE {
                return Err(Error::BoundaryAmbiguity { tolerance: ROOT_TOLERANCE });
            }
            return invalid(format!("point {y:?} is not covered by the partition"));
        }
        (Some(_), Some(_)) => return invalid(format!("point {y:?} lies in more than one cell")),
    };
    let mut dist = f64::INFINITY;
    for c in &cell.constraints {
        dist = dist.min(c.boundary_distance(y)?);
    }
    if dist <= ROOT_TOLERANCE {
        return Err(Error::BoundaryAmbiguity { tolerance: ROOT_TOLERANCE });
    }
    let bit = ((cell.index - 1) >> j) & 1 == 1;
    Ok(if bit { dist } else { -dist })
}

/// Samples interior points of `[-half_width, half_width]^dim` and counts
/// those where the bits `f_j > 0` spell the binary form of `k − 1` for the
/// cell `k` found by direct membership. Returns `(agreeing, tested)`;
/// points within the boundary tolerance are skipped.
pub fn check_binary_indexing(
    part: &LabeledPartitionRd,
    samples: usize,
    half_width: f64,
    seed: u64,
) -> Result<(usize, usize)> {
    let mut rng = task_rng(seed, 1);
    let mut y = vec![0.0; part.dim];
    let (mut agree, mut tested) = (0, 0);
    while tested < samples {
        for v in &mut y {
            *v = rng.random_range(-half_width..half_width);
        }
        let Some(k) = part.locate(&y) else { continue };
        let mut ok = true;
        for j in 0..part.n_q {
            match distance_sign_function(part, j, &y) {
                Ok(f) => ok &= (f > 0.0) == (((k - 1) >> j) & 1 == 1),
                Err(Error::BoundaryAmbiguity { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        tested += 1;
        agree += ok as usize;
    }
    Ok((agree, tested))
}
