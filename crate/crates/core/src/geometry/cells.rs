use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;

use super::Arrangement;
use crate::error::{invalid, Error, Result};
use crate::exec::{task_rng, Exec};

/// Slack below which a strict inequality system counts as infeasible.
const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Cells of an arrangement, sorted by sign vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEnumeration {
    pub total: usize,
    pub bounded: usize,
    pub sign_vectors: Vec<Vec<bool>>,
    pub bounded_flags: Vec<bool>,
    /// One interior point per cell.
    pub witnesses: Vec<Vec<f64>>,
}

impl CellEnumeration {
    pub fn contains(&self, signs: &[bool]) -> bool {
        self.sign_vectors.binary_search_by(|s| s.as_slice().cmp(signs)).is_ok()
    }
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// Maximizes the common slack `s ≤ 1` of `σ_i(⟨â_i, z⟩ − b̂_i) ≥ s` over unit
/// normals; the cell is non-empty iff the optimum is positive.
fn interior_point(arr: &Arrangement, signs: &[bool]) -> Result<Option<Vec<f64>>> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<_> = (0..arr.dim()).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let s = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    for (h, &b) in arr.hyperplanes().iter().zip(signs) {
        let norm = h.norm();
        let sg = sign(b);
        let mut expr: Vec<_> = z.iter().zip(&h.normal).map(|(v, a)| (*v, sg * a / norm)).collect();
        expr.push((s, -1.0));
        lp.add_constraint(expr, ComparisonOp::Ge, sg * h.offset / norm);
    }
    match lp.solve() {
        Ok(sol) if sol.objective() > FEASIBILITY_TOLERANCE => Ok(Some(z.iter().map(|v| sol[*v]).collect())),
        Ok(_) | Err(minilp::Error::Infeasible) => Ok(None),
        Err(minilp::Error::Unbounded) => Err(Error::Numeric("slack program reported unbounded".into())),
    }
}

/// A cell is bounded iff its recession cone `{d : σ_i⟨a_i, d⟩ ≥ 0}` is `{0}`.
fn is_bounded(arr: &Arrangement, signs: &[bool]) -> Result<bool> {
    if arr.len() < arr.dim() {
        return Ok(false);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut objective = vec![0.0; arr.dim()];
    for (h, &b) in arr.hyperplanes().iter().zip(signs) {
        let norm = h.norm();
        for (o, a) in objective.iter_mut().zip(&h.normal) {
            *o += sign(b) * a / norm;
        }
    }
    let d: Vec<_> = objective.iter().map(|c| lp.add_var(*c, (-1.0, 1.0))).collect();
    for (h, &b) in arr.hyperplanes().iter().zip(signs) {
        let norm = h.norm();
        let expr: Vec<_> = d.iter().zip(&h.normal).map(|(v, a)| (*v, sign(b) * a / norm)).collect();
        lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective() <= FEASIBILITY_TOLERANCE),
        Err(e) => Err(Error::Numeric(format!("recession program failed: {e}"))),
    }
}

/// Enumerates the cells of a generic arrangement by testing all `2^n` sign
/// vectors with linear programs, then cross-checks by sampling
/// `samples` random points.
pub fn enumerate_cells_oracle(arr: &Arrangement, samples: usize, seed: u64) -> Result<CellEnumeration> {
    enumerate_cells_with(arr, samples, seed, Exec::default())
}

pub fn enumerate_cells_with(arr: &Arrangement, samples: usize, seed: u64, exec: Exec) -> Result<CellEnumeration> {
    let n = arr.len();
    if n > 16 {
        return invalid(format!("cell enumeration supports at most 16 hyperplanes, got {n}"));
    }
    if !arr.is_general_position() {
        return Err(Error::Degenerate(
            "arrangement is not in general position; perturb or re-draw the hyperplanes".into(),
        ));
    }
    let results = exec.map(1 << n, |mask| -> Result<Option<(Vec<bool>, bool, Vec<f64>)>> {
        // hyperplane 0 is the most significant position so that mask order
        // matches lexicographic order of sign vectors
        let signs: Vec<bool> = (0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect();
        let Some(w) = interior_point(arr, &signs)? else {
            return Ok(None);
        };
        if arr.sign_vector(&w) != signs {
            return Err(Error::Numeric(format!("witness for {signs:?} lies in another cell")));
        }
        let bounded = is_bounded(arr, &signs)?;
        Ok(Some((signs, bounded, w)))
    });
    let mut out = CellEnumeration { total: 0, bounded: 0, sign_vectors: vec![], bounded_flags: vec![], witnesses: vec![] };
    for r in results {
        if let Some((signs, bounded, w)) = r? {
            out.total += 1;
            out.bounded += bounded as usize;
            out.sign_vectors.push(signs);
            out.bounded_flags.push(bounded);
            out.witnesses.push(w);
        }
    }

    let scale = 10.0
        * (1.0
            + arr
                .hyperplanes()
                .iter()
                .map(|h| h.offset.abs() / h.norm())
                .fold(0.0, f64::max));
    let mut rng = task_rng(seed, 0);
    let mut z = vec![0.0; arr.dim()];
    for _ in 0..samples {
        for v in &mut z {
            *v = rng.random_range(-scale..scale);
        }
        let signs = arr.sign_vector(&z);
        if !out.contains(&signs) {
            return Err(Error::Degenerate(format!("sampled point {z:?} falls in an uncertified cell {signs:?}")));
        }
    }
    Ok(out)
}
