//! Candidate grids: span offsets `G`, weights `W` and variances `Σ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hard ceiling on enumerated candidates regardless of `max_candidates`;
/// beyond this the family would not fit in memory.
pub const ENUMERATION_LIMIT: u128 = 1 << 25;

/// Sizes and spacings of the grids behind a candidate family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    /// Offset spacing along each span direction, in units of `σ̂`.
    pub mean_spacing: f64,
    /// Largest offset `L` actually used, in units of `σ̂`.
    pub extent: f64,
    pub span_points: usize,
    pub weight_spacing: f64,
    pub weight_tuples: usize,
    pub variances: usize,
    /// Family size before enumeration.
    pub count: u128,
}

/// `{−J h, …, −h, 0, h, …, J h}` with `J = ⌊extent / h⌋`.
pub fn offset_grid<T: Scalar>(spacing: T, extent: T) -> Vec<T> {
    let j = (extent / spacing + T::lit(1e-9)).floor().to_i64().unwrap_or(0).max(0);
    (-j..=j).map(|i| T::lit(i as f64) * spacing).collect()
}

/// `W = {0, s, 2s, …} ∪ {1}`.
pub fn weight_values<T: Scalar>(spacing: T) -> Vec<T> {
    let j = (T::one() / spacing + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let mut w: Vec<T> = (0..=j).map(|i| (T::from_usize_lossy(i) * spacing).min(T::one())).collect();
    if *w.last().expect("nonempty") < T::one() - T::lit(1e-12) {
        w.push(T::one());
    }
    w.dedup();
    w
}

/// All `k`-tuples whose first `k − 1` entries come from `values` and whose
/// last entry is the remainder `1 − Σ`; tuples with a negative remainder are
/// dropped. Remainders within `1e-9` of zero are set to zero.
pub fn weight_tuples<T: Scalar>(values: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(k);
    fill_weights(values, k, T::zero(), &mut prefix, &mut out);
    out
}

fn fill_weights<T: Scalar>(values: &[T], k: usize, sum: T, prefix: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
    if prefix.len() + 1 == k {
        let rest = T::one() - sum;
        if rest >= -T::lit(1e-9) {
            let mut t = prefix.clone();
            t.push(if rest.abs() <= T::lit(1e-9) { T::zero() } else { rest });
            out.push(t);
        }
        return;
    }
    for &w in values {
        if sum + w > T::one() + T::lit(1e-9) {
            continue;
        }
        prefix.push(w);
        fill_weights(values, k, sum + w, prefix, out);
        prefix.pop();
    }
}

/// Indices `i` of `σ²(1 + i/d)`, `−d < i ≤ d`, after the optional window
/// `|i| ≤ w` and a uniform stride leaving at most `size` values. `i = 0` is
/// always kept.
pub fn variance_steps(d: usize, size: Option<usize>, window: Option<usize>) -> Vec<i64> {
    let d = d as i64;
    let mut steps: Vec<i64> = (-d + 1..=d).collect();
    if let Some(w) = window {
        steps.retain(|i| i.unsigned_abs() as usize <= w);
    }
    if let Some(size) = size {
        let stride = steps.len().div_ceil(size.max(1)).max(1) as i64;
        steps.retain(|i| i.rem_euclid(stride) == 0);
        // keep the count within `size` when the centered stride overshoots
        while steps.len() > size.max(1) {
            let last = steps.len() - 1;
            let drop = if steps[last].abs() >= steps[0].abs() { last } else { 0 };
            steps.remove(drop);
        }
    }
    steps
}

pub fn variance_values<T: Scalar>(center: T, d: usize, steps: &[i64]) -> Vec<T> {
    let df = T::from_usize_lossy(d);
    steps.iter().map(|&i| center * (T::one() + T::lit(i as f64) / df)).collect()
}

/// `n^k`, or the multiset count `C(n + k − 1, k)` when `unordered`.
pub fn tuple_count(n: usize, k: usize, unordered: bool) -> u128 {
    if unordered {
        let mut c: u128 = 1;
        for i in 0..k as u128 {
            c = match c.checked_mul(n as u128 + i) {
                Some(v) => v / (i + 1),
                None => return u128::MAX,
            };
        }
        c
    } else {
        (0..k).try_fold(1u128, |acc, _| acc.checked_mul(n as u128)).unwrap_or(u128::MAX)
    }
}

pub fn family_count(points: usize, k: usize, unordered: bool, weights: usize, variances: usize) -> u128 {
    tuple_count(points, k, unordered)
        .checked_mul(weights as u128)
        .and_then(|c| c.checked_mul(variances as u128))
        .unwrap_or(u128::MAX)
}

pub fn check_count(count: u128, max_candidates: Option<u128>) -> Result<()> {
    let limit = max_candidates.map_or(ENUMERATION_LIMIT, |m| m.min(ENUMERATION_LIMIT));
    if count > limit {
        return Err(Error::CandidateOverflow { count, limit });
    }
    Ok(())
}

/// Calls `f` with every `k`-tuple of indices below `n`, in lexicographic
/// order; non-decreasing tuples only when `unordered`.
pub fn for_each_tuple(n: usize, k: usize, unordered: bool, mut f: impl FnMut(&[usize])) {
    if n == 0 {
        return;
    }
    let mut idx = vec![0usize; k];
    loop {
        f(&idx);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] + 1 < n {
                idx[pos] += 1;
                let v = if unordered { idx[pos] } else { 0 };
                for slot in &mut idx[pos + 1..] {
                    *slot = v;
                }
                break;
            }
        }
    }
}
