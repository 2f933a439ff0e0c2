//! Clustering stages: variance estimate, coarse single-linkage in `d`
//! dimensions, and recursive spectral splitting.

use std::collections::VecDeque;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{self, squared_distance, EigenOptions, Matrix, ScatterStats};
use crate::model::Dataset;
use crate::rng;
use crate::scalar::Scalar;

/// `min_{a≠b ≤ k+1} ‖x(a) − x(b)‖² / 2d` over the first `k + 1` samples.
pub fn estimate_variance<T: Scalar>(data: &Dataset<T>, k: usize) -> Result<T> {
    ensure(k >= 1, || "k must be at least 1".into())?;
    if data.n() <= k {
        return Err(Error::InsufficientSamples { needed: k + 1, available: data.n() });
    }
    let two_d = T::lit(2.0) * T::from_usize_lossy(data.dim());
    let mut best = T::infinity();
    for a in 0..=k {
        for b in 0..a {
            best = best.min(squared_distance(data.row(a), data.row(b)));
        }
    }
    Ok(best / two_d)
}

/// Merge and split thresholds, all derived from `σ̂²`, `n`, `d`, `k`, `ε`, `δ`.
/// Logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Thresholds<T> {
    pub sigma2_hat: T,
    /// `2dσ̂² + 23σ̂²√(d ln(n²/δ))`, on squared distances.
    pub coarse_merge_threshold: T,
    /// `12k²σ̂² ln(n³/δ)`.
    pub spectral_norm_gate: T,
    /// `3σ̂√(ln(n²k/δ))`, on projected distances.
    pub projected_link_threshold: T,
    /// `ε/5k`; clusters smaller than this fraction of `n` are left alone.
    pub min_cluster_fraction: T,
    /// `ε/8k²`; fraction of `n` reserved per split for the eigenvector.
    pub reserve_fraction: T,
}

impl<T: Scalar> Thresholds<T> {
    pub fn new(sigma2_hat: T, n: usize, d: usize, k: usize, eps: T, delta: T) -> Result<Self> {
        ensure(sigma2_hat > T::zero() && sigma2_hat.is_finite(), || {
            format!("variance estimate must be positive, got {sigma2_hat} (duplicate samples?)")
        })?;
        ensure(n >= 1 && d >= 1 && k >= 1, || "n, d and k must be positive".into())?;
        ensure(eps > T::zero() && eps < T::one(), || format!("eps must lie in (0, 1), got {eps}"))?;
        ensure(delta > T::zero() && delta < T::one(), || format!("delta must lie in (0, 1), got {delta}"))?;
        let nf = T::from_usize_lossy(n);
        let df = T::from_usize_lossy(d);
        let kf = T::from_usize_lossy(k);
        let two = T::lit(2.0);
        let coarse = two * df * sigma2_hat
            + T::lit(23.0) * sigma2_hat * (df * (nf * nf / delta).ln()).sqrt();
        let gate = T::lit(12.0) * kf * kf * sigma2_hat * (nf * nf * nf / delta).ln();
        let link = T::lit(3.0) * sigma2_hat.sqrt() * (nf * nf * kf / delta).ln().sqrt();
        Ok(Self {
            sigma2_hat,
            coarse_merge_threshold: coarse,
            spectral_norm_gate: gate,
            projected_link_threshold: link,
            min_cluster_fraction: eps / (T::lit(5.0) * kf),
            reserve_fraction: eps / (T::lit(8.0) * kf * kf),
        })
    }

    /// `n ε / 5k` as a real number; a cluster qualifies when `|C| ≥` this.
    pub fn min_cluster_size(&self, n: usize) -> T {
        T::from_usize_lossy(n) * self.min_cluster_fraction
    }

    /// `⌈n ε / 8k²⌉`.
    pub fn reserve_size(&self, n: usize) -> usize {
        (T::from_usize_lossy(n) * self.reserve_fraction).ceil().to_usize().unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster<T: Scalar> {
    /// Sample indices, ascending.
    pub members: Vec<usize>,
    pub stats: ScatterStats<T>,
}

impl<T: Scalar> Cluster<T> {
    fn from_members(samples: &Matrix<T>, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        let stats = ScatterStats::from_rows(samples, &members)?;
        Ok(Self { members, stats })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplitOutcome {
    /// Spectral norm under the gate; cluster kept as is.
    BelowGate,
    /// Reserve would consume the whole cluster.
    Unsplittable { reserve: usize },
    /// Split into `parts` sub-clusters after discarding `reserved` samples.
    Split { parts: usize, reserved: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub size: usize,
    pub spectral_norm: f64,
    pub outcome: SplitOutcome,
}

/// Partition of the non-discarded sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering<T: Scalar> {
    /// Cluster id per sample; `None` for discarded samples.
    pub assignments: Vec<Option<usize>>,
    /// Ordered by smallest member.
    pub clusters: Vec<Cluster<T>>,
    /// Samples consumed by eigenvector estimation, ascending.
    pub discarded: Vec<usize>,
    /// Clusters whose reserve exceeded their size.
    pub unsplittable: Vec<usize>,
    pub audit: Vec<SplitRecord>,
}

/// JSON layout for `--dump-clusters`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDump {
    pub assignments: Vec<Option<usize>>,
    pub discarded: Vec<usize>,
}

impl<T: Scalar> Clustering<T> {
    fn assemble(n: usize, mut clusters: Vec<Cluster<T>>, mut discarded: Vec<usize>, unsplittable_members: &[usize], audit: Vec<SplitRecord>) -> Self {
        clusters.sort_by_key(|c| c.members[0]);
        discarded.sort_unstable();
        let mut assignments = vec![None; n];
        for (id, c) in clusters.iter().enumerate() {
            for &m in &c.members {
                assignments[m] = Some(id);
            }
        }
        let mut unsplittable: Vec<usize> =
            unsplittable_members.iter().filter_map(|&m| assignments[m]).collect();
        unsplittable.sort_unstable();
        unsplittable.dedup();
        Self { assignments, clusters, discarded, unsplittable, audit }
    }

    /// Clustering with the given groups and no discards. The groups must
    /// partition `0..data.n()`.
    pub fn from_groups(data: &Dataset<T>, groups: Vec<Vec<usize>>) -> Result<Self> {
        let clusters = groups
            .into_iter()
            .map(|g| {
                ensure(!g.is_empty(), || "empty group".into())?;
                ensure(g.iter().all(|&i| i < data.n()), || "group index out of range".into())?;
                Cluster::from_members(&data.samples, g)
            })
            .collect::<Result<Vec<_>>>()?;
        let c = Self::assemble(data.n(), clusters, Vec::new(), &[], Vec::new());
        c.check_partition()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Cluster::len).collect()
    }

    pub fn dump(&self) -> ClusterDump {
        ClusterDump { assignments: self.assignments.clone(), discarded: self.discarded.clone() }
    }

    /// Checks that clusters and discards partition `0..n` exactly.
    pub fn check_partition(&self) -> Result<()> {
        let n = self.assignments.len();
        let mut seen = vec![false; n];
        let all = self.clusters.iter().flat_map(|c| c.members.iter()).chain(&self.discarded);
        for &i in all {
            ensure(i < n && !seen[i], || format!("index {i} missing or duplicated"))?;
            seen[i] = true;
        }
        ensure(seen.iter().all(|&s| s), || "clustering does not cover every sample".into())?;
        ensure(self.clusters.iter().all(|c| !c.is_empty()), || "empty cluster".into())
    }
}

/// Single-linkage clustering cut at `thresholds.coarse_merge_threshold`:
/// two samples share a cluster iff a chain of samples links them with every
/// squared distance at most the threshold.
///
/// Each new sample scans the existing clusters and stops scanning a cluster
/// at the first member within reach, so well-connected data costs far less
/// than all `n²/2` distances. Memory is `O(n)`.
pub fn coarse_single_linkage<T: Scalar>(data: &Dataset<T>, thresholds: &Thresholds<T>) -> Result<Clustering<T>> {
    let groups = threshold_components(&data.samples, thresholds.coarse_merge_threshold);
    let clusters = groups
        .into_iter()
        .map(|m| Cluster::from_members(&data.samples, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Clustering::assemble(data.n(), clusters, Vec::new(), &[], Vec::new()))
}

/// Connected components of the graph `‖xᵢ − xⱼ‖² ≤ threshold`.
pub fn threshold_components<T: Scalar>(samples: &Matrix<T>, threshold: T) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..samples.rows() {
        let xi = samples.row(i);
        let mut linked: Vec<usize> = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            // newest members first: they tend to be spatially closest in streams
            if members.iter().rev().any(|&j| squared_distance(xi, samples.row(j)) <= threshold) {
                linked.push(g);
            }
        }
        let mut merged = vec![i];
        for &g in linked.iter().rev() {
            merged.append(&mut groups.swap_remove(g));
        }
        groups.push(merged);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

/// One-dimensional single-linkage: sort, then cut wherever consecutive values
/// are more than `link_threshold` apart. Groups come out in increasing value
/// order, each holding indices into `values`.
pub fn single_linkage_1d<T: Scalar>(values: &[T], link_threshold: T) -> Result<Vec<Vec<usize>>> {
    ensure(!values.is_empty(), || "single-linkage needs at least one value".into())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp_scalar(&values[b]).then(a.cmp(&b)));
    let mut groups = vec![vec![order[0]]];
    for w in order.windows(2) {
        if values[w[1]] - values[w[0]] > link_threshold {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("nonempty").push(w[1]);
    }
    Ok(groups)
}

/// Parameters of the recursive spectral stage.
#[derive(Debug, Clone, Copy)]
pub struct SpectralParams<T> {
    pub thresholds: Thresholds<T>,
    pub eigen: EigenOptions,
    pub seed: u64,
}

/// Splits clusters whose reduced covariance `S(C)` has spectral norm at or
/// above the gate.
///
/// Clusters are processed from a work queue; only freshly created clusters
/// re-enter it. For a qualifying cluster, a seeded uniform reserve of
/// `⌈nε/8k²⌉` members estimates the top eigenvector and is then discarded;
/// the rest are projected onto that vector and split by 1-D single-linkage.
/// The number of processed clusters is capped at `n`.
pub fn recursive_spectral_cluster<T: Scalar>(
    data: &Dataset<T>,
    clustering: &Clustering<T>,
    params: &SpectralParams<T>,
) -> Result<Clustering<T>> {
    let n = data.n();
    let th = &params.thresholds;
    let min_size = th.min_cluster_size(n);
    let reserve = th.reserve_size(n);

    let mut queue: VecDeque<Cluster<T>> = clustering.clusters.iter().cloned().collect();
    let mut done = Vec::new();
    let mut discarded = clustering.discarded.clone();
    let mut unsplittable_members = Vec::new();
    let mut audit = clustering.audit.clone();
    let mut processed = 0usize;

    while let Some(cluster) = queue.pop_front() {
        processed += 1;
        if processed > n || T::from_usize_lossy(cluster.len()) < min_size || cluster.len() < 2 {
            done.push(cluster);
            continue;
        }
        let eigen = EigenOptions { seed: rng::derive_seed(params.seed, "spectral_gate", processed as u64), ..params.eigen };
        let s = cluster.stats.centered_covariance(th.sigma2_hat)?;
        let norm = linalg::spectral_norm(&s, &eigen)?;
        let mut record = SplitRecord { size: cluster.len(), spectral_norm: norm.as_f64(), outcome: SplitOutcome::BelowGate };
        if norm < th.spectral_norm_gate {
            audit.push(record);
            done.push(cluster);
            continue;
        }
        if reserve < 2 || reserve >= cluster.len() {
            record.outcome = SplitOutcome::Unsplittable { reserve };
            audit.push(record);
            unsplittable_members.push(cluster.members[0]);
            done.push(cluster);
            continue;
        }

        let mut rng = rng::stream(params.seed, "spectral_reserve", processed as u64);
        let mut picked = vec![false; cluster.len()];
        for i in index::sample(&mut rng, cluster.len(), reserve) {
            picked[i] = true;
        }
        let (reserved, rest): (Vec<usize>, Vec<usize>) = {
            let mut r = Vec::with_capacity(reserve);
            let mut k = Vec::with_capacity(cluster.len() - reserve);
            for (pos, &m) in cluster.members.iter().enumerate() {
                if picked[pos] { r.push(m) } else { k.push(m) }
            }
            (r, k)
        };
        let reserve_stats = ScatterStats::from_rows(&data.samples, &reserved)?;
        let cov = reserve_stats.centered_covariance(th.sigma2_hat)?;
        let eigen = EigenOptions { seed: rng::derive_seed(params.seed, "spectral_direction", processed as u64), ..params.eigen };
        let direction = linalg::top_eigs_algebraic(&cov, 1, &eigen)?.vectors.remove(0);
        let projected: Vec<T> = rest
            .iter()
            .map(|&m| {
                let x = data.row(m);
                x.iter().zip(&reserve_stats.mean).zip(&direction).fold(T::zero(), |acc, ((&xi, &mi), &vi)| acc + (xi - mi) * vi)
            })
            .collect();
        let groups = single_linkage_1d(&projected, th.projected_link_threshold)?;
        record.outcome = SplitOutcome::Split { parts: groups.len(), reserved: reserved.len() };
        audit.push(record);
        discarded.extend(reserved);
        for g in groups {
            let members = g.into_iter().map(|i| rest[i]).collect();
            queue.push_back(Cluster::from_members(&data.samples, members)?);
        }
    }
    Ok(Clustering::assemble(n, done, discarded, &unsplittable_members, audit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[[f64; 2]]) -> Dataset<f64> {
        Dataset::from_rows(rows).unwrap()
    }

    #[test]
    fn variance_hand_example() {
        let d = ds(&[[0.0, 0.0], [2.0, 0.0], [100.0, 100.0]]);
        assert_eq!(estimate_variance(&d, 1).unwrap(), 1.0);
    }

    #[test]
    fn variance_of_identical_samples_is_zero() {
        let d = ds(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(estimate_variance(&d, 3).unwrap(), 0.0);
        assert!(Thresholds::new(0.0, 4, 2, 3, 0.1, 0.1).is_err());
    }

    #[test]
    fn variance_needs_k_plus_one_samples() {
        let d = ds(&[[0.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(estimate_variance(&d, 2), Err(Error::InsufficientSamples { needed: 3, available: 2 })));
    }

    #[test]
    fn threshold_formulas() {
        let t = Thresholds::new(1.0f64, 100, 4, 2, 0.5, 0.1).unwrap();
        let l = (100.0f64 * 100.0 / 0.1).ln();
        assert!((t.coarse_merge_threshold - (8.0 + 23.0 * (4.0 * l).sqrt())).abs() < 1e-12);
        assert!((t.spectral_norm_gate - 48.0 * (1e6f64 / 0.1).ln()).abs() < 1e-9);
        assert!((t.projected_link_threshold - 3.0 * (2e4f64 / 0.1).ln().sqrt()).abs() < 1e-12);
        assert!((t.min_cluster_size(100) - 5.0).abs() < 1e-12);
        assert_eq!(t.reserve_size(100), 2); // ⌈100·0.5/32⌉
    }

    #[test]
    fn single_linkage_1d_examples() {
        assert_eq!(single_linkage_1d(&[0.0, 1.0, 10.0], 2.0).unwrap(), vec![vec![0, 1], vec![2]]);
        assert_eq!(single_linkage_1d(&[3.0, 3.0, 3.0], 0.5).unwrap(), vec![vec![0, 1, 2]]);
        assert_eq!(single_linkage_1d(&[10.0, 0.0, 1.0], 2.0).unwrap(), vec![vec![1, 2], vec![0]]);
        // gaps equal to the threshold stay linked
        assert_eq!(single_linkage_1d(&[0.0, 2.0], 2.0).unwrap().len(), 1);
        assert!(single_linkage_1d::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn planted_groups_and_chaining() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push([i as f64 * 0.1, 0.0]);
        }
        for i in 0..10 {
            rows.push([50.0 + i as f64 * 0.1, 0.0]);
        }
        let g = threshold_components(&Matrix::from_rows(&rows).unwrap(), 1.0);
        assert_eq!(g, vec![(0..10).collect::<Vec<_>>(), (10..20).collect()]);
        // a chain with unit steps: every neighbour is within reach
        let chain: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, 0.0]).collect();
        assert_eq!(threshold_components(&Matrix::from_rows(&chain).unwrap(), 1.0).len(), 1);
    }

    #[test]
    fn bridging_sample_merges_existing_groups() {
        let rows = [[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]];
        let g = threshold_components(&Matrix::from_rows(&rows).unwrap(), 1.0);
        assert_eq!(g, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn no_gate_means_no_change() {
        let data = ds(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1]]);
        let th = Thresholds::new(0.005, 4, 2, 1, 0.5, 0.1).unwrap();
        let coarse = coarse_single_linkage(&data, &th).unwrap();
        assert_eq!(coarse.len(), 1);
        let params = SpectralParams { thresholds: th, eigen: EigenOptions::default(), seed: 1 };
        let refined = recursive_spectral_cluster(&data, &coarse, &params).unwrap();
        assert_eq!(refined.clusters, coarse.clusters);
        assert!(refined.discarded.is_empty());
        refined.check_partition().unwrap();
    }

    #[test]
    fn dump_layout() {
        let data = ds(&[[0.0, 0.0], [10.0, 0.0]]);
        let th = Thresholds::new(1.0, 2, 2, 1, 0.5, 0.1).unwrap();
        let c = coarse_single_linkage(&data, &th).unwrap();
        let json = serde_json::to_string(&c.dump()).unwrap();
        assert_eq!(json, r#"{"assignments":[0,1],"discarded":[]}"#);
    }
}
