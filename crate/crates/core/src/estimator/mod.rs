//! End-to-end estimators: the `d`-dimensional spherical pipeline and the
//! one-dimensional search over sample-built candidates.

mod grid;
mod one_dim;
mod subspace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cluster::{self, Clustering, SpectralParams, SplitRecord, Thresholds};
use crate::distance::L1Estimate;
use crate::error::{ensure, Error, Result};
use crate::linalg::{top_eigs_algebraic, EigenOptions, ScatterStats};
use crate::model::{Dataset, Mixture};
use crate::rng;
use crate::scalar::Scalar;
use crate::scheffe::{modified_scheffe, CandidateFamily, TournamentOptions, TournamentOutcome};

pub use grid::{
    family_count, for_each_tuple, offset_grid, tuple_count, variance_steps, variance_values,
    weight_tuples, weight_values, GridSummary, ENUMERATION_LIMIT,
};
pub use one_dim::{build_candidates_1d, construction_size, learn_1d, one_dim_candidates, OneDimFamily};
pub use subspace::{AtomTable, Subspace, SubspaceMixture};

/// Where the variance grid `Σ` is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceCenter {
    /// The pairwise estimate `σ̂²`.
    #[default]
    MinPair,
    /// `(tr Cov − Σ top k−1 eigenvalues) / (d − k + 1)` over all samples:
    /// the average of the eigenvalues left after removing the mean span.
    ResidualSpectrum,
}

/// Estimator settings. [`EstimatorConfig::new`] gives the full-resolution grids; the
/// optional fields coarsen them for runs that must finish on a laptop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EstimatorConfig<T> {
    pub k: usize,
    pub eps: T,
    pub delta: T,
    pub seed: u64,
    /// Multiplies the span spacing `ε_g` and the weight spacing.
    pub grid_scale: T,
    /// Replaces `grid_scale` for the weight spacing.
    pub weight_grid_scale: Option<T>,
    /// Caps `L`, in units of `σ̂`.
    pub span_extent: Option<T>,
    pub max_candidates: Option<u128>,
    /// Uniformly subsample `Σ` to at most this many values.
    pub sigma_grid_size: Option<usize>,
    /// Keep only `σ²(1 + i/d)` with `|i| ≤` this.
    pub sigma_grid_window: Option<usize>,
    pub variance_center: VarianceCenter,
    /// Enumerate means (and weights) up to permutation only. Rounds the
    /// weight spacing down to `1/N` so the grid is closed under `1 − w`.
    pub dedupe_symmetric: bool,
    /// Draws per candidate per Scheffe game; defaults to the number of
    /// tournament samples.
    pub n_mc: Option<usize>,
    /// One-dimensional path: thin the construction samples to this many
    /// evenly spaced order statistics.
    pub construction_points: Option<usize>,
    #[serde(skip)]
    pub eigen: EigenOptions,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(k: usize, eps: T, delta: T, seed: u64) -> Self {
        Self {
            k,
            eps,
            delta,
            seed,
            grid_scale: T::one(),
            weight_grid_scale: None,
            span_extent: None,
            max_candidates: None,
            sigma_grid_size: None,
            sigma_grid_window: None,
            variance_center: VarianceCenter::MinPair,
            dedupe_symmetric: false,
            n_mc: None,
            construction_points: None,
            eigen: EigenOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.k >= 1, || "k must be at least 1".into())?;
        ensure(self.eps > T::zero() && self.eps < T::one(), || format!("eps must lie in (0, 1), got {}", self.eps))?;
        ensure(self.delta > T::zero() && self.delta < T::one(), || {
            format!("delta must lie in (0, 1), got {}", self.delta)
        })?;
        ensure(self.grid_scale >= T::one(), || format!("grid_scale must be at least 1, got {}", self.grid_scale))?;
        if let Some(w) = self.weight_grid_scale {
            ensure(w >= T::one(), || format!("weight_grid_scale must be at least 1, got {w}"))?;
        }
        if let Some(l) = self.span_extent {
            ensure(l >= T::zero() && l.is_finite(), || format!("span_extent must be finite and nonnegative, got {l}"))?;
        }
        ensure(self.sigma_grid_size != Some(0), || "sigma_grid_size must be positive".into())?;
        ensure(self.n_mc != Some(0), || "n_mc must be positive".into())?;
        ensure(self.construction_points.is_none_or(|m| m >= 2), || "construction_points must be at least 2".into())
    }

    fn weight_spacing(&self, base: T) -> T {
        let s = base * self.weight_grid_scale.unwrap_or(self.grid_scale);
        if self.dedupe_symmetric {
            T::one() / (T::one() / s - T::lit(1e-9)).ceil()
        } else {
            s
        }
    }

    fn variance_grid(&self, center: T, d: usize) -> Vec<T> {
        variance_values(center, d, &variance_steps(d, self.sigma_grid_size, self.sigma_grid_window))
    }
}

/// Affine span `origin + Σ gᵢ σ̂ uᵢ` of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanBasis<T> {
    pub cluster_id: usize,
    pub origin: Vec<T>,
    /// Up to `k − 1` orthonormal directions.
    pub basis: Vec<Vec<T>>,
    pub scale: T,
}

/// Top `k − 1` eigenvectors of `S(C) = Cov(C) − σ̂² I`, anchored at the
/// cluster mean.
pub fn cluster_span<T: Scalar>(
    stats: &ScatterStats<T>,
    k: usize,
    sigma2_hat: T,
    eigen: &EigenOptions,
) -> Result<SpanBasis<T>> {
    ensure(stats.count >= 2, || format!("span needs at least 2 samples, cluster has {}", stats.count))?;
    let r = (k.saturating_sub(1)).min(stats.dim());
    let basis = if r == 0 {
        Vec::new()
    } else {
        top_eigs_algebraic(&stats.centered_covariance(sigma2_hat)?, r, eigen)?.vectors
    };
    Ok(SpanBasis { cluster_id: 0, origin: stats.mean.clone(), basis, scale: sigma2_hat.sqrt() })
}

/// `ε_g = ε / (16 k^{3/2})`.
pub fn span_spacing<T: Scalar>(eps: T, k: usize) -> T {
    eps / (T::lit(16.0) * T::from_usize_lossy(k).powf(T::lit(1.5)))
}

/// `L = 200 √(k⁴ ε⁻¹ ln(n²/δ))`.
pub fn span_extent<T: Scalar>(eps: T, delta: T, k: usize, n: usize) -> T {
    let kf = T::from_usize_lossy(k);
    let nf = T::from_usize_lossy(n);
    T::lit(200.0) * (kf.powi(4) / eps * (nf * nf / delta).ln()).sqrt()
}

/// Candidates of the `d`-dimensional pipeline in reduced coordinates,
/// together with the subspace that maps them back.
#[derive(Debug, Clone)]
pub struct SphereFamily<T: Scalar> {
    pub space: Arc<Subspace<T>>,
    pub family: CandidateFamily<SubspaceMixture<T>>,
    pub grids: GridSummary,
}

impl<T: Scalar> SphereFamily<T> {
    pub fn mixture(&self, i: usize) -> Result<Mixture<T>> {
        self.family.get(i).to_mixture()
    }

    pub fn mixtures(&self) -> Result<Vec<Mixture<T>>> {
        self.family.as_slice().iter().map(SubspaceMixture::to_mixture).collect()
    }
}

/// Enumerates `Span^k × W × Σ` over the union of the given spans.
///
/// `variance_center` is `σ̂²` unless the config asks for a refined center.
/// Fails with the exact count when it exceeds `max_candidates` (or the hard
/// enumeration ceiling).
pub fn build_sphere_family<T: Scalar>(
    spans: &[SpanBasis<T>],
    variance_center: T,
    dim: usize,
    cfg: &EstimatorConfig<T>,
    n: usize,
) -> Result<SphereFamily<T>> {
    cfg.validate()?;
    let first = spans.first().ok_or(Error::NoQualifyingClusters)?;
    let k = cfg.k;
    let spacing = span_spacing(cfg.eps, k) * cfg.grid_scale;
    let mut extent = span_extent(cfg.eps, cfg.delta, k, n);
    if let Some(cap) = cfg.span_extent {
        extent = extent.min(cap);
    }
    let offsets = offset_grid(spacing, extent);
    let weight_spacing = cfg.weight_spacing(cfg.eps / (T::lit(4.0) * T::from_usize_lossy(k)));
    let weights = weight_tuples(&weight_values(weight_spacing), k);
    let variances = cfg.variance_grid(variance_center, dim);

    let points_per_span: Vec<u128> = spans
        .iter()
        .map(|s| tuple_count(offsets.len(), s.basis.len(), false))
        .collect();
    let span_points = points_per_span.iter().fold(0u128, |a, &b| a.saturating_add(b));
    let span_points_usize = usize::try_from(span_points).unwrap_or(usize::MAX);
    let count = family_count(span_points_usize, k, cfg.dedupe_symmetric, weights.len(), variances.len());
    let grids = GridSummary {
        mean_spacing: spacing.as_f64(),
        extent: offsets.last().map_or(0.0, |g| g.as_f64()),
        span_points: span_points_usize,
        weight_spacing: weight_spacing.as_f64(),
        weight_tuples: weights.len(),
        variances: variances.len(),
        count,
    };
    grid::check_count(count, cfg.max_candidates)?;

    let mut directions = Vec::new();
    for s in spans {
        if s.origin.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: s.origin.len() });
        }
        directions.push(s.origin.iter().zip(&first.origin).map(|(&a, &b)| a - b).collect());
        directions.extend(s.basis.iter().cloned());
    }
    let mut space = Subspace::new(first.origin.clone(), &directions, &variances)?;
    let mut point = vec![T::zero(); dim];
    for s in spans {
        for_each_tuple(offsets.len(), s.basis.len(), false, |g| {
            point.copy_from_slice(&s.origin);
            for (u, &gi) in s.basis.iter().zip(g) {
                let step = offsets[gi] * s.scale;
                point.iter_mut().zip(u).for_each(|(p, &ui)| *p += step * ui);
            }
            space.push_point(&point);
        });
    }
    // atom id = point · |Σ| + variance
    space.push_all_atoms();
    let space = Arc::new(space);
    let nv = variances.len();
    let mut candidates = Vec::with_capacity(count as usize);
    let mut ids = vec![0usize; k];
    for_each_tuple(space.n_points(), k, cfg.dedupe_symmetric, |points| {
        for w in &weights {
            for v in 0..nv {
                ids.iter_mut().zip(points).for_each(|(id, &p)| *id = p * nv + v);
                candidates.push(SubspaceMixture::new(space.clone(), &ids, w));
            }
        }
    });
    let family = CandidateFamily::new::<T>(candidates)?;
    Ok(SphereFamily { space, family, grids })
}

/// [`build_sphere_family`] with every candidate expanded to an ambient
/// [`Mixture`]. Meant for small grids.
pub fn build_candidates<T: Scalar>(
    spans: &[SpanBasis<T>],
    sigma2_hat: T,
    dim: usize,
    cfg: &EstimatorConfig<T>,
    n: usize,
) -> Result<CandidateFamily<Mixture<T>>> {
    let f = build_sphere_family(spans, sigma2_hat, dim, cfg, n)?;
    CandidateFamily::new::<T>(f.mixtures()?)
}

/// Summary of one run, serializable for the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub sigma2_hat: f64,
    pub variance_center: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub qualifying_clusters: usize,
    pub discarded: usize,
    pub span_dim: usize,
    pub grids: GridSummary,
    pub construction_samples: usize,
    pub tournament_samples: usize,
    pub n_candidates: usize,
    pub winner_index: usize,
    pub games: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_estimate: Option<L1Estimate>,
    #[serde(skip)]
    pub splits: Vec<SplitRecord>,
    #[serde(skip)]
    pub tournament: Option<TournamentOutcome>,
}

fn thresholds_f64<T: Scalar>(t: &Thresholds<T>) -> Thresholds<f64> {
    Thresholds {
        sigma2_hat: t.sigma2_hat.as_f64(),
        coarse_merge_threshold: t.coarse_merge_threshold.as_f64(),
        spectral_norm_gate: t.spectral_norm_gate.as_f64(),
        projected_link_threshold: t.projected_link_threshold.as_f64(),
        min_cluster_fraction: t.min_cluster_fraction.as_f64(),
        reserve_fraction: t.reserve_fraction.as_f64(),
    }
}

/// Everything the `d`-dimensional pipeline computes before the tournament.
#[derive(Debug, Clone)]
pub struct SpherePlan<T: Scalar> {
    pub sigma2_hat: T,
    pub variance_center: T,
    pub thresholds: Thresholds<T>,
    pub clustering: Clustering<T>,
    pub spans: Vec<SpanBasis<T>>,
    pub candidates: SphereFamily<T>,
}

/// `(tr Cov − Σ top r eigenvalues) / (d − r)` with `r = min(k − 1, d − 1)`.
pub fn residual_variance<T: Scalar>(data: &Dataset<T>, k: usize, eigen: &EigenOptions) -> Result<T> {
    let stats = ScatterStats::from_rows(&data.samples, &(0..data.n()).collect::<Vec<_>>())?;
    let cov = stats.centered_covariance(T::zero())?;
    let d = data.dim();
    let trace: T = (0..d).map(|i| cov[(i, i)]).sum();
    let r = k.saturating_sub(1).min(d - 1);
    let top: T = if r == 0 { T::zero() } else { top_eigs_algebraic(&cov, r, eigen)?.values.into_iter().sum() };
    Ok((trace - top) / T::from_usize_lossy(d - r))
}

/// Steps 1–4: variance, coarse and spectral clustering, spans and grids.
pub fn plan_k_sphere<T: Scalar>(data: &Dataset<T>, cfg: &EstimatorConfig<T>) -> Result<SpherePlan<T>> {
    cfg.validate()?;
    let (n, d, k) = (data.n(), data.dim(), cfg.k);
    ensure(d >= 2, || format!("the spherical estimator needs d ≥ 2, got {d}"))?;
    if n < k + 1 {
        return Err(Error::InsufficientSamples { needed: k + 1, available: n });
    }
    let sigma2_hat = cluster::estimate_variance(data, k)?;
    let thresholds = Thresholds::new(sigma2_hat, n, d, k, cfg.eps, cfg.delta)?;
    let coarse = cluster::coarse_single_linkage(data, &thresholds)?;
    let params = SpectralParams { thresholds, eigen: cfg.eigen, seed: rng::derive_seed(cfg.seed, "spectral", 0) };
    let clustering = cluster::recursive_spectral_cluster(data, &coarse, &params)?;

    let min_size = thresholds.min_cluster_size(n);
    let mut spans = Vec::new();
    for (id, c) in clustering.clusters.iter().enumerate() {
        if T::from_usize_lossy(c.len()) >= min_size && c.len() >= 2 {
            let eigen = EigenOptions { seed: rng::derive_seed(cfg.seed, "cluster_span", id as u64), ..cfg.eigen };
            let mut span = cluster_span(&c.stats, k, sigma2_hat, &eigen)?;
            span.cluster_id = id;
            spans.push(span);
        }
    }
    if spans.is_empty() {
        return Err(Error::NoQualifyingClusters);
    }
    let variance_center = match cfg.variance_center {
        VarianceCenter::MinPair => sigma2_hat,
        VarianceCenter::ResidualSpectrum => {
            let v = residual_variance(data, k, &cfg.eigen)?;
            if v > T::zero() { v } else { sigma2_hat }
        }
    };
    let candidates = build_sphere_family(&spans, variance_center, d, cfg, n)?;
    Ok(SpherePlan { sigma2_hat, variance_center, thresholds, clustering, spans, candidates })
}

/// Learns a mixture of `k` spherical Gaussians with a shared variance.
///
/// The tournament sees every sample, including those the spectral stage set
/// aside. Deterministic given `(data, cfg)`.
pub fn learn_k_sphere<T: Scalar>(data: &Dataset<T>, cfg: &EstimatorConfig<T>) -> Result<(Mixture<T>, Report)> {
    let plan = plan_k_sphere(data, cfg)?;
    select_k_sphere(data, cfg, &plan)
}

/// Step 5: the tournament over a plan made from the same `data` and `cfg`.
pub fn select_k_sphere<T: Scalar>(
    data: &Dataset<T>,
    cfg: &EstimatorConfig<T>,
    plan: &SpherePlan<T>,
) -> Result<(Mixture<T>, Report)> {
    let view = AtomTable::new(&plan.candidates.space, &data.samples);
    let opts = TournamentOptions { n_mc: cfg.n_mc, seed: rng::derive_seed(cfg.seed, "tournament", 0) };
    let outcome = modified_scheffe(&plan.candidates.family, &view, &opts)?;
    let winner = plan.candidates.mixture(outcome.winner_index)?;
    let report = Report {
        sigma2_hat: plan.sigma2_hat.as_f64(),
        variance_center: plan.variance_center.as_f64(),
        thresholds: Some(thresholds_f64(&plan.thresholds)),
        cluster_sizes: plan.clustering.sizes(),
        qualifying_clusters: plan.spans.len(),
        discarded: plan.clustering.discarded.len(),
        span_dim: plan.candidates.space.width(),
        grids: plan.candidates.grids.clone(),
        construction_samples: data.n(),
        tournament_samples: data.n(),
        n_candidates: plan.candidates.family.len(),
        winner_index: outcome.winner_index,
        games: outcome.games(),
        l1_estimate: None,
        splits: plan.clustering.audit.clone(),
        tournament: Some(outcome),
    };
    Ok((winner, report))
}
