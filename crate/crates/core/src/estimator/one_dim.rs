//! One-dimensional estimator: candidates `N(x_j, (x_j − x_l)²)` built from
//! samples, then a tournament on held-out samples.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::linalg::Matrix;
use crate::model::{Component, Mixture};
use crate::rng;
use crate::scalar::Scalar;
use crate::scheffe::{modified_scheffe, CandidateFamily, TournamentOptions};

use super::subspace::{AtomTable, Subspace, SubspaceMixture};
use super::grid::{self, family_count, for_each_tuple, weight_tuples, weight_values, GridSummary};
use super::{EstimatorConfig, Report};

/// `n′ = ⌈120 k ln(4k/δ) / ε⌉` samples reserved for candidate construction.
pub fn construction_size<T: Scalar>(k: usize, eps: T, delta: T) -> usize {
    let kf = T::from_usize_lossy(k);
    (T::lit(120.0) * kf * (T::lit(4.0) * kf / delta).ln() / eps).ceil().to_usize().unwrap_or(usize::MAX)
}

/// Candidate family with the component set `S` it was built from.
#[derive(Debug, Clone)]
pub struct OneDimFamily<T: Scalar> {
    pub components: Vec<Component<T>>,
    pub space: Arc<Subspace<T>>,
    pub family: CandidateFamily<SubspaceMixture<T>>,
    pub grids: GridSummary,
}

impl<T: Scalar> OneDimFamily<T> {
    pub fn mixture(&self, i: usize) -> Result<Mixture<T>> {
        self.family.get(i).to_mixture()
    }

    pub fn mixtures(&self) -> Result<Vec<Mixture<T>>> {
        self.family.as_slice().iter().map(SubspaceMixture::to_mixture).collect()
    }
}

/// `S = {N(x_j, (x_j − x_l)²) : j ≠ l, x_j ≠ x_l}` in `(j, l)` order, with
/// repeated `(mean, variance)` values removed.
pub fn sample_components<T: Scalar>(samples: &[T]) -> Result<Vec<Component<T>>> {
    ensure(samples.len() >= 2, || format!("need at least 2 samples, got {}", samples.len()))?;
    ensure(samples.iter().all(|x| x.is_finite()), || "samples must be finite".into())?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (j, &xj) in samples.iter().enumerate() {
        for (l, &xl) in samples.iter().enumerate() {
            let var = (xj - xl) * (xj - xl);
            if j == l || var <= T::zero() {
                continue;
            }
            if seen.insert((xj.as_f64().to_bits(), var.as_f64().to_bits())) {
                out.push(Component::new(vec![xj], var)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("all samples are identical; no positive variance available".into()));
    }
    Ok(out)
}

fn index_of<T: Scalar>(values: &mut Vec<T>, index: &mut HashMap<u64, usize>, v: T) -> usize {
    *index.entry(v.as_f64().to_bits()).or_insert_with(|| {
        values.push(v);
        values.len() - 1
    })
}

/// `S^k × W` with `W` spaced `ε/2k` (scaled by the config's weight knobs).
pub fn one_dim_candidates<T: Scalar>(samples: &[T], cfg: &EstimatorConfig<T>) -> Result<OneDimFamily<T>> {
    cfg.validate()?;
    let k = cfg.k;
    let components = sample_components(samples)?;
    let spacing = cfg.weight_spacing(cfg.eps / (T::lit(2.0) * T::from_usize_lossy(k)));
    let weights = weight_tuples(&weight_values(spacing), k);
    let count = family_count(components.len(), k, cfg.dedupe_symmetric, weights.len(), 1);
    let grids = GridSummary {
        mean_spacing: 0.0,
        extent: 0.0,
        span_points: components.len(),
        weight_spacing: spacing.as_f64(),
        weight_tuples: weights.len(),
        variances: 0,
        count,
    };
    grid::check_count(count, cfg.max_candidates)?;

    let (mut means, mut mean_index) = (Vec::new(), HashMap::new());
    let (mut vars, mut var_index) = (Vec::new(), HashMap::new());
    let pairs: Vec<(usize, usize)> = components
        .iter()
        .map(|c| (index_of(&mut means, &mut mean_index, c.mean[0]), index_of(&mut vars, &mut var_index, c.variance)))
        .collect();
    let mut space = Subspace::new(vec![T::zero()], &[vec![T::one()]], &vars)?;
    for &m in &means {
        space.push_point(&[m]);
    }
    for &(p, v) in &pairs {
        space.push_atom(p, v);
    }
    let space = Arc::new(space);
    let mut candidates = Vec::with_capacity(count as usize);
    for_each_tuple(components.len(), k, cfg.dedupe_symmetric, |atoms| {
        for w in &weights {
            candidates.push(SubspaceMixture::new(space.clone(), atoms, w));
        }
    });
    let family = CandidateFamily::new::<T>(candidates)?;
    Ok(OneDimFamily { components, space, family, grids })
}

/// The family with the full-resolution grids.
pub fn build_candidates_1d<T: Scalar>(samples: &[T], k: usize, eps: T, delta: T) -> Result<CandidateFamily<Mixture<T>>> {
    let fam = one_dim_candidates(samples, &EstimatorConfig::new(k, eps, delta, 0))?;
    CandidateFamily::new::<T>(fam.mixtures()?)
}

/// Order statistics at levels `(i + ½)/m` of `samples`.
fn quantile_thin<T: Scalar>(samples: &[T], m: usize) -> Vec<T> {
    if m >= samples.len() {
        return samples.to_vec();
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp_scalar(b));
    let n = sorted.len() as f64;
    (0..m).map(|i| sorted[(((i as f64 + 0.5) * n / m as f64) as usize).min(sorted.len() - 1)]).collect()
}

/// Learns a `k`-component Gaussian mixture on the line.
///
/// The first `n′` samples build the candidates (thinned to
/// `construction_points` order statistics when set) and the remaining
/// samples run the tournament.
pub fn learn_1d<T: Scalar>(samples: &[T], cfg: &EstimatorConfig<T>) -> Result<(Mixture<T>, Report)> {
    cfg.validate()?;
    let n_build = construction_size(cfg.k, cfg.eps, cfg.delta);
    if samples.len() <= n_build {
        return Err(Error::InsufficientSamples { needed: n_build + 1, available: samples.len() });
    }
    let (build, held_out) = samples.split_at(n_build);
    let points = match cfg.construction_points {
        Some(m) => quantile_thin(build, m),
        None => build.to_vec(),
    };
    let fam = one_dim_candidates(&points, cfg)?;
    let data = Matrix::new(held_out.len(), 1, held_out.to_vec())?;
    let view = AtomTable::new(&fam.space, &data);
    let opts = TournamentOptions { n_mc: cfg.n_mc, seed: rng::derive_seed(cfg.seed, "tournament", 0) };
    let outcome = modified_scheffe(&fam.family, &view, &opts)?;
    let winner = fam.mixture(outcome.winner_index)?;
    let report = Report {
        sigma2_hat: 0.0,
        variance_center: 0.0,
        thresholds: None,
        cluster_sizes: Vec::new(),
        qualifying_clusters: 0,
        discarded: 0,
        span_dim: 0,
        grids: fam.grids,
        construction_samples: n_build,
        tournament_samples: held_out.len(),
        n_candidates: fam.family.len(),
        winner_index: outcome.winner_index,
        games: outcome.games(),
        l1_estimate: None,
        splits: Vec::new(),
        tournament: Some(outcome),
    };
    Ok((winner, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples_one_component() {
        let f = build_candidates_1d(&[0.0f64, 1.0], 1, 0.5, 0.1).unwrap();
        assert_eq!(f.len(), 2);
        let means: Vec<f64> = f.as_slice().iter().map(|m| m.components()[0].mean[0]).collect();
        assert_eq!(means, vec![0.0, 1.0]);
        assert!(f.as_slice().iter().all(|m| m.components()[0].variance == 1.0));
    }

    #[test]
    fn identical_samples_are_rejected() {
        assert!(build_candidates_1d(&[2.0f64, 2.0, 2.0], 1, 0.5, 0.1).is_err());
        // ties are skipped, the rest remain
        assert_eq!(sample_components(&[2.0f64, 2.0, 3.0]).unwrap().len(), 2);
    }

    #[test]
    fn construction_size_formula() {
        let n = construction_size(2, 0.2f64, 0.1);
        assert_eq!(n, (120.0 * 2.0 * 80f64.ln() / 0.2).ceil() as usize);
    }

    #[test]
    fn thinning_picks_spread_order_statistics() {
        let x: Vec<f64> = (0..100).map(|i| (99 - i) as f64).collect();
        assert_eq!(quantile_thin(&x, 4), vec![12.0, 37.0, 62.0, 87.0]);
        assert_eq!(quantile_thin(&x[..3], 5).len(), 3);
    }
}
