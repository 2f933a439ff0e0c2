//! Spherical Gaussian mixtures: representation, log-density and sampling.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::scalar::{log_sum_exp, Scalar};

/// Anything the tournament and the distance estimators can evaluate and draw
/// from. Points are slices of length [`Density::point_dim`].
pub trait Density<T: Scalar>: Send + Sync {
    fn point_dim(&self) -> usize;

    /// Natural log of the density at `x`. `x.len()` must equal `point_dim()`.
    fn log_density(&self, x: &[T]) -> T;

    /// Writes one draw into `out`.
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]);

    /// Whether `self` has strictly larger density than `other` at `x`.
    fn exceeds(&self, other: &Self, x: &[T]) -> bool
    where
        Self: Sized,
    {
        self.log_density(x) > other.log_density(x)
    }
}

/// Isotropic Gaussian `N(mean, variance · I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Component<T> {
    pub mean: Vec<T>,
    pub variance: T,
}

impl<T: Scalar> Component<T> {
    pub fn new(mean: Vec<T>, variance: T) -> Result<Self> {
        ensure(variance > T::zero() && variance.is_finite(), || {
            format!("component variance must be positive and finite, got {variance}")
        })?;
        ensure(mean.iter().all(|m| m.is_finite()), || "component mean has non-finite entries".into())?;
        ensure(!mean.is_empty(), || "component mean is empty".into())?;
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[T]) -> T {
        let d = T::from_usize_lossy(self.dim());
        let two_pi = T::lit(2.0) * T::PI();
        let sq = crate::linalg::squared_distance(x, &self.mean);
        -sq / (T::lit(2.0) * self.variance) - d * T::lit(0.5) * (two_pi * self.variance).ln()
    }
}

/// Weighted mixture of spherical Gaussians sharing one dimension.
///
/// Immutable; per-component normalizing constants are cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureWire<T>", into = "MixtureWire<T>", bound = "T: Scalar")]
pub struct Mixture<T: Scalar> {
    weights: Vec<T>,
    components: Vec<Component<T>>,
    dim: usize,
    // ln w_i − (d/2) ln(2π σ_i²)
    log_coef: Vec<T>,
    // 1 / (2σ_i²)
    inv_two_var: Vec<T>,
    // summation order: components sorted by mean (lexicographic)
    order: Vec<usize>,
    // cumulative weights for sampling
    cumulative: Vec<f64>,
}

/// JSON layout: `{"weights":[…],"means":[[…]],"variances":[…]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MixtureWire<T> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub variances: Vec<T>,
}

impl<T: Scalar> TryFrom<MixtureWire<T>> for Mixture<T> {
    type Error = Error;
    fn try_from(w: MixtureWire<T>) -> Result<Self> {
        ensure(w.means.len() == w.weights.len() && w.variances.len() == w.weights.len(), || {
            format!(
                "mixture arrays disagree: {} weights, {} means, {} variances",
                w.weights.len(),
                w.means.len(),
                w.variances.len()
            )
        })?;
        let components = w
            .means
            .into_iter()
            .zip(w.variances)
            .map(|(m, v)| Component::new(m, v))
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(w.weights, components)
    }
}

impl<T: Scalar> From<Mixture<T>> for MixtureWire<T> {
    fn from(m: Mixture<T>) -> Self {
        let (means, variances) = m.components.into_iter().map(|c| (c.mean, c.variance)).unzip();
        Self { weights: m.weights, means, variances }
    }
}

fn compare_components<T: Scalar>(a: &Component<T>, b: &Component<T>) -> Ordering {
    a.mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| x.total_cmp_scalar(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.variance.total_cmp_scalar(&b.variance))
}

impl<T: Scalar> Mixture<T> {
    pub fn new(weights: Vec<T>, components: Vec<Component<T>>) -> Result<Self> {
        ensure(!components.is_empty(), || "mixture needs at least one component".into())?;
        ensure(weights.len() == components.len(), || {
            format!("{} weights for {} components", weights.len(), components.len())
        })?;
        ensure(weights.iter().all(|w| *w >= T::zero() && w.is_finite()), || {
            "mixture weights must be finite and nonnegative".into()
        })?;
        let total: T = weights.iter().copied().sum();
        let slack = T::lit(1e-12).max(T::lit(16.0) * T::eps() * T::from_usize_lossy(weights.len()));
        ensure((total - T::one()).abs() <= slack, || format!("mixture weights sum to {total}, not 1"))?;
        let dim = components[0].dim();
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
        }

        let two_pi = T::lit(2.0) * T::PI();
        let half_d = T::from_usize_lossy(dim) * T::lit(0.5);
        let log_coef = weights
            .iter()
            .zip(&components)
            .map(|(&w, c)| w.ln() - half_d * (two_pi * c.variance).ln())
            .collect();
        let inv_two_var = components.iter().map(|c| T::one() / (T::lit(2.0) * c.variance)).collect();
        let mut order: Vec<usize> = (0..components.len()).collect();
        order.sort_by(|&a, &b| {
            compare_components(&components[a], &components[b])
                .then_with(|| weights[a].total_cmp_scalar(&weights[b]))
        });
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w.as_f64();
                acc
            })
            .collect();
        Ok(Self { weights, components, dim, log_coef, inv_two_var, order, cumulative })
    }

    /// Convenience constructor from parallel arrays.
    pub fn from_parts(weights: Vec<T>, means: Vec<Vec<T>>, variances: Vec<T>) -> Result<Self> {
        MixtureWire { weights, means, variances }.try_into()
    }

    /// Single Gaussian.
    pub fn gaussian(mean: Vec<T>, variance: T) -> Result<Self> {
        Self::new(vec![T::one()], vec![Component::new(mean, variance)?])
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// `ln Σ wᵢ N(x; μᵢ, σᵢ² I)` evaluated with max-subtraction.
    pub fn log_pdf(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.log_pdf_unchecked(x))
    }

    #[inline]
    fn log_pdf_unchecked(&self, x: &[T]) -> T {
        let term = |i: usize| {
            let sq = crate::linalg::squared_distance(x, &self.components[i].mean);
            self.log_coef[i] - sq * self.inv_two_var[i]
        };
        if self.order.len() == 1 {
            return term(0);
        }
        let mut buf = [T::zero(); 8];
        if self.order.len() <= buf.len() {
            for (slot, &i) in buf.iter_mut().zip(&self.order) {
                *slot = term(i);
            }
            log_sum_exp(&buf[..self.order.len()])
        } else {
            let terms: Vec<T> = self.order.iter().map(|&i| term(i)).collect();
            log_sum_exp(&terms)
        }
    }

    /// Draws one component index according to the weights.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| self.weights.iter().rposition(|w| *w > T::zero()).unwrap_or(0))
    }

    /// `n` i.i.d. draws with their component labels. Bit-identical for equal
    /// `(self, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset<T>> {
        ensure(n >= 1, || "sample size must be at least 1".into())?;
        let mut rng = rng::stream(seed, "mixture_sample", 0);
        let mut data = vec![T::zero(); n * self.dim];
        let mut labels = Vec::with_capacity(n);
        for row in data.chunks_exact_mut(self.dim) {
            labels.push(self.draw(&mut rng, row));
        }
        Dataset::new(Matrix::new(n, self.dim, data)?, seed, Some(labels))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) -> usize {
        let i = self.sample_component(rng);
        let c = &self.components[i];
        let sd = c.variance.sqrt();
        for (o, &m) in out.iter_mut().zip(&c.mean) {
            let z: f64 = StandardNormal.sample(rng);
            *o = m + sd * T::lit(z);
        }
        i
    }
}

impl<T: Scalar> Density<T> for Mixture<T> {
    fn point_dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn log_density(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim);
        self.log_pdf_unchecked(x)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        self.draw(rng, out);
    }
}

/// Free-function form of [`Mixture::log_pdf`].
pub fn log_pdf<T: Scalar>(m: &Mixture<T>, x: &[T]) -> Result<T> {
    m.log_pdf(x)
}

/// Free-function form of [`Mixture::sample`].
pub fn sample<T: Scalar>(m: &Mixture<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    m.sample(n, seed)
}

/// `n × d` samples plus how they were drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    pub samples: Matrix<T>,
    /// Generator seed; 0 for external data.
    pub seed: u64,
    /// True component per row, for synthetic data.
    pub labels: Option<Vec<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Matrix<T>, seed: u64, labels: Option<Vec<usize>>) -> Result<Self> {
        ensure(samples.rows() >= 1, || "dataset needs at least one sample".into())?;
        ensure(samples.cols() >= 1, || "dataset needs at least one column".into())?;
        ensure(samples.as_slice().iter().all(|v| v.is_finite()), || {
            "dataset has non-finite entries".into()
        })?;
        if let Some(l) = &labels {
            ensure(l.len() == samples.rows(), || {
                format!("{} labels for {} samples", l.len(), samples.rows())
            })?;
        }
        Ok(Self { samples, seed, labels })
    }

    /// Unlabelled external data.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, 0, None)
    }

    pub fn n(&self) -> usize {
        self.samples.rows()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.samples.row(i)
    }

    /// Checks labels against a component count.
    pub fn check_labels(&self, k: usize) -> Result<()> {
        if let Some(l) = &self.labels {
            ensure(l.iter().all(|&c| c < k), || format!("labels must lie in [0, {k})"))?;
        }
        Ok(())
    }

    /// Rows in the given order; labels follow their rows.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            samples: self.samples.select_rows(indices),
            seed: self.seed,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }
}
