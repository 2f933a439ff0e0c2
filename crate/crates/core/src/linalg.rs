//! Small dense linear algebra: row-major matrices, mean/scatter accumulation
//! and a power-iteration eigensolver for symmetric matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Dense row-major matrix. Also used as the `n × d` sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure(data.len() == rows * cols, || {
            format!("matrix buffer has {} entries, expected {rows}×{cols}", data.len())
        })?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("matrix rows"))?;
        let cols = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, data }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        self.row_iter().map(|r| dot(r, x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Maximum absolute row sum; bounds the spectral radius.
    pub fn inf_norm(&self) -> T {
        self.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Symmetry within `tol` relative to the largest entry.
    pub fn is_symmetric(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.data.iter().fold(T::one(), |m, v| m.max(v.abs()));
        (0..self.rows).all(|i| {
            (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * scale)
        })
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Count, mean and accumulated scatter `Σ (x − mean)(x − mean)ᵀ` of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStats<T> {
    pub count: usize,
    pub mean: Vec<T>,
    pub scatter: Matrix<T>,
}

impl<T: Scalar> ScatterStats<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Two-pass accumulation: exact mean first, then centered outer products.
    pub fn accumulate<P: AsRef<[T]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("points"))?;
        let dim = first.as_ref().len();
        let mut mean = vec![T::zero(); dim];
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let count = points.len();
        let inv = T::one() / T::from_usize_lossy(count);
        mean.iter_mut().for_each(|m| *m *= inv);

        let mut scatter = Matrix::zeros(dim, dim);
        let mut centered = vec![T::zero(); dim];
        for p in points {
            for ((c, &x), &m) in centered.iter_mut().zip(p.as_ref()).zip(&mean) {
                *c = x - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                for j in 0..=i {
                    scatter[(i, j)] += ci * centered[j];
                }
            }
        }
        mirror_lower(&mut scatter);
        Ok(Self { count, mean, scatter })
    }

    /// Stats of selected rows of a sample matrix.
    pub fn from_rows(samples: &Matrix<T>, indices: &[usize]) -> Result<Self> {
        let rows: Vec<&[T]> = indices.iter().map(|&i| samples.row(i)).collect();
        Self::accumulate(&rows)
    }

    /// Combines the stats of two disjoint point sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let na = T::from_usize_lossy(self.count);
        let nb = T::from_usize_lossy(other.count);
        let n = na + nb;
        let delta: Vec<T> = other.mean.iter().zip(&self.mean).map(|(&b, &a)| b - a).collect();
        let mean = self.mean.iter().zip(&delta).map(|(&a, &dl)| a + dl * nb / n).collect();
        let w = na * nb / n;
        let dim = self.dim();
        let mut scatter = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                scatter[(i, j)] =
                    self.scatter[(i, j)] + other.scatter[(i, j)] + w * delta[i] * delta[j];
            }
        }
        Ok(Self { count: self.count + other.count, mean, scatter })
    }

    /// Sample covariance with its diagonal reduced by `sigma2`:
    /// `scatter / count − sigma2 · I`.
    pub fn centered_covariance(&self, sigma2: T) -> Result<Matrix<T>> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples { needed: 2, available: self.count });
        }
        let mut m = self.scatter.clone();
        m.scale(T::one() / T::from_usize_lossy(self.count));
        for i in 0..self.dim() {
            m[(i, i)] -= sigma2;
        }
        Ok(m)
    }
}

fn mirror_lower<T: Scalar>(m: &mut Matrix<T>) {
    for i in 0..m.rows() {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Free-function form of [`ScatterStats::accumulate`].
pub fn accumulate<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> Result<ScatterStats<T>> {
    ScatterStats::accumulate(points)
}

/// Free-function form of [`ScatterStats::centered_covariance`].
pub fn centered_covariance<T: Scalar>(stats: &ScatterStats<T>, sigma2: T) -> Result<Matrix<T>> {
    stats.centered_covariance(sigma2)
}

/// Eigensolver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Residual target `‖Mv − λv‖₂ ≤ tol · max(1, |λ|)`.
    pub tol: f64,
    /// Iteration budget; `None` uses `10·d·ln(d+1) + 500`.
    pub max_iter: Option<usize>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: None, seed: 0 }
    }
}

impl EigenOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn budget(&self, d: usize) -> usize {
        self.max_iter.unwrap_or_else(|| {
            let d = d as f64;
            (10.0 * d * (d + 1.0).ln() + 500.0).ceil() as usize
        })
    }
}

/// Eigenpairs ordered by decreasing `|λ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
struct Extreme<T> {
    value: T,
    vector: Vec<T>,
}

/// Projector `I − QQᵀ` onto the orthogonal complement of `found`.
fn complement_projector<T: Scalar>(d: usize, found: &[Vec<T>]) -> Matrix<T> {
    let mut p = Matrix::identity(d);
    for q in found {
        for i in 0..d {
            for j in 0..d {
                p[(i, j)] -= q[i] * q[j];
            }
        }
    }
    p
}

fn orthonormalize_against<T: Scalar>(v: &mut [T], basis: &[Vec<T>]) -> T {
    // two Gram-Schmidt passes
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, &qi)| *x -= c * qi);
        }
    }
    let n = norm(v);
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest-magnitude entry positive; ties resolved by the lowest index.
fn fix_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn residual<T: Scalar>(a: &Matrix<T>, v: &[T], lambda: T) -> T {
    let av = a.matvec(v);
    av.iter()
        .zip(v)
        .map(|(&x, &y)| {
            let r = x - lambda * y;
            r * r
        })
        .sum::<T>()
        .sqrt()
}

fn random_unit<T: Scalar, R: Rng>(rng: &mut R, d: usize, basis: &[Vec<T>]) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..d)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        if orthonormalize_against(&mut v, basis) > T::lit(1e-6) {
            return v;
        }
    }
}

/// Algebraically largest (`sign = +1`) or smallest (`sign = −1`) eigenpair of
/// `a` restricted to the complement of `found`.
///
/// Power iteration on the shifted operator `sign·a + c·P`, where the shift `c`
/// exceeds the spectral radius so the target end of the spectrum dominates.
/// The operator is repeatedly squared, so each step doubles the power.
fn extreme_pair<T: Scalar>(
    a: &Matrix<T>,
    found: &[Vec<T>],
    projector: &Matrix<T>,
    sign: T,
    tol: T,
    budget: usize,
    start: &[T],
) -> Result<Extreme<T>> {
    let d = a.rows();
    let radius = a.inf_norm();
    if radius == T::zero() {
        return Ok(Extreme { value: T::zero(), vector: start.to_vec() });
    }
    let shift = radius * T::lit(1.01);
    let mut op = a.clone();
    for i in 0..d {
        for j in 0..d {
            op[(i, j)] = sign * a[(i, j)] + shift * projector[(i, j)];
        }
    }
    let f = op.frobenius_norm();
    op.scale(T::one() / f);

    let target = |lambda: T| tol * lambda.abs().max(T::one());
    let mut best: Option<(T, Vec<T>, T)> = None;
    let mut polish = 0;
    for _ in 0..budget {
        let mut v = op.matvec(start);
        if orthonormalize_against(&mut v, found) <= T::lit(1e-300_f64.max(f64::MIN_POSITIVE)) {
            // start vector annihilated; use the heaviest column instead
            let col = (0..d)
                .max_by(|&x, &y| {
                    let nx: T = (0..d).map(|i| op[(i, x)] * op[(i, x)]).sum();
                    let ny: T = (0..d).map(|i| op[(i, y)] * op[(i, y)]).sum();
                    nx.total_cmp_scalar(&ny)
                })
                .unwrap_or(0);
            v = (0..d).map(|i| op[(i, col)]).collect();
            orthonormalize_against(&mut v, found);
        }
        let lambda = dot(&v, &a.matvec(&v));
        let res = residual(a, &v, lambda);
        let improved = best.as_ref().map_or(true, |(_, _, r)| res < *r);
        if improved {
            best = Some((lambda, v, res));
        }
        if let Some((l, _, r)) = &best {
            if *r <= target(*l) {
                // a few extra squarings square the remaining error ratio
                polish += 1;
                if polish > 3 || *r == T::zero() || !improved {
                    break;
                }
            }
        }
        let sq = op.matmul(&op);
        let f = sq.frobenius_norm();
        if f == T::zero() || !f.is_finite() {
            break;
        }
        op = sq;
        op.scale(T::one() / f);
        // keep the iterate exactly symmetric
        mirror_average(&mut op);
    }
    let (value, vector, res) = best.expect("at least one iteration");
    if res <= target(value) {
        Ok(Extreme { value, vector })
    } else {
        Err(Error::NonConvergence {
            iterations: budget,
            residual: res.as_f64(),
            eigenvalue: value.as_f64(),
            best: vector.iter().map(|x| x.as_f64()).collect(),
        })
    }
}

fn mirror_average<T: Scalar>(m: &mut Matrix<T>) {
    let half = T::lit(0.5);
    for i in 0..m.rows() {
        for j in 0..i {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn check_symmetric<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    ensure(m.is_square(), || format!("matrix is {}×{}, not square", m.rows(), m.cols()))?;
    ensure(m.is_symmetric(T::lit(1e-9)), || "matrix is not symmetric".into())?;
    ensure(m.as_slice().iter().all(|v| v.is_finite()), || "matrix has non-finite entries".into())
}

/// Top `r` eigenpairs of a symmetric matrix by decreasing `|λ|`, by power
/// iteration with deflation. Returned vectors are orthonormal and each
/// satisfies `‖Mv − λv‖₂ ≤ tol · max(1, |λ|)`.
pub fn top_eigs<T: Scalar>(m: &Matrix<T>, r: usize, opts: &EigenOptions) -> Result<EigenPairs<T>> {
    check_symmetric(m)?;
    let d = m.rows();
    ensure(r >= 1 && r <= d, || format!("requested {r} eigenpairs of a {d}×{d} matrix"))?;
    let tol = T::lit(opts.tol);
    let budget = opts.budget(d);
    let mut rng = rng::stream(opts.seed, "top_eigs", 0);

    let mut values = Vec::with_capacity(r);
    let mut vectors: Vec<Vec<T>> = Vec::with_capacity(r);
    for _ in 0..r {
        let projector = complement_projector(d, &vectors);
        let deflated = projector.matmul(m).matmul(&projector);
        let start = random_unit(&mut rng, d, &vectors);
        let top = extreme_pair(&deflated, &vectors, &projector, T::one(), tol, budget, &start)?;
        let bottom = extreme_pair(&deflated, &vectors, &projector, -T::one(), tol, budget, &start)?;
        let mut pick = if bottom.value.abs() > top.value.abs() { bottom } else { top };
        orthonormalize_against(&mut pick.vector, &vectors);
        fix_sign(&mut pick.vector);
        // recheck against the undeflated matrix
        let lambda = dot(&pick.vector, &m.matvec(&pick.vector));
        let res = residual(m, &pick.vector, lambda);
        if res > tol * lambda.abs().max(T::one()) {
            return Err(Error::NonConvergence {
                iterations: budget,
                residual: res.as_f64(),
                eigenvalue: lambda.as_f64(),
                best: pick.vector.iter().map(|x| x.as_f64()).collect(),
            });
        }
        values.push(lambda);
        vectors.push(pick.vector);
    }
    Ok(EigenPairs { values, vectors })
}

/// Top `r` eigenpairs by decreasing algebraic value. For covariance-like
/// matrices this is the leading principal subspace even when small negative
/// eigenvalues are present.
pub fn top_eigs_algebraic<T: Scalar>(
    m: &Matrix<T>,
    r: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs<T>> {
    check_symmetric(m)?;
    let d = m.rows();
    ensure(r >= 1 && r <= d, || format!("requested {r} eigenpairs of a {d}×{d} matrix"))?;
    let tol = T::lit(opts.tol);
    let budget = opts.budget(d);
    let mut rng = rng::stream(opts.seed, "top_eigs_algebraic", 0);
    let mut values = Vec::with_capacity(r);
    let mut vectors: Vec<Vec<T>> = Vec::with_capacity(r);
    for _ in 0..r {
        let projector = complement_projector(d, &vectors);
        let deflated = projector.matmul(m).matmul(&projector);
        let start = random_unit(&mut rng, d, &vectors);
        let mut top = extreme_pair(&deflated, &vectors, &projector, T::one(), tol, budget, &start)?;
        orthonormalize_against(&mut top.vector, &vectors);
        fix_sign(&mut top.vector);
        values.push(dot(&top.vector, &m.matvec(&top.vector)));
        vectors.push(top.vector);
    }
    Ok(EigenPairs { values, vectors })
}

/// Spectral norm `max |λ|` of a symmetric matrix: one shifted power iteration
/// per end of the spectrum.
pub fn spectral_norm<T: Scalar>(m: &Matrix<T>, opts: &EigenOptions) -> Result<T> {
    check_symmetric(m)?;
    let d = m.rows();
    if d == 0 {
        return Ok(T::zero());
    }
    let tol = T::lit(opts.tol);
    let budget = opts.budget(d);
    let mut rng = rng::stream(opts.seed, "spectral_norm", 0);
    let start = random_unit(&mut rng, d, &[]);
    let projector = Matrix::identity(d);
    let top = extreme_pair(m, &[], &projector, T::one(), tol, budget, &start)?;
    let bottom = extreme_pair(m, &[], &projector, -T::one(), tol, budget, &start)?;
    Ok(top.value.abs().max(bottom.value.abs()))
}
