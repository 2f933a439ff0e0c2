//! Exact low-dimensional representation of the `d`-dimensional candidates.
//!
//! Every candidate mean lies in an affine subspace `o + span(B)` with `B`
//! orthonormal of width `m`. Writing a point as `c = Bᵀ(x − o)` plus the
//! squared residual `r² = ‖x − o‖² − ‖c‖²`, a spherical Gaussian with mean
//! `o + B cμ` has
//!
//! `ln N(x) = −(‖c − cμ‖² + r²) / 2s² − (d/2) ln(2πs²)`,
//!
//! and a draw from it has `c = cμ + s z` (`z ~ N(0, I_m)`) and
//! `r² = s² χ²_{d−m}`. Tournaments on `(c, r²)` are therefore equivalent in
//! distribution to tournaments in the ambient space, at `O(m)` cost per
//! density evaluation instead of `O(d)`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{Component, Density, Mixture};
use crate::scalar::{log_sum_exp, Scalar};
use crate::scheffe::SampleView;

#[derive(Debug)]
pub struct Subspace<T> {
    ambient_dim: usize,
    origin: Vec<T>,
    basis: Vec<Vec<T>>,
    points: Vec<Vec<T>>,
    variances: Vec<VarianceTerm<T>>,
    /// Components `(point, variance)` that candidates may use.
    atoms: Vec<(u32, u32)>,
    chi: Option<ChiSquared<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct VarianceTerm<T> {
    value: T,
    sd: T,
    inv_two_var: T,
    // −(d/2) ln(2π s²)
    log_norm: T,
}

impl<T: Scalar> Subspace<T> {
    /// Orthonormalizes `directions` (vectors relative to `origin`), dropping
    /// those already spanned up to a relative `1e-10`.
    pub fn new(origin: Vec<T>, directions: &[Vec<T>], variances: &[T]) -> Result<Self> {
        let d = origin.len();
        let mut basis: Vec<Vec<T>> = Vec::new();
        for v in directions {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.len() });
            }
            let scale = dot(v, v).sqrt();
            if scale == T::zero() {
                continue;
            }
            let mut u = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&u, b);
                    u.iter_mut().zip(b).for_each(|(x, &y)| *x -= c * y);
                }
            }
            let len = dot(&u, &u).sqrt();
            if len > T::lit(1e-10) * scale {
                u.iter_mut().for_each(|x| *x /= len);
                basis.push(u);
            }
        }
        let m = basis.len();
        let chi = if d > m { Some(ChiSquared::new((d - m) as f64).expect("positive dof")) } else { None };
        let half_d = T::from_usize_lossy(d) * T::lit(0.5);
        let two_pi = T::lit(2.0) * T::PI();
        let variances = variances
            .iter()
            .map(|&v| VarianceTerm {
                value: v,
                sd: v.sqrt(),
                inv_two_var: T::one() / (T::lit(2.0) * v),
                log_norm: -half_d * (two_pi * v).ln(),
            })
            .collect();
        Ok(Self { ambient_dim: d, origin, basis, points: Vec::new(), variances, atoms: Vec::new(), chi })
    }

    pub fn width(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Adds a mean point (ambient coordinates) to the atom table and returns
    /// its index. The point must lie in the subspace.
    pub fn push_point(&mut self, x: &[T]) -> usize {
        let (c, _) = self.reduce(x);
        self.points.push(c);
        self.points.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_variances(&self) -> usize {
        self.variances.len()
    }

    /// Registers the component `N(point, variance)` and returns its atom id.
    pub fn push_atom(&mut self, point: usize, variance: usize) -> usize {
        assert!(point < self.points.len() && variance < self.variances.len(), "atom out of range");
        self.atoms.push((point as u32, variance as u32));
        self.atoms.len() - 1
    }

    /// Registers every `(point, variance)` pair, point-major.
    pub fn push_all_atoms(&mut self) {
        for p in 0..self.points.len() {
            for v in 0..self.variances.len() {
                self.push_atom(p, v);
            }
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `(point, variance)` indices of an atom.
    pub fn atom(&self, id: usize) -> (usize, usize) {
        let (p, v) = self.atoms[id];
        (p as usize, v as usize)
    }

    #[inline]
    fn atom_log_density(&self, id: u32, c: &[T], r2: T) -> T {
        let (p, v) = self.atoms[id as usize];
        let vt = &self.variances[v as usize];
        let sq = c.iter().zip(&self.points[p as usize]).fold(r2, |acc, (&a, &b)| acc + (a - b) * (a - b));
        vt.log_norm - sq * vt.inv_two_var
    }

    /// `(Bᵀ(x − o), ‖x − o‖² − ‖Bᵀ(x − o)‖²)`, the residual clamped at 0.
    pub fn reduce(&self, x: &[T]) -> (Vec<T>, T) {
        let diff: Vec<T> = x.iter().zip(&self.origin).map(|(&a, &b)| a - b).collect();
        let c: Vec<T> = self.basis.iter().map(|b| dot(b, &diff)).collect();
        let r2 = (dot(&diff, &diff) - dot(&c, &c)).max(T::zero());
        (c, r2)
    }

    /// Rows `[c, r²]` of width `m + 1`.
    pub fn reduce_all(&self, samples: &Matrix<T>) -> Matrix<T> {
        let m = self.width();
        let mut out = Vec::with_capacity(samples.rows() * (m + 1));
        for x in samples.row_iter() {
            let (c, r2) = self.reduce(x);
            out.extend(c);
            out.push(r2);
        }
        Matrix::new(samples.rows(), m + 1, out).expect("consistent shape")
    }

    pub fn expand(&self, c: &[T]) -> Vec<T> {
        let mut x = self.origin.clone();
        for (b, &ci) in self.basis.iter().zip(c) {
            x.iter_mut().zip(b).for_each(|(xi, &bi)| *xi += ci * bi);
        }
        x
    }

    pub fn point(&self, atom: usize) -> &[T] {
        &self.points[atom]
    }

    pub fn variance(&self, index: usize) -> T {
        self.variances[index].value
    }
}

#[derive(Debug, Clone, Copy)]
struct Term<T> {
    atom: u32,
    weight: T,
    log_w: T,
    cumulative: f64,
}

/// Candidate mixture over the reduced coordinates of a [`Subspace`], with
/// components drawn from the subspace's atoms.
#[derive(Debug, Clone)]
pub struct SubspaceMixture<T: Scalar> {
    space: Arc<Subspace<T>>,
    terms: Vec<Term<T>>,
}

impl<T: Scalar> SubspaceMixture<T> {
    pub fn new(space: Arc<Subspace<T>>, atoms: &[usize], weights: &[T]) -> Self {
        assert_eq!(atoms.len(), weights.len(), "one weight per atom");
        let mut acc = 0.0;
        let terms = atoms
            .iter()
            .zip(weights)
            .map(|(&a, &w)| {
                assert!(a < space.n_atoms(), "atom out of range");
                acc += w.as_f64();
                Term { atom: a as u32, weight: w, log_w: w.ln(), cumulative: acc }
            })
            .collect();
        Self { space, terms }
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|t| t.atom as usize)
    }

    pub fn weights(&self) -> Vec<T> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    pub fn space(&self) -> &Subspace<T> {
        &self.space
    }

    /// The same mixture in ambient coordinates.
    pub fn to_mixture(&self) -> Result<Mixture<T>> {
        let components = self
            .terms
            .iter()
            .map(|t| {
                let (p, v) = self.space.atom(t.atom as usize);
                Component::new(self.space.expand(self.space.point(p)), self.space.variance(v))
            })
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(self.weights(), components)
    }
}

impl<T: Scalar> Density<T> for SubspaceMixture<T> {
    fn point_dim(&self) -> usize {
        self.space.width() + 1
    }

    #[inline]
    fn log_density(&self, x: &[T]) -> T {
        let m = self.space.width();
        let (c, r2) = (&x[..m], x[m]);
        let term = |t: &Term<T>| t.log_w + self.space.atom_log_density(t.atom, c, r2);
        if self.terms.len() == 1 {
            return term(&self.terms[0]);
        }
        let mut buf = [T::zero(); 8];
        if self.terms.len() <= buf.len() {
            for (slot, t) in buf.iter_mut().zip(&self.terms) {
                *slot = term(t);
            }
            log_sum_exp(&buf[..self.terms.len()])
        } else {
            log_sum_exp(&self.terms.iter().map(term).collect::<Vec<_>>())
        }
    }

    /// Compares `Σ wᵢ e^{lᵢ − M}` sums under a shared maximum `M`, which
    /// avoids the logarithms of two log-density calls.
    fn exceeds(&self, other: &Self, x: &[T]) -> bool {
        const CAP: usize = 8;
        let (np, nq) = (self.terms.len(), other.terms.len());
        if np > CAP || nq > CAP || !Arc::ptr_eq(&self.space, &other.space) {
            return self.log_density(x) > other.log_density(x);
        }
        let m = self.space.width();
        let (c, r2) = (&x[..m], x[m]);
        let mut lp = [T::zero(); CAP];
        let mut lq = [T::zero(); CAP];
        let mut max = T::neg_infinity();
        for (slot, t) in lp.iter_mut().zip(&self.terms) {
            *slot = t.log_w + self.space.atom_log_density(t.atom, c, r2);
            max = max.max(*slot);
        }
        for (slot, t) in lq.iter_mut().zip(&other.terms) {
            *slot = t.log_w + self.space.atom_log_density(t.atom, c, r2);
            max = max.max(*slot);
        }
        if !max.is_finite() {
            return self.log_density(x) > other.log_density(x);
        }
        let sum = |v: &[T]| v.iter().fold(T::zero(), |acc, &l| acc + (l - max).exp());
        sum(&lp[..np]) > sum(&lq[..nq])
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        let total = self.terms.last().expect("nonempty").cumulative;
        let u = rng.gen::<f64>() * total;
        let term = self
            .terms
            .iter()
            .find(|t| u < t.cumulative)
            .or_else(|| self.terms.iter().rev().find(|t| t.log_w > T::neg_infinity()))
            .expect("positive weight");
        let (p, v) = self.space.atom(term.atom as usize);
        let v = self.space.variances[v];
        let m = self.space.width();
        for (o, &p) in out[..m].iter_mut().zip(self.space.point(p)) {
            let z: f64 = StandardNormal.sample(rng);
            *o = p + v.sd * T::lit(z);
        }
        out[m] = match &self.space.chi {
            Some(chi) => v.value * T::lit(chi.sample(rng)),
            None => T::zero(),
        };
    }
}

/// Table entries above this many values fall back to direct evaluation.
pub const TABLE_LIMIT: usize = 1 << 25;

/// Reduced samples with every atom density precomputed.
///
/// Entry `(atom, j)` holds `exp(ln N_atom(x_j) − M_j)` where `M_j` is the
/// largest atom log-density at sample `j`, so a candidate's density at `x_j`
/// is `e^{M_j} Σ wᵢ entry(atomᵢ, j)` and comparing two candidates needs only
/// their weighted sums. Samples where both sums fall below `√min_positive`
/// are compared in log space instead.
#[derive(Debug, Clone)]
pub struct AtomTable<T: Scalar> {
    space: Arc<Subspace<T>>,
    reduced: Matrix<T>,
    table: Option<Vec<T>>,
}

impl<T: Scalar> AtomTable<T> {
    pub fn new(space: &Arc<Subspace<T>>, samples: &Matrix<T>) -> Self {
        let reduced = space.reduce_all(samples);
        let n = reduced.rows();
        let n_atoms = space.n_atoms();
        let table = (n_atoms.checked_mul(n).is_some_and(|s| s <= TABLE_LIMIT)).then(|| {
            let m = space.width();
            let mut t = vec![T::zero(); n_atoms * n];
            let mut logs = vec![T::zero(); n_atoms];
            for (j, x) in reduced.row_iter().enumerate() {
                let (c, r2) = (&x[..m], x[m]);
                for (a, slot) in logs.iter_mut().enumerate() {
                    *slot = space.atom_log_density(a as u32, c, r2);
                }
                let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
                for (a, &l) in logs.iter().enumerate() {
                    t[a * n + j] = (l - max).exp();
                }
            }
            t
        });
        Self { space: space.clone(), reduced, table }
    }

    pub fn reduced(&self) -> &Matrix<T> {
        &self.reduced
    }

    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }
}

impl<T: Scalar> SampleView<T, SubspaceMixture<T>> for AtomTable<T> {
    fn point_dim(&self) -> usize {
        self.reduced.cols()
    }

    fn len(&self) -> usize {
        self.reduced.rows()
    }

    fn frequency(&self, p: &SubspaceMixture<T>, q: &SubspaceMixture<T>) -> f64 {
        let shared = Arc::ptr_eq(&self.space, &p.space) && Arc::ptr_eq(&self.space, &q.space);
        let (Some(table), true) = (&self.table, shared) else {
            return SampleView::<T, SubspaceMixture<T>>::frequency(&self.reduced, p, q);
        };
        let n = self.reduced.rows();
        let rows = |c: &SubspaceMixture<T>| -> Vec<(T, usize)> {
            c.terms.iter().filter(|t| t.weight > T::zero()).map(|t| (t.weight, t.atom as usize * n)).collect()
        };
        let (rp, rq) = (rows(p), rows(q));
        let tiny = T::min_positive_value().sqrt();
        let mut hits = 0usize;
        for j in 0..n {
            let sp = rp.iter().fold(T::zero(), |acc, &(w, off)| acc + w * table[off + j]);
            let sq = rq.iter().fold(T::zero(), |acc, &(w, off)| acc + w * table[off + j]);
            let wins = if sp < tiny && sq < tiny {
                p.exceeds(q, self.reduced.row(j))
            } else {
                sp > sq
            };
            hits += wins as usize;
        }
        hits as f64 / n as f64
    }
}
