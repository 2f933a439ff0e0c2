//! L1 distance between mixtures: Monte Carlo estimate for any dimension, an
//! adaptive-quadrature reference in one dimension, and the Bhattacharyya
//! upper bound for Gaussian product distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::model::{Component, Density, Mixture};
use crate::quad;
use crate::rng;
use crate::scalar::Scalar;

/// Monte Carlo estimate of `‖f − g‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Estimate {
    /// Clamped to `[0, 2]`.
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
    pub seed: u64,
}

const MC_BATCH: usize = 4096;
pub const MIN_MC_SAMPLES: usize = 1000;

/// Estimates `2 E_{x~f} (1 − g(x)/f(x))₊`, which equals `‖f − g‖₁` since
/// `∫ (f − g)₊ = ∫ (g − f)₊`. The summand lies in `[0, 2]`, so unlike
/// `E_f |1 − g/f|` its variance stays bounded when `g` has mass where `f` has
/// almost none. Batches use their own derived streams and are combined in
/// batch order, so the result does not depend on thread count.
pub fn l1_mc<T, F, G>(f: &F, g: &G, n_mc: usize, seed: u64) -> Result<L1Estimate>
where
    T: Scalar,
    F: Density<T>,
    G: Density<T>,
{
    if f.point_dim() != g.point_dim() {
        return Err(Error::DimensionMismatch { expected: f.point_dim(), found: g.point_dim() });
    }
    ensure(n_mc >= MIN_MC_SAMPLES, || format!("n_mc must be at least {MIN_MC_SAMPLES}, got {n_mc}"))?;
    let dim = f.point_dim();
    let batches = n_mc.div_ceil(MC_BATCH);
    let partial: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let len = MC_BATCH.min(n_mc - b * MC_BATCH);
            let mut rng = rng::stream(seed, "l1_mc", b as u64);
            let mut x = vec![T::zero(); dim];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                f.sample_into(&mut rng, &mut x);
                let ratio = (g.log_density(&x) - f.log_density(&x)).as_f64().exp();
                let v = 2.0 * (1.0 - ratio).max(0.0);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum_sq) = partial.iter().fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));
    let n = n_mc as f64;
    let mean = sum / n;
    // jackknife standard error of a sample mean reduces to s / √n
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(L1Estimate { value: mean.clamp(0.0, 2.0), std_error: (var / n).sqrt(), n_mc, seed })
}

const QUAD_WINDOW: f64 = 12.0;
const QUAD_SEGMENTS: usize = 20_000;

fn breakpoints<T: Scalar>(mixtures: &[&Mixture<T>]) -> Vec<f64> {
    let mut pts = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in mixtures {
        for c in m.components() {
            let mu = c.mean[0].as_f64();
            let sd = c.variance.as_f64().sqrt();
            lo = lo.min(mu - QUAD_WINDOW * sd);
            hi = hi.max(mu + QUAD_WINDOW * sd);
            for j in [-12.0, -8.0, -5.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0] {
                pts.push(mu + j * sd);
            }
        }
    }
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

const ROOT_SCAN: usize = 64;

/// Roots of `h` located by scanning each interval of `breaks` on a uniform
/// sub-grid and bisecting every sign change.
fn sign_changes(h: impl Fn(f64) -> f64, breaks: &[f64]) -> Vec<f64> {
    let mut roots = Vec::new();
    for w in breaks.windows(2) {
        let step = (w[1] - w[0]) / ROOT_SCAN as f64;
        let mut a = w[0];
        let mut ha = h(a);
        for i in 1..=ROOT_SCAN {
            let b = if i == ROOT_SCAN { w[1] } else { w[0] + step * i as f64 };
            let hb = h(b);
            if ha.is_finite() && hb.is_finite() && (ha < 0.0) != (hb < 0.0) {
                let (mut lo, mut hi, neg_lo) = (a, b, ha < 0.0);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if (h(mid) < 0.0) == neg_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            a = b;
            ha = hb;
        }
    }
    roots
}

fn check_1d<T: Scalar>(m: &Mixture<T>) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: m.dim() });
    }
    Ok(())
}

/// `∫ |f − g|` for one-dimensional mixtures by adaptive Gauss–Kronrod over
/// the union of ±12σ windows around every component, split at the points
/// where `f = g`.
pub fn l1_quadrature_1d<T: Scalar>(f: &Mixture<T>, g: &Mixture<T>, abs_tol: f64) -> Result<f64> {
    check_1d(f)?;
    check_1d(g)?;
    let integrand = |x: f64| {
        let p = [T::lit(x)];
        (f.log_density(&p).as_f64().exp() - g.log_density(&p).as_f64().exp()).abs()
    };
    // |f − g| has kinks where f = g; Gauss–Kronrod error estimates are
    // unreliable across them, so they become breakpoints
    let gap = |x: f64| {
        let p = [T::lit(x)];
        (f.log_density(&p) - g.log_density(&p)).as_f64()
    };
    let mut breaks = breakpoints(&[f, g]);
    breaks.extend(sign_changes(gap, &breaks));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let v = quad::integrate(integrand, &breaks, abs_tol, QUAD_SEGMENTS)?;
    Ok(v.clamp(0.0, 2.0))
}

/// `∫ exp(log_pdf)` for a one-dimensional mixture over the same windows.
pub fn total_mass_1d<T: Scalar>(m: &Mixture<T>, abs_tol: f64) -> Result<f64> {
    check_1d(m)?;
    let integrand = |x: f64| m.log_density(&[T::lit(x)]).as_f64().exp();
    quad::integrate(integrand, &breakpoints(&[m]), abs_tol, QUAD_SEGMENTS)
}

/// Bhattacharyya coefficient `∫ √(pq)` of two 1-D Gaussians:
/// `y·e^{−x}` with `x = (μ₁−μ₂)² / 4(σ₁²+σ₂²)` and `y = √(2σ₁σ₂ / (σ₁²+σ₂²))`.
pub fn bhattacharyya_1d<T: Scalar>(p: &Component<T>, q: &Component<T>) -> Result<T> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: p.dim().max(q.dim()) });
    }
    let (v1, v2) = (p.variance, q.variance);
    let dm = p.mean[0] - q.mean[0];
    let x = dm * dm / (T::lit(4.0) * (v1 + v2));
    let y = (T::lit(2.0) * (v1 * v2).sqrt() / (v1 + v2)).sqrt();
    Ok((y * (-x).exp()).min(T::one()))
}

/// `√(8 Σᵢ (1 − B(pᵢ, qᵢ)))`, an upper bound on the L1 distance between the
/// product distributions `∏ pᵢ` and `∏ qᵢ`, clamped to `[0, 2]`.
pub fn l1_upper_bound_product<T: Scalar>(p: &[Component<T>], q: &[Component<T>]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    let mut total = T::zero();
    for (a, b) in p.iter().zip(q) {
        total += T::one() - bhattacharyya_1d(a, b)?;
    }
    Ok((T::lit(8.0) * total.max(T::zero())).sqrt().min(T::lit(2.0)))
}

/// The same bound for two spherical Gaussians in `d` dimensions, which are
/// products of their coordinates.
pub fn l1_upper_bound_spherical<T: Scalar>(p: &Component<T>, q: &Component<T>) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let split = |c: &Component<T>| -> Result<Vec<Component<T>>> {
        c.mean.iter().map(|&m| Component::new(vec![m], c.variance)).collect()
    };
    l1_upper_bound_product(&split(p)?, &split(q)?)
}
