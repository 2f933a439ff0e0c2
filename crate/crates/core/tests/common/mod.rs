//! Independent reference implementations for the integration tests.
#![allow(dead_code)]

use sphmix::{Matrix, Mixture};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and column eigenvectors (as rows of the second result),
/// unsorted.
pub fn jacobi(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

pub fn to_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.to_vec()).collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Union-find over every pair whose distance passes `linked`; groups are
/// sorted internally and ordered by smallest member.
pub fn naive_components(n: usize, linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if linked(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Canonical form of a partition: each group sorted, groups by first member.
pub fn canonical(mut groups: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Mean and `Σ (x − mean)(x − mean)ᵀ` by direct summation.
pub fn naive_scatter(points: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let mut s = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            for j in 0..d {
                s[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    (mean, s)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// `∫|N(μ₁,σ₁²) − N(μ₂,σ₂²)|` from the crossing points of the two densities.
pub fn l1_two_gaussians(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let cdf1 = |x: f64| normal_cdf((x - m1) / s1);
    let cdf2 = |x: f64| normal_cdf((x - m2) / s2);
    // crossings solve a x² + b x + c = 0
    let a = 1.0 / (2.0 * v2) - 1.0 / (2.0 * v1);
    let b = m1 / v1 - m2 / v2;
    let c = m2 * m2 / (2.0 * v2) - m1 * m1 / (2.0 * v1) + (s2 / s1).ln();
    let mut roots = if a.abs() < 1e-14 {
        if b.abs() < 1e-300 { vec![] } else { vec![-c / b] }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            vec![]
        } else {
            let r = disc.sqrt();
            vec![(-b - r) / (2.0 * a), (-b + r) / (2.0 * a)]
        }
    };
    roots.sort_by(f64::total_cmp);
    // integrate f − g piecewise over the regions between crossings
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(roots);
    edges.push(f64::INFINITY);
    let mass = |cdf: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let h = if hi.is_infinite() { 1.0 } else { cdf(hi) };
        let l = if lo.is_infinite() { 0.0 } else { cdf(lo) };
        h - l
    };
    edges.windows(2).map(|w| (mass(&cdf1, w[0], w[1]) - mass(&cdf2, w[0], w[1])).abs()).sum()
}

/// Direct evaluation of `ln Σ wᵢ N(x; μᵢ, σᵢ² I)` without max-subtraction.
pub fn direct_log_pdf(m: &Mixture<f64>, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let mut total = 0.0;
    for (w, c) in m.weights().iter().zip(m.components()) {
        let sq: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        total += w * (-sq / (2.0 * c.variance)).exp() / (2.0 * std::f64::consts::PI * c.variance).powf(d / 2.0);
    }
    total.ln()
}

/// Largest principal angle between the spans of two orthonormal sets.
pub fn max_principal_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    // singular values of AᵀB are the cosines
    let m: Vec<Vec<f64>> = a.iter().map(|u| b.iter().map(|v| dot(u, v)).collect()).collect();
    let r = a.len().min(b.len());
    let gram: Vec<Vec<f64>> = (0..b.len())
        .map(|i| (0..b.len()).map(|j| (0..a.len()).map(|k| m[k][i] * m[k][j]).sum()).collect())
        .collect();
    let (mut vals, _) = jacobi(&gram);
    vals.sort_by(|x, y| y.total_cmp(x));
    let smallest_cos = vals[r - 1].max(0.0).sqrt().min(1.0);
    smallest_cos.acos()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic unit vector from a small LCG, independent of the crate RNG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u = self.next_f64().max(1e-300);
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    pub fn unit(&mut self, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| self.normal()).collect();
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }
}

/// Binomial tail check: `|count − n p| ≤ z √(n p (1 − p))`.
pub fn within_binomial(count: usize, n: usize, p: f64, z: f64) -> bool {
    let mean = n as f64 * p;
    (count as f64 - mean).abs() <= z * (mean * (1.0 - p)).sqrt()
}
