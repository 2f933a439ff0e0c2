//! Sample-size sweeps: fit and evaluate a known mixture over a grid of `n`.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sphmix::{estimator, l1_mc, l1_quadrature_1d, rng, Dataset, EstimatorConfig, Mixture};

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<i32>,
    pub secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub n: usize,
    pub reps: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub wall_secs: f64,
}

pub struct Plan<'a> {
    pub truth: &'a Mixture<f64>,
    pub grid: &'a [usize],
    pub reps: usize,
    pub seed: u64,
    pub cfg: EstimatorConfig<f64>,
    pub mc_samples: usize,
    pub exact: bool,
}

/// Seed shared by the data, the fit and the evaluation of repetition `rep`.
pub fn cell_seed(seed: u64, rep: usize) -> u64 {
    rng::derive_seed(seed, "sweep", rep as u64)
}

/// Samples `n` points from the truth, fits, and measures L1 to the truth,
/// exactly as `gen`, `fit`/`fit1d` and `eval` would with the same seed.
pub fn fit_and_eval(plan: &Plan, n: usize, seed: u64) -> Result<f64, sphmix::Error> {
    let data = plan.truth.sample(n, seed)?;
    let cfg = EstimatorConfig { seed, ..plan.cfg };
    let fit = fit_any(&data, &cfg)?;
    if plan.exact {
        l1_quadrature_1d(plan.truth, &fit, 1e-8)
    } else {
        Ok(l1_mc(plan.truth, &fit, plan.mc_samples, seed)?.value)
    }
}

pub fn fit_any(data: &Dataset<f64>, cfg: &EstimatorConfig<f64>) -> Result<Mixture<f64>, sphmix::Error> {
    if data.dim() == 1 {
        Ok(estimator::learn_1d(data.samples.as_slice(), cfg)?.0)
    } else {
        Ok(estimator::learn_k_sphere(data, cfg)?.0)
    }
}

/// Runs every cell on the current pool; cells come back in grid order.
pub fn run(plan: &Plan) -> (Vec<Row>, Vec<Cell>) {
    let jobs: Vec<(usize, usize)> = plan.grid.iter().flat_map(|&n| (0..plan.reps).map(move |r| (n, r))).collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let seed = cell_seed(plan.seed, rep);
            let start = Instant::now();
            let result = fit_and_eval(plan, n, seed);
            let secs = start.elapsed().as_secs_f64();
            match result {
                Ok(l1) => Cell { n, rep, seed, l1: Some(l1), error: None, code: None, secs },
                Err(e) => Cell { n, rep, seed, l1: None, code: Some(crate::exit_code(&e)), error: Some(e.to_string()), secs },
            }
        })
        .collect();
    let rows = plan
        .grid
        .iter()
        .map(|&n| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.n == n).collect();
            let mut l1: Vec<f64> = mine.iter().filter_map(|c| c.l1).collect();
            l1.sort_by(f64::total_cmp);
            Row {
                n,
                reps: plan.reps,
                failed: mine.len() - l1.len(),
                median: quantile(&l1, 0.5),
                q1: quantile(&l1, 0.25),
                q3: quantile(&l1, 0.75),
                wall_secs: mine.iter().map(|c| c.secs).sum(),
            }
        })
        .collect();
    (rows, cells)
}

// linear interpolation between order statistics
fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[Row]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "reps", "failed", "median_l1", "q1_l1", "q3_l1", "wall_secs", "status"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for r in rows {
        let status = match r.failed {
            0 => "ok",
            f if f == r.reps => "failed",
            _ => "partial",
        };
        w.write_record([
            r.n.to_string(),
            r.reps.to_string(),
            r.failed.to_string(),
            opt(r.median),
            opt(r.q1),
            opt(r.q3),
            format!("{:.3}", r.wall_secs),
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), Some(3.0));
        assert_eq!(quantile(&v, 0.25), Some(2.0));
        assert_eq!(quantile(&[1.0, 2.0], 0.5), Some(1.5));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
