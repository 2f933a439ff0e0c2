mod common;

use common::{direct_log_pdf, within_binomial, Lcg};
use proptest::prelude::*;
use sphmix::{Mixture, Mixture32};

fn mixture_strategy() -> impl Strategy<Value = (Mixture<f64>, Vec<f64>)> {
    (1usize..5, 1usize..6).prop_flat_map(|(k, d)| {
        (
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(prop::collection::vec(-20.0f64..20.0, d), k),
            prop::collection::vec(0.01f64..25.0, k),
            prop::collection::vec(-30.0f64..30.0, d),
        )
            .prop_map(|(w, means, vars, x)| {
                let total: f64 = w.iter().sum();
                let w = w.into_iter().map(|v| v / total).collect();
                (Mixture::from_parts(w, means, vars).unwrap(), x)
            })
    })
}

proptest! {
    #[test]
    fn log_pdf_matches_direct_sum((m, x) in mixture_strategy()) {
        let ours = m.log_pdf(&x).unwrap();
        let direct = direct_log_pdf(&m, &x);
        prop_assert!((ours - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{ours} vs {direct}");
    }

    #[test]
    fn json_round_trip((m, _) in mixture_strategy()) {
        let text = serde_json::to_string(&m).unwrap();
        let back: Mixture<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn far_tail_stays_finite() {
    let m = Mixture::from_parts(vec![0.5, 0.5], vec![vec![0.0f64], vec![1.0]], vec![1e-4, 1e-4]).unwrap();
    let v = m.log_pdf(&[1e3]).unwrap();
    assert!(v.is_finite());
    // the nearer component dominates by a factor of exp(−10⁹)
    let want = 0.5f64.ln() - 999.0f64.powi(2) / 2e-4 - 0.5 * (2.0 * std::f64::consts::PI * 1e-4).ln();
    assert!((v - want).abs() <= 1e-12 * want.abs());
}

#[test]
fn label_counts_follow_weights() {
    let w = [0.1, 0.25, 0.65];
    let m = Mixture::from_parts(w.to_vec(), vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]], vec![1.0; 3]).unwrap();
    for seed in 0..5 {
        let data = m.sample(20_000, seed).unwrap();
        let labels = data.labels.as_ref().unwrap();
        for (j, &p) in w.iter().enumerate() {
            let c = labels.iter().filter(|&&l| l == j).count();
            assert!(within_binomial(c, 20_000, p, 4.0), "seed {seed} component {j}: {c}");
        }
    }
}

#[test]
fn sample_moments_match_components() {
    let m = Mixture::from_parts(vec![0.5, 0.5], vec![vec![-4.0, 1.0], vec![6.0, 1.0]], vec![0.5, 2.0]).unwrap();
    let data = m.sample(40_000, 3).unwrap();
    let labels = data.labels.as_ref().unwrap();
    for (j, c) in m.components().iter().enumerate() {
        let rows: Vec<&[f64]> = (0..data.n()).filter(|&i| labels[i] == j).map(|i| data.row(i)).collect();
        let n = rows.len() as f64;
        let mean0 = rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let var0 = rows.iter().map(|r| (r[0] - mean0).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean0 - c.mean[0]).abs() < 5.0 * (c.variance / n).sqrt());
        assert!((var0 / c.variance - 1.0).abs() < 0.05);
    }
}

#[test]
fn same_seed_same_samples() {
    let m = Mixture::from_parts(vec![0.3, 0.7], vec![vec![0.0; 4], vec![1.0; 4]], vec![1.0, 2.0]).unwrap();
    assert_eq!(m.sample(500, 9).unwrap(), m.sample(500, 9).unwrap());
    assert_ne!(m.sample(500, 9).unwrap().samples, m.sample(500, 10).unwrap().samples);
}

#[test]
fn single_precision_tracks_double() {
    let mut lcg = Lcg(21);
    for _ in 0..50 {
        let means: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| lcg.uniform(-3.0, 3.0)).collect()).collect();
        let vars: Vec<f64> = (0..3).map(|_| lcg.uniform(0.5, 2.0)).collect();
        let m64 = Mixture::from_parts(vec![0.2, 0.3, 0.5], means.clone(), vars.clone()).unwrap();
        let m32 = Mixture32::from_parts(
            vec![0.2, 0.3, 0.5],
            means.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect(),
            vars.iter().map(|&v| v as f32).collect(),
        )
        .unwrap();
        let x: Vec<f64> = (0..4).map(|_| lcg.uniform(-4.0, 4.0)).collect();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let a = m64.log_pdf(&x).unwrap();
        let b = m32.log_pdf(&x32).unwrap() as f64;
        assert!((a - b).abs() < 1e-4 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn rejects_invalid_mixtures() {
    assert!(Mixture::from_parts(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).is_err());
    assert!(Mixture::from_parts(vec![1.0], vec![vec![0.0]], vec![0.0]).is_err());
    assert!(Mixture::from_parts(vec![0.5, 0.5], vec![vec![0.0], vec![1.0, 2.0]], vec![1.0, 1.0]).is_err());
    assert!(Mixture::gaussian(vec![f64::NAN], 1.0).is_err());
    let m = Mixture::gaussian(vec![0.0, 0.0], 1.0).unwrap();
    assert!(m.log_pdf(&[0.0]).is_err());
}
