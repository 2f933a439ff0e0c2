mod common;

use common::{canonical, naive_components};
use proptest::prelude::*;
use sphmix::cluster::{self, threshold_components, Thresholds};
use sphmix::linalg::squared_distance;
use sphmix::{Dataset, Matrix, Mixture};

proptest! {
    #[test]
    fn linkage_matches_naive_components(
        d in 1usize..4,
        raw in prop::collection::vec(-10i32..10, 1..150),
        threshold in 0.0f64..30.0,
    ) {
        // integer coordinates make distances exactly representable, ties included
        let rows: Vec<Vec<f64>> = raw.chunks(d).filter(|c| c.len() == d).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        prop_assume!(!rows.is_empty());
        let m = Matrix::from_rows(&rows).unwrap();
        let ours = canonical(threshold_components(&m, threshold.round()));
        let naive = naive_components(rows.len(), |i, j| squared_distance(&rows[i], &rows[j]) <= threshold.round());
        prop_assert_eq!(ours, naive);
    }

    #[test]
    fn linkage_1d_matches_naive(values in prop::collection::vec(-100.0f64..100.0, 1..120), link in 0.0f64..10.0) {
        let ours = canonical(cluster::single_linkage_1d(&values, link).unwrap());
        let naive = naive_components(values.len(), |i, j| (values[i] - values[j]).abs() <= link);
        prop_assert_eq!(ours, naive);
    }
}

#[test]
fn variance_estimate_examples() {
    let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0], vec![50.0, 50.0]]).unwrap();
    // min over the first k+1 = 3 rows of ‖Δ‖²/(2d) = 4/4
    assert_eq!(cluster::estimate_variance(&data, 2).unwrap(), 1.0);
    assert!(cluster::estimate_variance(&data, 4).is_err());
}

#[test]
fn thresholds_follow_formulas() {
    let (n, d, k, eps, delta) = (1000usize, 50usize, 3usize, 0.2f64, 0.05f64);
    let t = Thresholds::new(2.0, n, d, k, eps, delta).unwrap();
    let nf = n as f64;
    let coarse = 2.0 * 50.0 * 2.0 + 23.0 * 2.0 * (50.0 * (nf * nf / delta).ln()).sqrt();
    assert!((t.coarse_merge_threshold - coarse).abs() < 1e-9 * coarse);
    let gate = 12.0 * 9.0 * 2.0 * (nf.powi(3) / delta).ln();
    assert!((t.spectral_norm_gate - gate).abs() < 1e-9 * gate);
    let link = 3.0 * 2.0f64.sqrt() * (nf * nf * 3.0 / delta).ln().sqrt();
    assert!((t.projected_link_threshold - link).abs() < 1e-9 * link);
    assert!((t.min_cluster_size(n) - nf * eps / 15.0).abs() < 1e-9);
    assert_eq!(t.reserve_size(n), (nf * eps / 72.0).ceil() as usize);
}

#[test]
fn separated_components_stay_whole() {
    let d = 20;
    let mut far = vec![0.0; d];
    far[3] = 200.0;
    let m = Mixture::from_parts(vec![0.5, 0.5], vec![vec![0.0; d], far], vec![1.0, 1.0]).unwrap();
    let data = m.sample(400, 4).unwrap();
    let labels = data.labels.clone().unwrap();
    let s2 = cluster::estimate_variance(&data, 2).unwrap();
    let t = Thresholds::new(s2, 400, d, 2, 0.3, 0.1).unwrap();
    let c = cluster::coarse_single_linkage(&data, &t).unwrap();
    c.check_partition().unwrap();
    assert_eq!(c.len(), 2);
    for cl in &c.clusters {
        assert!(cl.members.iter().all(|&i| labels[i] == labels[cl.members[0]]));
    }
}

#[test]
fn from_groups_validates_partition() {
    let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    assert!(cluster::Clustering::from_groups(&data, vec![vec![0, 1], vec![2]]).is_ok());
    assert!(cluster::Clustering::from_groups(&data, vec![vec![0, 1], vec![1, 2]]).is_err());
    assert!(cluster::Clustering::from_groups(&data, vec![vec![0, 5]]).is_err());
}
