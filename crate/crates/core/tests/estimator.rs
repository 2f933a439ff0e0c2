mod common;

use common::{dot, l1_two_gaussians};
use sphmix::estimator::{
    construction_size, learn_1d, learn_k_sphere, one_dim_candidates, plan_k_sphere, span_extent, span_spacing,
    variance_steps, variance_values, weight_tuples, weight_values, EstimatorConfig,
};
use sphmix::{l1_mc, l1_quadrature_1d, Error, Mixture};

fn pair_4d() -> Mixture<f64> {
    Mixture::from_parts(vec![0.5, 0.5], vec![vec![0.0; 4], vec![8.0, 0.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap()
}

fn coarse_cfg(seed: u64) -> EstimatorConfig<f64> {
    let mut cfg = EstimatorConfig::new(2, 0.3, 0.1, seed);
    cfg.grid_scale = 60.0;
    cfg.weight_grid_scale = Some(2.0);
    cfg.span_extent = Some(3.0);
    cfg.sigma_grid_window = Some(1);
    cfg
}

#[test]
fn family_count_matches_enumeration() {
    let data = pair_4d().sample(2000, 1).unwrap();
    let cfg = coarse_cfg(1);
    let plan = plan_k_sphere(&data, &cfg).unwrap();
    assert_eq!(plan.spans.len(), 1);
    assert_eq!(plan.spans[0].basis.len(), 1);

    let spacing = 0.3 / (16.0 * 2f64.powf(1.5)) * 60.0;
    let extent = span_extent(0.3f64, 0.1, 2, 2000).min(3.0);
    let points = 2 * (extent / spacing).floor() as usize + 1;
    let s = 0.3 / 8.0 * 2.0;
    let mut w: Vec<f64> = (0..).map(|j| j as f64 * s).take_while(|&v| v <= 1.0 + 1e-12).collect();
    if (w.last().unwrap() - 1.0).abs() > 1e-9 {
        w.push(1.0);
    }
    let expected = points * points * w.len() * 3;
    assert_eq!(plan.candidates.grids.span_points, points);
    assert_eq!(plan.candidates.family.len(), expected);
    assert_eq!(plan.candidates.grids.count, expected as u128);
}

#[test]
fn candidates_lie_on_declared_grids() {
    let data = pair_4d().sample(2000, 2).unwrap();
    let cfg = coarse_cfg(2);
    let plan = plan_k_sphere(&data, &cfg).unwrap();
    let span = &plan.spans[0];
    let spacing = span_spacing(0.3, 2) * 60.0;
    let extent = plan.candidates.grids.extent;
    let w = weight_values(plan.candidates.grids.weight_spacing);
    let sigma = variance_values(plan.variance_center, 4, &variance_steps(4, None, Some(1)));
    for m in plan.candidates.mixtures().unwrap() {
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!(w.iter().any(|&v| v == m.weights()[0]));
        for c in m.components() {
            assert!(sigma.contains(&c.variance));
            let off: Vec<f64> = c.mean.iter().zip(&span.origin).map(|(a, b)| a - b).collect();
            let g = dot(&off, &span.basis[0]);
            let resid: f64 = off.iter().zip(&span.basis[0]).map(|(o, u)| (o - g * u).powi(2)).sum::<f64>().sqrt();
            assert!(resid <= 1e-9 * (1.0 + g.abs()));
            let steps = g / span.scale / spacing;
            assert!((steps - steps.round()).abs() < 1e-6);
            assert!((g / span.scale).abs() <= extent + 1e-9);
        }
    }
}

#[test]
fn weight_tuple_membership() {
    let w = weight_values(0.1f64);
    let tuples = weight_tuples(&w, 2);
    let has = |a: f64| tuples.iter().any(|t| (t[0] - a).abs() < 1e-12 && (t[1] - (1.0 - a)).abs() < 1e-12);
    assert!(has(0.6));
    let coarse = weight_tuples(&weight_values(0.25f64), 2);
    assert!(!coarse.iter().any(|t| (t[0] - 0.6).abs() < 1e-12));
}

#[test]
fn overflow_reports_count() {
    let data = pair_4d().sample(500, 3).unwrap();
    let mut cfg = coarse_cfg(3);
    cfg.max_candidates = Some(10);
    match learn_k_sphere(&data, &cfg) {
        Err(Error::CandidateOverflow { count, limit }) => {
            assert_eq!(limit, 10);
            assert!(count > 10);
        }
        other => panic!("expected overflow, got {other:?}"),
    }
    let mut full = EstimatorConfig::new(3, 0.1, 0.1, 0);
    full.max_candidates = Some(1_000_000);
    let three = Mixture::from_parts(
        vec![0.3, 0.3, 0.4],
        vec![vec![0.0; 4], vec![9.0, 0.0, 0.0, 0.0], vec![0.0, 9.0, 0.0, 0.0]],
        vec![1.0; 3],
    )
    .unwrap();
    assert!(matches!(
        learn_k_sphere(&three.sample(500, 1).unwrap(), &full),
        Err(Error::CandidateOverflow { .. })
    ));
}

#[test]
fn single_sphere_recovered() {
    let d = 16;
    let mu: Vec<f64> = (0..d).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
    let truth = Mixture::gaussian(mu.clone(), 1.0).unwrap();
    let mut good = 0;
    for seed in 0..100 {
        let data = truth.sample(2000, 500 + seed).unwrap();
        let cfg = EstimatorConfig::new(1, 0.3, 0.1, seed);
        let (fit, report) = learn_k_sphere(&data, &cfg).unwrap();
        assert_eq!(report.n_candidates, report.grids.variances);
        let c = &fit.components()[0];
        let dist = c.mean.iter().zip(&mu).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let l1 = l1_mc(&truth, &fit, 5000, seed).unwrap().value;
        good += (dist <= 0.2 && (c.variance - 1.0).abs() <= 0.2 && l1 <= 0.2) as usize;
    }
    assert!(good >= 95, "{good}/100");
}

#[test]
fn sphere_fit_is_deterministic() {
    let data = pair_4d().sample(3000, 4).unwrap();
    let cfg = coarse_cfg(4);
    let (a, ra) = learn_k_sphere(&data, &cfg).unwrap();
    let (b, rb) = learn_k_sphere(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(a.k(), 2);
}

#[test]
fn ordered_pair_enumeration() {
    let cfg = EstimatorConfig::new(1, 0.5, 0.1, 0);
    assert_eq!(one_dim_candidates(&[0.0, 1.0], &cfg).unwrap().family.len(), 2);
    assert_eq!(one_dim_candidates(&[0.0, 1.0, 3.0, 7.0], &cfg).unwrap().family.len(), 12);
    // equal samples add nothing new
    assert_eq!(one_dim_candidates(&[0.0, 1.0, 1.0], &cfg).unwrap().family.len(), 2);
    assert!(one_dim_candidates(&[2.0, 2.0, 2.0], &cfg).is_err());
}

#[test]
fn line_single_component() {
    let truth = Mixture::gaussian(vec![3.0], 4.0).unwrap();
    let (eps, delta) = (0.5, 0.1);
    let n = construction_size(1, eps, delta) + 500;
    let mut good = 0;
    for seed in 0..100 {
        let data = truth.sample(n, 700 + seed).unwrap();
        let mut cfg = EstimatorConfig::new(1, eps, delta, seed);
        cfg.construction_points = Some(30);
        let (fit, report) = learn_1d(data.samples.as_slice(), &cfg).unwrap();
        assert_eq!(report.tournament_samples, 500);
        let l1 = l1_quadrature_1d(&truth, &fit, 1e-9).unwrap();
        let c = &fit.components()[0];
        assert!((l1 - l1_two_gaussians(3.0, 4.0, c.mean[0], c.variance)).abs() < 1e-6);
        good += (l1 <= 0.2) as usize;
    }
    assert!(good >= 95, "{good}/100");
}

#[test]
fn line_rejects_short_input() {
    let cfg = EstimatorConfig::new(2, 0.2, 0.1, 0);
    let few = vec![0.5; 100];
    assert!(matches!(learn_1d(&few, &cfg), Err(Error::InsufficientSamples { needed: 5260, .. })));
}
