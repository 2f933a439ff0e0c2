mod common;

use common::{l1_two_gaussians, Lcg};
use sphmix::scheffe::{game_budget, modified_scheffe, scheffe_pair, CandidateFamily, TournamentOptions};
use sphmix::Mixture;

fn family(params: &[(f64, f64)]) -> CandidateFamily<Mixture<f64>> {
    CandidateFamily::new::<f64>(params.iter().map(|&(m, v)| Mixture::gaussian(vec![m], v).unwrap()).collect()).unwrap()
}

#[test]
fn pair_prefers_the_source() {
    let p = Mixture::gaussian(vec![0.0, 0.0], 1.0).unwrap();
    let q = Mixture::gaussian(vec![50.0, 0.0], 1.0).unwrap();
    let wins = (0..100)
        .filter(|&s| {
            let data = p.sample(500, 100 + s).unwrap();
            scheffe_pair(&p, &q, &data, 500, s).unwrap().winner == 0
        })
        .count();
    assert!(wins >= 99);
}

#[test]
fn identical_pair_ties_to_first() {
    let p = Mixture::gaussian(vec![1.0], 2.0).unwrap();
    let data = p.sample(200, 1).unwrap();
    let g = scheffe_pair(&p, &p.clone(), &data, 200, 3).unwrap();
    assert_eq!((g.mu_f, g.mu_p, g.mu_q), (0.0, 0.0, 0.0));
    assert_eq!(g.winner, 0);
}

#[test]
fn singleton_family() {
    let f = family(&[(0.0, 1.0)]);
    let data = Mixture::gaussian(vec![0.0], 1.0).unwrap().sample(10, 0).unwrap();
    let out = modified_scheffe(&f, &data.samples, &TournamentOptions::with_seed(0)).unwrap();
    assert_eq!(out.winner_index, 0);
    assert!(out.audit.is_empty());
}

#[test]
fn truth_beats_far_decoys() {
    let n = (200.0 * 10f64.ln()).ceil() as usize;
    let mut hits = 0;
    for seed in 0..100u64 {
        let truth_at = (seed % 10) as usize;
        let params: Vec<(f64, f64)> =
            (0..10).map(|i| if i == truth_at { (0.0, 1.0) } else { (50.0 * (i as f64 + 1.0), 1.0) }).collect();
        let data = Mixture::gaussian(vec![0.0], 1.0).unwrap().sample(n, 1000 + seed).unwrap();
        let out = modified_scheffe(&family(&params), &data.samples, &TournamentOptions::with_seed(seed)).unwrap();
        hits += (out.winner_index == truth_at) as usize;
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn close_to_best_in_family() {
    let mut within_ten = 0;
    for seed in 0..100u64 {
        let mut lcg = Lcg(900 + seed);
        let params: Vec<(f64, f64)> = (0..64).map(|_| (lcg.uniform(-1.0, 1.0), lcg.uniform(0.5, 2.0))).collect();
        let best = params.iter().map(|&(m, v)| l1_two_gaussians(0.0, 1.0, m, v)).fold(f64::INFINITY, f64::min);
        let data = Mixture::gaussian(vec![0.0], 1.0).unwrap().sample(2000, seed).unwrap();
        let out = modified_scheffe(&family(&params), &data.samples, &TournamentOptions::with_seed(seed)).unwrap();
        let (m, v) = params[out.winner_index];
        let chosen = l1_two_gaussians(0.0, 1.0, m, v);
        assert!(chosen <= 1000.0 * 0.1);
        within_ten += (chosen <= 10.0 * (best + 0.05)) as usize;
    }
    assert!(within_ten >= 90, "{within_ten}/100");
}

#[test]
fn game_count_within_budget() {
    let data = Mixture::gaussian(vec![0.0], 1.0).unwrap().sample(40, 2).unwrap();
    let mut lcg = Lcg(77);
    for size in 1..=130usize {
        let params: Vec<(f64, f64)> = (0..size).map(|_| (lcg.uniform(-3.0, 3.0), lcg.uniform(0.2, 3.0))).collect();
        let opts = TournamentOptions { n_mc: Some(20), seed: size as u64 };
        let out = modified_scheffe(&family(&params), &data.samples, &opts).unwrap();
        assert!(out.games() as f64 <= game_budget(size), "size {size}: {} games", out.games());
        assert!(out.winner_index < size);
    }
}

#[test]
fn same_seed_same_audit() {
    let mut lcg = Lcg(5);
    let params: Vec<(f64, f64)> = (0..37).map(|_| (lcg.uniform(-2.0, 2.0), lcg.uniform(0.5, 2.0))).collect();
    let data = Mixture::gaussian(vec![0.3], 1.2).unwrap().sample(300, 8).unwrap();
    let f = family(&params);
    let a = modified_scheffe(&f, &data.samples, &TournamentOptions::with_seed(4)).unwrap();
    let b = modified_scheffe(&f, &data.samples, &TournamentOptions::with_seed(4)).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| modified_scheffe(&f, &data.samples, &TournamentOptions::with_seed(4)).unwrap());
    assert_eq!(a, c);
}
