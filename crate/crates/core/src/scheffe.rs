//! Hypothesis selection. [`scheffe_pair`] plays one Scheffe game between two
//! candidates; [`modified_scheffe`] runs the halving tournament that needs
//! only `O(|F| log |F|)` games.

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dataset, Density};
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;

/// Finite list of candidate densities over one point space.
#[derive(Debug, Clone)]
pub struct CandidateFamily<H> {
    candidates: Vec<H>,
}

impl<H> CandidateFamily<H> {
    pub fn new<T: Scalar>(candidates: Vec<H>) -> Result<Self>
    where
        H: Density<T>,
    {
        let first = candidates.first().ok_or(Error::Empty("candidate family"))?;
        let dim = first.point_dim();
        if let Some(c) = candidates.iter().find(|c| c.point_dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: c.point_dim() });
        }
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, i: usize) -> &H {
        &self.candidates[i]
    }

    pub fn as_slice(&self) -> &[H] {
        &self.candidates
    }

    pub fn into_vec(self) -> Vec<H> {
        self.candidates
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pair,
    Pairing,
    Pool,
    Final,
}

/// One Scheffe game. `mu_f`, `mu_p`, `mu_q` are the frequencies of the set
/// `{x : p(x) > q(x)}` under the data and under fresh draws from `p` and `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub index_p: usize,
    pub index_q: usize,
    pub mu_f: f64,
    pub mu_p: f64,
    pub mu_q: f64,
    pub winner: usize,
    pub stage: Stage,
    pub round: usize,
}

/// Data side of a Scheffe game: the fraction of samples where `p > q`.
///
/// [`Matrix`] rows work for any candidate type; estimators may supply
/// faster views specialized to their candidates.
pub trait SampleView<T: Scalar, H>: Sync {
    /// Point dimension the candidates must accept.
    fn point_dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// `|{x : p(x) > q(x)}| / len`.
    fn frequency(&self, p: &H, q: &H) -> f64;
}

impl<T: Scalar, H: Density<T>> SampleView<T, H> for Matrix<T> {
    fn point_dim(&self) -> usize {
        self.cols()
    }

    fn len(&self) -> usize {
        self.rows()
    }

    fn frequency(&self, p: &H, q: &H) -> f64 {
        let hits = self.row_iter().filter(|x| p.exceeds(q, x)).count();
        hits as f64 / self.rows() as f64
    }
}

fn draw_frequency<T, H>(source: &H, p: &H, q: &H, n: usize, rng: &mut StreamRng) -> f64
where
    T: Scalar,
    H: Density<T>,
{
    let dim = source.point_dim();
    let mut y = vec![T::zero(); dim];
    let mut hits = 0usize;
    for _ in 0..n {
        source.sample_into(rng, &mut y);
        if p.exceeds(q, &y) {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// Core game. Ties `|μp − μf| = |μq − μf|` go to the lower index.
fn play<T: Scalar, H: Density<T>, D: SampleView<T, H> + ?Sized>(
    family: &[H],
    ip: usize,
    iq: usize,
    data: &D,
    n_mc: usize,
    rng: &mut StreamRng,
) -> (f64, f64, f64, usize) {
    let (p, q) = (&family[ip], &family[iq]);
    let mu_f = data.frequency(p, q);
    let mu_p = draw_frequency(p, p, q, n_mc, rng);
    let mu_q = draw_frequency(q, p, q, n_mc, rng);
    let dp = (mu_p - mu_f).abs();
    let dq = (mu_q - mu_f).abs();
    let winner = if dp < dq {
        ip
    } else if dq < dp {
        iq
    } else {
        ip.min(iq)
    };
    (mu_f, mu_p, mu_q, winner)
}

fn check_data<T: Scalar, H, D: SampleView<T, H> + ?Sized>(dim: usize, data: &D, n_mc: usize) -> Result<()> {
    ensure(!data.is_empty(), || "tournament needs at least one sample".into())?;
    if data.point_dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: data.point_dim() });
    }
    ensure(n_mc >= 1, || "n_mc must be at least 1".into())
}

/// Scheffe game between `p` (index 0) and `q` (index 1) on `data`, with
/// `n_mc` fresh draws from each candidate.
pub fn scheffe_pair<T: Scalar, H: Density<T> + Clone>(
    p: &H,
    q: &H,
    data: &Dataset<T>,
    n_mc: usize,
    seed: u64,
) -> Result<GameRecord> {
    if p.point_dim() != q.point_dim() {
        return Err(Error::DimensionMismatch { expected: p.point_dim(), found: q.point_dim() });
    }
    check_data::<T, H, _>(p.point_dim(), &data.samples, n_mc)?;
    let family = [p.clone(), q.clone()];
    let mut rng = rng::stream(seed, "scheffe_pair", 0);
    let (mu_f, mu_p, mu_q, winner) = play(&family, 0, 1, &data.samples, n_mc, &mut rng);
    Ok(GameRecord { index_p: 0, index_q: 1, mu_f, mu_p, mu_q, winner, stage: Stage::Pair, round: 0 })
}

/// Tournament settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TournamentOptions {
    /// Draws per candidate per game; `None` uses the number of data rows.
    pub n_mc: Option<usize>,
    pub seed: u64,
}

impl TournamentOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { n_mc: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentOutcome {
    pub winner_index: usize,
    /// Distinct candidates that reached the final round-robin.
    pub finalists: Vec<usize>,
    pub audit: Vec<GameRecord>,
}

impl TournamentOutcome {
    pub fn games(&self) -> usize {
        self.audit.len()
    }
}

struct Arena<'a, H, D: ?Sized> {
    family: &'a [H],
    data: &'a D,
    n_mc: usize,
    seed: u64,
    next_game: u64,
    audit: Vec<GameRecord>,
}

impl<H, D: ?Sized> Arena<'_, H, D> {
    /// Plays the given games in parallel; each game owns a stream keyed by
    /// its sequence number so scheduling cannot change results.
    fn play_all<T>(&mut self, pairs: &[(usize, usize)], stage: Stage, round: usize) -> Vec<usize>
    where
        T: Scalar,
        H: Density<T>,
        D: SampleView<T, H>,
    {
        let base = self.next_game;
        self.next_game += pairs.len() as u64;
        let (family, data, n_mc, seed) = (self.family, self.data, self.n_mc, self.seed);
        let records: Vec<GameRecord> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, &(ip, iq))| {
                let mut rng = rng::stream(seed, "scheffe_game", base + i as u64);
                let (mu_f, mu_p, mu_q, winner) = play(family, ip, iq, data, n_mc, &mut rng);
                GameRecord { index_p: ip, index_q: iq, mu_f, mu_p, mu_q, winner, stage, round }
            })
            .collect();
        let winners = records.iter().map(|r| r.winner).collect();
        self.audit.extend(records);
        winners
    }

    /// Every pair in `members` plays once; returns the member with most wins
    /// (ties to the lowest candidate index).
    fn round_robin<T>(&mut self, members: &[usize], stage: Stage, round: usize) -> usize
    where
        T: Scalar,
        H: Density<T>,
        D: SampleView<T, H>,
    {
        let mut pairs = Vec::new();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs.push((i, j));
            }
        }
        let winners = self.play_all::<T>(&pairs, stage, round);
        most_wins(members, &winners)
    }
}

fn most_wins(members: &[usize], winners: &[usize]) -> usize {
    let mut best = (0usize, usize::MAX);
    for &m in members {
        let wins = winners.iter().filter(|&&w| w == m).count();
        if wins > best.0 || (wins == best.0 && m < best.1) {
            best = (wins, m);
        }
    }
    best.1
}

/// Pool size `⌈|F|^{1/3}⌉`: the smallest `c` with `c³ ≥ |F|`.
pub fn pool_size(family_size: usize) -> usize {
    let mut c = (family_size as f64).cbrt().round() as usize;
    while c > 1 && (c - 1).pow(3) >= family_size {
        c -= 1;
    }
    while c.pow(3) < family_size {
        c += 1;
    }
    c.max(1)
}

/// Upper bound on the number of games: `|F| (2 log₂|F| + 1)`.
pub fn game_budget(family_size: usize) -> f64 {
    let f = family_size as f64;
    f * (2.0 * f.log2() + 1.0)
}

/// Halving tournament.
///
/// Each round pairs the survivors at random (an odd survivor gets a bye),
/// keeps the game winners, then draws a pool of `min(|G|, ⌈|F|^{1/3}⌉)`
/// survivors whose round-robin champion joins the finalists. The finalists
/// play a last round-robin. All randomness derives from `opts.seed`.
pub fn modified_scheffe<T: Scalar, H: Density<T>, D: SampleView<T, H> + ?Sized>(
    family: &CandidateFamily<H>,
    data: &D,
    opts: &TournamentOptions,
) -> Result<TournamentOutcome> {
    let members = family.as_slice();
    let n_mc = opts.n_mc.unwrap_or(data.len());
    check_data::<T, H, D>(members[0].point_dim(), data, n_mc)?;
    let pool = pool_size(members.len());

    let mut arena = Arena { family: members, data, n_mc, seed: opts.seed, next_game: 0, audit: Vec::new() };
    let mut survivors: Vec<usize> = (0..members.len()).collect();
    let mut finalists: Vec<usize> = Vec::new();
    let mut round = 0;
    while survivors.len() > 1 {
        let mut rng = rng::stream(opts.seed, "tournament_round", round as u64);
        survivors.shuffle(&mut rng);
        let bye = if survivors.len() % 2 == 1 { survivors.pop() } else { None };
        let pairs: Vec<(usize, usize)> = survivors.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        survivors = arena.play_all::<T>(&pairs, Stage::Pairing, round);
        survivors.extend(bye);

        let take = pool.min(survivors.len());
        let mut sampled: Vec<usize> =
            index::sample(&mut rng, survivors.len(), take).into_iter().map(|i| survivors[i]).collect();
        sampled.sort_unstable();
        let champion = arena.round_robin::<T>(&sampled, Stage::Pool, round);
        if !finalists.contains(&champion) {
            finalists.push(champion);
        }
        round += 1;
    }
    if finalists.is_empty() {
        finalists.push(survivors[0]);
    }
    finalists.sort_unstable();
    let winner_index = arena.round_robin::<T>(&finalists, Stage::Final, round);
    Ok(TournamentOutcome { winner_index, finalists, audit: arena.audit })
}

/// Classic Scheffe: round-robin over the whole family, `O(|F|²)` games.
/// Intended for small families and as a reference for the tournament.
pub fn round_robin_scheffe<T: Scalar, H: Density<T>, D: SampleView<T, H> + ?Sized>(
    family: &CandidateFamily<H>,
    data: &D,
    opts: &TournamentOptions,
) -> Result<TournamentOutcome> {
    let members = family.as_slice();
    let n_mc = opts.n_mc.unwrap_or(data.len());
    check_data::<T, H, D>(members[0].point_dim(), data, n_mc)?;
    let mut arena = Arena { family: members, data, n_mc, seed: opts.seed, next_game: 0, audit: Vec::new() };
    let all: Vec<usize> = (0..members.len()).collect();
    let winner_index = arena.round_robin::<T>(&all, Stage::Final, 0);
    Ok(TournamentOutcome { winner_index, finalists: all, audit: arena.audit })
}

/// Small-δ amplification: repeats the tournament `⌈log₃(1/δ)⌉` times (each
/// run treated as failing with probability at most 1/3) with independent
/// seeds, then runs a round-robin over the distinct winners.
pub fn modified_scheffe_amplified<T: Scalar, H: Density<T>, D: SampleView<T, H> + ?Sized>(
    family: &CandidateFamily<H>,
    data: &D,
    delta: f64,
    opts: &TournamentOptions,
) -> Result<TournamentOutcome> {
    ensure(delta > 0.0 && delta < 1.0, || format!("delta must lie in (0, 1), got {delta}"))?;
    let repeats = ((1.0 / delta).ln() / 3f64.ln()).ceil().max(1.0) as usize;
    let mut audit = Vec::new();
    let mut winners = Vec::new();
    for r in 0..repeats {
        let run_opts = TournamentOptions { seed: rng::derive_seed(opts.seed, "amplified_run", r as u64), ..*opts };
        let out = modified_scheffe(family, data, &run_opts)?;
        if !winners.contains(&out.winner_index) {
            winners.push(out.winner_index);
        }
        audit.extend(out.audit);
    }
    winners.sort_unstable();
    let n_mc = opts.n_mc.unwrap_or(data.len());
    let mut arena = Arena {
        family: family.as_slice(),
        data,
        n_mc,
        seed: rng::derive_seed(opts.seed, "amplified_final", 0),
        next_game: 0,
        audit,
    };
    let winner_index = arena.round_robin::<T>(&winners, Stage::Final, repeats);
    Ok(TournamentOutcome { winner_index, finalists: winners, audit: arena.audit })
}
