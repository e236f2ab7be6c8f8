use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::screen::MomentScreen;
use super::simulator::SummarySource;
use crate::error::{Error, Result};
use crate::models::PriorRegion;
use crate::seed::{derive_seed, rng_from_seed};
use crate::summaries::{DistanceSpec, SummaryVector};

/// Proposals are generated in chunks of this size; chunk `c` draws from the stream
/// seeded with `mix(seed, c)`, so any prefix of a run is itself a valid run.
pub const CHUNK_SIZE: u64 = 2048;

/// Everything an ABC sampler needs besides the tolerance and the proposal budget.
#[derive(Clone, Copy)]
pub struct AbcProblem<'a> {
    pub observed: &'a SummaryVector,
    pub prior: &'a PriorRegion,
    pub source: &'a dyn SummarySource,
    pub distance: &'a DistanceSpec,
    pub screen: Option<&'a MomentScreen>,
}

impl<'a> AbcProblem<'a> {
    pub fn new(
        observed: &'a SummaryVector,
        prior: &'a PriorRegion,
        source: &'a dyn SummarySource,
        distance: &'a DistanceSpec,
    ) -> Self {
        AbcProblem { observed, prior, source, distance, screen: None }
    }

    pub fn with_screen(mut self, screen: &'a MomentScreen) -> Self {
        self.screen = Some(screen);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.observed.values.len() != self.source.summary_dim()
            || self.observed.summary_id != self.source.summary_id()
        {
            return Err(Error::Shape(format!(
                "observed summary {} ({}) does not match simulator summary {} ({})",
                self.observed.summary_id,
                self.observed.values.len(),
                self.source.summary_id(),
                self.source.summary_dim()
            )));
        }
        if self.prior.dim() != self.source.param_dim() {
            return Err(Error::Shape(format!(
                "prior has dimension {}, simulator expects {}",
                self.prior.dim(),
                self.source.param_dim()
            )));
        }
        self.prior.validate()?;
        self.distance.validate(self.observed.values.len())
    }
}

/// One proposal `(θ, η(z))` and its distance to the observed summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// Position of the proposal in the stream.
    pub index: u64,
    pub theta: Vec<f64>,
    /// Empty when the proposal was screened out before simulation.
    pub summary: Vec<f64>,
    pub dist: f64,
    pub accepted: bool,
}

/// Retained draws and the bookkeeping of the run that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    /// Accepted particles in proposal order.
    pub particles: Vec<Particle>,
    /// Largest accepted distance.
    pub realized_epsilon: f64,
    /// `particles.len() / n_proposals`.
    pub acceptance_rate: f64,
    pub n_proposals: u64,
    /// Proposals that were actually simulated (the rest were screened out).
    pub n_simulated: u64,
    pub schedule_desc: String,
}

impl PosteriorSample {
    fn from_particles(mut particles: Vec<Particle>, n_proposals: u64, n_simulated: u64, schedule_desc: String) -> Self {
        particles.sort_by_key(|p| p.index);
        for p in &mut particles {
            p.accepted = true;
        }
        let realized_epsilon = particles.iter().map(|p| p.dist).fold(0.0, f64::max);
        PosteriorSample {
            acceptance_rate: particles.len() as f64 / n_proposals as f64,
            particles,
            realized_epsilon,
            n_proposals,
            n_simulated,
            schedule_desc,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.len())
    }

    pub fn draws(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.theta.clone()).collect()
    }

    /// Component `j` of every retained draw.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p.theta[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim()).map(|j| self.particles.iter().map(|p| p.theta[j]).sum::<f64>() / n).collect()
    }
}

/// Result of a sampler call. Zero acceptances are reported, not hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum AbcOutcome {
    Accepted(PosteriorSample),
    Empty { n_proposals: u64, n_simulated: u64, min_distance: f64, schedule_desc: String },
}

impl AbcOutcome {
    pub fn sample(&self) -> Option<&PosteriorSample> {
        match self {
            AbcOutcome::Accepted(s) => Some(s),
            AbcOutcome::Empty { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, AbcOutcome::Empty { .. })
    }

    pub fn into_result(self) -> Result<PosteriorSample> {
        match self {
            AbcOutcome::Accepted(s) => Ok(s),
            AbcOutcome::Empty { n_proposals, min_distance, .. } => {
                Err(Error::EmptySample { n_proposals, min_distance })
            }
        }
    }

    fn build(particles: Vec<Particle>, n_proposals: u64, n_simulated: u64, min_distance: f64, desc: String) -> Self {
        if particles.is_empty() {
            AbcOutcome::Empty { n_proposals, n_simulated, min_distance, schedule_desc: desc }
        } else {
            AbcOutcome::Accepted(PosteriorSample::from_particles(particles, n_proposals, n_simulated, desc))
        }
    }
}

fn n_chunks(n: u64) -> u64 {
    n.div_ceil(CHUNK_SIZE)
}

/// Runs proposals `[c * CHUNK_SIZE, min((c + 1) * CHUNK_SIZE, end))` of the stream and calls
/// `visit(index, θ, η(z), distance)` for each. Returns the number of simulated proposals.
fn visit_chunk<F>(problem: &AbcProblem<'_>, seed: u64, chunk: u64, end: u64, mut visit: F) -> u64
where
    F: FnMut(u64, &[f64], &[f64], f64),
{
    let start = chunk * CHUNK_SIZE;
    let stop = (start + CHUNK_SIZE).min(end);
    let mut rng = rng_from_seed(derive_seed(seed, &[chunk]));
    let mut theta = vec![0.0; problem.prior.dim()];
    let mut summary = vec![0.0; problem.source.summary_dim()];
    let mut scratch = Vec::new();
    let mut simulated = 0;
    for index in start..stop {
        problem.prior.sample_into(&mut rng, &mut theta);
        let admitted = problem.screen.is_none_or(|s| s.admits(problem.source, &theta));
        let dist = if admitted {
            simulated += 1;
            problem.source.draw_summary(&theta, &mut rng, &mut scratch, &mut summary);
            problem.distance.eval(&summary, &problem.observed.values)
        } else {
            f64::INFINITY
        };
        visit(index, &theta, if admitted { &summary } else { &[] }, dist);
    }
    simulated
}

fn particle(index: u64, theta: &[f64], summary: &[f64], dist: f64, accepted: bool) -> Particle {
    Particle { index, theta: theta.to_vec(), summary: summary.to_vec(), dist, accepted }
}

/// Rejection ABC: draws `n` pairs `(θ, z)` from `π(θ) p(z | θ)` and keeps those whose
/// summary lies within `epsilon` of the observed one.
pub fn abc_reject(problem: &AbcProblem<'_>, epsilon: f64, n: u64, seed: u64) -> Result<AbcOutcome> {
    let mut out = abc_reject_many(problem, &[epsilon], n, seed)?;
    Ok(out.remove(0))
}

/// Rejection ABC at several tolerances over one stream of `n` proposals; result `j` equals
/// `abc_reject(problem, epsilons[j], n, seed)`.
pub fn abc_reject_many(problem: &AbcProblem<'_>, epsilons: &[f64], n: u64, seed: u64) -> Result<Vec<AbcOutcome>> {
    problem.validate()?;
    if let Some(e) = epsilons.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Config(format!("tolerance must be nonnegative, got {e}")));
    }
    if n == 0 {
        return Err(Error::Config("at least one proposal is required".into()));
    }
    let m = epsilons.len();
    let per_chunk: Vec<(Vec<Vec<Particle>>, u64, f64)> = (0..n_chunks(n))
        .into_par_iter()
        .map(|c| {
            let mut kept = vec![Vec::new(); m];
            let mut min_d = f64::INFINITY;
            let sims = visit_chunk(problem, seed, c, n, |i, th, s, d| {
                min_d = min_d.min(d);
                for (j, &eps) in epsilons.iter().enumerate() {
                    if d <= eps {
                        kept[j].push(particle(i, th, s, d, true));
                    }
                }
            });
            (kept, sims, min_d)
        })
        .collect();
    let sims = per_chunk.iter().map(|c| c.1).sum();
    let min_d = per_chunk.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let mut kept: Vec<Vec<Particle>> = vec![Vec::new(); m];
    for (chunk, _, _) in per_chunk {
        for (j, ps) in chunk.into_iter().enumerate() {
            kept[j].extend(ps);
        }
    }
    Ok(kept
        .into_iter()
        .zip(epsilons)
        .map(|(ps, eps)| AbcOutcome::build(ps, n, sims, min_d, format!("fixed-eps({eps})")))
        .collect())
}

/// Max-heap entry ordered by `(dist, index)`.
struct Ranked(Particle);

impl Ranked {
    fn key(&self) -> (f64, u64) {
        (self.0.dist, self.0.index)
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    }
}

fn rank_cmp(a: &Particle, b: &Particle) -> Ordering {
    a.dist.total_cmp(&b.dist).then(a.index.cmp(&b.index))
}

/// Keeps the `k` smallest proposals by `(dist, index)`.
struct TopK {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    #[inline]
    fn offer(&mut self, index: u64, theta: &[f64], summary: &[f64], dist: f64) {
        if self.heap.len() == self.k {
            let worst = self.heap.peek().expect("k >= 1").key();
            if dist.total_cmp(&worst.0).then(index.cmp(&worst.1)) != Ordering::Less {
                return;
            }
            self.heap.pop();
        }
        self.heap.push(Ranked(particle(index, theta, summary, dist, true)));
    }

    fn into_sorted(self) -> Vec<Particle> {
        let mut v: Vec<Particle> = self.heap.into_iter().map(|r| r.0).collect();
        v.sort_by(rank_cmp);
        v
    }
}

fn merge_topk(a: Vec<Particle>, b: Vec<Particle>, k: usize) -> Vec<Particle> {
    let mut out = Vec::with_capacity(k.min(a.len() + b.len()));
    let (mut ia, mut ib) = (a.into_iter().peekable(), b.into_iter().peekable());
    while out.len() < k {
        let take_a = match (ia.peek(), ib.peek()) {
            (Some(x), Some(y)) => rank_cmp(x, y) != Ordering::Greater,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        out.push(if take_a { ia.next() } else { ib.next() }.expect("peeked"));
    }
    out
}

/// Number of draws `⌈αN⌉` retained by the nearest-neighbour sampler.
pub fn retained_count(alpha: f64, n: u64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("quantile alpha must lie in (0, 1], got {alpha}")));
    }
    let an = alpha * n as f64;
    if an < 1.0 - 1e-9 {
        return Err(Error::Config(format!("alpha * N = {an} is below one draw")));
    }
    // Guard against α·N landing a rounding error above an integer.
    Ok((an - 1e-9).ceil().max(1.0) as usize)
}

/// Nearest-neighbour ABC: keeps the `⌈αN⌉` proposals with the smallest distances,
/// breaking ties by proposal index.
pub fn abc_knn(problem: &AbcProblem<'_>, alpha: f64, n: u64, seed: u64) -> Result<AbcOutcome> {
    let k = retained_count(alpha, n)?;
    let mut runs = abc_knn_prefixes(problem, &[(k, n)], seed)?;
    Ok(runs.remove(0))
}

/// Several nearest-neighbour runs `(K_j, N_j)` that share one proposal stream: run `j` keeps
/// the `K_j` closest of the first `N_j` proposals, so with `K_j = ⌈α_j N_j⌉` each result
/// equals `abc_knn(problem, α_j, N_j, seed)`.
pub fn abc_knn_prefixes(problem: &AbcProblem<'_>, runs: &[(usize, u64)], seed: u64) -> Result<Vec<AbcOutcome>> {
    problem.validate()?;
    if let Some(r) = runs.iter().find(|r| r.0 == 0 || r.0 as u64 > r.1) {
        return Err(Error::Config(format!("cannot retain {} of {} proposals", r.0, r.1)));
    }
    let ks: Vec<usize> = runs.iter().map(|r| r.0).collect();
    let n_max = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let per_chunk = |c: u64| {
        let mut tops: Vec<TopK> = ks.iter().map(|&k| TopK::new(k)).collect();
        let mut sims_below: Vec<u64> = vec![0; runs.len()];
        let sims = visit_chunk(problem, seed, c, n_max, |i, th, s, d| {
            for (j, top) in tops.iter_mut().enumerate() {
                if i < runs[j].1 {
                    if d.is_finite() {
                        sims_below[j] += 1;
                    }
                    top.offer(i, th, s, d);
                }
            }
        });
        let _ = sims;
        (tops.into_iter().map(TopK::into_sorted).collect::<Vec<_>>(), sims_below)
    };
    let empty = || (vec![Vec::new(); runs.len()], vec![0u64; runs.len()]);
    let (tops, sims) = (0..n_chunks(n_max)).into_par_iter().map(per_chunk).reduce(empty, |(a, sa), (b, sb)| {
        let merged = a.into_iter().zip(b).zip(&ks).map(|((x, y), &k)| merge_topk(x, y, k)).collect();
        let sims = sa.iter().zip(&sb).map(|(x, y)| x + y).collect();
        (merged, sims)
    });
    tops.into_iter()
        .zip(runs)
        .zip(sims)
        .map(|((top, &(k, n)), sims)| {
            let desc = format!("nearest(K={k}, N={n})");
            if let Some(last) = top.last() {
                if !last.dist.is_finite() {
                    return Err(Error::Config(
                        "nearest-neighbour run retained screened-out proposals; widen or drop the screen".into(),
                    ));
                }
            }
            let min_d = top.first().map_or(f64::INFINITY, |p| p.dist);
            Ok(AbcOutcome::build(top, n, sims, min_d, desc))
        })
        .collect()
}

/// Rejection ABC at several tolerances sharing one proposal stream. For each tolerance the
/// first `k` acceptances (in proposal order) are kept and `N` is the index of the `k`-th
/// acceptance plus one; the stream stops once every tolerance has `k` draws or after `max_n`
/// proposals. Each result is distributed exactly as `abc_reject` at that tolerance,
/// conditioned on retaining `k` draws.
pub fn abc_reject_first_k(
    problem: &AbcProblem<'_>,
    epsilons: &[f64],
    k: usize,
    max_n: u64,
    seed: u64,
) -> Result<Vec<AbcOutcome>> {
    problem.validate()?;
    if k == 0 || max_n == 0 {
        return Err(Error::Config("retain-K mode needs k >= 1 and a positive proposal cap".into()));
    }
    if epsilons.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Config(format!("tolerances must be nonnegative: {epsilons:?}")));
    }
    let wave = (2 * rayon::current_num_threads()).max(4) as u64;
    let total_chunks = n_chunks(max_n);
    let mut kept: Vec<Vec<Particle>> = vec![Vec::new(); epsilons.len()];
    let mut min_d = vec![f64::INFINITY; epsilons.len()];
    let mut stopped_at: Vec<Option<u64>> = vec![None; epsilons.len()];
    let mut sims_total = 0u64;
    let mut next = 0u64;
    while next < total_chunks && stopped_at.iter().any(Option::is_none) {
        let hi = (next + wave).min(total_chunks);
        let results: Vec<(Vec<Vec<Particle>>, Vec<f64>, u64)> = (next..hi)
            .into_par_iter()
            .map(|c| {
                let mut acc: Vec<Vec<Particle>> = vec![Vec::new(); epsilons.len()];
                let mut mins = vec![f64::INFINITY; epsilons.len()];
                let sims = visit_chunk(problem, seed, c, max_n, |i, th, s, d| {
                    for (j, &eps) in epsilons.iter().enumerate() {
                        if d <= eps {
                            acc[j].push(particle(i, th, s, d, true));
                        }
                        mins[j] = mins[j].min(d);
                    }
                });
                (acc, mins, sims)
            })
            .collect();
        for (mut acc, mins, sims) in results {
            if stopped_at.iter().all(Option::is_some) {
                break;
            }
            sims_total += sims;
            for j in 0..epsilons.len() {
                if stopped_at[j].is_some() {
                    continue;
                }
                min_d[j] = min_d[j].min(mins[j]);
                for p in acc[j].drain(..) {
                    if kept[j].len() < k {
                        kept[j].push(p);
                        if kept[j].len() == k {
                            stopped_at[j] = Some(kept[j][k - 1].index + 1);
                            break;
                        }
                    }
                }
            }
        }
        next = hi;
    }
    Ok(kept
        .into_iter()
        .enumerate()
        .map(|(j, ps)| {
            let n = stopped_at[j].unwrap_or(max_n);
            let desc = format!("fixed-eps({}) retain {k}", epsilons[j]);
            AbcOutcome::build(ps, n, sims_total, min_d[j], desc)
        })
        .collect())
}
