//! Approximate permutation test of policy irrelevance: the greedy
//! alternating partition, selection of the 2q nearest outcomes, the
//! Cramér–von Mises statistic and its permutation p-value.
//!
//! Random streams, all derived from one [`SeedStreams`]:
//! `"partition"` for greedy ties, `("nearest-g", c)` / `("nearest-g2", c)`
//! for within-community ties, `"order-g"` / `"order-g2"` for reordering
//! representatives and `("permutations", b)` for the b-th sampled
//! permutation.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Ball, Dataset};
use crate::inference::{order_by_distance, Match};
use crate::metric::{CommunityBalls, Metric, NearestSet};
use crate::rng::SeedStreams;

/// Largest `2q` for which all `(2q)!` permutations are enumerated.
pub const MAX_FULL_LEN: usize = 8;

/// Default number of permutations in sampled mode, identity included.
pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    Full,
    /// `B` permutations: the identity plus `B − 1` uniform draws.
    Sampled(usize),
}

/// Greedy alternating assignment given each community's distance to `g`
/// (`to_g`) and to `g′` (`to_gp`). Communities that cannot be paired are
/// dropped.
pub fn greedy_partition<R: Rng + ?Sized>(to_g: &[f64], to_gp: &[f64], rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if to_g.len() != to_gp.len() {
        return Err(Error::input("distance lists differ in length"));
    }
    if to_g.len() < 2 {
        return Err(Error::input(format!("the test needs at least 2 communities, got {}", to_g.len())));
    }
    let mut remaining: Vec<usize> = (0..to_g.len()).collect();
    let (mut w1, mut w2) = (Vec::new(), Vec::new());
    while remaining.len() >= 2 {
        w1.push(take_closest(&mut remaining, to_g, rng));
        w2.push(take_closest(&mut remaining, to_gp, rng));
    }
    Ok((w1, w2))
}

fn take_closest<R: Rng + ?Sized>(remaining: &mut Vec<usize>, dist: &[f64], rng: &mut R) -> usize {
    let best = remaining.iter().map(|&c| dist[c]).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..remaining.len()).filter(|&p| dist[remaining[p]] == best).collect();
    let pos = tied[rng.random_range(0..tied.len())];
    remaining.remove(pos)
}

struct NearestTable {
    g: Vec<NearestSet>,
    gp: Vec<NearestSet>,
}

impl NearestTable {
    fn new(metric: &Metric, ds: &Dataset, g: &Ball, g_prime: &Ball) -> Result<Self> {
        let pairs = ds
            .communities()
            .par_iter()
            .map(|comm| {
                let balls = CommunityBalls::for_queries(comm, &[g, g_prime]);
                Ok((metric.nearest_set(&balls, g)?, metric.nearest_set(&balls, g_prime)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (g, gp) = pairs.into_iter().unzip();
        Ok(NearestTable { g, gp })
    }

    fn partition(&self, streams: &SeedStreams) -> Result<(Vec<usize>, Vec<usize>)> {
        let to_g: Vec<f64> = self.g.iter().map(|s| s.distance).collect();
        let to_gp: Vec<f64> = self.gp.iter().map(|s| s.distance).collect();
        greedy_partition(&to_g, &to_gp, &mut streams.stream("partition", 0))
    }

    fn select(&self, ds: &Dataset, w1: &[usize], w2: &[usize], q: usize, streams: &SeedStreams) -> Result<Selection> {
        if q == 0 {
            return Err(Error::input("q must be positive"));
        }
        if q > w1.len() || q > w2.len() {
            return Err(Error::input(format!("q = {q} exceeds the partition sizes {} and {}", w1.len(), w2.len())));
        }
        let half = |w: &[usize], sets: &[NearestSet], label: &str, order: &str| -> Result<Vec<Match>> {
            let mut reps: Vec<Match> = w
                .iter()
                .map(|&c| {
                    let comm = ds
                        .communities()
                        .get(c)
                        .ok_or_else(|| Error::input(format!("community index {c} out of range")))?;
                    let agent = sets[c].pick(&mut streams.stream(label, c as u64));
                    Ok(Match {
                        community: c,
                        agent,
                        id: comm.ids()[agent].clone(),
                        distance: sets[c].distance,
                        outcome: comm.outcome(agent),
                    })
                })
                .collect::<Result<_>>()?;
            order_by_distance(&mut reps, &mut streams.stream(order, 0));
            reps.truncate(q);
            for m in &reps {
                if m.outcome.is_none() {
                    return Err(Error::input(format!(
                        "selected agent `{}` of community {} has no outcome",
                        m.id, m.community
                    )));
                }
            }
            Ok(reps)
        };
        let matches_g = half(w1, &self.g, "nearest-g", "order-g")?;
        let matches_gp = half(w2, &self.gp, "nearest-g2", "order-g2")?;
        let s = matches_g.iter().chain(&matches_gp).map(|m| m.outcome.expect("checked")).collect();
        Ok(Selection { s, matches_g, matches_gp })
    }
}

/// Greedy split of the communities into halves matched to `g` and `g′`.
pub fn partition_communities(
    metric: &Metric,
    ds: &Dataset,
    g: &Ball,
    g_prime: &Ball,
    streams: &SeedStreams,
) -> Result<(Vec<usize>, Vec<usize>)> {
    NearestTable::new(metric, ds, g, g_prime)?.partition(streams)
}

/// The 2q selected outcomes and where they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// `g` block first, then `g′`, each ordered by distance.
    pub s: Vec<f64>,
    pub matches_g: Vec<Match>,
    pub matches_gp: Vec<Match>,
}

#[allow(clippy::too_many_arguments)]
pub fn build_s(
    metric: &Metric,
    ds: &Dataset,
    w1: &[usize],
    w2: &[usize],
    g: &Ball,
    g_prime: &Ball,
    q: usize,
    streams: &SeedStreams,
) -> Result<Selection> {
    NearestTable::new(metric, ds, g, g_prime)?.select(ds, w1, w2, q, streams)
}

/// Dense ranks of the pooled sample, shared by every permutation.
struct Ranks {
    group: Vec<usize>,
    groups: usize,
}

impl Ranks {
    fn new(s: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        let mut group = vec![0; s.len()];
        let mut g = 0;
        for (pos, &i) in idx.iter().enumerate() {
            if pos > 0 && s[i] != s[idx[pos - 1]] {
                g += 1;
            }
            group[i] = g;
        }
        Ranks { group, groups: if s.is_empty() { 0 } else { g + 1 } }
    }

    /// `Σ_j (q F̂₁(S_j) − q F̂₂(S_j))²` when the elements `order[..q]` form
    /// the first half.
    fn numerator(&self, order: &[usize], q: usize, counts: &mut Vec<(i64, i64)>) -> u64 {
        counts.clear();
        counts.resize(self.groups, (0, 0));
        for (pos, &i) in order.iter().enumerate() {
            let c = &mut counts[self.group[i]];
            if pos < q {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        let (mut a, mut b, mut total) = (0i64, 0i64, 0u64);
        for &(ca, cb) in counts.iter() {
            a += ca;
            b += cb;
            total += ((ca + cb) * (a - b) * (a - b)) as u64;
        }
        total
    }
}

fn check_even(s: &[f64]) -> Result<usize> {
    if s.len() < 2 || !s.len().is_multiple_of(2) {
        return Err(Error::input(format!("the pooled sample needs even length >= 2, got {}", s.len())));
    }
    if s.iter().any(|x| x.is_nan()) {
        return Err(Error::input("the pooled sample contains NaN"));
    }
    Ok(s.len() / 2)
}

fn scale(num: u64, q: usize) -> f64 {
    num as f64 / (2 * q * q * q) as f64
}

/// `R(S) = (1/2q) Σ_j (F̂₁(S_j) − F̂₂(S_j))²` with F̂₁ over the first q
/// entries and F̂₂ over the last q.
pub fn cvm_statistic(s: &[f64]) -> Result<f64> {
    let q = check_even(s)?;
    let order: Vec<usize> = (0..s.len()).collect();
    Ok(scale(Ranks::new(s).numerator(&order, q, &mut Vec::new()), q))
}

/// Fraction of permutations whose statistic is at least the observed one.
pub fn permutation_pvalue(s: &[f64], mode: PermutationMode, streams: &SeedStreams) -> Result<f64> {
    let q = check_even(s)?;
    let n = s.len();
    let ranks = Ranks::new(s);
    let identity: Vec<usize> = (0..n).collect();
    let observed = ranks.numerator(&identity, q, &mut Vec::new());
    match mode {
        PermutationMode::Full => {
            if n > MAX_FULL_LEN {
                return Err(Error::input(format!(
                    "full enumeration is limited to 2q <= {MAX_FULL_LEN} (got 2q = {n}); use sampled mode"
                )));
            }
            let (mut hits, mut total) = (0u64, 0u64);
            let mut counts = Vec::new();
            heap_permutations(n, |perm| {
                total += 1;
                if ranks.numerator(perm, q, &mut counts) >= observed {
                    hits += 1;
                }
            });
            Ok(hits as f64 / total as f64)
        }
        PermutationMode::Sampled(b) => {
            if b < 2 {
                return Err(Error::input("sampled mode needs B >= 2 (identity plus at least one draw)"));
            }
            let hits: u64 = (1..b)
                .into_par_iter()
                .map_init(
                    || (identity.clone(), Vec::new()),
                    |(perm, counts), j| {
                        perm.copy_from_slice(&identity);
                        perm.shuffle(&mut streams.stream("permutations", j as u64));
                        u64::from(ranks.numerator(perm, q, counts) >= observed)
                    },
                )
                .sum();
            Ok((hits + 1) as f64 / b as f64)
        }
    }
}

/// Heap's algorithm; calls `visit` on each of the n! orderings of `0..n`.
fn heap_permutations(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub q: usize,
    pub alpha: f64,
    pub permutation_mode: PermutationMode,
    pub partition: (Vec<usize>, Vec<usize>),
    pub matches_g: Vec<Match>,
    pub matches_gp: Vec<Match>,
}

/// The whole test: partition, selection, statistic and p-value.
#[allow(clippy::too_many_arguments)]
pub fn test_policy_irrelevance(
    metric: &Metric,
    ds: &Dataset,
    g: &Ball,
    g_prime: &Ball,
    q: usize,
    alpha: f64,
    mode: PermutationMode,
    streams: &SeedStreams,
) -> Result<TestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let table = NearestTable::new(metric, ds, g, g_prime)?;
    let (w1, w2) = table.partition(streams)?;
    let sel = table.select(ds, &w1, &w2, q, streams)?;
    let statistic = cvm_statistic(&sel.s)?;
    let p_value = permutation_pvalue(&sel.s, mode, streams)?;
    Ok(TestResult {
        statistic,
        p_value,
        reject: p_value <= alpha,
        q,
        alpha,
        permutation_mode: mode,
        partition: (w1, w2),
        matches_g: sel.matches_g,
        matches_gp: sel.matches_gp,
    })
}
