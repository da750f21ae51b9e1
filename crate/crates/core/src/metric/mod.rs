//! The ε-isomorphism relation on rooted networks and the distance
//!
//! ```text
//! d(G, G') = min{ inf_{r, ε} { ζ(r) + ε : G^r ≃_ε G'^r }, 2 },   ζ(r) = 1 / (1 + r)
//! ```
//!
//! A root-preserving bijection between two balls that preserves edge
//! weights exactly also preserves root distances, so it restricts to a valid
//! bijection at every smaller radius. One whole-ball search per radius is
//! therefore enough to decide `G^r ≃_ε G'^r`, and the smallest feasible ε
//! (the bottleneck covariate gap) is attained on a finite candidate set.
//! Beyond the larger of the two stabilization radii both balls are
//! constant, so the `r → ∞` infimum is `ε*(R)`.

mod search;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::graph::{extract_ball_at, full_ball, Ball, CommunityGraph};
use search::{candidate_gaps, covariate_gap, find_bijection, quick_reject, Budget, Prefix};

/// ζ(r) = 1 / (1 + r).
pub fn zeta(r: u64) -> f64 {
    1.0 / (1.0 + r as f64)
}

/// Where the infimum defining the distance is attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessRadius {
    Radius(u64),
    /// The `r → ∞` term: both networks are ε-isomorphic at every radius.
    Limit,
    /// Nothing beats the cap of 2.
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub witness_radius: WitnessRadius,
    pub witness_eps: f64,
    /// `(vertex of first ball, vertex of second ball)` agent ids at the
    /// witness radius.
    pub witness_map: Option<Vec<(Arc<str>, Arc<str>)>>,
    /// `(r, ε*(r))` for `r = 0..=R`; `f64::INFINITY` when no bijection exists.
    pub eps_profile: Vec<(u64, f64)>,
}

impl Serialize for DistanceResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DistanceResult", 5)?;
        st.serialize_field("value", &self.value)?;
        match self.witness_radius {
            WitnessRadius::Radius(r) => st.serialize_field("witness_radius", &r)?,
            WitnessRadius::Limit => st.serialize_field("witness_radius", "limit")?,
            WitnessRadius::Cap => st.serialize_field("witness_radius", "cap")?,
        }
        st.serialize_field("witness_eps", &EpsValue(self.witness_eps))?;
        let map: Option<Vec<[&str; 2]>> =
            self.witness_map.as_ref().map(|m| m.iter().map(|(x, y)| [&**x, &**y]).collect());
        st.serialize_field("witness_map", &map)?;
        let profile: Vec<(u64, EpsValue)> = self.eps_profile.iter().map(|&(r, e)| (r, EpsValue(e))).collect();
        st.serialize_field("eps_profile", &profile)?;
        st.end()
    }
}

/// Tolerance serialized as a number, or the string `"inf"`.
pub struct EpsValue(pub f64);

impl Serialize for EpsValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoWitness {
    /// `mapping[u]` is the image in the second ball of vertex `u` of the first.
    pub mapping: Vec<usize>,
    pub max_covariate_gap: f64,
}

/// Distance engine: search limits plus an optional memo of exact values.
#[derive(Debug, Default)]
pub struct Metric {
    expansion_cap: Option<u64>,
    radius_cap: Option<u64>,
    cache: Option<DistanceCache>,
}

/// Structure keys of the two balls, in argument order.
type PairKey = (Vec<u8>, Vec<u8>);

#[derive(Debug)]
struct DistanceCache {
    capacity: usize,
    map: Mutex<HashMap<PairKey, f64>>,
}

impl Metric {
    pub fn new() -> Self {
        Metric::default()
    }

    /// Abort a distance computation with [`Error::BudgetExceeded`] after
    /// this many node expansions.
    pub fn with_expansion_cap(mut self, cap: u64) -> Self {
        self.expansion_cap = Some(cap);
        self
    }

    /// Compare the networks truncated at this radius instead of in full.
    pub fn with_radius_cap(mut self, radius: u64) -> Self {
        self.radius_cap = Some(radius);
        self
    }

    /// Memoize up to `capacity` distance values keyed by ball structure.
    pub fn with_cache(mut self, capacity: usize) -> Self {
        self.cache = (capacity > 0).then(|| DistanceCache { capacity, map: Mutex::new(HashMap::new()) });
        self
    }

    pub fn radius_cap(&self) -> Option<u64> {
        self.radius_cap
    }

    /// Number of memoized entries.
    pub fn cached_entries(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.map.lock().expect("cache lock").len())
    }

    fn capped<'b>(&self, ball: &'b Ball) -> std::borrow::Cow<'b, Ball> {
        match self.radius_cap {
            Some(r) if ball.depth() > r => std::borrow::Cow::Owned(ball.truncate(r)),
            _ => std::borrow::Cow::Borrowed(ball),
        }
    }

    /// Full distance computation between two complete rooted networks, with
    /// the ε profile and a witness bijection.
    pub fn distance_between(&self, a: &Ball, b: &Ball) -> Result<DistanceResult> {
        check_dims(a, b)?;
        let (a, b) = (self.capped(a), self.capped(b));
        let run =
            evaluate(&a, &b, Mode { profile: true, cutoff: f64::INFINITY }, self.expansion_cap)?.expect("no cutoff");
        let witness_map =
            run.map.map(|m| m.iter().enumerate().map(|(u, &v)| (a.ids()[u].clone(), b.ids()[v].clone())).collect());
        Ok(DistanceResult {
            value: run.value,
            witness_radius: run.witness_radius,
            witness_eps: run.witness_eps,
            witness_map,
            eps_profile: run.profile,
        })
    }

    /// The distance value alone.
    pub fn distance_value(&self, a: &Ball, b: &Ball) -> Result<f64> {
        Ok(self.distance_within(a, b, f64::INFINITY)?.expect("no cutoff"))
    }

    /// The distance value when it is at most `cutoff`, else `None`.
    pub fn distance_within(&self, a: &Ball, b: &Ball, cutoff: f64) -> Result<Option<f64>> {
        check_dims(a, b)?;
        let (a, b) = (self.capped(a), self.capped(b));
        let key = self.cache.as_ref().map(|_| (a.structure_key(), b.structure_key()));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(&v) = cache.map.lock().expect("cache lock").get(key) {
                return Ok((v <= cutoff).then_some(v));
            }
        }
        let run = evaluate(&a, &b, Mode { profile: false, cutoff }, self.expansion_cap)?;
        if let (Some(cache), Some(key), Some(run)) = (&self.cache, key, &run) {
            let mut map = cache.map.lock().expect("cache lock");
            if map.len() >= cache.capacity {
                map.clear();
            }
            map.insert(key, run.value);
        }
        Ok(run.map(|r| r.value))
    }

    /// d between agent `i` of `g` and agent `j` of `h`.
    pub fn distance(&self, g: &CommunityGraph, i: &str, h: &CommunityGraph, j: &str) -> Result<DistanceResult> {
        let a = full_ball(g, g.agent(i)?);
        let b = full_ball(h, h.agent(j)?);
        self.distance_between(&a, &b)
    }

    /// Agents of a community whose rooted networks are closest to `query`,
    /// together with that minimum distance. Pure: no tie is broken here.
    pub fn nearest_set(&self, balls: &CommunityBalls, query: &Ball) -> Result<NearestSet> {
        if balls.balls.is_empty() {
            return Err(Error::input("community has no agents"));
        }
        let mut best = f64::INFINITY;
        let mut agents = Vec::new();
        for (agent, ball) in balls.balls.iter().enumerate() {
            if let Some(v) = self.distance_within(ball, query, best)? {
                if v < best {
                    best = v;
                    agents.clear();
                }
                agents.push(agent);
            }
        }
        Ok(NearestSet { distance: best, agents })
    }

    /// The agent of `g` whose rooted network is closest to `query`; ties are
    /// broken uniformly at random from `rng`.
    pub fn nearest_in_community<R: Rng + ?Sized>(
        &self,
        g: &CommunityGraph,
        query: &Ball,
        rng: &mut R,
    ) -> Result<Nearest> {
        let balls = CommunityBalls::new(g);
        let set = self.nearest_set(&balls, query)?;
        let agent = set.pick(rng);
        let result = self.distance_between(&balls.balls[agent], query)?;
        Ok(Nearest { agent, id: g.ids()[agent].clone(), distance: set.distance, result })
    }
}

fn check_dims(a: &Ball, b: &Ball) -> Result<()> {
    if a.covariate_dim() != b.covariate_dim() {
        return Err(Error::input(format!(
            "covariate dimensions differ: {} vs {}",
            a.covariate_dim(),
            b.covariate_dim()
        )));
    }
    Ok(())
}

/// The complete rooted network of every agent in one community.
#[derive(Debug, Clone)]
pub struct CommunityBalls {
    balls: Vec<Ball>,
}

impl CommunityBalls {
    pub fn new(g: &CommunityGraph) -> Self {
        CommunityBalls { balls: (0..g.len()).map(|i| full_ball(g, i)).collect() }
    }

    /// Balls cut just past the deepest query: each keeps every vertex within
    /// `max depth` of its root plus the next distance layer, if any. Any
    /// distance to one of `queries` is unchanged, since a ball that grows
    /// past a query's depth can no longer match it.
    pub fn for_queries(g: &CommunityGraph, queries: &[&Ball]) -> Self {
        let limit = queries.iter().map(|q| q.depth()).max().unwrap_or(0);
        let balls = (0..g.len())
            .map(|i| {
                let dist = g.distances_from(i);
                let r = dist.iter().flatten().copied().filter(|&d| d > limit).min().unwrap_or(limit);
                extract_ball_at(g, i, r, &dist)
            })
            .collect();
        CommunityBalls { balls }
    }

    pub fn ball(&self, agent: usize) -> &Ball {
        &self.balls[agent]
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestSet {
    pub distance: f64,
    /// Every agent attaining `distance`, in community order.
    pub agents: Vec<usize>,
}

impl NearestSet {
    /// Uniform choice among the tied agents.
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.agents[rng.random_range(0..self.agents.len())]
    }
}

#[derive(Debug, Clone)]
pub struct Nearest {
    pub agent: usize,
    pub id: Arc<str>,
    pub distance: f64,
    pub result: DistanceResult,
}

/// Decides `b1 ≃_eps b2` for two balls of equal radius.
pub fn eps_isomorphic(b1: &Ball, b2: &Ball, eps: f64) -> Result<Option<IsoWitness>> {
    check_pair(b1, b2)?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::input("tolerance must be a non-negative number"));
    }
    let (pa, pb) = (Prefix::new(b1, b1.len()), Prefix::new(b2, b2.len()));
    let mut budget = Budget::new(None);
    Ok(find_bijection(&pa, &pb, eps, &mut budget)?.map(|mapping| {
        let max_covariate_gap =
            mapping.iter().enumerate().map(|(u, &v)| covariate_gap(b1, u, b2, v)).fold(0.0, f64::max);
        IsoWitness { mapping, max_covariate_gap }
    }))
}

/// ε*: the smallest tolerance at which two equal-radius balls are
/// ε-isomorphic, or infinity.
pub fn min_eps(b1: &Ball, b2: &Ball) -> Result<f64> {
    check_pair(b1, b2)?;
    let (pa, pb) = (Prefix::new(b1, b1.len()), Prefix::new(b2, b2.len()));
    let mut budget = Budget::new(None);
    Ok(bottleneck(&pa, &pb, 0.0, &mut budget)?.0)
}

fn check_pair(b1: &Ball, b2: &Ball) -> Result<()> {
    if b1.radius() != b2.radius() {
        return Err(Error::input(format!("ball radii differ: {} vs {}", b1.radius(), b2.radius())));
    }
    check_dims(b1, b2)
}

/// Smallest feasible tolerance `>= lower` and a witnessing map.
fn bottleneck(a: &Prefix<'_>, b: &Prefix<'_>, lower: f64, budget: &mut Budget) -> Result<(f64, Option<Vec<usize>>)> {
    if quick_reject(a, b) {
        return Ok((f64::INFINITY, None));
    }
    if a.ball.covariate_dim() == 0 {
        return Ok(match find_bijection(a, b, 0.0, budget)? {
            Some(m) => (0.0, Some(m)),
            None => (f64::INFINITY, None),
        });
    }
    let floor = lower.max(covariate_gap(a.ball, 0, b.ball, 0));
    let gaps: Vec<f64> = candidate_gaps(a, b).into_iter().filter(|&g| g >= floor).collect();
    let Some(&top) = gaps.last() else {
        return Ok((f64::INFINITY, None));
    };
    let Some(mut best_map) = find_bijection(a, b, top, budget)? else {
        return Ok((f64::INFINITY, None));
    };
    // gaps[hi] is feasible; find the first feasible index.
    let (mut lo, mut hi) = (0usize, gaps.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        match find_bijection(a, b, gaps[mid], budget)? {
            Some(m) => {
                hi = mid;
                best_map = m;
            }
            None => lo = mid + 1,
        }
    }
    Ok((gaps[hi], Some(best_map)))
}

#[derive(Clone, Copy)]
struct Mode {
    profile: bool,
    cutoff: f64,
}

struct Evaluation {
    value: f64,
    witness_radius: WitnessRadius,
    witness_eps: f64,
    map: Option<Vec<usize>>,
    profile: Vec<(u64, f64)>,
}

/// Walks the radii at which either ball grows. Between consecutive
/// breakpoints both prefixes (and so ε*) are constant and ζ is decreasing,
/// so each interval is scored at its right end.
fn evaluate(a: &Ball, b: &Ball, mode: Mode, cap: Option<u64>) -> Result<Option<Evaluation>> {
    let big_r = a.depth().max(b.depth());
    let mut breakpoints: Vec<u64> = a.root_distances().iter().chain(b.root_distances()).copied().collect();
    breakpoints.sort_unstable();
    breakpoints.dedup();

    let mut budget = Budget::new(cap);
    let mut best = 2.0;
    let mut witness_radius = WitnessRadius::Cap;
    let mut witness_eps = f64::INFINITY;
    let mut map = None;
    let mut profile = Vec::new();
    let mut eps = 0.0;

    for (idx, &start) in breakpoints.iter().enumerate() {
        let end = breakpoints.get(idx + 1).map_or(big_r, |&next| next - 1);
        let pa = Prefix::new(a, a.prefix_len(start));
        let pb = Prefix::new(b, b.prefix_len(start));
        let (found, m) = bottleneck(&pa, &pb, eps, &mut budget)?;
        eps = found;
        if mode.profile {
            let upto = if eps.is_infinite() { big_r } else { end };
            profile.extend((start..=upto).map(|r| (r, eps)));
        }
        if eps.is_infinite() {
            break;
        }
        let limit = idx + 1 == breakpoints.len();
        let score = zeta(end) + eps;
        if score < best {
            best = score;
            witness_radius = WitnessRadius::Radius(end);
            witness_eps = eps;
            map = m.clone();
        }
        if limit && eps < best {
            best = eps;
            witness_radius = WitnessRadius::Limit;
            witness_eps = eps;
            map = m;
        }
        // ε* is nondecreasing in r: every later term, the limit included, is >= eps.
        if !mode.profile && eps >= best {
            break;
        }
        if eps > mode.cutoff && best > mode.cutoff {
            return Ok(None);
        }
    }
    if best > mode.cutoff {
        return Ok(None);
    }
    Ok(Some(Evaluation { value: best, witness_radius, witness_eps, map, profile }))
}
