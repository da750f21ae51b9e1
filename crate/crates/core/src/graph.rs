//! Weighted directed community networks, integer path distances and
//! truncated rooted networks ("balls").

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Link weight. Larger values are weaker ties; a missing link is infinite.
pub type Weight = u32;

/// Largest weight for which the bucket-queue shortest-path search is used.
const BUCKET_QUEUE_MAX_WEIGHT: Weight = 64;

/// One community: agents with covariates and optional outcomes, and the
/// weighted links between them.
///
/// Undirected input is stored symmetrized, so every algorithm works on
/// directed semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityGraph {
    ids: Vec<Arc<str>>,
    index: HashMap<Arc<str>, usize>,
    out_adj: Vec<Vec<(usize, Weight)>>,
    in_adj: Vec<Vec<(usize, Weight)>>,
    covariates: Vec<f64>,
    dim: usize,
    outcomes: Vec<Option<f64>>,
    directed: bool,
}

#[derive(Debug)]
pub struct CommunityBuilder {
    directed: bool,
    dim: usize,
    ids: Vec<Arc<str>>,
    index: HashMap<Arc<str>, usize>,
    covariates: Vec<f64>,
    outcomes: Vec<Option<f64>>,
    edges: HashMap<(usize, usize), Weight>,
}

impl CommunityBuilder {
    pub fn new(directed: bool, dim: usize) -> Self {
        CommunityBuilder {
            directed,
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            covariates: Vec::new(),
            outcomes: Vec::new(),
            edges: HashMap::new(),
        }
    }

    pub fn add_agent(&mut self, id: &str, covariates: &[f64], outcome: Option<f64>) -> Result<usize> {
        if covariates.len() != self.dim {
            return Err(Error::input(format!(
                "agent `{id}` has {} covariates, expected {}",
                covariates.len(),
                self.dim
            )));
        }
        if covariates.iter().any(|c| !c.is_finite()) {
            return Err(Error::input(format!("agent `{id}` has a non-finite covariate")));
        }
        if let Some(y) = outcome {
            if !y.is_finite() {
                return Err(Error::input(format!("agent `{id}` has a non-finite outcome")));
            }
        }
        let key: Arc<str> = Arc::from(id);
        if self.index.contains_key(&key) {
            return Err(Error::input(format!("duplicate agent id `{id}`")));
        }
        let idx = self.ids.len();
        self.index.insert(key.clone(), idx);
        self.ids.push(key);
        self.covariates.extend_from_slice(covariates);
        self.outcomes.push(outcome);
        Ok(idx)
    }

    pub fn add_edge(&mut self, src: &str, dst: &str, weight: Weight) -> Result<()> {
        let s = *self.index.get(src).ok_or_else(|| Error::UnknownAgent(src.to_owned()))?;
        let d = *self.index.get(dst).ok_or_else(|| Error::UnknownAgent(dst.to_owned()))?;
        self.add_edge_index(s, d, weight)
    }

    pub fn add_edge_index(&mut self, src: usize, dst: usize, weight: Weight) -> Result<()> {
        let n = self.ids.len();
        if src >= n || dst >= n {
            return Err(Error::input(format!("edge ({src},{dst}) refers to a missing agent")));
        }
        if src == dst {
            return Err(Error::input(format!(
                "self-loop on agent `{}`: D_ij = 0 holds only for i = j and is never stored",
                self.ids[src]
            )));
        }
        if weight == 0 {
            return Err(Error::input(format!(
                "edge `{}` -> `{}` has weight 0; weights must be >= 1 because D_ij = 0 iff i = j",
                self.ids[src], self.ids[dst]
            )));
        }
        self.insert(src, dst, weight)?;
        if !self.directed {
            self.insert(dst, src, weight)?;
        }
        Ok(())
    }

    fn insert(&mut self, src: usize, dst: usize, weight: Weight) -> Result<()> {
        match self.edges.insert((src, dst), weight) {
            Some(old) if old != weight => Err(Error::input(format!(
                "edge `{}` -> `{}` given twice with weights {old} and {weight}",
                self.ids[src], self.ids[dst]
            ))),
            _ => Ok(()),
        }
    }

    pub fn build(self) -> CommunityGraph {
        let n = self.ids.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (&(s, d), &w) in &self.edges {
            out_adj[s].push((d, w));
            in_adj[d].push((s, w));
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        CommunityGraph {
            ids: self.ids,
            index: self.index,
            out_adj,
            in_adj,
            covariates: self.covariates,
            dim: self.dim,
            outcomes: self.outcomes,
            directed: self.directed,
        }
    }
}

impl CommunityGraph {
    /// Unweighted undirected graph on agents `0..n` (ids are the decimal
    /// indices) with no covariates.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = CommunityBuilder::new(false, 0);
        for i in 0..n {
            b.add_agent(&i.to_string(), &[], None)?;
        }
        for &(s, d) in edges {
            b.add_edge_index(s, d, 1)?;
        }
        Ok(b.build())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn covariate_dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[Arc<str>] {
        &self.ids
    }

    pub fn id(&self, agent: usize) -> &str {
        &self.ids[agent]
    }

    pub fn agent(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownAgent(id.to_owned()))
    }

    pub fn covariates(&self, agent: usize) -> &[f64] {
        &self.covariates[agent * self.dim..(agent + 1) * self.dim]
    }

    pub fn outcome(&self, agent: usize) -> Option<f64> {
        self.outcomes[agent]
    }

    pub fn outcomes(&self) -> &[Option<f64>] {
        &self.outcomes
    }

    /// Replaces every outcome; `values` must have one finite entry per agent.
    pub fn set_outcomes(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::input(format!("{} outcomes supplied for {} agents", values.len(), self.len())));
        }
        if values.iter().any(|y| !y.is_finite()) {
            return Err(Error::input("outcomes must be finite"));
        }
        self.outcomes = values.iter().map(|&y| Some(y)).collect();
        Ok(())
    }

    /// Replaces the covariate matrix (row per agent) and its dimension.
    pub fn set_covariates(&mut self, dim: usize, rows: &[Vec<f64>]) -> Result<()> {
        if rows.len() != self.len() || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::input("covariate rows must match agents and dimension"));
        }
        if rows.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::input("covariates must be finite"));
        }
        self.dim = dim;
        self.covariates = rows.iter().flatten().copied().collect();
        Ok(())
    }

    pub fn out_edges(&self, agent: usize) -> &[(usize, Weight)] {
        &self.out_adj[agent]
    }

    pub fn in_edges(&self, agent: usize) -> &[(usize, Weight)] {
        &self.in_adj[agent]
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<Weight> {
        lookup(&self.out_adj[src], dst)
    }

    /// All stored links as `(src, dst, weight)`, ordered by `(src, dst)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Weight)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(s, list)| list.iter().map(move |&(d, w)| (s, d, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// Single-source shortest path lengths from `src`; `None` is unreachable.
    pub fn distances_from(&self, src: usize) -> Vec<Option<u64>> {
        let max_w = self.out_adj.iter().flatten().map(|&(_, w)| w).max().unwrap_or(1);
        if max_w == 1 {
            self.bfs(src)
        } else if max_w <= BUCKET_QUEUE_MAX_WEIGHT {
            self.dial(src, max_w)
        } else {
            self.dijkstra(src)
        }
    }

    fn bfs(&self, src: usize) -> Vec<Option<u64>> {
        let mut dist = vec![None; self.len()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &(v, _) in &self.out_adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Label-setting search with a circular bucket queue of `max_w + 1` slots.
    fn dial(&self, src: usize, max_w: Weight) -> Vec<Option<u64>> {
        let slots = max_w as usize + 1;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); slots];
        let mut dist: Vec<Option<u64>> = vec![None; self.len()];
        let mut settled = vec![false; self.len()];
        dist[src] = Some(0);
        buckets[0].push(src);
        let mut pending = 1usize;
        let mut current: u64 = 0;
        while pending > 0 {
            let slot = (current % slots as u64) as usize;
            while let Some(u) = buckets[slot].pop() {
                pending -= 1;
                if settled[u] || dist[u] != Some(current) {
                    continue;
                }
                settled[u] = true;
                for &(v, w) in &self.out_adj[u] {
                    let nd = current + u64::from(w);
                    if !settled[v] && dist[v].is_none_or(|d| nd < d) {
                        dist[v] = Some(nd);
                        buckets[(nd % slots as u64) as usize].push(v);
                        pending += 1;
                    }
                }
            }
            current += 1;
        }
        dist
    }

    fn dijkstra(&self, src: usize) -> Vec<Option<u64>> {
        let mut dist: Vec<Option<u64>> = vec![None; self.len()];
        let mut heap = BinaryHeap::from([Reverse((0u64, src))]);
        dist[src] = Some(0);
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u] != Some(d) {
                continue;
            }
            for &(v, w) in &self.out_adj[u] {
                let nd = d + u64::from(w);
                if dist[v].is_none_or(|old| nd < old) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }
}

pub(crate) fn lookup(list: &[(usize, Weight)], target: usize) -> Option<Weight> {
    list.binary_search_by_key(&target, |&(t, _)| t).ok().map(|i| list[i].1)
}

/// Path distance from agent `i` to agent `j`; `None` when `j` is unreachable.
pub fn path_distance(g: &CommunityGraph, i: &str, j: &str) -> Result<Option<u64>> {
    let src = g.agent(i)?;
    let dst = g.agent(j)?;
    Ok(g.distances_from(src)[dst])
}

/// W_i(r): the sum of `w` over agents within path distance `r` of `i`.
pub fn neighborhood_count(g: &CommunityGraph, w: &[f64], i: &str, r: u64) -> Result<f64> {
    if w.len() != g.len() {
        return Err(Error::input(format!("{} weights for {} agents", w.len(), g.len())));
    }
    let src = g.agent(i)?;
    Ok(g.distances_from(src).iter().zip(w).filter(|(d, _)| d.is_some_and(|d| d <= r)).map(|(_, &x)| x).sum())
}

/// Radius beyond which the ball around `root` stops growing: the largest
/// finite path distance from `root`.
pub fn stabilization_radius(g: &CommunityGraph, root: &str) -> Result<u64> {
    let src = g.agent(root)?;
    Ok(g.distances_from(src).into_iter().flatten().max().unwrap_or(0))
}

/// A rooted network truncated at `radius`, in canonical vertex order.
///
/// Vertex 0 is the root. The remaining vertices are sorted by root
/// distance, then `(in-degree, out-degree)` inside the ball, then
/// covariates, then original agent id, so equal inputs give equal balls.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    radius: u64,
    ids: Vec<Arc<str>>,
    root_distances: Vec<u64>,
    covariates: Vec<f64>,
    dim: usize,
    out_adj: Vec<Vec<(usize, Weight)>>,
    in_adj: Vec<Vec<(usize, Weight)>>,
}

struct Member {
    id: Arc<str>,
    dist: u64,
    cov: Vec<f64>,
}

impl Ball {
    fn canonical(radius: u64, dim: usize, members: Vec<Member>, edges: Vec<(usize, usize, Weight)>) -> Ball {
        let n = members.len();
        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        for &(s, d, _) in &edges {
            outdeg[s] += 1;
            indeg[d] += 1;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (ma, mb) = (&members[a], &members[b]);
            ma.dist
                .cmp(&mb.dist)
                .then((indeg[a], outdeg[a]).cmp(&(indeg[b], outdeg[b])))
                .then_with(|| cmp_covariates(&ma.cov, &mb.cov))
                .then_with(|| ma.id.cmp(&mb.id))
        });
        let mut pos = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (s, d, w) in edges {
            out_adj[pos[s]].push((pos[d], w));
            in_adj[pos[d]].push((pos[s], w));
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        let mut ids = Vec::with_capacity(n);
        let mut root_distances = Vec::with_capacity(n);
        let mut covariates = Vec::with_capacity(n * dim);
        let mut members: Vec<Option<Member>> = members.into_iter().map(Some).collect();
        for &old in &order {
            let m = members[old].take().expect("each member placed once");
            ids.push(m.id);
            root_distances.push(m.dist);
            covariates.extend(m.cov);
        }
        Ball { radius, ids, root_distances, covariates, dim, out_adj, in_adj }
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Always false: a ball contains at least its root.
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[Arc<str>] {
        &self.ids
    }

    pub fn root_id(&self) -> &str {
        &self.ids[0]
    }

    pub fn root_distances(&self) -> &[u64] {
        &self.root_distances
    }

    /// Largest root distance present; the radius at which this ball, read as
    /// a finite rooted network, stabilizes.
    pub fn depth(&self) -> u64 {
        self.root_distances.last().copied().unwrap_or(0)
    }

    pub fn covariate_dim(&self) -> usize {
        self.dim
    }

    pub fn covariates(&self, v: usize) -> &[f64] {
        &self.covariates[v * self.dim..(v + 1) * self.dim]
    }

    pub fn out_edges(&self, v: usize) -> &[(usize, Weight)] {
        &self.out_adj[v]
    }

    pub fn in_edges(&self, v: usize) -> &[(usize, Weight)] {
        &self.in_adj[v]
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<Weight> {
        lookup(&self.out_adj[src], dst)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Weight)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(s, list)| list.iter().map(move |&(d, w)| (s, d, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// Number of vertices with root distance at most `r` (a prefix of the
    /// canonical order).
    pub fn prefix_len(&self, r: u64) -> usize {
        self.root_distances.partition_point(|&d| d <= r)
    }

    /// True when every link is present in both directions with equal weight.
    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(s, d, w)| self.weight(d, s) == Some(w))
    }

    /// The ball of radius `min(self.radius, r)`.
    pub fn truncate(&self, r: u64) -> Ball {
        if r >= self.radius {
            return self.clone();
        }
        let keep = self.prefix_len(r);
        let members = (0..keep)
            .map(|v| Member { id: self.ids[v].clone(), dist: self.root_distances[v], cov: self.covariates(v).to_vec() })
            .collect();
        let edges = self.edges().filter(|&(s, d, _)| s < keep && d < keep).collect();
        Ball::canonical(r, self.dim, members, edges)
    }

    /// The same ball with its radius field raised to `depth()`-or-more, i.e.
    /// read as the complete finite rooted network it spans.
    pub fn with_radius(mut self, radius: u64) -> Ball {
        self.radius = radius.max(self.depth());
        self
    }

    /// This ball as a standalone community graph (always stored directed).
    pub fn to_community(&self) -> CommunityGraph {
        let directed = !self.is_symmetric();
        let mut b = CommunityBuilder::new(directed, self.dim);
        for v in 0..self.len() {
            b.add_agent(&self.ids[v], self.covariates(v), None).expect("ball ids are unique");
        }
        for (s, d, w) in self.edges() {
            b.add_edge_index(s, d, w).expect("ball edges are valid");
        }
        b.build()
    }

    /// Byte encoding of everything except agent ids and the radius field.
    /// Equal keys imply identical rooted networks up to relabeling.
    pub fn structure_key(&self) -> Vec<u8> {
        let mut key = Vec::with_capacity(16 + self.len() * (8 + 8 * self.dim) + self.edge_count() * 12);
        key.extend_from_slice(&(self.len() as u64).to_le_bytes());
        key.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for &d in &self.root_distances {
            key.extend_from_slice(&d.to_le_bytes());
        }
        for c in &self.covariates {
            key.extend_from_slice(&c.to_bits().to_le_bytes());
        }
        for (s, d, w) in self.edges() {
            key.extend_from_slice(&(s as u32).to_le_bytes());
            key.extend_from_slice(&(d as u32).to_le_bytes());
            key.extend_from_slice(&w.to_le_bytes());
        }
        key
    }
}

fn cmp_covariates(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// G_root^r: agents within path distance `r` of `root`, their covariates
/// and every community link between them.
pub fn extract_ball(g: &CommunityGraph, root: &str, r: u64) -> Result<Ball> {
    let src = g.agent(root)?;
    Ok(extract_ball_at(g, src, r, &g.distances_from(src)))
}

/// Same as [`extract_ball`] with precomputed distances from `root`.
pub(crate) fn extract_ball_at(g: &CommunityGraph, root: usize, r: u64, dist: &[Option<u64>]) -> Ball {
    debug_assert_eq!(dist[root], Some(0));
    let mut local = vec![usize::MAX; g.len()];
    let mut members = Vec::new();
    let mut agents = Vec::new();
    for (agent, d) in dist.iter().enumerate() {
        if let Some(d) = *d {
            if d <= r {
                local[agent] = members.len();
                agents.push(agent);
                members.push(Member { id: g.ids[agent].clone(), dist: d, cov: g.covariates(agent).to_vec() });
            }
        }
    }
    let mut edges = Vec::new();
    for &agent in &agents {
        for &(v, w) in &g.out_adj[agent] {
            if local[v] != usize::MAX {
                edges.push((local[agent], local[v], w));
            }
        }
    }
    Ball::canonical(r, g.dim, members, edges)
}

/// The complete rooted network of `root`: its ball at the stabilization
/// radius.
pub fn full_ball(g: &CommunityGraph, root: usize) -> Ball {
    let dist = g.distances_from(root);
    let r = dist.iter().flatten().copied().max().unwrap_or(0);
    extract_ball_at(g, root, r, &dist)
}

/// Independent communities sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    communities: Vec<CommunityGraph>,
    covariate_dim: usize,
}

impl Dataset {
    pub fn new(communities: Vec<CommunityGraph>) -> Result<Self> {
        let covariate_dim = communities.first().map_or(0, CommunityGraph::covariate_dim);
        if let Some((c, g)) = communities.iter().enumerate().find(|(_, g)| g.covariate_dim() != covariate_dim) {
            return Err(Error::input(format!(
                "community {c} has covariate dimension {}, expected {covariate_dim}",
                g.covariate_dim()
            )));
        }
        Ok(Dataset { communities, covariate_dim })
    }

    pub fn communities(&self) -> &[CommunityGraph] {
        &self.communities
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn into_communities(self) -> Vec<CommunityGraph> {
        self.communities
    }
}
