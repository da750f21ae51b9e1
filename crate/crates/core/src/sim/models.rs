//! Random networks and outcome models used by the simulation lab.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Ball, CommunityGraph};

/// Erdős–Rényi G(n, p): undirected, unit weights, no covariates. Pairs are
/// visited in lexicographic order with one uniform draw each.
pub fn gen_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<CommunityGraph> {
    if n == 0 {
        return Err(Error::Config("Erdős–Rényi graphs need at least one agent".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    CommunityGraph::unweighted(n, &edges)
}

/// Average degree: links per vertex inside the ball.
pub fn avg_degree(b: &Ball) -> f64 {
    b.edge_count() as f64 / b.len() as f64
}

/// Average local clustering inside the ball. A vertex with fewer than two
/// neighbours contributes 0.
pub fn avg_clustering(b: &Ball) -> f64 {
    let total: f64 = (0..b.len())
        .map(|v| {
            let nbrs = b.out_edges(v);
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let closed = nbrs
                .iter()
                .flat_map(|&(j, _)| nbrs.iter().map(move |&(k, _)| (j, k)))
                .filter(|&(j, k)| j != k && b.weight(j, k).is_some())
                .count();
            closed as f64 / (d * (d - 1)) as f64
        })
        .sum();
    total / b.len() as f64
}

/// f(g) = deg(g) + 2 clust(g).
pub fn degree_clustering_score(b: &Ball) -> f64 {
    avg_degree(b) + 2.0 * avg_clustering(b)
}

/// Additive noise with inverse-CDF sampling.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Uniform { lo: f64, hi: f64 },
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }
}

/// U[-5, 5], the noise of the degree/clustering design.
pub const APPC_NOISE: Noise = Noise::Uniform { lo: -5.0, hi: 5.0 };

/// Noise-free degree/clustering outcome `α₁ f(G¹) + α₂ f(G²)` for `agent`.
pub fn appc_signal(g: &CommunityGraph, agent: usize, alpha: (f64, f64)) -> f64 {
    let dist = g.distances_from(agent);
    alpha.0 * score_within(g, &dist, 1) + alpha.1 * score_within(g, &dist, 2)
}

/// f on the ball of radius `r` without materializing it.
fn score_within(g: &CommunityGraph, dist: &[Option<u64>], r: u64) -> f64 {
    let inside = |v: usize| dist[v].is_some_and(|d| d <= r);
    let (mut n, mut links, mut clust) = (0usize, 0usize, 0.0);
    let mut nbrs = Vec::new();
    for u in (0..g.len()).filter(|&u| inside(u)) {
        n += 1;
        nbrs.clear();
        nbrs.extend(g.out_edges(u).iter().map(|&(v, _)| v).filter(|&v| inside(v)));
        links += nbrs.len();
        let d = nbrs.len();
        if d >= 2 {
            let closed = nbrs
                .iter()
                .flat_map(|&j| nbrs.iter().map(move |&k| (j, k)))
                .filter(|&(j, k)| j != k && g.weight(j, k).is_some())
                .count();
            clust += closed as f64 / (d * (d - 1)) as f64;
        }
    }
    links as f64 / n as f64 + 2.0 * clust / n as f64
}

/// The same signal evaluated on a query rooted network.
pub fn appc_signal_ball(b: &Ball, alpha: (f64, f64)) -> f64 {
    alpha.0 * degree_clustering_score(&b.truncate(1)) + alpha.1 * degree_clustering_score(&b.truncate(2))
}

/// `Y = α₁ f(G¹) + α₂ f(G²) + U`, `U ~ noise`.
pub fn outcome_appc<R: Rng + ?Sized>(
    g: &CommunityGraph,
    agent: usize,
    alpha: (f64, f64),
    noise: Noise,
    rng: &mut R,
) -> f64 {
    appc_signal(g, agent, alpha) + noise.sample(rng)
}

/// Outcomes for every agent of `g` in agent order.
pub fn appc_outcomes<R: Rng + ?Sized>(g: &CommunityGraph, alpha: (f64, f64), noise: Noise, rng: &mut R) -> Vec<f64> {
    (0..g.len()).map(|i| outcome_appc(g, i, alpha, noise, rng)).collect()
}

/// Linear neighbourhood-spillover response `a·T_i + b·T_i(r) + U`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpilloverParams {
    pub radius: u64,
    pub own: f64,
    pub neighborhood: f64,
}

impl Default for SpilloverParams {
    fn default() -> Self {
        SpilloverParams { radius: 1, own: 1.0, neighborhood: 0.5 }
    }
}

pub fn outcome_spillovers<R: Rng + ?Sized>(
    g: &CommunityGraph,
    agent: usize,
    treat: &[f64],
    params: SpilloverParams,
    noise: Noise,
    rng: &mut R,
) -> Result<f64> {
    check_len(g, treat)?;
    let dist = g.distances_from(agent);
    let count: f64 =
        dist.iter().zip(treat).filter(|(d, _)| d.is_some_and(|d| d <= params.radius)).map(|(_, &t)| t).sum();
    Ok(params.own * treat[agent] + params.neighborhood * count + noise.sample(rng))
}

/// Number of agents `j` (including `agent`) whose closed 1-neighbourhood
/// meets that of `agent`.
pub fn monitored_count(g: &CommunityGraph, agent: usize) -> usize {
    let near = |i: usize| -> Vec<bool> { g.distances_from(i).iter().map(|d| d.is_some_and(|d| d <= 1)).collect() };
    let mine = near(agent);
    (0..g.len()).filter(|&j| near(j).iter().zip(&mine).any(|(&x, &y)| x && y)).count()
}

/// Social-capital outcome: `monitored_count · U`.
pub fn outcome_social_capital<R: Rng + ?Sized>(g: &CommunityGraph, agent: usize, noise: Noise, rng: &mut R) -> f64 {
    monitored_count(g, agent) as f64 * noise.sample(rng)
}

/// Result of the truncated linear-in-means series.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInMeans {
    pub outcomes: Vec<f64>,
    /// Max row sum of the row-normalized adjacency; bounds its spectral radius.
    pub rho: f64,
    /// `M (|δ|ρ)^(S+1) / (1 - |δ|ρ)` with `M = max_i |T_i β + T*_i(1) γ|`.
    pub tail_bound: f64,
}

/// `Y = Σ_{s=0}^{S} δ^s A*^s (T β + T*(1) γ) + U`, where `A*_ij` is
/// `1{0 < D_ij <= 1} / N_i(1)` and `T*_i(1) = T_i(1) / N_i(1)`.
#[allow(clippy::too_many_arguments)]
pub fn outcome_linear_in_means<R: Rng + ?Sized>(
    g: &CommunityGraph,
    treat: &[f64],
    delta: f64,
    beta: f64,
    gamma: f64,
    terms: usize,
    noise: Noise,
    rng: &mut R,
) -> Result<LinearInMeans> {
    check_len(g, treat)?;
    let n = g.len();
    let close: Vec<Vec<usize>> =
        (0..n).map(|i| g.out_edges(i).iter().filter(|&&(_, w)| w <= 1).map(|&(j, _)| j).collect()).collect();
    let size: Vec<f64> = close.iter().map(|c| (c.len() + 1) as f64).collect();
    let rho = close.iter().zip(&size).map(|(c, s)| c.len() as f64 / s).fold(0.0, f64::max);
    if delta.abs() * rho >= 1.0 {
        return Err(Error::Config(format!("|delta| * rho = {} must be below 1", delta.abs() * rho)));
    }
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let t1: f64 = treat[i] + close[i].iter().map(|&j| treat[j]).sum::<f64>();
            treat[i] * beta + t1 / size[i] * gamma
        })
        .collect();
    let m = base.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut term = base.clone();
    let mut total = base;
    for _ in 0..terms {
        term = (0..n).map(|i| delta * close[i].iter().map(|&j| term[j]).sum::<f64>() / size[i]).collect();
        for (t, x) in total.iter_mut().zip(&term) {
            *t += x;
        }
    }
    let q = delta.abs() * rho;
    let tail_bound = m * q.powi(terms as i32 + 1) / (1.0 - q);
    let outcomes = total.into_iter().map(|y| y + noise.sample(rng)).collect();
    Ok(LinearInMeans { outcomes, rho, tail_bound })
}

fn check_len(g: &CommunityGraph, treat: &[f64]) -> Result<()> {
    if treat.len() != g.len() {
        return Err(Error::input(format!("{} treatments for {} agents", treat.len(), g.len())));
    }
    Ok(())
}

/// Number of links of `agent` monitored by a common neighbour.
pub fn support(g: &CommunityGraph, agent: usize) -> usize {
    g.out_edges(agent)
        .iter()
        .filter(|&&(j, _)| g.out_edges(agent).iter().any(|&(k, _)| k != j && g.weight(j, k).is_some()))
        .count()
}
