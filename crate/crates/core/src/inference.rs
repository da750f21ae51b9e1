//! k-nearest-neighbour estimation of average and distributional structural
//! functions, regularity curves ψ̂, and the MSE bound calculator.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Ball, CommunityGraph, Dataset};
use crate::metric::{CommunityBalls, Metric};
use crate::rng::{SeedStreams, StreamRng};

/// The agent of one community selected as nearest to a query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Match {
    pub community: usize,
    pub agent: usize,
    pub id: Arc<str>,
    pub distance: f64,
    pub outcome: Option<f64>,
}

impl Match {
    fn required_outcome(&self) -> Result<f64> {
        self.outcome.ok_or_else(|| {
            Error::input(format!("selected agent `{}` of community {} has no outcome", self.id, self.community))
        })
    }
}

/// Nearest agent of every listed community, ties broken uniformly from the
/// stream `(label, community index)`. Output follows `communities` order.
pub fn nearest_representatives(
    metric: &Metric,
    ds: &Dataset,
    communities: &[usize],
    query: &Ball,
    streams: &SeedStreams,
    label: &str,
) -> Result<Vec<Match>> {
    communities
        .par_iter()
        .map(|&c| {
            let g = ds.communities().get(c).ok_or_else(|| Error::input(format!("community index {c} out of range")))?;
            nearest_match(metric, g, c, query, &mut streams.stream(label, c as u64))
        })
        .collect()
}

fn nearest_match(metric: &Metric, g: &CommunityGraph, c: usize, query: &Ball, rng: &mut StreamRng) -> Result<Match> {
    let set = metric.nearest_set(&CommunityBalls::for_queries(g, &[query]), query)?;
    let agent = set.pick(rng);
    Ok(Match { community: c, agent, id: g.ids()[agent].clone(), distance: set.distance, outcome: g.outcome(agent) })
}

/// Stable order by distance; equal distances are shuffled uniformly.
pub fn order_by_distance<R: Rng + ?Sized>(matches: &mut Vec<Match>, rng: &mut R) {
    let mut keyed: Vec<(u64, Match)> = matches.drain(..).map(|m| (rng.random::<u64>(), m)).collect();
    keyed.sort_by(|(ka, a), (kb, b)| a.distance.total_cmp(&b.distance).then(ka.cmp(kb)));
    matches.extend(keyed.into_iter().map(|(_, m)| m));
}

/// All `C` representatives for `query`, ordered by distance.
pub fn ranked_representatives(
    metric: &Metric,
    ds: &Dataset,
    query: &Ball,
    streams: &SeedStreams,
) -> Result<Vec<Match>> {
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut reps = nearest_representatives(metric, ds, &all, query, streams, "knn-nearest")?;
    order_by_distance(&mut reps, &mut streams.stream("knn-order", 0));
    Ok(reps)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub h_hat: f64,
    pub k: usize,
    /// The k selected neighbours, nearest first.
    pub neighbors: Vec<Match>,
    #[serde(skip)]
    pub query: Ball,
}

impl EstimateResult {
    pub fn outcomes(&self) -> Vec<f64> {
        self.neighbors.iter().map(|m| m.outcome.expect("checked on selection")).collect()
    }
}

fn check_k(k: usize, c: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::input("k must be positive"));
    }
    if k > c {
        return Err(Error::input(format!("k = {k} exceeds the number of communities C = {c}")));
    }
    Ok(())
}

fn select(metric: &Metric, ds: &Dataset, query: &Ball, k: usize, streams: &SeedStreams) -> Result<Vec<Match>> {
    check_k(k, ds.len())?;
    let mut reps = ranked_representatives(metric, ds, query, streams)?;
    reps.truncate(k);
    for m in &reps {
        m.required_outcome()?;
    }
    Ok(reps)
}

/// ĥ(g): mean outcome of the k communities' nearest agents.
pub fn knn_estimate(
    metric: &Metric,
    ds: &Dataset,
    query: &Ball,
    k: usize,
    streams: &SeedStreams,
) -> Result<EstimateResult> {
    let neighbors = select(metric, ds, query, k, streams)?;
    let h_hat = neighbors.iter().map(|m| m.outcome.expect("checked")).sum::<f64>() / k as f64;
    Ok(EstimateResult { h_hat, k, neighbors, query: query.clone() })
}

/// ĥ_y(g): fraction of the k selected outcomes at most `y`.
pub fn knn_cdf(metric: &Metric, ds: &Dataset, query: &Ball, k: usize, y: f64, streams: &SeedStreams) -> Result<f64> {
    let neighbors = select(metric, ds, query, k, streams)?;
    let below = neighbors.iter().filter(|m| m.outcome.expect("checked") <= y).count();
    Ok(below as f64 / k as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyEffect {
    pub first: EstimateResult,
    pub second: EstimateResult,
    /// ĥ(g′) − ĥ(g).
    pub effect: f64,
}

/// Both estimates draw their tie-breaks from the same streams.
pub fn policy_effect(
    metric: &Metric,
    ds: &Dataset,
    g: &Ball,
    g_prime: &Ball,
    k: usize,
    streams: &SeedStreams,
) -> Result<PolicyEffect> {
    let first = knn_estimate(metric, ds, g, k, streams)?;
    let second = knn_estimate(metric, ds, g_prime, k, streams)?;
    let effect = second.h_hat - first.h_hat;
    Ok(PolicyEffect { first, second, effect })
}

/// Sample variance of the selected outcomes; `None` below two neighbours.
pub fn plugin_sigma2(est: &EstimateResult) -> Option<f64> {
    let ys = est.outcomes();
    if ys.len() < 2 {
        return None;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Some(ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64)
}

/// Empirical regularity curve: ψ̂(ℓ) is the fraction of samples at most ℓ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCurve {
    samples: Vec<f64>,
}

impl PsiCurve {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("a ψ curve needs at least one sample"));
        }
        if let Some(bad) = samples.iter().find(|s| !(0.0..=2.0).contains(*s)) {
            return Err(Error::input(format!("distance sample {bad} outside [0, 2]")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(PsiCurve { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eval(&self, l: f64) -> f64 {
        self.samples.partition_point(|&s| s <= l) as f64 / self.samples.len() as f64
    }

    /// ψ̂†(x) = sup{ℓ : ψ̂(ℓ) ≤ x}, capped at 2.
    pub fn dagger(&self, x: f64) -> f64 {
        let n = self.samples.len();
        if x < 0.0 {
            return 0.0;
        }
        // Largest m with m/n <= x; the sup is then s_{m+1}.
        let mut m = ((x * n as f64).floor() as usize).min(n);
        while m > 0 && m as f64 / n as f64 > x {
            m -= 1;
        }
        while m < n && (m + 1) as f64 / n as f64 <= x {
            m += 1;
        }
        if m >= n {
            2.0
        } else {
            self.samples[m].min(2.0)
        }
    }

    /// `(ℓ, ψ̂(ℓ))` at every distinct sample value, for plotting.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &s in &self.samples {
            if out.last().is_some_and(|&(l, _)| l == s) {
                continue;
            }
            out.push((s, self.eval(s)));
        }
        out
    }
}

/// ψ̂ from observed communities: one minimum distance per community.
pub fn psi_from_dataset(metric: &Metric, ds: &Dataset, query: &Ball) -> Result<PsiCurve> {
    let samples = ds
        .communities()
        .par_iter()
        .map(|g| Ok(metric.nearest_set(&CommunityBalls::for_queries(g, &[query]), query)?.distance))
        .collect::<Result<Vec<f64>>>()?;
    PsiCurve::new(samples)
}

/// ψ̂ from `draws` generated communities; draw `i` uses stream `("psi", i)`.
pub fn psi_from_generator<F>(
    metric: &Metric,
    query: &Ball,
    draws: usize,
    streams: &SeedStreams,
    generate: F,
) -> Result<PsiCurve>
where
    F: Fn(&mut StreamRng) -> Result<CommunityGraph> + Sync,
{
    if draws == 0 {
        return Err(Error::input("at least one draw is required"));
    }
    let samples = (0..draws)
        .into_par_iter()
        .map(|i| {
            let g = generate(&mut streams.stream("psi", i as u64))?;
            Ok(metric.nearest_set(&CommunityBalls::for_queries(&g, &[query]), query)?.distance)
        })
        .collect::<Result<Vec<f64>>>()?;
    PsiCurve::new(samples)
}

/// Modulus of continuity φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PhiSpec {
    /// `M·1{x > 1/(1+r)}`.
    Indicator { m: f64, r: f64 },
    /// `M (δρ)^((1−x)/x) / (1 − δρ)` for `x > 0`, 0 at 0.
    Geometric { m: f64, delta_rho: f64 },
    /// Piecewise-linear through `(0, 0)` and the listed points, constant
    /// beyond the last one.
    Tabulated { points: Vec<(f64, f64)> },
}

impl PhiSpec {
    pub fn zero() -> Self {
        PhiSpec::Tabulated { points: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            PhiSpec::Indicator { m, r } => {
                if !(m.is_finite() && *m >= 0.0 && r.is_finite() && *r >= 0.0) {
                    return bad(format!("indicator φ needs M >= 0 and r >= 0, got M = {m}, r = {r}"));
                }
            }
            PhiSpec::Geometric { m, delta_rho } => {
                if !(m.is_finite() && *m >= 0.0 && (0.0..1.0).contains(delta_rho)) {
                    return bad(format!("geometric φ needs M >= 0 and δρ in [0, 1), got M = {m}, δρ = {delta_rho}"));
                }
            }
            PhiSpec::Tabulated { points } => {
                let mut prev = (0.0, 0.0);
                for (i, &(x, y)) in points.iter().enumerate() {
                    if !(x.is_finite() && y.is_finite()) {
                        return bad(format!("tabulated φ point {i} is not finite"));
                    }
                    let first_at_zero = i == 0 && x == 0.0 && y == 0.0;
                    if !first_at_zero && (x <= prev.0 || y < prev.1) {
                        return bad(format!(
                            "tabulated φ must have increasing x > 0 and nondecreasing values (point {i})"
                        ));
                    }
                    prev = (x, y);
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PhiSpec::Indicator { m, r } => {
                if x > 1.0 / (1.0 + r) {
                    *m
                } else {
                    0.0
                }
            }
            PhiSpec::Geometric { m, delta_rho } => {
                if x <= 0.0 {
                    0.0
                } else {
                    m * delta_rho.powf((1.0 - x) / x) / (1.0 - delta_rho)
                }
            }
            PhiSpec::Tabulated { points } => {
                let mut prev = (0.0, 0.0);
                for &(px, py) in points {
                    if x <= px {
                        if px == prev.0 {
                            return py;
                        }
                        return prev.1 + (py - prev.1) * (x - prev.0) / (px - prev.0);
                    }
                    prev = (px, py);
                }
                if x <= 0.0 {
                    0.0
                } else {
                    prev.1
                }
            }
        }
    }
}

/// `variance_term + bias_term`, kept apart for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub variance_term: f64,
    pub bias_term: f64,
    pub total: f64,
}

fn check_bound_inputs(sigma2: f64, k: usize, c: usize, mc_draws: usize) -> Result<()> {
    check_k(k, c)?;
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::input(format!("σ² must be a non-negative number, got {sigma2}")));
    }
    if mc_draws == 0 {
        return Err(Error::input("at least one Monte Carlo draw is required"));
    }
    Ok(())
}

/// Draws of `U ~ Beta(k, C−k+1)` as `X/(X+Y)` with Gamma variates.
fn beta_draws<R: Rng + ?Sized>(k: usize, c: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let x = Gamma::new(k as f64, 1.0).expect("positive shape");
    let y = Gamma::new((c - k + 1) as f64, 1.0).expect("positive shape");
    (0..n)
        .map(|_| {
            let a = x.sample(rng);
            let b = y.sample(rng);
            a / (a + b)
        })
        .collect()
}

/// `σ²/k + E[φ(ψ†(U))²]`, `U ~ Beta(k, C−k+1)`, by Monte Carlo.
#[allow(clippy::too_many_arguments)]
pub fn mse_bound<R: Rng + ?Sized>(
    phi: &PhiSpec,
    psi: &PsiCurve,
    sigma2: f64,
    k: usize,
    c: usize,
    mc_draws: usize,
    rng: &mut R,
) -> Result<Bound> {
    check_bound_inputs(sigma2, k, c, mc_draws)?;
    phi.validate()?;
    let u = beta_draws(k, c, mc_draws, rng);
    let bias_term = u.iter().map(|&u| phi.eval(psi.dagger(u)).powi(2)).sum::<f64>() / mc_draws as f64;
    let variance_term = sigma2 / k as f64;
    Ok(Bound { variance_term, bias_term, total: variance_term + bias_term })
}

/// `4σ²/k + 4E[max(φ_g(ψ_g†(U)), φ_g′(ψ_g′†(U)))²]`.
#[allow(clippy::too_many_arguments)]
pub fn effect_bound<R: Rng + ?Sized>(
    phi_g: &PhiSpec,
    phi_gp: &PhiSpec,
    psi_g: &PsiCurve,
    psi_gp: &PsiCurve,
    sigma2: f64,
    k: usize,
    c: usize,
    mc_draws: usize,
    rng: &mut R,
) -> Result<Bound> {
    check_bound_inputs(sigma2, k, c, mc_draws)?;
    phi_g.validate()?;
    phi_gp.validate()?;
    let u = beta_draws(k, c, mc_draws, rng);
    let bias = u.iter().map(|&u| phi_g.eval(psi_g.dagger(u)).max(phi_gp.eval(psi_gp.dagger(u))).powi(2)).sum::<f64>()
        / mc_draws as f64;
    let variance = sigma2 / k as f64;
    Ok(Bound { variance_term: 4.0 * variance, bias_term: 4.0 * bias, total: 4.0 * (variance + bias) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::full_ball;
    use crate::sim::fixtures::fixture;

    fn with_outcome(ball: &Ball, y: f64) -> CommunityGraph {
        let mut g = ball.to_community();
        g.set_outcomes(&vec![y; g.len()]).unwrap();
        g
    }

    fn exact_copies(query: &Ball, ys: &[f64]) -> Dataset {
        Dataset::new(ys.iter().map(|&y| with_outcome(query, y)).collect()).unwrap()
    }

    #[test]
    fn single_community_k1() {
        let q = fixture("g3").unwrap();
        let ds = exact_copies(&q, &[4.5]);
        let est = knn_estimate(&Metric::new(), &ds, &q, 1, &SeedStreams::new(1)).unwrap();
        assert_eq!(est.h_hat, 4.5);
        assert_eq!(est.neighbors[0].distance, 0.0);
    }

    #[test]
    fn exact_copies_average_all() {
        let q = fixture("g4").unwrap();
        let ds = exact_copies(&q, &[1.0, 2.0, 3.0, 4.0]);
        let metric = Metric::new();
        let s = SeedStreams::new(9);
        assert_eq!(knn_estimate(&metric, &ds, &q, 4, &s).unwrap().h_hat, 2.5);
        assert_eq!(knn_cdf(&metric, &ds, &q, 4, 2.0, &s).unwrap(), 0.5);
        assert_eq!(knn_cdf(&metric, &ds, &q, 4, 1e9, &s).unwrap(), 1.0);
    }

    #[test]
    fn k_out_of_range() {
        let q = fixture("g3").unwrap();
        let ds = exact_copies(&q, &[1.0, 2.0]);
        let metric = Metric::new();
        assert!(knn_estimate(&metric, &ds, &q, 3, &SeedStreams::new(0)).is_err());
        assert!(knn_estimate(&metric, &ds, &q, 0, &SeedStreams::new(0)).is_err());
    }

    #[test]
    fn missing_outcome_on_selected_agent() {
        let q = fixture("g3").unwrap();
        let ds = Dataset::new(vec![q.to_community()]).unwrap();
        let err = knn_estimate(&Metric::new(), &ds, &q, 1, &SeedStreams::new(0)).unwrap_err();
        assert!(err.to_string().contains("no outcome"), "{err}");
    }

    #[test]
    fn neighbours_are_sorted_by_distance() {
        let q = fixture("knife").unwrap();
        let comms =
            ["g1", "fork", "knife", "g6", "spoon"].iter().map(|n| with_outcome(&fixture(n).unwrap(), 1.0)).collect();
        let ds = Dataset::new(comms).unwrap();
        let est = knn_estimate(&Metric::new(), &ds, &q, 5, &SeedStreams::new(3)).unwrap();
        let d: Vec<f64> = est.neighbors.iter().map(|m| m.distance).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
        assert_eq!(d[0], 0.0);
        assert_eq!(est.neighbors[0].community, 2);
    }

    #[test]
    fn identical_queries_have_zero_effect() {
        let q = fixture("g4").unwrap();
        let ds = Dataset::new(
            ["g3", "g4", "g5", "g6"]
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let mut g = fixture(n).unwrap().to_community();
                    g.set_outcomes(&(0..g.len()).map(|j| (i * 10 + j) as f64).collect::<Vec<_>>()).unwrap();
                    g
                })
                .collect(),
        )
        .unwrap();
        let eff = policy_effect(&Metric::new(), &ds, &q, &q, 3, &SeedStreams::new(5)).unwrap();
        assert_eq!(eff.effect, 0.0);
    }

    #[test]
    fn plugin_variance() {
        let q = fixture("g3").unwrap();
        let ds = exact_copies(&q, &[1.0, 2.0, 3.0]);
        let est = knn_estimate(&Metric::new(), &ds, &q, 3, &SeedStreams::new(0)).unwrap();
        assert_eq!(plugin_sigma2(&est), Some(1.0));
        let one = knn_estimate(&Metric::new(), &ds, &q, 1, &SeedStreams::new(0)).unwrap();
        assert_eq!(plugin_sigma2(&one), None);
    }

    #[test]
    fn tie_breaks_are_roughly_uniform() {
        let q = full_ball(&CommunityGraph::unweighted(1, &[]).unwrap(), 0);
        let ds = exact_copies(&q, &[0.0, 1.0, 2.0, 3.0]);
        let metric = Metric::new();
        let mut counts = [0usize; 4];
        for seed in 0..4000 {
            let est = knn_estimate(&metric, &ds, &q, 1, &SeedStreams::new(seed)).unwrap();
            counts[est.h_hat as usize] += 1;
        }
        for c in counts {
            assert!((800..1200).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn psi_step_function() {
        let psi = PsiCurve::new(vec![0.5, 0.0, 0.5, 1.0]).unwrap();
        assert_eq!(psi.eval(-0.1), 0.0);
        assert_eq!(psi.eval(0.0), 0.25);
        assert_eq!(psi.eval(0.49), 0.25);
        assert_eq!(psi.eval(0.5), 0.75);
        assert_eq!(psi.eval(2.0), 1.0);
        assert_eq!(psi.steps(), vec![(0.0, 0.25), (0.5, 0.75), (1.0, 1.0)]);
        assert!(PsiCurve::new(vec![]).is_err());
        assert!(PsiCurve::new(vec![2.5]).is_err());
    }

    #[test]
    fn psi_dagger_is_the_upper_inverse() {
        let psi = PsiCurve::new(vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(psi.dagger(0.1), 0.0);
        assert_eq!(psi.dagger(0.25), 0.5);
        assert_eq!(psi.dagger(0.6), 0.5);
        assert_eq!(psi.dagger(0.75), 1.0);
        assert_eq!(psi.dagger(0.99), 1.0);
        assert_eq!(psi.dagger(1.0), 2.0);
        // Brute-force sup over a fine grid.
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let grid_sup = (0..=2000).map(|j| j as f64 / 1000.0).filter(|&l| psi.eval(l) <= x).fold(0.0, f64::max);
            assert!((psi.dagger(x) - grid_sup).abs() <= 2e-3, "x = {x}");
        }
    }

    #[test]
    fn psi_of_exact_copies() {
        let q = fixture("g6").unwrap();
        let metric = Metric::new();
        let psi = psi_from_generator(&metric, &q, 20, &SeedStreams::new(0), |_| Ok(q.to_community())).unwrap();
        assert_eq!(psi.eval(0.0), 1.0);
        let ds = exact_copies(&q, &[1.0; 3]);
        assert_eq!(psi_from_dataset(&metric, &ds, &q).unwrap().eval(0.0), 1.0);
    }

    #[test]
    fn phi_families() {
        let ind = PhiSpec::Indicator { m: 2.0, r: 1.0 };
        assert_eq!((ind.eval(0.5), ind.eval(0.51)), (0.0, 2.0));
        let geo = PhiSpec::Geometric { m: 1.0, delta_rho: 0.5 };
        assert_eq!(geo.eval(0.0), 0.0);
        assert_eq!(geo.eval(1.0), 2.0);
        assert_eq!(geo.eval(0.5), 1.0);
        let tab = PhiSpec::Tabulated { points: vec![(0.5, 1.0), (1.0, 3.0)] };
        assert_eq!(tab.eval(0.0), 0.0);
        assert_eq!(tab.eval(0.25), 0.5);
        assert_eq!(tab.eval(0.75), 2.0);
        assert_eq!(tab.eval(1.7), 3.0);
        assert_eq!(PhiSpec::zero().eval(1.3), 0.0);
        assert!(PhiSpec::Tabulated { points: vec![(0.5, 1.0), (0.4, 2.0)] }.validate().is_err());
        assert!(PhiSpec::Tabulated { points: vec![(0.5, 1.0), (0.6, 0.5)] }.validate().is_err());
        assert!(PhiSpec::Geometric { m: 1.0, delta_rho: 1.0 }.validate().is_err());
        assert!(tab.validate().is_ok());
    }

    #[test]
    fn phi_serde_round_trip() {
        let spec = PhiSpec::Indicator { m: 1.0, r: 2.0 };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"family":"indicator","m":1.0,"r":2.0}"#);
        assert_eq!(serde_json::from_str::<PhiSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn zero_phi_bound_is_variance_only() {
        let psi = PsiCurve::new(vec![0.3, 0.9]).unwrap();
        let mut rng = SeedStreams::new(0).stream("t", 0);
        let b = mse_bound(&PhiSpec::zero(), &psi, 3.0, 4, 10, 100, &mut rng).unwrap();
        assert_eq!(b.total, 0.75);
        assert_eq!(b.bias_term, 0.0);
        let e = effect_bound(&PhiSpec::zero(), &PhiSpec::zero(), &psi, &psi, 3.0, 4, 10, 100, &mut rng).unwrap();
        assert_eq!(e.total, 3.0);
        assert!(mse_bound(&PhiSpec::zero(), &psi, 1.0, 11, 10, 100, &mut rng).is_err());
    }

    #[test]
    fn effect_of_identical_inputs_is_four_times_mse() {
        let psi = PsiCurve::new(vec![0.0, 0.25, 0.5, 1.0, 1.0]).unwrap();
        let phi = PhiSpec::Geometric { m: 1.5, delta_rho: 0.4 };
        let s = SeedStreams::new(21);
        let b = mse_bound(&phi, &psi, 2.0, 3, 8, 5000, &mut s.stream("mc", 0)).unwrap();
        let e = effect_bound(&phi, &phi, &psi, &psi, 2.0, 3, 8, 5000, &mut s.stream("mc", 0)).unwrap();
        assert_eq!(e.total, 4.0 * b.total);
    }

    #[test]
    fn indicator_bound_against_beta_tail() {
        // ψ̂ jumps from 0 to 1/2 at 0.2 and to 1 at 0.8. With r = 1 the
        // indicator fires when ψ†(U) = 0.8, i.e. U >= 1/2. For k = 1, C = 2,
        // U ~ Beta(1, 2) and P(U >= 1/2) = (1/2)^2.
        let psi = PsiCurve::new(vec![0.2, 0.8]).unwrap();
        let phi = PhiSpec::Indicator { m: 1.0, r: 1.0 };
        let mut rng = SeedStreams::new(4).stream("mc", 0);
        let b = mse_bound(&phi, &psi, 0.0, 1, 2, 1_000_000, &mut rng).unwrap();
        assert!((b.bias_term - 0.25).abs() < 0.003, "{}", b.bias_term);
    }

    #[test]
    fn bound_components_are_monotone_in_k() {
        let psi = PsiCurve::new((0..50).map(|i| i as f64 / 49.0).collect()).unwrap();
        let phi = PhiSpec::Tabulated { points: vec![(1.0, 1.0)] };
        let mut last = (f64::INFINITY, 0.0);
        for k in [1, 5, 10, 20, 40] {
            let b = mse_bound(&phi, &psi, 1.0, k, 40, 20_000, &mut SeedStreams::new(1).stream("mc", k as u64)).unwrap();
            assert!(b.variance_term < last.0);
            assert!(b.bias_term >= last.1 - 1e-3, "k = {k}");
            last = (b.variance_term, b.bias_term);
        }
    }
}
