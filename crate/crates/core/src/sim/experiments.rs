//! Monte Carlo harness: rejection rates of the permutation test, MSE of the
//! k-NN estimator and ψ̂ curves on Erdős–Rényi communities.
//!
//! Replication `r` draws everything from `streams.child("replication", r)`;
//! community `c` of a replication is generated from its `("community", c)`
//! stream, so tables do not depend on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixtures::fixture;
use super::models::{
    appc_outcomes, appc_signal_ball, gen_er, monitored_count, outcome_linear_in_means, outcome_social_capital,
    outcome_spillovers, Noise, SpilloverParams, APPC_NOISE,
};
use crate::error::{Error, Result};
use crate::graph::{Ball, CommunityGraph, Dataset};
use crate::inference::{psi_from_generator, ranked_representatives, PsiCurve};
use crate::metric::Metric;
use crate::permtest::{test_policy_irrelevance, PermutationMode, DEFAULT_PERMUTATIONS};
use crate::rng::{SeedStreams, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Appc {
        alpha: (f64, f64),
    },
    Spillovers {
        #[serde(flatten)]
        params: SpilloverParams,
    },
    SocialCapital,
    LinearInMeans {
        delta: f64,
        beta: f64,
        gamma: f64,
        terms: usize,
    },
}

impl ModelSpec {
    fn default_noise(&self) -> Noise {
        match self {
            ModelSpec::Appc { .. } => APPC_NOISE,
            ModelSpec::SocialCapital => Noise::Uniform { lo: 0.0, hi: 2.0 },
            ModelSpec::Spillovers { .. } | ModelSpec::LinearInMeans { .. } => Noise::Uniform { lo: -1.0, hi: 1.0 },
        }
    }

    fn treated(&self) -> bool {
        matches!(self, ModelSpec::Spillovers { .. } | ModelSpec::LinearInMeans { .. })
    }
}

fn default_n_agents() -> usize {
    20
}

fn default_edge_prob() -> f64 {
    0.1
}

fn default_treat_prob() -> f64 {
    0.5
}

/// Community-generating process shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_n_agents")]
    pub n_agents: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    pub model: ModelSpec,
    /// Defaults per model: U[−5,5] for appc, U[0,2] for social capital and
    /// U[−1,1] otherwise.
    #[serde(default)]
    pub noise: Option<Noise>,
    /// Bernoulli treatment probability for the treated models; the
    /// treatment is the single covariate.
    #[serde(default = "default_treat_prob")]
    pub treat_prob: f64,
}

impl SimConfig {
    pub fn appc(alpha: (f64, f64)) -> Self {
        SimConfig {
            n_agents: default_n_agents(),
            edge_prob: default_edge_prob(),
            model: ModelSpec::Appc { alpha },
            noise: None,
            treat_prob: default_treat_prob(),
        }
    }

    pub fn noise(&self) -> Noise {
        self.noise.unwrap_or_else(|| self.model.default_noise())
    }

    pub fn covariate_dim(&self) -> usize {
        usize::from(self.model.treated())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Config(format!("edge_prob {} outside [0, 1]", self.edge_prob)));
        }
        if !(0.0..=1.0).contains(&self.treat_prob) {
            return Err(Error::Config(format!("treat_prob {} outside [0, 1]", self.treat_prob)));
        }
        if let Some(Noise::Uniform { lo, hi }) = self.noise {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("noise bounds [{lo}, {hi}] are invalid")));
            }
        }
        Ok(())
    }

    /// One community with outcomes.
    pub fn generate(&self, rng: &mut StreamRng) -> Result<CommunityGraph> {
        use rand::Rng;
        let mut g = gen_er(self.n_agents, self.edge_prob, rng)?;
        let noise = self.noise();
        let treat: Vec<f64> = if self.model.treated() {
            (0..g.len()).map(|_| f64::from(u8::from(rng.random::<f64>() < self.treat_prob))).collect()
        } else {
            Vec::new()
        };
        if self.model.treated() {
            let rows: Vec<Vec<f64>> = treat.iter().map(|&t| vec![t]).collect();
            g.set_covariates(1, &rows)?;
        }
        let ys = match &self.model {
            ModelSpec::Appc { alpha } => appc_outcomes(&g, *alpha, noise, rng),
            ModelSpec::Spillovers { params } => {
                (0..g.len()).map(|i| outcome_spillovers(&g, i, &treat, *params, noise, rng)).collect::<Result<_>>()?
            }
            ModelSpec::SocialCapital => (0..g.len()).map(|i| outcome_social_capital(&g, i, noise, rng)).collect(),
            ModelSpec::LinearInMeans { delta, beta, gamma, terms } => {
                outcome_linear_in_means(&g, &treat, *delta, *beta, *gamma, *terms, noise, rng)?.outcomes
            }
        };
        g.set_outcomes(&ys)?;
        Ok(g)
    }

    /// `C` communities from the streams `("community", c)`.
    pub fn dataset(&self, c: usize, streams: &SeedStreams) -> Result<Dataset> {
        let comms =
            (0..c).map(|i| self.generate(&mut streams.stream("community", i as u64))).collect::<Result<Vec<_>>>()?;
        Dataset::new(comms)
    }

    /// Noise-free h(g) at a query rooted network, where available.
    pub fn truth(&self, query: &Ball) -> Result<f64> {
        let noise_mean = match self.noise() {
            Noise::None => 0.0,
            Noise::Uniform { lo, hi } => (lo + hi) / 2.0,
        };
        match &self.model {
            ModelSpec::Appc { alpha } => Ok(appc_signal_ball(query, *alpha) + noise_mean),
            ModelSpec::SocialCapital => {
                let g = query.to_community();
                Ok(monitored_count(&g, 0) as f64 * noise_mean)
            }
            _ => Err(Error::Config("ground truth is only available for the appc and social_capital models".into())),
        }
    }
}

fn query_ball(name: &str) -> Result<Ball> {
    fixture(name).ok_or_else(|| Error::Config(format!("unknown fixture `{name}`")))
}

fn check_reps(replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    Ok(())
}

fn default_alpha() -> f64 {
    0.05
}

fn default_mode() -> PermutationMode {
    PermutationMode::Sampled(DEFAULT_PERMUTATIONS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePowerConfig {
    pub sim: SimConfig,
    /// Fixture names of the two rooted networks.
    pub g: String,
    pub g_prime: String,
    pub communities: Vec<usize>,
    pub q: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_mode")]
    pub permutations: PermutationMode,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RejectionRow {
    pub communities: usize,
    pub q: usize,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
}

/// Rejection frequency for every (C, q) pair; each replication draws one
/// dataset per C and runs the test for every q on it.
pub fn run_size_power(cfg: &SizePowerConfig, metric: &Metric, streams: &SeedStreams) -> Result<Vec<RejectionRow>> {
    cfg.sim.validate()?;
    check_reps(cfg.replications)?;
    let g = query_ball(&cfg.g)?;
    let gp = query_ball(&cfg.g_prime)?;
    let mut rows = Vec::new();
    for &c in &cfg.communities {
        if let Some(&q) = cfg.q.iter().find(|&&q| 2 * q > c) {
            return Err(Error::Config(format!("q = {q} needs at least {} communities, C = {c}", 2 * q)));
        }
        let counts = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let rep = streams.child(&format!("size-power-{c}"), r as u64);
                let ds = cfg.sim.dataset(c, &rep)?;
                cfg.q
                    .iter()
                    .map(|&q| {
                        let t = test_policy_irrelevance(
                            metric,
                            &ds,
                            &g,
                            &gp,
                            q,
                            cfg.alpha,
                            cfg.permutations,
                            &rep.child("test", q as u64),
                        )?;
                        Ok(usize::from(t.reject))
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .try_reduce(|| vec![0; cfg.q.len()], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
        for (&q, &rejections) in cfg.q.iter().zip(&counts) {
            rows.push(RejectionRow {
                communities: c,
                q,
                replications: cfg.replications,
                rejections,
                rate: rejections as f64 / cfg.replications as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseConfig {
    pub sim: SimConfig,
    pub query: String,
    pub communities: Vec<usize>,
    pub k: Vec<usize>,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRow {
    pub communities: usize,
    pub k: usize,
    pub replications: usize,
    pub truth: f64,
    pub mse: f64,
    pub bias: f64,
}

/// MSE of ĥ(g) against the analytic h(g). Pairs with k > C are skipped.
pub fn run_mse(cfg: &MseConfig, metric: &Metric, streams: &SeedStreams) -> Result<Vec<MseRow>> {
    cfg.sim.validate()?;
    check_reps(cfg.replications)?;
    let query = query_ball(&cfg.query)?;
    if query.covariate_dim() != cfg.sim.covariate_dim() {
        return Err(Error::Config("the query fixture must match the model's covariate dimension".into()));
    }
    let truth = cfg.sim.truth(&query)?;
    let mut rows = Vec::new();
    for &c in &cfg.communities {
        let ks: Vec<usize> = cfg.k.iter().copied().filter(|&k| k >= 1 && k <= c).collect();
        if ks.is_empty() {
            continue;
        }
        // Per replication, the estimate for every k is a prefix mean of the
        // ranked representatives.
        let sums = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let rep = streams.child(&format!("mse-{c}"), r as u64);
                let ds = cfg.sim.dataset(c, &rep)?;
                let ranked = ranked_representatives(metric, &ds, &query, &rep)?;
                let ys: Vec<f64> = ranked.iter().map(|m| m.outcome.expect("simulated outcomes")).collect();
                Ok(ks
                    .iter()
                    .map(|&k| {
                        let err = ys[..k].iter().sum::<f64>() / k as f64 - truth;
                        (err * err, err)
                    })
                    .collect::<Vec<_>>())
            })
            .try_reduce(
                || vec![(0.0, 0.0); ks.len()],
                |a, b| Ok(a.iter().zip(&b).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect()),
            )?;
        for (&k, &(se, e)) in ks.iter().zip(&sums) {
            rows.push(MseRow {
                communities: c,
                k,
                replications: cfg.replications,
                truth,
                mse: se / cfg.replications as f64,
                bias: e / cfg.replications as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiConfig {
    #[serde(default = "default_n_agents")]
    pub n_agents: usize,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    pub queries: Vec<String>,
    pub draws: usize,
}

/// ψ̂ for every query fixture over `draws` Erdős–Rényi communities.
pub fn run_psi(cfg: &PsiConfig, metric: &Metric, streams: &SeedStreams) -> Result<Vec<(String, PsiCurve)>> {
    cfg.queries
        .iter()
        .map(|name| {
            let query = query_ball(name)?;
            if query.covariate_dim() != 0 {
                return Err(Error::Config(format!("fixture `{name}` carries covariates; ER draws have none")));
            }
            let curve =
                psi_from_generator(metric, &query, cfg.draws, streams, |rng| gen_er(cfg.n_agents, cfg.edge_prob, rng))?;
            Ok((name.clone(), curve))
        })
        .collect()
}
