//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own PASS/FAIL line.

mod common;

use std::time::Instant;

use common::{brute_distance, perturbed, random_net, random_pair};
use netlocal::graph::full_ball;
use netlocal::inference::{
    effect_bound, knn_estimate, mse_bound, plugin_sigma2, policy_effect, psi_from_dataset, PhiSpec, PsiCurve,
};
use netlocal::permtest::{test_policy_irrelevance, PermutationMode};
use netlocal::sim::experiments::{run_mse, run_psi, run_size_power, MseConfig, PsiConfig, SimConfig, SizePowerConfig};
use netlocal::sim::fixtures::{figure1_network, fixture};
use netlocal::sim::models::{gen_er, support};
use netlocal::{Ball, CommunityBuilder, CommunityGraph, Dataset, Metric, SeedStreams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let metric = Metric::new();
    let mut mismatches = 0;
    for _ in 0..500 {
        let (a, b) = random_pair(&mut rng, 8);
        let got = metric.distance_value(&a.ball(0), &b.ball(0)).unwrap();
        if got != brute_distance(&a, 0, &b, 0) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs < 60.0, format!("500 pairs, {mismatches} mismatches, {secs:.1} s"))
}

fn pseudometric() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let metric = Metric::new();
    let mut violations = 0;
    for _ in 0..10_000 {
        let directed = rng.random::<f64>() < 0.3;
        let n = rng.random_range(1..=6);
        let base = random_net(&mut rng, n, 0.4, 2, directed);
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.random::<f64>() < 0.7 {
                perturbed(rng, &base, directed)
            } else {
                let m = rng.random_range(1..=6);
                random_net(rng, m, 0.4, 2, directed)
            }
        };
        let (x, y, z) = (base.ball(0), pick(&mut rng).ball(0), pick(&mut rng).ball(0));
        let d = |a: &Ball, b: &Ball| metric.distance_value(a, b).unwrap();
        let (xy, yz, xz) = (d(&x, &y), d(&y, &z), d(&x, &z));
        if d(&x, &x) != 0.0 || (xy - d(&y, &x)).abs() > 1e-12 || xz > xy + yz + 1e-12 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("10000 triples, {violations} violations"))
}

fn figure1() -> Outcome {
    let g = figure1_network();
    let d = Metric::new().distance(&g, "1", &g, "2").unwrap();
    let eps = |r: u64| d.eps_profile.iter().find(|p| p.0 == r).map(|p| p.1);
    let pass = d.value == 1.0 / 3.0 && (0..=2).all(|r| eps(r) == Some(0.0)) && eps(3) == Some(f64::INFINITY);
    outcome(pass, format!("d = {}, profile {:?}", d.value, d.eps_profile))
}

fn rejection_rate(g: &str, gp: &str, q: usize, seed: u64) -> f64 {
    let cfg = SizePowerConfig {
        sim: SimConfig::appc((0.0, 2.0)),
        g: g.into(),
        g_prime: gp.into(),
        communities: vec![200],
        q: vec![q],
        alpha: 0.05,
        permutations: PermutationMode::Sampled(1000),
        replications: 2000,
    };
    run_size_power(&cfg, &Metric::new(), &SeedStreams::new(seed)).unwrap()[0].rate
}

fn table1_size() -> Outcome {
    let rate = rejection_rate("g1", "g2", 5, 41);
    outcome((rate - 0.049).abs() <= 0.015, format!("rejection rate {:.2}% (target 4.9 ± 1.5)", 100.0 * rate))
}

fn table1_power() -> Outcome {
    let rate = rejection_rate("g3", "g4", 10, 42);
    outcome((rate - 0.486).abs() <= 0.04, format!("rejection rate {:.2}% (target 48.6 ± 4)", 100.0 * rate))
}

fn table2_mse() -> Outcome {
    let mse = |alpha, query: &str, c: usize, seed| {
        let cfg = MseConfig {
            sim: SimConfig::appc(alpha),
            query: query.into(),
            communities: vec![c],
            k: vec![c],
            replications: 1000,
        };
        run_mse(&cfg, &Metric::new(), &SeedStreams::new(seed)).unwrap()[0].mse
    };
    let a = mse((1.0, 0.0), "g3", 100, 61);
    let b = mse((1.0, 0.5), "g4", 50, 62);
    outcome(
        (a - 0.08).abs() <= 0.03 && (b - 5.09).abs() <= 0.8,
        format!("g3: {a:.4} (target 0.08 ± 0.03), g4: {b:.3} (target 5.09 ± 0.8)"),
    )
}

fn psi_curves() -> Outcome {
    let cfg = PsiConfig { n_agents: 20, edge_prob: 0.1, queries: vec!["g3".into(), "g4".into()], draws: 3000 };
    let curves = run_psi(&cfg, &Metric::new(), &SeedStreams::new(71)).unwrap();
    let (g3, g4) = (curves[0].1.eval(0.5), curves[1].1.eval(0.5));
    outcome(
        g3 >= 0.99 && (g4 - 0.40).abs() <= 0.05,
        format!("psi_g3(0.5) = {g3:.4} (>= 0.99), psi_g4(0.5) = {g4:.4} (0.40 ± 0.05)"),
    )
}

fn exchangeability() -> Outcome {
    // Outcomes are iid uniforms drawn independently of the ER networks.
    let (g, gp) = (fixture("g3").unwrap(), fixture("g4").unwrap());
    let metric = Metric::new();
    let streams = SeedStreams::new(81);
    let reps = 2000;
    let pvalues: Vec<f64> = (0..reps)
        .map(|r| {
            let rep = streams.child("exchangeability", r);
            let mut rng = rep.stream("data", 0);
            let comms = (0..20)
                .map(|_| {
                    let mut c = gen_er(20, 0.1, &mut rng).unwrap();
                    let ys: Vec<f64> = (0..c.len()).map(|_| rng.random()).collect();
                    c.set_outcomes(&ys).unwrap();
                    c
                })
                .collect();
            let ds = Dataset::new(comms).unwrap();
            test_policy_irrelevance(&metric, &ds, &g, &gp, 3, 0.05, PermutationMode::Full, &rep).unwrap().p_value
        })
        .collect();
    let size = |a: f64| pvalues.iter().filter(|&&p| p <= a).count() as f64 / reps as f64;
    let at05 = size(0.05);
    // The coarser levels are attainable exactly, so they get a one-sided
    // 99% Monte Carlo allowance.
    let coarse_ok = [0.1, 0.2, 0.3].iter().all(|&a| size(a) <= a + 2.33 * (a * (1.0 - a) / reps as f64).sqrt());
    outcome(
        at05 <= 0.05 && coarse_ok,
        format!(
            "size at 0.05: {at05:.4}; at 0.1: {:.4}; at 0.2: {:.4}; at 0.3: {:.4}",
            size(0.1),
            size(0.2),
            size(0.3)
        ),
    )
}

/// Kolmogorov survival function for the one-sample KS statistic.
fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = d * (sn + 0.12 + 0.11 / sn);
    let sum: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp()
        })
        .sum();
    sum.clamp(0.0, 1.0)
}

fn beta_order_statistic() -> Outcome {
    // Communities of three isolated agents with covariate U², queried by a
    // single vertex with covariate 0: each distance is the covariate, so
    // ψ(t) = 1 − (1 − √t)³.
    let psi = |t: f64| 1.0 - (1.0 - t.sqrt()).powi(3);
    let (c, k, reps) = (40, 8, 2000);
    let query = {
        let mut b = CommunityBuilder::new(false, 1);
        b.add_agent("q", &[0.0], None).unwrap();
        full_ball(&b.build(), 0)
    };
    let metric = Metric::new();
    let streams = SeedStreams::new(91);
    let mut u: Vec<f64> = (0..reps)
        .map(|r| {
            let rep = streams.child("beta", r);
            let mut rng = rep.stream("data", 0);
            let comms: Vec<CommunityGraph> = (0..c)
                .map(|_| {
                    let mut b = CommunityBuilder::new(false, 1);
                    for a in 0..3 {
                        let x: f64 = rng.random();
                        b.add_agent(&a.to_string(), &[x * x], Some(0.0)).unwrap();
                    }
                    b.build()
                })
                .collect();
            let est = knn_estimate(&metric, &Dataset::new(comms).unwrap(), &query, k, &rep).unwrap();
            psi(est.neighbors[k - 1].distance)
        })
        .collect();
    u.sort_by(f64::total_cmp);
    let beta = Beta::new(k as f64, (c - k + 1) as f64).unwrap();
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = beta.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let p = ks_pvalue(d, u.len());
    outcome(p > 0.01, format!("KS D = {d:.4}, p = {p:.3} against Beta({k}, {})", c - k + 1))
}

fn favor_outcomes(cfg: &SimConfig, c: usize, streams: &SeedStreams) -> Dataset {
    let comms = (0..c)
        .map(|i| {
            let mut rng = streams.stream("favors", i as u64);
            let mut g = gen_er(cfg.n_agents, cfg.edge_prob, &mut rng).unwrap();
            let ys: Vec<f64> = (0..g.len()).map(|a| support(&g, a) as f64 + 2.0 * rng.random::<f64>()).collect();
            g.set_outcomes(&ys).unwrap();
            g
        })
        .collect();
    Dataset::new(comms).unwrap()
}

fn bound_sanity() -> Outcome {
    let mut notes = Vec::new();
    let psi = PsiCurve::new(vec![0.0, 0.1, 0.3, 0.5, 0.5, 0.8, 1.0, 1.5]).unwrap();
    let sigma2 = 1.7;
    let zero = mse_bound(&PhiSpec::zero(), &psi, sigma2, 4, 8, 500, &mut SeedStreams::new(1).stream("mc", 0)).unwrap();
    let zero_ok = zero.total == sigma2 / 4.0;
    notes.push(format!("phi = 0 gives {} (sigma2/k = {})", zero.total, sigma2 / 4.0));

    let phi = PhiSpec::Geometric { m: 1.0, delta_rho: 0.5 };
    let s = SeedStreams::new(2);
    let single = mse_bound(&phi, &psi, sigma2, 3, 8, 5000, &mut s.stream("mc", 0)).unwrap();
    let double = effect_bound(&phi, &phi, &psi, &psi, sigma2, 3, 8, 5000, &mut s.stream("mc", 0)).unwrap();
    let four_ok = (double.total - 4.0 * single.total).abs() <= 1e-12 * double.total.max(1.0);
    notes.push(format!("effect {} vs 4 x mse {}", double.total, 4.0 * single.total));

    let workflow = (|| -> netlocal::Result<String> {
        let cfg = SimConfig { n_agents: 20, edge_prob: 0.15, ..SimConfig::appc((0.0, 0.0)) };
        let streams = SeedStreams::new(3);
        let ds = favor_outcomes(&cfg, 120, &streams);
        let metric = Metric::new();
        let (knife, fork, spoon) = (fixture("knife").unwrap(), fixture("fork").unwrap(), fixture("spoon").unwrap());
        let mut out = Vec::new();
        for (a, b, name) in [(&knife, &fork, "fork-knife"), (&fork, &spoon, "spoon-fork")] {
            let t = test_policy_irrelevance(&metric, &ds, a, b, 10, 0.05, PermutationMode::Sampled(1000), &streams)?;
            let (psi_a, psi_b) = (psi_from_dataset(&metric, &ds, a)?, psi_from_dataset(&metric, &ds, b)?);
            for k in [10, 20, 50] {
                let eff = policy_effect(&metric, &ds, a, b, k, &streams)?;
                let s2 = plugin_sigma2(&eff.first).unwrap().max(plugin_sigma2(&eff.second).unwrap());
                let bound = effect_bound(
                    &phi,
                    &phi,
                    &psi_a,
                    &psi_b,
                    s2,
                    k,
                    ds.len(),
                    2000,
                    &mut streams.stream("bound", k as u64),
                )?;
                if !(eff.effect.is_finite() && bound.total.is_finite()) {
                    return Err(netlocal::Error::InvalidInput("non-finite workflow output".into()));
                }
                out.push(format!("{name} k={k}: effect {:.3}, bound {:.3}", eff.effect, bound.total));
            }
            out.push(format!("{name}: p = {:.3}", t.p_value));
        }
        Ok(out.join("; "))
    })();
    let workflow_ok = workflow.is_ok();
    notes.push(match workflow {
        Ok(s) => s,
        Err(e) => format!("workflow failed: {e}"),
    });
    outcome(zero_ok && four_ok && workflow_ok, notes.join(" | "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric oracle equivalence", metric_oracle),
        ("pseudometric properties", pseudometric),
        ("twelve-agent example network", figure1),
        ("size, g1 vs g2", table1_size),
        ("power, g3 vs g4", table1_power),
        ("k-NN mean squared error", table2_mse),
        ("psi curves", psi_curves),
        ("exchangeability size", exchangeability),
        ("beta order statistic", beta_order_statistic),
        ("bound sanity and favor workflow", bound_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {tag} {name} ({:.1} s): {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
