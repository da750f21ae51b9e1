use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use netlocal::inference::{
    effect_bound, knn_cdf, knn_estimate, mse_bound, plugin_sigma2, psi_from_dataset, psi_from_generator, Match,
    PhiSpec, PsiCurve,
};
use netlocal::io::{load_community, load_dataset, load_query, query_to_json, write_json};
use netlocal::permtest::{test_policy_irrelevance, PermutationMode};
use netlocal::sim::experiments::{run_mse, run_psi, run_size_power, MseConfig, PsiConfig, SizePowerConfig};
use netlocal::sim::fixtures::{fixture, FIXTURE_NAMES};
use netlocal::sim::models::gen_er;
use netlocal::{Metric, SeedStreams};

use crate::manifest::{digest_inputs, InputDigest};

/// Result bytes plus the files they were computed from.
pub struct Output {
    pub payload: Vec<u8>,
    pub inputs: Vec<InputDigest>,
}

fn json_payload<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn inputs(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(digest_inputs(p)?);
    }
    Ok(all)
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    #[arg(long, value_name = "FILE")]
    pub community_a: PathBuf,
    #[arg(long, value_name = "ID")]
    pub root_a: String,
    #[arg(long, value_name = "FILE")]
    pub community_b: PathBuf,
    #[arg(long, value_name = "ID")]
    pub root_b: String,
    /// Largest radius examined; beyond it the networks count as equal.
    #[arg(long, value_name = "R")]
    pub radius_cap: Option<u64>,
    /// Node expansions allowed per isomorphism search (exit code 2 when hit).
    #[arg(long, value_name = "N")]
    pub expansion_cap: Option<u64>,
}

pub fn distance(args: &DistanceArgs, metric: Metric) -> Result<Output> {
    let mut metric = metric;
    if let Some(r) = args.radius_cap {
        metric = metric.with_radius_cap(r);
    }
    if let Some(n) = args.expansion_cap {
        metric = metric.with_expansion_cap(n);
    }
    let a = load_community(&args.community_a)?;
    let b = load_community(&args.community_b)?;
    let d = metric.distance(&a, &args.root_a, &b, &args.root_b)?;
    Ok(Output { payload: json_payload(&d)?, inputs: inputs(&[&args.community_a, &args.community_b])? })
}

fn parse_permutations(s: &str) -> std::result::Result<PermutationMode, String> {
    if s == "full" {
        return Ok(PermutationMode::Full);
    }
    s.parse::<usize>()
        .map(PermutationMode::Sampled)
        .map_err(|_| format!("expected `full` or a permutation count, got `{s}`"))
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// Directory of community files, or one file with a JSON array.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub g: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub g2: PathBuf,
    #[arg(long, value_name = "Q")]
    pub q: usize,
    #[arg(long, value_name = "A", default_value_t = 0.05)]
    pub alpha: f64,
    /// `full` for exhaustive enumeration (2q <= 8), otherwise the number of
    /// permutations including the identity.
    #[arg(long, value_name = "B", default_value = "1000", value_parser = parse_permutations)]
    pub permutations: PermutationMode,
}

pub fn test(args: &TestArgs, metric: &Metric, streams: &SeedStreams) -> Result<Output> {
    let ds = load_dataset(&args.data)?;
    let g = load_query(&args.g)?;
    let g2 = load_query(&args.g2)?;
    let result = test_policy_irrelevance(metric, &ds, &g, &g2, args.q, args.alpha, args.permutations, streams)?;
    Ok(Output { payload: json_payload(&result)?, inputs: inputs(&[&args.data, &args.g, &args.g2])? })
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub query: PathBuf,
    /// Second rooted network; adds its estimate and the policy effect.
    #[arg(long, value_name = "FILE")]
    pub query2: Option<PathBuf>,
    #[arg(long, value_name = "K", default_value_t = 10)]
    pub k: usize,
    /// Also report the estimated outcome CDF at this value.
    #[arg(long, value_name = "Y")]
    pub cdf_at: Option<f64>,
}

#[derive(Serialize)]
struct EstimateReport {
    h_hat: f64,
    k: usize,
    neighbors: Vec<Match>,
    /// Plug-in σ²: sample variance of the selected outcomes (k >= 2).
    sigma2_plugin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cdf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_hat2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    neighbors2: Option<Vec<Match>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cdf2: Option<f64>,
    /// ĥ(query2) − ĥ(query).
    #[serde(skip_serializing_if = "Option::is_none")]
    effect: Option<f64>,
}

pub fn estimate(args: &EstimateArgs, metric: &Metric, streams: &SeedStreams) -> Result<Output> {
    let ds = load_dataset(&args.data)?;
    let q = load_query(&args.query)?;
    let first = knn_estimate(metric, &ds, &q, args.k, streams)?;
    let cdf = args.cdf_at.map(|y| knn_cdf(metric, &ds, &q, args.k, y, streams)).transpose()?;
    let mut report = EstimateReport {
        h_hat: first.h_hat,
        k: args.k,
        sigma2_plugin: plugin_sigma2(&first),
        neighbors: first.neighbors,
        cdf,
        h_hat2: None,
        neighbors2: None,
        cdf2: None,
        effect: None,
    };
    let mut paths: Vec<&Path> = vec![&args.data, &args.query];
    if let Some(path) = &args.query2 {
        let q2 = load_query(path)?;
        let second = knn_estimate(metric, &ds, &q2, args.k, streams)?;
        report.cdf2 = args.cdf_at.map(|y| knn_cdf(metric, &ds, &q2, args.k, y, streams)).transpose()?;
        report.effect = Some(second.h_hat - report.h_hat);
        report.h_hat2 = Some(second.h_hat);
        report.neighbors2 = Some(second.neighbors);
        paths.push(path);
    }
    Ok(Output { payload: json_payload(&report)?, inputs: inputs(&paths)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErSpec {
    pub n: usize,
    pub p: f64,
    pub draws: usize,
}

fn parse_er(s: &str) -> std::result::Result<ErSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, p, draws] = parts[..] else {
        return Err(format!("expected n,p,draws, got `{s}`"));
    };
    let n = n.parse().map_err(|_| format!("bad agent count `{n}`"))?;
    let p = p.parse().map_err(|_| format!("bad link probability `{p}`"))?;
    let draws = draws.parse().map_err(|_| format!("bad draw count `{draws}`"))?;
    Ok(ErSpec { n, p, draws })
}

#[derive(Debug, Args, Serialize)]
pub struct PsiArgs {
    #[arg(long, value_name = "FILE")]
    pub query: PathBuf,
    #[arg(long, value_name = "PATH", required_unless_present = "er", conflicts_with = "er")]
    pub data: Option<PathBuf>,
    /// Erdős–Rényi draws `n,p,draws` instead of observed communities.
    #[arg(long, value_name = "N,P,DRAWS", value_parser = parse_er)]
    pub er: Option<ErSpec>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Serialize)]
struct PsiReport<'a> {
    samples: &'a [f64],
    steps: Vec<(f64, f64)>,
}

fn psi_csv(curve: &PsiCurve) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["l", "psi"])?;
    for (l, p) in curve.steps() {
        w.serialize((l, p))?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn psi(args: &PsiArgs, metric: &Metric, streams: &SeedStreams) -> Result<Output> {
    let query = load_query(&args.query)?;
    let mut paths: Vec<&Path> = vec![&args.query];
    let curve = match (&args.data, args.er) {
        (Some(data), None) => {
            paths.push(data);
            psi_from_dataset(metric, &load_dataset(data)?, &query)?
        }
        (None, Some(er)) => {
            if er.n == 0 || !(0.0..=1.0).contains(&er.p) {
                return Err(netlocal::Error::InvalidInput(format!(
                    "--er needs n >= 1 and p in [0, 1], got {}, {}",
                    er.n, er.p
                ))
                .into());
            }
            psi_from_generator(metric, &query, er.draws, streams, |rng| gen_er(er.n, er.p, rng))?
        }
        _ => bail!("exactly one of --data and --er is required"),
    };
    let payload = match args.format {
        Format::Json => json_payload(&PsiReport { samples: curve.samples(), steps: curve.steps() })?,
        Format::Csv => psi_csv(&curve)?,
    };
    Ok(Output { payload, inputs: inputs(&paths)? })
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    /// φ as `indicator:M,R`, `geometric:M,DR`, inline JSON, or a JSON file.
    #[arg(long, value_name = "SPEC")]
    pub phi: String,
    /// ψ̂ samples as written by the `psi` command.
    #[arg(long, value_name = "FILE")]
    pub psi: PathBuf,
    /// φ and ψ̂ of the second network; switches to the policy-effect bound.
    #[arg(long, value_name = "SPEC", requires = "psi2")]
    pub phi2: Option<String>,
    #[arg(long, value_name = "FILE", requires = "phi2")]
    pub psi2: Option<PathBuf>,
    #[arg(long, value_name = "V")]
    pub sigma2: f64,
    #[arg(long, value_name = "K")]
    pub k: usize,
    #[arg(long = "C", value_name = "C")]
    pub c: usize,
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    pub mc_draws: usize,
}

fn parse_phi(spec: &str) -> Result<PhiSpec> {
    let numbers = |rest: &str| -> Result<(f64, f64)> {
        let (a, b) = rest.split_once(',').ok_or_else(|| anyhow!("φ shorthand needs two numbers, got `{rest}`"))?;
        Ok((a.trim().parse()?, b.trim().parse()?))
    };
    let text;
    let source = if spec.trim_start().starts_with('{') {
        spec
    } else if let Some(rest) = spec.strip_prefix("indicator:") {
        let (m, r) = numbers(rest)?;
        return Ok(PhiSpec::Indicator { m, r });
    } else if let Some(rest) = spec.strip_prefix("geometric:") {
        let (m, delta_rho) = numbers(rest)?;
        return Ok(PhiSpec::Geometric { m, delta_rho });
    } else {
        text = fs::read_to_string(spec).with_context(|| format!("reading φ spec {spec}"))?;
        &text
    };
    serde_json::from_str(source).map_err(|e| netlocal::Error::Json { context: "φ spec".into(), source: e }.into())
}

#[derive(Deserialize)]
struct PsiFile {
    samples: Vec<f64>,
}

fn load_psi(path: &Path) -> Result<PsiCurve> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: PsiFile = serde_json::from_str(&text)
        .map_err(|e| netlocal::Error::Json { context: path.display().to_string(), source: e })?;
    Ok(PsiCurve::new(raw.samples)?)
}

pub fn bound(args: &BoundArgs, streams: &SeedStreams) -> Result<Output> {
    let phi = parse_phi(&args.phi)?;
    let psi = load_psi(&args.psi)?;
    let mut rng = streams.stream("bound", 0);
    let mut paths: Vec<&Path> = vec![&args.psi];
    let bound = match (&args.phi2, &args.psi2) {
        (Some(phi2), Some(psi2)) => {
            paths.push(psi2);
            let (phi2, psi2) = (parse_phi(phi2)?, load_psi(psi2)?);
            effect_bound(&phi, &phi2, &psi, &psi2, args.sigma2, args.k, args.c, args.mc_draws, &mut rng)?
        }
        _ => mse_bound(&phi, &psi, args.sigma2, args.k, args.c, args.mc_draws, &mut rng)?,
    };
    let payload = json_payload(&json!({"phi": phi, "bound": bound}))?;
    Ok(Output { payload, inputs: inputs(&paths)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SizePower,
    Mse,
    Psi,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// TOML or JSON experiment configuration.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| netlocal::Error::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| netlocal::Error::Config(format!("{}: {e}", path.display())))?
    };
    Ok(parsed)
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn simulate(args: &SimulateArgs, metric: &Metric, streams: &SeedStreams) -> Result<Output> {
    let payload = match args.experiment {
        Experiment::SizePower => {
            let cfg: SizePowerConfig = read_config(&args.config)?;
            rows_csv(&run_size_power(&cfg, metric, streams)?)?
        }
        Experiment::Mse => {
            let cfg: MseConfig = read_config(&args.config)?;
            rows_csv(&run_mse(&cfg, metric, streams)?)?
        }
        Experiment::Psi => {
            let cfg: PsiConfig = read_config(&args.config)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["query", "l", "psi"])?;
            for (name, curve) in run_psi(&cfg, metric, streams)? {
                for (l, p) in curve.steps() {
                    w.serialize((&name, l, p))?;
                }
            }
            w.into_inner().map_err(|e| anyhow!("{e}"))?
        }
    };
    Ok(Output { payload, inputs: inputs(&[&args.config])? })
}

#[derive(Debug, Args, Serialize)]
#[group(id = "action", required = true, multiple = false)]
pub struct FixturesArgs {
    /// Print the fixture names.
    #[arg(long)]
    pub list: bool,
    /// Write every fixture as a query file `<name>.json` into DIR.
    #[arg(long, value_name = "DIR")]
    pub write: Option<PathBuf>,
}

pub fn fixtures(args: &FixturesArgs) -> Result<Output> {
    if let Some(dir) = &args.write {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for name in FIXTURE_NAMES {
            let ball = fixture(name).expect("listed fixture");
            write_json(&dir.join(format!("{name}.json")), &query_to_json(&ball))?;
        }
    }
    let listing = FIXTURE_NAMES.join("\n") + "\n";
    Ok(Output { payload: listing.into_bytes(), inputs: Vec::new() })
}
