//! Experiment orchestration: per-run simulation, multi-run merging and
//! output files.
//!
//! Each time step runs in a fixed order: service creation, then requests
//! (evolve, cache, migrate, reinforce) habitat by habitat, then network-wide
//! decay.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{figure_config, ExperimentConfig, Profile};
use crate::error::{EcoError, Result};
use crate::evolution::run_evolution;
use crate::habitat::{build_topology, HabitatNetwork};
use crate::model::{agent_attribute_count, aggregation_size, AgentIdAllocator};
use crate::stats::{analyze_with, ChiSquareReport, Histogram};
use crate::userbase::{
    build_communities, expected_probabilities, DistributionSpec, RequestGenerator, UserProfile,
};

/// SplitMix64 finalizer.
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of run `run_index`:
/// `avalanche(base_seed + avalanche(run_index + 0x9e3779b97f4a7c15))`.
pub fn run_seed(base_seed: u64, run_index: u64) -> u64 {
    avalanche(base_seed.wrapping_add(avalanche(run_index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: u64,
    pub seed: u64,
    pub size_histogram: Histogram,
    pub attr_histogram: Histogram,
    pub issued_requests: u64,
    pub successful_requests: u64,
    pub failed_requests: u64,
    /// Successful applications of a single agent in the last step.
    pub singleton_agent_count: u64,
    pub skipped_reinforcements: u64,
}

/// Simulates one run and returns its measurements.
pub fn run_simulation(config: &ExperimentConfig, run_index: u64) -> Result<RunResult> {
    simulate(config, run_index).map(|(result, _)| result)
}

/// As [`run_simulation`], also handing back the final network.
pub fn simulate(config: &ExperimentConfig, run_index: u64) -> Result<(RunResult, HabitatNetwork)> {
    config.validate()?;
    let seed = run_seed(config.base_seed, run_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n = config.habitats;
    let mut network = build_topology(n, config.base_degree, config.rewire_p, &mut rng)?;
    network.cache_capacity = config.cache_capacity;
    let communities = build_communities(
        config.communities,
        config.community_pool_size,
        config.attribute_space,
        &mut rng,
    )?;
    let mut assignment: Vec<usize> = (0..n).map(|h| h * config.communities / n).collect();
    if !config.community_aligned {
        use rand::seq::SliceRandom;
        assignment.shuffle(&mut rng);
    }
    let users: Vec<UserProfile> = (0..n)
        .map(|h| UserProfile {
            habitat: h,
            community: assignment[h],
            request_rate: config.request_rate,
            creation_rate: config.creation_rate,
        })
        .collect();
    let generator = RequestGenerator::new(
        &config.length_spec,
        &config.modularity_spec,
        config.attribute_space,
    )?;
    let mut ids = AgentIdAllocator::new();
    for user in &users {
        for _ in 0..config.bootstrap_agents {
            let agent = generator.create_agent(user, &communities[user.community], &mut ids, &mut rng)?;
            network.habitat_mut(user.habitat).add_agent(agent);
        }
    }

    let mut result = RunResult {
        run_index,
        seed,
        size_histogram: Histogram::new(config.length_spec.lo, config.length_spec.hi),
        attr_histogram: Histogram::new(config.modularity_spec.lo, config.modularity_spec.hi),
        issued_requests: 0,
        successful_requests: 0,
        failed_requests: 0,
        singleton_agent_count: 0,
        skipped_reinforcements: 0,
    };
    let window_start = config.window_start();
    let last_step = config.time_steps - 1;

    for step in 0..config.time_steps {
        for user in &users {
            if rng.random_bool(user.creation_rate) {
                let agent = generator.create_agent(user, &communities[user.community], &mut ids, &mut rng)?;
                network.habitat_mut(user.habitat).add_agent(agent);
            }
        }
        for user in &users {
            if !rng.random_bool(user.request_rate) {
                continue;
            }
            result.issued_requests += 1;
            let request = generator.generate_request(user, &communities[user.community], &mut rng)?;
            let here = user.habitat;
            let outcome = match run_evolution(
                network.habitat(here),
                &request,
                &config.evolution,
                config.threshold_fraction,
                &mut rng,
            ) {
                Ok(outcome) => outcome,
                Err(EcoError::Unservable { .. }) => {
                    result.failed_requests += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if !outcome.succeeded {
                result.failed_requests += 1;
                continue;
            }
            result.successful_requests += 1;
            let app = outcome.best;
            if step >= window_start {
                result.size_histogram.record(aggregation_size(&app) as i64);
                for agent in &app.agents {
                    result.attr_histogram.record(agent_attribute_count(agent) as i64);
                }
            }
            if step == last_step && app.len() == 1 {
                result.singleton_agent_count += 1;
            }
            let signature = request.signature();
            network.cache_local(here, app.clone(), signature);
            network.migrate_application(here, &app, signature, &mut rng)?;
            network.reinforce_arrivals(here, &app, config.eta);
        }
        network.decay(config.delta);
    }
    result.skipped_reinforcements = network.skipped_reinforcements();
    debug_assert_eq!(
        result.successful_requests + result.failed_requests,
        result.issued_requests
    );
    Ok((result, network))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub size_histogram: Histogram,
    pub attr_histogram: Histogram,
    /// `None` when nothing was recorded or the distribution has a single bin.
    pub size_report: Option<ChiSquareReport>,
    pub attr_report: Option<ChiSquareReport>,
    pub issued_requests: u64,
    pub successful_requests: u64,
    pub failed_requests: u64,
    pub singleton_agent_count: u64,
    pub skipped_reinforcements: u64,
    pub elapsed_seconds: f64,
}

/// A finished experiment: the summary plus the final weights of run 0.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub runs: Vec<RunResult>,
    pub topology: Vec<(usize, usize, f64)>,
}

fn report(
    hist: &Histogram,
    spec: &DistributionSpec,
    merge_below: Option<f64>,
) -> Result<Option<ChiSquareReport>> {
    if hist.total() == 0 || spec.bins() < 2 {
        return Ok(None);
    }
    analyze_with(hist, spec, merge_below).map(Some)
}

/// Runs every simulation of the experiment on `workers` threads (all cores
/// when `None`). Results are merged in run order, so the outcome does not
/// depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| EcoError::Structural(format!("thread pool: {e}")))?;
    let results: Vec<(RunResult, Option<HabitatNetwork>)> = pool.install(|| {
        (0..config.runs as u64)
            .into_par_iter()
            .map(|i| {
                let (r, net) = simulate(config, i)?;
                Ok((r, (i == 0).then_some(net)))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut size_histogram = Histogram::new(config.length_spec.lo, config.length_spec.hi);
    let mut attr_histogram = Histogram::new(config.modularity_spec.lo, config.modularity_spec.hi);
    let mut summary_counts = [0u64; 5];
    let mut topology = Vec::new();
    let mut runs = Vec::with_capacity(results.len());
    for (r, net) in results {
        size_histogram.merge(&r.size_histogram)?;
        attr_histogram.merge(&r.attr_histogram)?;
        for (acc, v) in summary_counts.iter_mut().zip([
            r.issued_requests,
            r.successful_requests,
            r.failed_requests,
            r.singleton_agent_count,
            r.skipped_reinforcements,
        ]) {
            *acc += v;
        }
        if let Some(net) = net {
            topology = net.weighted_edges().collect();
        }
        runs.push(r);
    }
    let [issued_requests, successful_requests, failed_requests, singleton_agent_count, skipped_reinforcements] =
        summary_counts;
    let summary = ExperimentSummary {
        config: config.clone(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        size_report: report(&size_histogram, &config.length_spec, config.merge_below)?,
        attr_report: report(&attr_histogram, &config.modularity_spec, config.merge_below)?,
        size_histogram,
        attr_histogram,
        issued_requests,
        successful_requests,
        failed_requests,
        singleton_agent_count,
        skipped_reinforcements,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutcome {
        summary,
        runs,
        topology,
    })
}

/// `bin,observed,expected` rows for a histogram against its distribution.
pub fn histogram_csv(hist: &Histogram, spec: &DistributionSpec) -> Result<String> {
    let probs = expected_probabilities(spec)?;
    let total = hist.total() as f64;
    let mut out = String::from("bin,observed,expected\n");
    for ((bin, observed), p) in hist.bins().zip(probs) {
        out.push_str(&format!("{bin},{observed},{:.6}\n", p * total));
    }
    Ok(out)
}

pub fn topology_csv(edges: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("source,target,weight\n");
    for (s, t, w) in edges {
        out.push_str(&format!("{s},{t},{w:.12}\n"));
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| EcoError::io(&path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| EcoError::io(&path, e))
}

impl ExperimentOutcome {
    /// Writes `size_hist.csv`, `attr_hist.csv`, `summary.json` and
    /// `topology_final.csv` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| EcoError::io(dir, e))?;
        let s = &self.summary;
        write_file(
            dir,
            "size_hist.csv",
            &histogram_csv(&s.size_histogram, &s.config.length_spec)?,
        )?;
        write_file(
            dir,
            "attr_hist.csv",
            &histogram_csv(&s.attr_histogram, &s.config.modularity_spec)?,
        )?;
        let mut json = serde_json::to_string_pretty(s).expect("summary serializes");
        json.push('\n');
        write_file(dir, "summary.json", &json)?;
        write_file(dir, "topology_final.csv", &topology_csv(&self.topology))
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(r) = self.runs {
            config.runs = r;
        }
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if let Some(t) = self.steps {
            config.time_steps = t;
        }
    }
}

/// Runs the preset experiment for one figure and writes its files.
pub fn replicate_figure(
    figure: u32,
    profile: Profile,
    overrides: &Overrides,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    let mut config = figure_config(figure, profile)?;
    overrides.apply(&mut config);
    let outcome = run_experiment(&config, overrides.workers)?;
    outcome.write(out_dir)?;
    Ok(outcome)
}
