//! Experiment orchestration.
//!
//! One run walks the whole slicing pipeline on one random draw: MNO profiles,
//! best-response requests, submission and collection, admission, allocation,
//! enforcement under one strategy, notifications, then a slicing window of
//! per-TTI scheduling, and finally the coordination metrics. The sweep runs
//! every strategy on the same draw for each `(mno_count, run)` so strategy
//! comparisons are paired.

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, shared_rb_stats, AggregateStats, MetricsError};
use crate::middleware::{
    self, ClassBuffers, Decision, DviSnapshot, MessageBroker, MiddlewareError, Notification,
    SubmissionClock,
};
use crate::mno::{self, MnoAgent, MnoError, MnoProfile, MobileUser};
use crate::scm::{self, AdmissionOutcome, EnforcementStrategy, ScmError, SlicePolicy};
use crate::topology::{self, InterferenceGraph, LatLon, Topology, TopologyError};
use crate::{MnoId, MuId, RbCounts};

pub use config::{DemandSpec, Range, ScenarioConfig, TopologySource};
pub use output::{
    aggregate_results, read_raw_csv, write_aggregate_csv, write_raw_csv, AggregateRow,
    AGGREGATE_HEADER, RAW_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Middleware(#[from] MiddlewareError),
    #[error(transparent)]
    Mno(#[from] MnoError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one `(mno_count, run_index)` draw:
/// `mix64(mix64(mix64(base_seed) ^ mno_count) ^ run_index)`.
pub fn run_seed(base_seed: u64, mno_count: u32, run_index: u32) -> u64 {
    mix64(mix64(mix64(base_seed) ^ mno_count as u64) ^ run_index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: EnforcementStrategy,
    pub mno_count: u32,
    pub run: u32,
    pub seed: u64,
    pub full_pct: f64,
    pub partial_pct: f64,
    pub mean_congestion: f64,
    pub admitted: u32,
    /// Mean aggregate MNO throughput per TTI, Mbit/s.
    pub throughput: f64,
}

/// A validated scenario with its topology and interference graph built once.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub graph: InterferenceGraph,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, HarnessError> {
        let mut topology = config.topology.load()?;
        config.validate(&topology)?;
        if let Some(prices) = &config.prices {
            let stations = topology
                .stations()
                .iter()
                .zip(prices)
                .map(|(s, &p)| {
                    let mut s = s.clone();
                    s.price_per_rb = p;
                    s
                })
                .collect();
            topology = Topology::new(stations)?;
        }
        let graph = topology::build_interference_graph(&topology, config.threshold_km)?;
        Ok(Self {
            config,
            topology,
            graph,
        })
    }

    /// Draws the MNO population of one run.
    pub fn draw_profiles(&self, mno_count: u32, rng: &mut ChaCha8Rng) -> Vec<MnoProfile> {
        let cfg = &self.config;
        let total = self.topology.total_rbs();
        let max_price = self
            .topology
            .stations()
            .iter()
            .map(|s| s.price_per_rb)
            .fold(0.0, f64::max);
        let (lat_lo, lat_hi, lon_lo, lon_hi) = self.bounding_box();
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        };

        (1..=mno_count)
            .map(|i| {
                let demand_rbs = match cfg.demand {
                    DemandSpec::FairShare { min, max } => {
                        let share = total as f64 / mno_count as f64;
                        (uniform(rng, (min, max)) * share).floor().max(1.0) as u32
                    }
                    DemandSpec::Absolute { min, max } => rng.gen_range(min..=max),
                };
                let lambda_congestion = uniform(rng, cfg.lambda_congestion.bounds());
                let n_mus = rng.gen_range(cfg.mus_per_mno[0]..=cfg.mus_per_mno[1]);
                let [se_lo, se_hi] = cfg.spectral_efficiency;
                let mus = (1..=n_mus)
                    .map(|u| MobileUser {
                        mu_id: MuId(u),
                        location: LatLon::new(
                            uniform(rng, (lat_lo, lat_hi)),
                            uniform(rng, (lon_lo, lon_hi)),
                        )
                        .expect("inside the topology bounding box"),
                        spectral_efficiency: uniform(rng, (se_lo, se_hi)),
                    })
                    .collect();
                MnoProfile {
                    mno_id: MnoId(i),
                    class_id: (i - 1) % cfg.num_classes,
                    demand_rbs,
                    lambda_congestion,
                    max_price: cfg.budget_factor * demand_rbs as f64 * max_price,
                    mus,
                }
            })
            .collect()
    }

    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let s = self.topology.stations();
        let lat = s.iter().map(|s| s.location.lat());
        let lon = s.iter().map(|s| s.location.lon());
        (
            lat.clone().fold(f64::INFINITY, f64::min),
            lat.fold(f64::NEG_INFINITY, f64::max),
            lon.clone().fold(f64::INFINITY, f64::min),
            lon.fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// Runs everything up to and including slice allocation; the result is
    /// shared by all strategies of one `(mno_count, run)` cell.
    pub fn prepare(&self, mno_count: u32, run_index: u32) -> Result<PreparedRun, HarnessError> {
        let seed = run_seed(self.config.base_seed, mno_count, run_index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profiles = self.draw_profiles(mno_count, &mut rng);
        let mut submission_order: Vec<usize> = (0..profiles.len()).collect();
        submission_order.shuffle(&mut rng);

        let capacities = self.topology.capacities();
        let prices = self.topology.prices();
        let dynamics =
            mno::run_best_response_dynamics(&profiles, &prices, &capacities, self.config.max_rounds)?;

        // Requests go out against the equilibrium view; at a fixed point each
        // MNO's request reproduces its equilibrium share.
        let mut loads = RbCounts::new();
        for r in dynamics.requests.values() {
            for (&b, &x) in r {
                *loads.entry(b).or_default() += x;
            }
        }
        let view = DviSnapshot::from_loads(&self.topology, &loads);
        let mut agents: Vec<MnoAgent> = profiles.into_iter().map(MnoAgent::new).collect();
        let mut buffers = ClassBuffers::new();
        let mut clock = SubmissionClock::default();
        for &i in &submission_order {
            let agent = &mut agents[i];
            let own = dynamics.requests[&agent.profile.mno_id].clone();
            let request = agent.generate_request(&view, &own, &mut clock)?;
            buffers.submit_request(request)?;
        }

        let collected = buffers.collect_requests();
        let mut by_time: Vec<_> = collected.iter().map(|r| (r.timestamp, r.mno_id)).collect();
        by_time.sort();
        let request_order = by_time.into_iter().map(|(_, m)| m).collect();

        let admission = scm::admission_control(&collected, &capacities, &prices);
        let policy = scm::allocate_slices(&admission.admitted, &capacities);
        Ok(PreparedRun {
            mno_count,
            run_index,
            seed,
            agents,
            admission,
            policy,
            request_order,
            converged: dynamics.converged,
        })
    }

    /// Enforcement, notifications, the TTI loop and metrics for one strategy.
    pub fn finish(
        &self,
        prepared: &PreparedRun,
        strategy: EnforcementStrategy,
    ) -> Result<RunResult, HarnessError> {
        let cfg = &self.config;
        let grid = scm::enforce_slicing(&prepared.policy, &self.graph, strategy, &prepared.request_order)?;

        let prices = self.topology.prices();
        let mut broker = MessageBroker::new();
        for req in &prepared.admission.admitted {
            let granted = prepared.policy.granted_to(req.mno_id);
            let price = granted
                .iter()
                .map(|(b, &c)| c as f64 * prices[b])
                .sum();
            broker.notify(Notification {
                mno_id: req.mno_id,
                decision: Decision::Admitted {
                    rb_indices: grid.rb_indices(req.mno_id),
                    granted,
                    price,
                },
            });
        }
        for (req, reason) in &prepared.admission.rejected {
            broker.notify(Notification {
                mno_id: req.mno_id,
                decision: Decision::Rejected { reason: *reason },
            });
        }

        let mut agents = prepared.agents.clone();
        for agent in &mut agents {
            while let Some(n) = broker.poll(agent.profile.mno_id) {
                agent.receive(&n.decision);
            }
        }

        let mut bits = 0.0;
        for tti in 0..cfg.slicing_window_ttis as u64 {
            for agent in &agents {
                bits += mno::schedule_tti(
                    &agent.pool,
                    &agent.profile.mus,
                    cfg.directive,
                    tti,
                    cfg.rb_bandwidth_hz,
                )
                .total_throughput();
            }
        }
        let throughput = if cfg.slicing_window_ttis == 0 {
            0.0
        } else {
            bits / cfg.slicing_window_ttis as f64 / 1e6
        };

        let stats = shared_rb_stats(&grid, &self.graph, &cfg.metrics)?;
        let mean_congestion = middleware::snapshot_dvi(&self.topology, Some(&grid)).mean_congestion();
        let admitted = agents.iter().filter(|a| a.pool.total_rbs() > 0).count() as u32;
        Ok(RunResult {
            strategy,
            mno_count: prepared.mno_count,
            run: prepared.run_index,
            seed: prepared.seed,
            full_pct: stats.full_pct,
            partial_pct: stats.partial_pct,
            mean_congestion,
            admitted,
            throughput,
        })
    }

    pub fn run_single(
        &self,
        strategy: EnforcementStrategy,
        mno_count: u32,
        run_index: u32,
    ) -> Result<RunResult, HarnessError> {
        self.finish(&self.prepare(mno_count, run_index)?, strategy)
    }

    /// Every `(strategy, mno_count, run)` result, sorted in that order.
    pub fn run_all(&self) -> Result<Vec<RunResult>, HarnessError> {
        let cells: Vec<(u32, u32)> = self
            .config
            .sweep()
            .into_iter()
            .flat_map(|m| (0..self.config.num_runs).map(move |r| (m, r)))
            .collect();
        let per_cell: Vec<Vec<RunResult>> = cells
            .par_iter()
            .map(|&(m, r)| {
                let prepared = self.prepare(m, r)?;
                self.config
                    .strategies
                    .iter()
                    .map(|&s| self.finish(&prepared, s))
                    .collect()
            })
            .collect::<Result<_, HarnessError>>()?;
        let mut rows: Vec<RunResult> = per_cell.into_iter().flatten().collect();
        rows.sort_by_key(|r| (r.strategy, r.mno_count, r.run));
        Ok(rows)
    }
}

/// State of one draw after allocation, before enforcement.
#[derive(Clone, Debug)]
pub struct PreparedRun {
    pub mno_count: u32,
    pub run_index: u32,
    pub seed: u64,
    pub agents: Vec<MnoAgent>,
    pub admission: AdmissionOutcome,
    pub policy: SlicePolicy,
    /// Admitted and rejected MNOs by request timestamp.
    pub request_order: Vec<MnoId>,
    pub converged: bool,
}

/// Output of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<RunResult>,
    pub aggregates: Vec<AggregateRow>,
}

pub const RAW_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Runs the full sweep and writes `runs.csv` and `aggregate.csv` into `out_dir`.
pub fn run_experiment(
    config: &ScenarioConfig,
    out_dir: impl AsRef<Path>,
) -> Result<ExperimentOutput, HarnessError> {
    let scenario = Scenario::new(config.clone())?;
    let rows = scenario.run_all()?;
    let aggregates = aggregate_results(&rows, config.confidence)?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    write_raw_csv(std::fs::File::create(out_dir.join(RAW_FILE))?, &rows)?;
    write_aggregate_csv(std::fs::File::create(out_dir.join(AGGREGATE_FILE))?, &aggregates)?;
    Ok(ExperimentOutput { rows, aggregates })
}

/// Per-cell statistics keyed by `(strategy, mno_count)`.
pub fn cell_stats(
    rows: &[RunResult],
    confidence: f64,
) -> Result<BTreeMap<(EnforcementStrategy, u32), (AggregateStats, AggregateStats)>, MetricsError> {
    let mut cells: BTreeMap<(EnforcementStrategy, u32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let e = cells.entry((r.strategy, r.mno_count)).or_default();
        e.0.push(r.partial_pct);
        e.1.push(r.full_pct);
    }
    cells
        .into_iter()
        .map(|(k, (p, f))| {
            Ok((
                k,
                (
                    metrics::aggregate_runs(&p, confidence)?,
                    metrics::aggregate_runs(&f, confidence)?,
                ),
            ))
        })
        .collect()
}
