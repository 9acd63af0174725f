//! `ranslice` command line.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ranslice::harness::{self, ScenarioConfig, AGGREGATE_FILE, RAW_FILE};
use ranslice::metrics::partial_shared_count;
use ranslice::middleware::{read_request_batch, ClassBuffers};
use ranslice::scm::{self, EnforcementStrategy, SlicePolicy};
use ranslice::topology::{self, Layout, SyntheticTopology, DEFAULT_THRESHOLD_KM};
use ranslice::MnoId;

#[derive(Parser, Debug)]
#[command(name = "ranslice", version, about = "RAN slicing simulator")]
struct Cli {
    /// Override the scenario base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of runs per (strategy, MNO count) cell.
    #[arg(long, global = true)]
    runs: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the strategy x MNO-count sweep and write runs.csv / aggregate.csv.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enforce a slice policy (or a request batch) and print the RB grid as CSV.
    Enforce {
        /// JSON map bs_id -> mno_id -> RB count.
        #[arg(long, conflicts_with = "requests", required_unless_present = "requests")]
        policy: Option<PathBuf>,
        /// JSON array of slice requests; runs admission and allocation first.
        #[arg(long)]
        requests: Option<PathBuf>,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, default_value = "coordination-aware")]
        strategy: EnforcementStrategy,
        /// Request order for FCFS, e.g. `3,1,2`; defaults to ascending MNO id.
        #[arg(long, value_delimiter = ',')]
        order: Vec<u32>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_KM)]
        threshold_km: f64,
    },
    /// Solve a small enforcement instance exhaustively.
    Oracle {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_KM)]
        threshold_km: f64,
    },
    /// Topology file utilities.
    Topology {
        #[command(subcommand)]
        action: TopologyCommand,
    },
}

#[derive(Subcommand, Debug)]
enum TopologyCommand {
    /// Parse a topology CSV and report its interference graph.
    Validate {
        csv: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_KM)]
        threshold_km: f64,
    },
    /// Write a seeded synthetic topology CSV to stdout.
    Generate {
        #[arg(long, default_value_t = 8)]
        num_bs: u32,
        #[arg(long, default_value_t = 50)]
        num_rbs: u32,
        #[arg(long, default_value_t = 3.5)]
        span_km: f64,
        #[arg(long)]
        grid: bool,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out } => {
            let mut cfg = match config {
                Some(path) => ScenarioConfig::load(&path)
                    .with_context(|| format!("loading {}", path.display()))?,
                None => ScenarioConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.base_seed = seed;
            }
            if let Some(runs) = cli.runs {
                cfg.num_runs = runs;
            }
            let result = harness::run_experiment(&cfg, &out)?;
            let mut stdout = io::stdout().lock();
            writeln!(
                stdout,
                "{:<20} {:>4} {:>5} {:>14} {:>14}",
                "strategy", "mnos", "n", "partial %", "full %"
            )?;
            for a in &result.aggregates {
                writeln!(
                    stdout,
                    "{:<20} {:>4} {:>5} {:>7.2} ±{:>5.2} {:>7.2} ±{:>5.2}",
                    a.strategy.name(),
                    a.mno_count,
                    a.n,
                    a.mean_partial,
                    a.ci_partial,
                    a.mean_full,
                    a.ci_full
                )?;
            }
            writeln!(
                stdout,
                "wrote {} rows to {} and {} cells to {}",
                result.rows.len(),
                out.join(RAW_FILE).display(),
                result.aggregates.len(),
                out.join(AGGREGATE_FILE).display()
            )?;
        }
        Command::Enforce {
            policy,
            requests,
            topology: topo_path,
            strategy,
            order,
            threshold_km,
        } => {
            let topo = topology::load_topology(&topo_path)?;
            let graph = topology::build_interference_graph(&topo, threshold_km)?;
            let (policy, request_order) = match (policy, requests) {
                (Some(p), _) => {
                    let policy = SlicePolicy::from_json(&fs::read_to_string(&p)?, topo.capacities())
                        .with_context(|| format!("reading policy {}", p.display()))?;
                    let order = if order.is_empty() {
                        policy.mnos()
                    } else {
                        order.into_iter().map(MnoId).collect()
                    };
                    (policy, order)
                }
                (None, Some(r)) => {
                    let mut buffers = ClassBuffers::new();
                    for req in read_request_batch(&r)? {
                        buffers.submit_request(req)?;
                    }
                    let collected = buffers.collect_requests();
                    let outcome =
                        scm::admission_control(&collected, &topo.capacities(), &topo.prices());
                    for (req, reason) in &outcome.rejected {
                        eprintln!("rejected MNO {} (t={}): {reason:?}", req.mno_id, req.timestamp);
                    }
                    let mut by_time: Vec<_> =
                        outcome.admitted.iter().map(|r| (r.timestamp, r.mno_id)).collect();
                    by_time.sort();
                    let policy = scm::allocate_slices(&outcome.admitted, &topo.capacities());
                    (policy, by_time.into_iter().map(|(_, m)| m).collect())
                }
                (None, None) => bail!("either --policy or --requests is required"),
            };
            let grid = scm::enforce_slicing(&policy, &graph, strategy, &request_order)?;
            grid.write_csv(io::stdout().lock())?;
            eprintln!(
                "partially shared RBs: {}",
                partial_shared_count(&grid, &graph)
            );
        }
        Command::Oracle {
            policy,
            topology: topo_path,
            threshold_km,
        } => {
            let topo = topology::load_topology(&topo_path)?;
            let graph = topology::build_interference_graph(&topo, threshold_km)?;
            let policy = SlicePolicy::from_json(&fs::read_to_string(&policy)?, topo.capacities())?;
            let (grid, best) = scm::oracle_enforce(&policy, &graph)?;
            grid.write_csv(io::stdout().lock())?;
            eprintln!("optimal partially shared RBs: {best}");
        }
        Command::Topology { action } => match action {
            TopologyCommand::Validate { csv, threshold_km } => {
                let topo = topology::load_topology(&csv)?;
                let graph = topology::build_interference_graph(&topo, threshold_km)?;
                println!(
                    "{}: {} stations, {} RBs, {} interference edges at {threshold_km} km",
                    csv.display(),
                    topo.len(),
                    topo.total_rbs(),
                    graph.edge_count()
                );
            }
            TopologyCommand::Generate {
                num_bs,
                num_rbs,
                span_km,
                grid,
            } => {
                let mut synth = SyntheticTopology {
                    num_bs,
                    num_rbs,
                    span_km,
                    layout: if grid { Layout::Grid } else { Layout::Uniform },
                    ..Default::default()
                };
                if let Some(seed) = cli.seed {
                    synth.seed = seed;
                }
                synth.generate()?.write_csv(io::stdout().lock())?;
            }
        },
    }
    Ok(())
}
