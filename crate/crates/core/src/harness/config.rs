use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::metrics::MetricOptions;
use crate::mno::{Directive, DEFAULT_RB_BANDWIDTH_HZ};
use crate::scm::EnforcementStrategy;
use crate::topology::{self, SyntheticTopology, Topology, DEFAULT_THRESHOLD_KM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySource {
    /// Topology CSV; relative paths resolve against the config file.
    File { path: PathBuf },
    Synthetic(SyntheticTopology),
}

impl Default for TopologySource {
    fn default() -> Self {
        Self::Synthetic(SyntheticTopology::default())
    }
}

impl TopologySource {
    pub fn load(&self) -> Result<Topology, HarnessError> {
        Ok(match self {
            Self::File { path } => topology::load_topology(path)?,
            Self::Synthetic(s) => s.generate()?,
        })
    }
}

/// Per-MNO RB demand per slicing window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DemandSpec {
    /// Uniform in `[min, max]` times the fair share `total RBs / mno_count`.
    FairShare { min: f64, max: f64 },
    /// Uniform integer in `[min, max]` RBs.
    Absolute { min: u32, max: u32 },
}

/// A fixed value or a `[min, max]` range drawn uniformly per MNO.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Range {
    Fixed(f64),
    Uniform([f64; 2]),
}

impl Range {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Self::Fixed(v) => (v, v),
            Self::Uniform([a, b]) => (a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySource,
    pub threshold_km: f64,
    /// Single MNO count, used when `mno_counts` is empty.
    pub num_mnos: Option<u32>,
    pub mno_counts: Vec<u32>,
    pub demand: DemandSpec,
    pub lambda_congestion: Range,
    /// Per-station price override, in `bs_id` order.
    pub prices: Option<Vec<f64>>,
    /// MNO budget as a multiple of the most expensive full-demand price.
    pub budget_factor: f64,
    pub num_classes: u32,
    pub mus_per_mno: [u32; 2],
    pub spectral_efficiency: [f64; 2],
    pub num_runs: u32,
    pub base_seed: u64,
    pub strategies: Vec<EnforcementStrategy>,
    pub max_rounds: u32,
    pub slicing_window_ttis: u32,
    pub directive: Directive,
    pub rb_bandwidth_hz: f64,
    pub confidence: f64,
    pub metrics: MetricOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            topology: TopologySource::default(),
            threshold_km: DEFAULT_THRESHOLD_KM,
            num_mnos: None,
            mno_counts: (2..=8).collect(),
            demand: DemandSpec::FairShare { min: 0.9, max: 1.0 },
            lambda_congestion: Range::Uniform([0.0, 200.0]),
            prices: None,
            budget_factor: 1.0,
            num_classes: 1,
            mus_per_mno: [5, 20],
            spectral_efficiency: [0.5, 6.0],
            num_runs: 200,
            base_seed: 1,
            strategies: EnforcementStrategy::ALL.to_vec(),
            max_rounds: 100,
            slicing_window_ttis: 100,
            directive: Directive::RoundRobin,
            rb_bandwidth_hz: DEFAULT_RB_BANDWIDTH_HZ,
            confidence: 0.95,
            metrics: MetricOptions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config; a relative topology path resolves against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let TopologySource::File { path: p } = &mut cfg.topology {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn sweep(&self) -> Vec<u32> {
        if self.mno_counts.is_empty() {
            self.num_mnos.into_iter().collect()
        } else {
            self.mno_counts.clone()
        }
    }

    /// Checks the config against a loaded topology.
    pub fn validate(&self, topology: &Topology) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.num_runs == 0 {
            return bad("num_runs must be at least 1".into());
        }
        let sweep = self.sweep();
        if sweep.is_empty() || sweep.contains(&0) {
            return bad("mno_counts must be non-empty and every count at least 1".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if !(self.threshold_km > 0.0) {
            return bad(format!("threshold_km must be positive, got {}", self.threshold_km));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        let total = topology.total_rbs();
        let max_count = *sweep.iter().max().expect("non-empty");
        match self.demand {
            DemandSpec::FairShare { min, max } => {
                if !(min > 0.0 && min <= max && max <= 1.0) {
                    return bad(format!("fair-share demand needs 0 < min <= max <= 1, got [{min}, {max}]"));
                }
            }
            DemandSpec::Absolute { min, max } => {
                if min == 0 || min > max || max as u64 * max_count as u64 > total {
                    return bad(format!(
                        "absolute demand [{min}, {max}] infeasible for {max_count} MNOs on {total} RBs"
                    ));
                }
            }
        }
        let (lo, hi) = self.lambda_congestion.bounds();
        if !(lo >= 0.0 && lo <= hi) {
            return bad("lambda_congestion must be non-negative with min <= max".into());
        }
        let [se_lo, se_hi] = self.spectral_efficiency;
        if !(se_lo > 0.0 && se_lo <= se_hi) {
            return bad("spectral_efficiency needs 0 < min <= max".into());
        }
        let [mu_lo, mu_hi] = self.mus_per_mno;
        if mu_lo > mu_hi {
            return bad("mus_per_mno needs min <= max".into());
        }
        if self.num_classes == 0 {
            return bad("num_classes must be at least 1".into());
        }
        if let Some(p) = &self.prices {
            if p.len() != topology.len() || p.iter().any(|&x| !(x >= 0.0)) {
                return bad("prices must list one non-negative price per station".into());
            }
        }
        if !(self.budget_factor >= 0.0) || !(self.rb_bandwidth_hz > 0.0) {
            return bad("budget_factor and rb_bandwidth_hz must be non-negative/positive".into());
        }
        Ok(())
    }
}
