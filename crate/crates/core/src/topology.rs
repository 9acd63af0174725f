//! Physical RAN description and the interference structure derived from it.
//!
//! Topologies are read from a fixed CSV schema (`bs_id,lat,lon,num_rbs,price_per_rb`,
//! header required, extra columns ignored) or produced by a seeded synthetic
//! generator. Two base stations interfere when their great-circle distance is
//! within a threshold.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{BsId, RbCounts};

/// Mean Earth radius used for all distance computations.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Interference distance used when a scenario does not set one.
pub const DEFAULT_THRESHOLD_KM: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("duplicate base station id {0}")]
    DuplicateBsId(BsId),
    #[error("topology has no base stations")]
    EmptyTopology,
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid base station {bs_id}: {reason}")]
    InvalidStation { bs_id: BsId, reason: String },
    #[error("interference threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

/// A validated latitude/longitude pair in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    lat: f64,
    lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self, TopologyError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(TopologyError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance in kilometers (haversine, spherical Earth).
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub bs_id: BsId,
    pub location: LatLon,
    /// Resource blocks available per slicing window.
    pub num_rbs: u32,
    pub price_per_rb: f64,
}

impl BaseStation {
    pub fn new(
        bs_id: BsId,
        lat: f64,
        lon: f64,
        num_rbs: u32,
        price_per_rb: f64,
    ) -> Result<Self, TopologyError> {
        let location = LatLon::new(lat, lon)?;
        if num_rbs == 0 {
            return Err(TopologyError::InvalidStation {
                bs_id,
                reason: "num_rbs must be at least 1".into(),
            });
        }
        if !(price_per_rb >= 0.0 && price_per_rb.is_finite()) {
            return Err(TopologyError::InvalidStation {
                bs_id,
                reason: format!("price_per_rb must be a non-negative number, got {price_per_rb}"),
            });
        }
        Ok(Self {
            bs_id,
            location,
            num_rbs,
            price_per_rb,
        })
    }
}

/// Non-empty set of base stations, ordered by `bs_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    stations: Vec<BaseStation>,
}

impl Topology {
    pub fn new(mut stations: Vec<BaseStation>) -> Result<Self, TopologyError> {
        if stations.is_empty() {
            return Err(TopologyError::EmptyTopology);
        }
        stations.sort_by_key(|s| s.bs_id);
        if let Some(w) = stations.windows(2).find(|w| w[0].bs_id == w[1].bs_id) {
            return Err(TopologyError::DuplicateBsId(w[0].bs_id));
        }
        Ok(Self { stations })
    }

    pub fn stations(&self) -> &[BaseStation] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn bs_ids(&self) -> Vec<BsId> {
        self.stations.iter().map(|s| s.bs_id).collect()
    }

    pub fn station(&self, bs_id: BsId) -> Option<&BaseStation> {
        self.stations
            .binary_search_by_key(&bs_id, |s| s.bs_id)
            .ok()
            .map(|i| &self.stations[i])
    }

    pub fn capacities(&self) -> RbCounts {
        self.stations.iter().map(|s| (s.bs_id, s.num_rbs)).collect()
    }

    pub fn prices(&self) -> std::collections::BTreeMap<BsId, f64> {
        self.stations
            .iter()
            .map(|s| (s.bs_id, s.price_per_rb))
            .collect()
    }

    pub fn total_rbs(&self) -> u64 {
        self.stations.iter().map(|s| s.num_rbs as u64).sum()
    }

    /// Writes the topology in the canonical CSV schema.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TopologyError> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.stations {
            wtr.serialize(CsvRow {
                bs_id: s.bs_id.0,
                lat: s.location.lat,
                lon: s.location.lon,
                num_rbs: s.num_rbs,
                price_per_rb: s.price_per_rb,
            })
            .map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> TopologyError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => TopologyError::Io(e),
        other => TopologyError::Io(io::Error::other(format!("{other:?}"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    bs_id: u32,
    lat: f64,
    lon: f64,
    num_rbs: u32,
    price_per_rb: f64,
}

/// Loads a topology CSV file.
pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology, TopologyError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => TopologyError::FileNotFound(path.to_path_buf()),
        _ => TopologyError::Io(e),
    })?;
    read_topology(file)
}

/// Parses topology CSV from any reader. Line numbers in errors are 1-based
/// and count the header row.
pub fn read_topology<R: Read>(reader: R) -> Result<Topology, TopologyError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| TopologyError::ParseError {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for col in ["bs_id", "lat", "lon", "num_rbs", "price_per_rb"] {
        if !headers.iter().any(|h| h == col) {
            return Err(TopologyError::ParseError {
                line: 1,
                message: format!("missing column `{col}`"),
            });
        }
    }

    let mut stations = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| TopologyError::ParseError {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow =
            record
                .deserialize(Some(&headers))
                .map_err(|e| TopologyError::ParseError {
                    line,
                    message: e.to_string(),
                })?;
        let station = BaseStation::new(
            BsId(row.bs_id),
            row.lat,
            row.lon,
            row.num_rbs,
            row.price_per_rb,
        )
        .map_err(|e| TopologyError::ParseError {
            line,
            message: e.to_string(),
        })?;
        stations.push(station);
    }
    Topology::new(stations)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Independent uniform placement inside the bounding box.
    #[default]
    Uniform,
    /// Near-square grid filling the bounding box.
    Grid,
}

/// Parameters for a seeded synthetic deployment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTopology {
    pub num_bs: u32,
    pub num_rbs: u32,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Side of the square bounding box, in kilometers.
    pub span_km: f64,
    pub layout: Layout,
    pub price_min: f64,
    pub price_max: f64,
    pub seed: u64,
}

impl Default for SyntheticTopology {
    fn default() -> Self {
        // Downtown Boston; eight 50-RB cells on a 3.5 km square.
        Self {
            num_bs: 8,
            num_rbs: 50,
            center_lat: 42.3601,
            center_lon: -71.0589,
            span_km: 3.5,
            layout: Layout::Uniform,
            price_min: 1.0,
            price_max: 2.0,
            seed: 2019,
        }
    }
}

impl SyntheticTopology {
    pub fn generate(&self) -> Result<Topology, TopologyError> {
        if self.num_bs == 0 {
            return Err(TopologyError::EmptyTopology);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let km_per_deg_lat = EARTH_RADIUS_KM.to_radians();
        let km_per_deg_lon = km_per_deg_lat * self.center_lat.to_radians().cos();
        let half = self.span_km / 2.0;

        let cols = (self.num_bs as f64).sqrt().ceil() as u32;
        let rows = self.num_bs.div_ceil(cols);
        let mut stations = Vec::with_capacity(self.num_bs as usize);
        for i in 0..self.num_bs {
            let (dx, dy) = match self.layout {
                Layout::Uniform => (
                    rng.gen_range(-half..=half),
                    rng.gen_range(-half..=half),
                ),
                Layout::Grid => {
                    let step_x = self.span_km / cols as f64;
                    let step_y = self.span_km / rows as f64;
                    (
                        -half + step_x * ((i % cols) as f64 + 0.5),
                        -half + step_y * ((i / cols) as f64 + 0.5),
                    )
                }
            };
            let price = if self.price_max > self.price_min {
                rng.gen_range(self.price_min..=self.price_max)
            } else {
                self.price_min
            };
            stations.push(BaseStation::new(
                BsId(i + 1),
                self.center_lat + dy / km_per_deg_lat,
                self.center_lon + dx / km_per_deg_lon,
                self.num_rbs,
                price,
            )?);
        }
        Topology::new(stations)
    }
}

/// Symmetric interference adjacency over the base stations of a topology.
///
/// Row/column `i` refers to the `i`-th station in `bs_ids` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterferenceGraph {
    bs_ids: Vec<BsId>,
    adjacency: Vec<Vec<bool>>,
}

impl InterferenceGraph {
    /// Graph without edges.
    pub fn empty(bs_ids: Vec<BsId>) -> Self {
        let n = bs_ids.len();
        Self {
            bs_ids,
            adjacency: vec![vec![false; n]; n],
        }
    }

    pub fn complete(bs_ids: Vec<BsId>) -> Self {
        let n = bs_ids.len();
        let adjacency = (0..n)
            .map(|i| (0..n).map(|j| i != j).collect())
            .collect();
        Self { bs_ids, adjacency }
    }

    /// Graph over `bs_ids` with the given index pairs as edges. Self loops are ignored.
    pub fn from_edges(bs_ids: Vec<BsId>, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(bs_ids);
        for &(i, j) in edges {
            if i != j {
                g.adjacency[i][j] = true;
                g.adjacency[j][i] = true;
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.bs_ids.len()
    }

    pub fn bs_ids(&self) -> &[BsId] {
        &self.bs_ids
    }

    pub fn index_of(&self, bs_id: BsId) -> Option<usize> {
        self.bs_ids.iter().position(|&b| b == bs_id)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// Edges as index pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).filter(move |&j| self.adjacency[i][j]).map(move |j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Connected components as sorted index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.insert(v);
                for w in 0..n {
                    if self.adjacency[v][w] && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            out.push(comp.into_iter().collect());
        }
        out
    }
}

/// Connects every pair of distinct stations no farther apart than `threshold_km`.
pub fn build_interference_graph(
    topology: &Topology,
    threshold_km: f64,
) -> Result<InterferenceGraph, TopologyError> {
    if !(threshold_km > 0.0) {
        return Err(TopologyError::InvalidThreshold(threshold_km));
    }
    let stations = topology.stations();
    let mut g = InterferenceGraph::empty(topology.bs_ids());
    for i in 0..stations.len() {
        for j in (i + 1)..stations.len() {
            if haversine_km(stations[i].location, stations[j].location) <= threshold_km {
                g.adjacency[i][j] = true;
                g.adjacency[j][i] = true;
            }
        }
    }
    Ok(g)
}
