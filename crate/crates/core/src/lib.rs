//! Multi-operator RAN slicing, from slice requests down to per-TTI RB scheduling.
//!
//! The crate models the full slicing pipeline between mobile network
//! operators (MNOs) and an infrastructure provider (IP):
//!
//! * [`topology`]: base stations, CSV ingestion and the interference graph.
//! * [`middleware`]: database view, class buffers, request collection and
//!   the notification broker.
//! * [`mno`]: best-response slice requests, resource pools and the per-TTI
//!   scheduler driven by high-level directives.
//! * [`scm`]: admission control, proportional slice allocation and
//!   enforcement over the resource-block grid, plus an exhaustive oracle.
//! * [`metrics`]: shared-RB coordination metrics and t-intervals.
//! * [`harness`]: scenario configuration, the two time-scale simulation loop
//!   and the strategy sweep writing plot-ready CSVs.

pub mod harness;
pub mod metrics;
pub mod middleware;
pub mod mno;
pub mod scm;
pub mod topology;

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize,
            Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<u32> for $name {
            fn from(v: u32) -> Self {
                Self(v)
            }
        }
    };
}

id_type!(
    /// Identifier of a base station.
    BsId
);
id_type!(
    /// Identifier of a mobile network operator.
    MnoId
);
id_type!(
    /// Identifier of a mobile user within one MNO.
    MuId
);

/// Per-BS RB counts (demands, grants, loads).
pub type RbCounts = std::collections::BTreeMap<BsId, u32>;
