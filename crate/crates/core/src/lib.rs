//! Q-Fly: a switched photonic interconnect for distributed quantum
//! computers. Topology construction, loss budgets, routing, link timing,
//! QFT workloads and a reconfiguration-aware scheduler.

pub mod config;
pub mod error;
pub mod linkmodel;
pub mod report;
pub mod routing;
pub mod scheduler;
pub mod switch_loss;
pub mod topology;
pub mod workload;

pub use error::{ConfigError, LossError, RoutingError, ScheduleError, TopologyError, WorkloadError};
pub use topology::{build_topology, max_topology_for_radix, NodeId, QFlyTopology, Variant};
