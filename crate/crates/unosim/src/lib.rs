//! Deterministic packet-level simulator for unified inter/intra-datacenter
//! congestion control with phantom-queue ECN marking, erasure-coded transport
//! reliability, and subflow load balancing, plus the baselines, workload
//! generators, failure models, and metrics harness around them.

pub mod cc;
pub mod config;
pub mod ec;
pub mod lb;
pub mod metrics;
pub mod net;
pub mod packet;
pub mod port;
pub mod runner;
pub mod scenarios;
pub mod sim;
pub mod topo;
pub mod workload;

pub use config::ScenarioConfig;
pub use net::Network;
pub use runner::{run_scenario, run_to_dir, sweep, SweepAxis};
pub use sim::SimTime;
