//! Built-in scenario library: named presets for the standard experiments.

use crate::config::ScenarioConfig;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub build: fn() -> ScenarioConfig,
}

fn incast_base(n_intra: u32, n_inter: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.workload.pattern = "incast".into();
    cfg.workload.incast_intra = n_intra;
    cfg.workload.incast_inter = n_inter;
    cfg.workload.incast_flow_bytes = 1 << 30;
    // receiver-side incast: load balancing has negligible impact, spray it
    cfg.reliability.lb = "spray".into();
    cfg.run.duration_ms = 2000.0;
    cfg.run.trace_rates = true;
    cfg
}

fn mixed_incast_4_4() -> ScenarioConfig {
    incast_base(4, 4)
}

fn intra_incast_8() -> ScenarioConfig {
    incast_base(8, 0)
}

fn inter_incast_8() -> ScenarioConfig {
    incast_base(0, 8)
}

fn permutation_800g() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.workload.pattern = "permutation".into();
    cfg.workload.perm_flow_bytes = 64 << 20;
    cfg.run.duration_ms = 500.0;
    cfg
}

fn permutation_provisioned() -> ScenarioConfig {
    let mut cfg = permutation_800g();
    // inter-DC links provisioned to match the core uplink capacity
    cfg.topology.border_links = 64;
    cfg
}

fn realistic_load(load: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.k = 4;
    cfg.topology.link_bw_gbps = 10.0;
    cfg.workload.pattern = "mixed-cdf".into();
    cfg.workload.target_load = load;
    // tails scaled to the desk bandwidth, preserving each class's size/BDP
    // ratio from the 100 Gb/s distributions
    cfg.workload.max_intra_flow_bytes = 3 << 20;
    cfg.workload.max_inter_flow_bytes = 20 << 20;
    cfg.run.duration_ms = 400.0;
    cfg
}

fn rtt_ratio_sweep() -> ScenarioConfig {
    // sweep this with: sweep <cfg> --axis rtt_ratio --values 8,16,...,512
    realistic_load(0.4)
}

fn queue_asymmetry() -> ScenarioConfig {
    let mut cfg = realistic_load(0.4);
    cfg.topology.link_bw_gbps = 100.0;
    // shallow intra-DC buffers (one intra BDP), deep border buffers (2.2 MiB)
    cfg.topology.buffer_bytes = 175_000;
    cfg.topology.border_buffer_bytes = 2_306_867;
    cfg
}

fn border_link_failure_5mib() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.k = 4;
    cfg.topology.border_uplink_gbps = 200.0; // keep the border the bottleneck
    cfg.workload.pattern = "permutation".into();
    cfg.workload.perm_flow_bytes = 5 << 20;
    cfg.workload.perm_cross_fraction = 1.0;
    // one-window transfers under steady saturation rather than a
    // simultaneous full-BDP burst
    cfg.transport.initial_cwnd_bdp = 0.3;
    cfg.failure.link_failures = vec![crate::config::LinkFailureCfg {
        link: "border:0".into(),
        at_us: 0.0,
        restore_at_us: -1.0,
    }];
    cfg.run.duration_ms = 200.0;
    cfg
}

fn random_loss_single_flow() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.k = 4;
    cfg.workload.pattern = "incast".into();
    cfg.workload.incast_intra = 0;
    cfg.workload.incast_inter = 1;
    cfg.workload.incast_flow_bytes = 5 << 20;
    cfg.failure.loss_preset = "setup2".into();
    cfg.run.duration_ms = 100.0;
    cfg
}

fn allreduce_100_iters() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.k = 4;
    cfg.workload.pattern = "allreduce".into();
    cfg.workload.ar_iterations = 100;
    cfg.workload.ar_groups = 4;
    cfg.workload.ar_burst_min_bytes = 70 << 20;
    cfg.workload.ar_burst_max_bytes = 500 << 20;
    cfg.workload.ar_compute_gap_us = 1000.0;
    cfg.failure.loss_preset = "setup2".into();
    cfg.run.duration_ms = 10_000.0;
    cfg
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "mixed-incast-4-4",
        description: "4 intra-DC + 4 inter-DC 1 GiB flows toward one server; fairness microbenchmark",
        build: mixed_incast_4_4,
    },
    Scenario {
        name: "intra-incast-8",
        description: "8 intra-DC 1 GiB flows toward one server",
        build: intra_incast_8,
    },
    Scenario {
        name: "inter-incast-8",
        description: "8 inter-DC 1 GiB flows toward one server",
        build: inter_incast_8,
    },
    Scenario {
        name: "permutation-800g",
        description: "random permutation over all servers, as-is 8-link (800 Gb/s) border",
        build: permutation_800g,
    },
    Scenario {
        name: "permutation-provisioned",
        description: "random permutation with fully provisioned inter-DC links",
        build: permutation_provisioned,
    },
    Scenario {
        name: "realistic-load-20",
        description: "web-search + regional-WAN mix at 20% load (desk-scale k=4)",
        build: || realistic_load(0.2),
    },
    Scenario {
        name: "realistic-load-40",
        description: "web-search + regional-WAN mix at 40% load (desk-scale k=4)",
        build: || realistic_load(0.4),
    },
    Scenario {
        name: "realistic-load-60",
        description: "web-search + regional-WAN mix at 60% load (desk-scale k=4)",
        build: || realistic_load(0.6),
    },
    Scenario {
        name: "realistic-load-80",
        description: "web-search + regional-WAN mix at 80% load (desk-scale k=4)",
        build: || realistic_load(0.8),
    },
    Scenario {
        name: "rtt-ratio-sweep",
        description: "40% load mix; sweep with --axis rtt_ratio --values 8,16,32,64,128,256,512",
        build: rtt_ratio_sweep,
    },
    Scenario {
        name: "queue-asymmetry",
        description: "shallow intra-DC (175 KiB) vs deep border (2.2 MiB) buffers at 40% load",
        build: queue_asymmetry,
    },
    Scenario {
        name: "border-link-failure-5MiB",
        description: "5 MiB cross-DC flows saturating the border with 1 of 8 border links failed",
        build: border_link_failure_5mib,
    },
    Scenario {
        name: "random-loss-single-flow",
        description: "single 5 MiB inter-DC flow under the measured correlated loss process",
        build: random_loss_single_flow,
    },
    Scenario {
        name: "allreduce-100-iters",
        description: "100 periodic gradient-sync bursts (70-500 MiB) across the border under loss",
        build: allreduce_100_iters,
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for s in SCENARIOS {
            let cfg = (s.build)();
            cfg.validate()
                .unwrap_or_else(|e| panic!("{} invalid: {e}", s.name));
        }
    }

    #[test]
    fn lookup_by_name() {
        assert!(find("mixed-incast-4-4").is_some());
        assert!(find("no-such-scenario").is_none());
    }
}
