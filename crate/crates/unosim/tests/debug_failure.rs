//! Temporary diagnostics for the border-failure scenario.

use unosim::config::ScenarioConfig;
use unosim::runner::run_scenario;
use unosim::scenarios;

fn cfg(seed: u64, lb: &str, ec: bool) -> ScenarioConfig {
    let mut cfg = (scenarios::find("border-link-failure-5MiB").unwrap().build)();
    cfg.run.seed = seed;
    cfg.reliability.lb = lb.into();
    cfg.reliability.ec_enabled = ec;
    cfg
}

#[test]
#[ignore]
fn dump_failure_run() {
    for (lb, ec) in [("unolb", true), ("spray", false), ("plb", false)] {
        let out = run_scenario(&cfg(1, lb, ec)).expect("run");
        let net = &out.net;
        let mean = if out.records().is_empty() {
            0.0
        } else {
            out.records().iter().map(|r| r.fct().0 as f64).sum::<f64>()
                / out.records().len() as f64
        };
        println!(
            "=== {lb} ec={ec}: completed {}/{} mean fct {:.2} ms nacks {} retx_blocks {} drops q/l/m {}/{}/{}",
            out.records().len(),
            net.flows.len(),
            mean / 1e6,
            net.flows.iter().map(|f| f.nacks_received).sum::<u64>(),
            net.flows.iter().map(|f| f.retransmitted_blocks).sum::<u64>(),
            net.ctx.audit.drops_queue,
            net.ctx.audit.drops_link,
            net.ctx.audit.drops_loss,
        );
        for f in &net.flows {
            if !f.completed() {
                println!(
                    "  STUCK flow {} {}->{} size {} delivered {} inflight {} cwnd {:.0} acked {}/{} retxq {}",
                    f.id.0,
                    f.spec.src.0,
                    f.spec.dst.0,
                    f.spec.size_bytes,
                    f.delivered_app_bytes,
                    f.inflight_bytes,
                    f.cc.cwnd(),
                    f.acked_count(),
                    f.framing.n_packets,
                    f.retx_queue_len(),
                );
            }
        }
    }
}
