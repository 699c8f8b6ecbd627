//! Temporary diagnostics for the fairness scenario (not part of the suite).

use unosim::config::ScenarioConfig;
use unosim::metrics::jain_index;
use unosim::runner::run_scenario;
use unosim::sim::SimTime;

#[test]
#[ignore]
fn dump_fairness_trajectory() {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.k = 4;
    cfg.topology.link_bw_gbps = 10.0;
    cfg.transport.cc = "unocc".into();
    cfg.reliability.lb = "spray".into();
    cfg.reliability.ec_enabled = false;
    cfg.workload.pattern = "incast".into();
    cfg.workload.incast_intra = 2;
    cfg.workload.incast_inter = 2;
    cfg.workload.incast_flow_bytes = 64 << 20;
    cfg.topology.buffer_bytes = 131_072;
    cfg.run.duration_ms = 400.0;
    cfg.run.seed = 3;
    cfg.run.trace_rates = true;
    cfg.run.trace_cc = true;
    let out = run_scenario(&cfg).expect("run");
    let net = &out.net;
    for f in &net.flows {
        println!(
            "flow {} class {} start {} end {:?} cwnd_end {:.0} delivered {}",
            f.id.0,
            f.spec.class.as_str(),
            f.spec.start,
            f.completed_at,
            f.cc.cwnd(),
            f.delivered_app_bytes
        );
        let mds = f
            .cc
            .trace
            .iter()
            .filter(|e| matches!(e.kind, unosim::cc::CcEventKind::Md { .. }))
            .count();
        let qas = f
            .cc
            .trace
            .iter()
            .filter(|e| matches!(e.kind, unosim::cc::CcEventKind::Qa { .. }))
            .count();
        println!("  md events {mds} qa events {qas}");
    }
    let bucket = net.ctx.goodput.bucket;
    let window = SimTime(bucket.0 * 10);
    let mut t = window;
    let end = net
        .ctx
        .records
        .iter()
        .map(|r| r.end)
        .min()
        .unwrap_or(SimTime::from_ms(400));
    while t < end {
        let rates: Vec<f64> = (0..net.flows.len())
            .map(|fl| net.ctx.goodput.window_bytes(fl, t, window) as f64)
            .collect();
        let j = jain_index(&rates).unwrap_or(0.0);
        println!(
            "t={:>6.1}ms jain={:.3} rates(Mbps)={:?}",
            t.0 as f64 / 1e6,
            j,
            rates
                .iter()
                .map(|b| (b * 8.0 / window.as_secs_f64() / 1e6).round())
                .collect::<Vec<_>>()
        );
        t = t + SimTime(bucket.0 * 5);
    }
}
