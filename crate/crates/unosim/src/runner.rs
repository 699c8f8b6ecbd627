//! Scenario execution: builds the network, instantiates the workload, runs
//! the event loop, audits conservation, and writes the output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::{fct_stats, FlowRecord};
use crate::net::Network;
use crate::sim::{RngStream, SimTime};
use crate::topo::FlowClass;
use crate::workload::{self, AllReduceSchedule, FlowSpec, SizeCdf};

pub const WEBSEARCH_CDF: &str = include_str!("../data/websearch.cdf");
pub const ALIWAN_CDF: &str = include_str!("../data/aliwan.cdf");
pub const RPC_CDF: &str = include_str!("../data/rpc.cdf");

/// Resolve a CDF by builtin name or file path.
pub fn load_cdf(name: &str) -> Result<SizeCdf, String> {
    let text = match name {
        "websearch" => WEBSEARCH_CDF.to_string(),
        "aliwan" => ALIWAN_CDF.to_string(),
        "rpc" => RPC_CDF.to_string(),
        path => std::fs::read_to_string(path).map_err(|e| format!("cdf {path:?}: {e}"))?,
    };
    SizeCdf::parse(&text).map_err(|e| format!("cdf {name:?}: {e}"))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("workload error: {0}")]
    Workload(String),
    #[error("runtime invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct RunOutput {
    pub net: Network,
    pub summary: Vec<(String, String)>,
}

impl RunOutput {
    pub fn records(&self) -> &[FlowRecord] {
        &self.net.ctx.records
    }
}

fn build_workload(net: &mut Network) -> Result<(), RunError> {
    let cfg = net.ctx.cfg.clone();
    let w = &cfg.workload;
    let mut rng = RngStream::new("workload", cfg.run.seed);
    let err = |e: String| RunError::Workload(e);
    match w.pattern.as_str() {
        "incast" => {
            let dst = net.ctx.topo.servers_in_dc(0)[w.incast_dst as usize];
            let flows = workload::gen_incast(
                &net.ctx.topo,
                w.incast_intra as usize,
                w.incast_inter as usize,
                w.incast_flow_bytes,
                dst,
                &mut rng,
            )
            .map_err(err)?;
            for f in flows {
                net.add_flow(f, 0);
            }
            if w.rpc_background_load > 0.0 {
                let cdf = load_cdf(&w.rpc_cdf).map_err(err)?;
                let senders = net.ctx.topo.servers_in_dc(0);
                let bw = cfg.link_bw_bps() as f64;
                let lambda = w.rpc_background_load * bw / (8.0 * cdf.mean());
                let mut t = 0u64;
                loop {
                    t += rng.exp_ns(lambda);
                    if t >= cfg.duration().0 {
                        break;
                    }
                    let src = loop {
                        let s = senders[rng.below(senders.len() as u64) as usize];
                        if s != dst {
                            break s;
                        }
                    };
                    net.add_flow(
                        FlowSpec {
                            start: SimTime(t),
                            src,
                            dst,
                            size_bytes: cdf.sample(rng.uniform()),
                            class: FlowClass::Intra,
                        },
                        0,
                    );
                }
            }
        }
        "permutation" => {
            let frac = if w.perm_cross_fraction >= 0.0 {
                Some(w.perm_cross_fraction)
            } else {
                None
            };
            for f in workload::gen_permutation(&net.ctx.topo, frac, w.perm_flow_bytes, &mut rng) {
                net.add_flow(f, 0);
            }
        }
        "mixed-cdf" => {
            let mut intra = load_cdf(&w.intra_cdf).map_err(err)?;
            let mut inter = load_cdf(&w.inter_cdf).map_err(err)?;
            if w.max_flow_bytes > 0 {
                intra = intra.truncate(w.max_flow_bytes);
                inter = inter.truncate(w.max_flow_bytes);
            }
            if w.max_intra_flow_bytes > 0 {
                intra = intra.truncate(w.max_intra_flow_bytes);
            }
            if w.max_inter_flow_bytes > 0 {
                inter = inter.truncate(w.max_inter_flow_bytes);
            }
            let flows = workload::poisson_arrivals(
                &net.ctx.topo,
                w.target_load,
                cfg.link_bw_bps(),
                &intra,
                &inter,
                w.ratio_intra,
                w.ratio_inter,
                w.ratio_by == "bytes",
                cfg.duration(),
                &mut rng,
            );
            for f in flows {
                net.add_flow(f, 0);
            }
        }
        "allreduce" => {
            net.install_allreduce(AllReduceSchedule {
                burst_min_bytes: w.ar_burst_min_bytes,
                burst_max_bytes: w.ar_burst_max_bytes,
                iterations: w.ar_iterations,
                groups: w.ar_groups,
                compute_gap: SimTime((w.ar_compute_gap_us * 1e3).round() as u64),
            });
        }
        other => return Err(RunError::Workload(format!("unknown pattern {other:?}"))),
    }
    Ok(())
}

/// Execute one scenario in memory. Deterministic for a given (config, seed).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let mut net = Network::new(cfg.clone()).map_err(RunError::Workload)?;
    build_workload(&mut net)?;
    net.run(cfg.duration());
    if !net.ctx.conservation_ok() {
        return Err(RunError::Invariant(format!(
            "byte conservation audit failed: sent {} != delivered {} + dropped {} + resident",
            net.ctx.audit.data_sent_bytes,
            net.ctx.audit.data_delivered_bytes,
            net.ctx.audit.dropped_bytes(),
        )));
    }
    let summary = build_summary(&net);
    Ok(RunOutput { net, summary })
}

fn fmt_stats(prefix: &str, out: &mut Vec<(String, String)>, records: &[FlowRecord], class: Option<FlowClass>) {
    let stats = fct_stats(crate::metrics::class_fcts(records, class));
    match stats {
        Some(s) => {
            out.push((format!("{prefix}.count"), s.count.to_string()));
            out.push((format!("{prefix}.mean_fct_ns"), format!("{:.0}", s.mean_ns)));
            out.push((format!("{prefix}.p99_fct_ns"), s.p99_ns.to_string()));
        }
        None => out.push((format!("{prefix}.count"), "no data".into())),
    }
}

fn build_summary(net: &Network) -> Vec<(String, String)> {
    let ctx = &net.ctx;
    let mut out: Vec<(String, String)> = Vec::new();
    out.push(("run.label".into(), ctx.cfg.run.label.clone()));
    out.push(("run.seed".into(), ctx.cfg.run.seed.to_string()));
    out.push(("run.duration_ns".into(), ctx.cfg.duration().0.to_string()));
    out.push(("run.events_executed".into(), ctx.queue.executed().to_string()));
    out.push(("flows.total".into(), net.flows.len().to_string()));
    out.push((
        "flows.completed".into(),
        ctx.records.len().to_string(),
    ));
    out.push((
        "flows.incomplete".into(),
        (net.flows.len() - ctx.records.len()).to_string(),
    ));
    fmt_stats("fct.all", &mut out, &ctx.records, None);
    fmt_stats("fct.intra", &mut out, &ctx.records, Some(FlowClass::Intra));
    fmt_stats("fct.inter", &mut out, &ctx.records, Some(FlowClass::Inter));
    let slowdowns: Vec<f64> = ctx.records.iter().map(|r| r.slowdown()).collect();
    if !slowdowns.is_empty() {
        let mean = slowdowns.iter().sum::<f64>() / slowdowns.len() as f64;
        out.push(("slowdown.mean".into(), format!("{mean:.4}")));
    }
    let a = &ctx.audit;
    out.push(("audit.data_sent_bytes".into(), a.data_sent_bytes.to_string()));
    out.push((
        "audit.data_delivered_bytes".into(),
        a.data_delivered_bytes.to_string(),
    ));
    out.push(("audit.drop_queue_bytes".into(), a.drop_queue_bytes.to_string()));
    out.push(("audit.drop_link_bytes".into(), a.drop_link_bytes.to_string()));
    out.push(("audit.drop_loss_bytes".into(), a.drop_loss_bytes.to_string()));
    out.push(("audit.conservation".into(), "exact".into()));
    let retx: u64 = net.flows.iter().map(|f| f.retransmitted_blocks).sum();
    let nacks: u64 = net.flows.iter().map(|f| f.nacks_received).sum();
    let reroutes: u64 = net.flows.iter().map(|f| f.reroutes()).sum();
    out.push(("reliability.retransmitted_blocks".into(), retx.to_string()));
    out.push(("reliability.nacks".into(), nacks.to_string()));
    out.push(("reliability.reroutes".into(), reroutes.to_string()));
    // fairness milestone over the statically generated flows, when rates on
    if ctx.cfg.run.trace_rates && net.flows.len() >= 2 {
        let idx: Vec<usize> = (0..net.flows.len()).collect();
        let ends: Vec<(SimTime, Option<SimTime>)> = net
            .flows
            .iter()
            .map(|f| (f.spec.start, f.completed_at))
            .collect();
        let window = SimTime(ctx.goodput.bucket.0 * 10);
        let milestone =
            crate::metrics::jain_milestone(&ctx.goodput, &idx, &ends, window, 0.9);
        out.push((
            "fairness.jain_window_ns".into(),
            window.0.to_string(),
        ));
        out.push((
            "fairness.first_sustained_jain_0.9_ns".into(),
            milestone.map(|t| t.0.to_string()).unwrap_or_else(|| "never".into()),
        ));
    }
    if let Some(rts) = net.allreduce_runtimes() {
        out.push(("allreduce.iterations_done".into(), rts.len().to_string()));
        if !rts.is_empty() {
            let mean_ns =
                rts.iter().map(|(_, t)| t.0 as f64).sum::<f64>() / rts.len() as f64;
            out.push(("allreduce.mean_iter_runtime_ns".into(), format!("{mean_ns:.0}")));
            // runtime relative to the unloaded ideal for each burst
            let bw = ctx.cfg.link_bw_bps();
            let mut ratios = Vec::new();
            for (bytes, t) in rts {
                let ideal = crate::metrics::ideal_fct(
                    *bytes / ctx.cfg.workload.ar_groups as u64,
                    ctx.cfg.inter_rtt(),
                    bw,
                );
                ratios.push(t.0 as f64 / ideal.0 as f64);
            }
            let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
            out.push(("allreduce.mean_runtime_ratio".into(), format!("{mean_ratio:.3}")));
        }
    }
    out
}

fn write_flows_csv(path: &Path, records: &[FlowRecord]) -> std::io::Result<()> {
    let mut s = String::from(
        "flow_id,class,src,dst,size_bytes,start_ns,end_ns,fct_ns,slowdown,bytes_on_wire\n",
    );
    let mut sorted: Vec<&FlowRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.flow_id);
    for r in sorted {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.6},{}",
            r.flow_id,
            r.class.as_str(),
            r.src,
            r.dst,
            r.size_bytes,
            r.start.0,
            r.end.0,
            r.fct().0,
            r.slowdown(),
            r.bytes_on_wire
        )
        .unwrap();
    }
    std::fs::write(path, s)
}

fn write_queues_csv(path: &Path, net: &Network) -> std::io::Result<()> {
    let mut s = String::from("time_ns,port_id,physical_bytes,phantom_bytes\n");
    for row in &net.ctx.queue_trace {
        writeln!(
            s,
            "{},{},{},{}",
            row.at.0,
            net.ctx.channel_name(row.ch),
            row.physical_bytes,
            row.phantom_bytes
        )
        .unwrap();
    }
    std::fs::write(path, s)
}

fn write_rates_csv(path: &Path, net: &Network) -> std::io::Result<()> {
    let mut s = String::from("time_ns,flow_id,goodput_bps\n");
    let g = &net.ctx.goodput;
    for (flow, buckets) in g.delivered.iter().enumerate() {
        for (i, bytes) in buckets.iter().enumerate() {
            if *bytes > 0 {
                let t = (i as u64 + 1) * g.bucket.0;
                let bps = *bytes as f64 * 8.0 / g.bucket.as_secs_f64();
                writeln!(s, "{},{},{:.0}", t, flow, bps).unwrap();
            }
        }
    }
    std::fs::write(path, s)
}

fn write_summary(path: &Path, out: &RunOutput) -> std::io::Result<()> {
    let mut s = String::new();
    for (k, v) in &out.summary {
        writeln!(s, "{k} = {v}").unwrap();
    }
    // fully-resolved config echo so the run is re-creatable from its outputs
    for (k, v) in out.net.ctx.cfg.flatten() {
        writeln!(s, "config.{k} = {v}").unwrap();
    }
    std::fs::write(path, s)
}

/// Run a scenario and write flows.csv, queues.csv, rates.csv, summary.txt and
/// the resolved config into `out_dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunOutput, RunError> {
    let out = run_scenario(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    write_flows_csv(&out_dir.join("flows.csv"), out.records())?;
    if cfg.run.trace_queues {
        write_queues_csv(&out_dir.join("queues.csv"), &out.net)?;
    }
    if cfg.run.trace_rates {
        write_rates_csv(&out_dir.join("rates.csv"), &out.net)?;
    }
    write_summary(&out_dir.join("summary.txt"), &out)?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Load,
    RttRatio,
    Seed,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<SweepAxis> {
        match s {
            "load" => Some(SweepAxis::Load),
            "rtt_ratio" => Some(SweepAxis::RttRatio),
            "seed" => Some(SweepAxis::Seed),
            _ => None,
        }
    }
}

pub struct SweepPoint {
    pub value: f64,
    pub dir: PathBuf,
    pub result: Result<Vec<(String, String)>, String>,
}

/// One isolated run per axis value; failures are recorded and the sweep
/// continues. Writes an aggregate table of per-class mean/p99 FCT.
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    out_root: &Path,
) -> Result<Vec<SweepPoint>, RunError> {
    std::fs::create_dir_all(out_root)?;
    let mut points = Vec::new();
    for v in values {
        let mut c = cfg.clone();
        let name = match axis {
            SweepAxis::Load => {
                c.workload.target_load = *v;
                format!("load-{v}")
            }
            SweepAxis::RttRatio => {
                c.topology.inter_rtt_us = c.topology.intra_rtt_us * *v;
                format!("rtt-ratio-{v}")
            }
            SweepAxis::Seed => {
                c.run.seed = *v as u64;
                format!("seed-{}", *v as u64)
            }
        };
        let dir = out_root.join(&name);
        let result = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            run_to_dir(&c, &dir)
        })) {
            Ok(Ok(out)) => Ok(out.summary),
            Ok(Err(e)) => Err(e.to_string()),
            Err(_) => Err("panic: runtime invariant violation".into()),
        };
        points.push(SweepPoint {
            value: *v,
            dir,
            result,
        });
    }
    // aggregate table
    let mut s = String::from("value,class,count,mean_fct_ns,p99_fct_ns\n");
    for p in &points {
        if let Ok(summary) = &p.result {
            for class in ["all", "intra", "inter"] {
                let get = |key: &str| {
                    summary
                        .iter()
                        .find(|(k, _)| k == &format!("fct.{class}.{key}"))
                        .map(|(_, v)| v.clone())
                        .unwrap_or_default()
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    p.value,
                    class,
                    get("count"),
                    get("mean_fct_ns"),
                    get("p99_fct_ns")
                );
            }
        }
    }
    std::fs::write(out_root.join("aggregate.csv"), s)?;
    Ok(points)
}
