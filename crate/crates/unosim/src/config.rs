//! Scenario configuration: a flat TOML file with sections mirroring the
//! simulator's modules, validated field-by-field before a run starts.

use serde::{Deserialize, Serialize};

use crate::cc::CcKind;
use crate::ec::EcScheme;
use crate::lb::LbKind;
use crate::sim::SimTime;
use crate::topo::FatTreeParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyCfg {
    pub k: u32,
    pub border_links: u32,
    pub link_bw_gbps: f64,
    /// Core-to-border uplink bandwidth; 0 = same as link_bw_gbps.
    pub border_uplink_gbps: f64,
    pub intra_rtt_us: f64,
    pub inter_rtt_us: f64,
    pub buffer_bytes: u64,
    /// Border-link port buffer; 0 = same as buffer_bytes.
    pub border_buffer_bytes: u64,
    pub phantom: PhantomCfg,
}

impl Default for TopologyCfg {
    fn default() -> Self {
        TopologyCfg {
            k: 8,
            border_links: 8,
            link_bw_gbps: 100.0,
            border_uplink_gbps: 0.0,
            intra_rtt_us: 14.0,
            inter_rtt_us: 2000.0,
            buffer_bytes: 1 << 20,
            border_buffer_bytes: 0,
            phantom: PhantomCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomCfg {
    pub enabled: bool,
    /// Drain rate as a fraction of the line rate.
    pub drain_ratio: f64,
    /// 0 = physical capacity.
    pub intra_capacity_bytes: u64,
    /// 0 = half the inter-DC BDP.
    pub border_capacity_bytes: u64,
}

impl Default for PhantomCfg {
    fn default() -> Self {
        PhantomCfg {
            enabled: true,
            drain_ratio: 0.9,
            intra_capacity_bytes: 0,
            border_capacity_bytes: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TransportCfg {
    /// "unocc" | "dctcp-like" | "gemini-approx"
    pub cc: String,
    pub mtu_bytes: u32,
    pub alpha_bdp_fraction: f64,
    pub beta: f64,
    pub md_k_intra_bdp_fraction: f64,
    /// 0 = intra-DC base RTT.
    pub epoch_period_us: f64,
    pub ewma_gain: f64,
    /// 0 = max(5us, 0.25 x base RTT) + serialization RTT.
    pub delay_epsilon_us: f64,
    pub md_scale_floor: f64,
    /// "measured-rtt" | "effective-rtt" | "base-rtt"
    pub qa_window: String,
    /// "auto" (inter on, intra off) | "on" | "off"
    pub pacing: String,
    pub initial_cwnd_bdp: f64,
    pub max_cwnd_bdp: f64,
    pub rto_min_us: f64,
    pub rto_rtt_multiple: f64,
    pub dupack_threshold: u32,
}

impl Default for TransportCfg {
    fn default() -> Self {
        TransportCfg {
            cc: "unocc".into(),
            mtu_bytes: 4096,
            alpha_bdp_fraction: 0.001,
            beta: 0.5,
            md_k_intra_bdp_fraction: 1.0 / 7.0,
            epoch_period_us: 0.0,
            ewma_gain: 0.125,
            delay_epsilon_us: 0.0,
            md_scale_floor: 0.3,
            qa_window: "measured-rtt".into(),
            pacing: "auto".into(),
            initial_cwnd_bdp: 1.0,
            max_cwnd_bdp: 2.0,
            rto_min_us: 100.0,
            rto_rtt_multiple: 4.0,
            dupack_threshold: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilityCfg {
    /// "unolb" | "ecmp" | "spray" | "plb"
    pub lb: String,
    pub n_sf: u32,
    /// Erasure coding for inter-DC flows.
    pub ec_enabled: bool,
    pub ec_x: u32,
    pub ec_y: u32,
    pub deadline_factor: f64,
    pub block_rto_rtt_multiple: f64,
    /// Per-subflow ACK-staleness reroute trigger; 0 disables.
    pub subflow_stale_rtt_multiple: f64,
}

impl Default for ReliabilityCfg {
    fn default() -> Self {
        ReliabilityCfg {
            lb: "unolb".into(),
            n_sf: 8,
            ec_enabled: true,
            ec_x: 8,
            ec_y: 2,
            deadline_factor: 2.0,
            block_rto_rtt_multiple: 2.0,
            subflow_stale_rtt_multiple: 1.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadCfg {
    /// "incast" | "permutation" | "mixed-cdf" | "allreduce"
    pub pattern: String,
    // incast
    pub incast_intra: u32,
    pub incast_inter: u32,
    pub incast_flow_bytes: u64,
    /// Destination: server index within DC 0.
    pub incast_dst: u32,
    /// Background intra-DC RPC traffic toward the incast destination, as a
    /// fraction of its access capacity; 0 disables.
    pub rpc_background_load: f64,
    pub rpc_cdf: String,
    // permutation
    pub perm_flow_bytes: u64,
    /// Negative = unconstrained derangement.
    pub perm_cross_fraction: f64,
    // mixed-cdf
    pub target_load: f64,
    pub intra_cdf: String,
    pub inter_cdf: String,
    pub ratio_intra: f64,
    pub ratio_inter: f64,
    /// "bytes" | "flows"
    pub ratio_by: String,
    /// Truncate both CDFs at this size; 0 = uncapped.
    pub max_flow_bytes: u64,
    /// Per-class caps applied after max_flow_bytes; 0 = off.
    pub max_intra_flow_bytes: u64,
    pub max_inter_flow_bytes: u64,
    // allreduce
    pub ar_burst_min_bytes: u64,
    pub ar_burst_max_bytes: u64,
    pub ar_iterations: u32,
    pub ar_groups: u32,
    pub ar_compute_gap_us: f64,
}

impl Default for WorkloadCfg {
    fn default() -> Self {
        WorkloadCfg {
            pattern: "incast".into(),
            incast_intra: 4,
            incast_inter: 4,
            incast_flow_bytes: 1 << 30,
            incast_dst: 0,
            rpc_background_load: 0.0,
            rpc_cdf: "rpc".into(),
            perm_flow_bytes: 64 << 20,
            perm_cross_fraction: -1.0,
            target_load: 0.4,
            intra_cdf: "websearch".into(),
            inter_cdf: "aliwan".into(),
            ratio_intra: 4.0,
            ratio_inter: 1.0,
            ratio_by: "bytes".into(),
            max_flow_bytes: 0,
            max_intra_flow_bytes: 0,
            max_inter_flow_bytes: 0,
            ar_burst_min_bytes: 70 << 20,
            ar_burst_max_bytes: 500 << 20,
            ar_iterations: 100,
            ar_groups: 4,
            ar_compute_gap_us: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkFailureCfg {
    /// "border:<idx>" or a raw link id.
    pub link: String,
    pub at_us: f64,
    /// Negative = never restored.
    #[serde(default = "neg_one")]
    pub restore_at_us: f64,
}

fn neg_one() -> f64 {
    -1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FailureCfg {
    pub link_failures: Vec<LinkFailureCfg>,
    /// "none" | "setup1" | "setup2" | "custom"
    pub loss_preset: String,
    pub loss_block_len: u32,
    pub loss_p1: f64,
    pub loss_p2: f64,
    pub loss_p3: f64,
    /// "border" | "all"
    pub loss_apply_to: String,
}

impl Default for FailureCfg {
    fn default() -> Self {
        FailureCfg {
            link_failures: Vec::new(),
            loss_preset: "none".into(),
            loss_block_len: 10,
            loss_p1: 0.0,
            loss_p2: 0.0,
            loss_p3: 0.0,
            loss_apply_to: "border".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunCfg {
    pub duration_ms: f64,
    pub seed: u64,
    pub output_dir: String,
    pub trace_queues: bool,
    pub queue_sample_us: f64,
    pub trace_rates: bool,
    /// Goodput bucket width; 0 = inter-DC base RTT.
    pub rate_bucket_us: f64,
    pub trace_cc: bool,
    pub label: String,
    /// Stop early once all flows complete.
    #[serde(default = "d_true")]
    pub stop_when_done: bool,
}

impl Default for RunCfg {
    fn default() -> Self {
        RunCfg {
            duration_ms: 100.0,
            seed: 1,
            output_dir: "out".into(),
            trace_queues: false,
            queue_sample_us: 10.0,
            trace_rates: false,
            rate_bucket_us: 0.0,
            trace_cc: false,
            label: String::new(),
            stop_when_done: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub topology: TopologyCfg,
    pub transport: TransportCfg,
    pub reliability: ReliabilityCfg,
    pub workload: WorkloadCfg,
    pub failure: FailureCfg,
    pub run: RunCfg,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{path:?}: {e}")))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Report every violation with its field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs: Vec<String> = Vec::new();
        let t = &self.topology;
        if t.k < 4 || t.k % 2 != 0 {
            errs.push(format!("topology.k: must be even and >= 4 (got {})", t.k));
        }
        if t.border_links < 1 {
            errs.push("topology.border_links: must be >= 1".into());
        }
        if t.link_bw_gbps <= 0.0 {
            errs.push("topology.link_bw_gbps: must be positive".into());
        }
        if t.intra_rtt_us <= 0.0 {
            errs.push("topology.intra_rtt_us: must be positive".into());
        }
        if t.inter_rtt_us <= t.intra_rtt_us * 16.0 / 12.0 {
            errs.push(format!(
                "topology.inter_rtt_us: must exceed {:.3} (16 intra hops)",
                t.intra_rtt_us * 16.0 / 12.0
            ));
        }
        if t.buffer_bytes < self.transport.mtu_bytes as u64 {
            errs.push("topology.buffer_bytes: must hold at least one MTU".into());
        }
        if !(0.0..1.0).contains(&t.phantom.drain_ratio) || t.phantom.drain_ratio <= 0.0 {
            errs.push(format!(
                "topology.phantom.drain_ratio: must be in (0, 1) (got {})",
                t.phantom.drain_ratio
            ));
        }

        let tr = &self.transport;
        if CcKind::parse(&tr.cc).is_none() {
            errs.push(format!(
                "transport.cc: unknown kind {:?} (unocc | dctcp-like | gemini-approx)",
                tr.cc
            ));
        }
        if tr.mtu_bytes == 0 {
            errs.push("transport.mtu_bytes: must be positive".into());
        }
        if tr.alpha_bdp_fraction <= 0.0 {
            errs.push("transport.alpha_bdp_fraction: must be positive".into());
        }
        if !(tr.beta > 0.0 && tr.beta <= 1.0) {
            errs.push(format!(
                "transport.beta: must be in (0, 1] (got {})",
                tr.beta
            ));
        }
        if tr.md_k_intra_bdp_fraction <= 0.0 {
            errs.push("transport.md_k_intra_bdp_fraction: must be positive".into());
        }
        if !(tr.ewma_gain > 0.0 && tr.ewma_gain <= 1.0) {
            errs.push("transport.ewma_gain: must be in (0, 1]".into());
        }
        if !["measured-rtt", "effective-rtt", "base-rtt"].contains(&tr.qa_window.as_str()) {
            errs.push(format!("transport.qa_window: unknown value {:?}", tr.qa_window));
        }
        if !["auto", "on", "off"].contains(&tr.pacing.as_str()) {
            errs.push(format!("transport.pacing: unknown value {:?}", tr.pacing));
        }
        if tr.initial_cwnd_bdp <= 0.0 || tr.max_cwnd_bdp < tr.initial_cwnd_bdp {
            errs.push("transport: need 0 < initial_cwnd_bdp <= max_cwnd_bdp".into());
        }

        let r = &self.reliability;
        if LbKind::parse(&r.lb).is_none() {
            errs.push(format!(
                "reliability.lb: unknown kind {:?} (unolb | ecmp | spray | plb)",
                r.lb
            ));
        }
        if r.n_sf < 1 {
            errs.push("reliability.n_sf: must be >= 1".into());
        }
        if r.ec_enabled {
            if r.ec_x < 1 {
                errs.push("reliability.ec_x: must be >= 1".into());
            }
            if r.ec_x + r.ec_y > 16 {
                errs.push("reliability: ec_x + ec_y must be <= 16".into());
            }
        }
        if r.deadline_factor <= 0.0 {
            errs.push("reliability.deadline_factor: must be positive".into());
        }

        let w = &self.workload;
        match w.pattern.as_str() {
            "incast" => {
                let per_dc = (t.k * t.k * t.k / 4) as u64;
                if w.incast_intra as u64 + 1 > per_dc || w.incast_inter as u64 > per_dc {
                    errs.push(format!(
                        "workload: incast needs {}+1 local and {} remote servers; DC has {}",
                        w.incast_intra, w.incast_inter, per_dc
                    ));
                }
                if w.incast_dst as u64 >= per_dc {
                    errs.push("workload.incast_dst: out of range".into());
                }
                if !(0.0..1.0).contains(&w.rpc_background_load) {
                    errs.push("workload.rpc_background_load: must be in [0, 1)".into());
                }
            }
            "permutation" => {
                if w.perm_flow_bytes == 0 {
                    errs.push("workload.perm_flow_bytes: must be positive".into());
                }
            }
            "mixed-cdf" => {
                if !(w.target_load > 0.0 && w.target_load <= 1.0) {
                    errs.push(format!(
                        "workload.target_load: must be in (0, 1] (got {})",
                        w.target_load
                    ));
                }
                if w.ratio_intra <= 0.0 || w.ratio_inter <= 0.0 {
                    errs.push("workload: ratio components must be positive".into());
                }
                if !["bytes", "flows"].contains(&w.ratio_by.as_str()) {
                    errs.push(format!("workload.ratio_by: unknown value {:?}", w.ratio_by));
                }
            }
            "allreduce" => {
                if w.ar_iterations < 1 {
                    errs.push("workload.ar_iterations: must be >= 1".into());
                }
                if w.ar_groups < 1 {
                    errs.push("workload.ar_groups: must be >= 1".into());
                }
                if w.ar_burst_max_bytes < w.ar_burst_min_bytes {
                    errs.push("workload: ar_burst_max_bytes < ar_burst_min_bytes".into());
                }
            }
            other => errs.push(format!(
                "workload.pattern: unknown pattern {other:?} (incast | permutation | mixed-cdf | allreduce)"
            )),
        }

        let f = &self.failure;
        if !["none", "setup1", "setup2", "custom"].contains(&f.loss_preset.as_str()) {
            errs.push(format!("failure.loss_preset: unknown value {:?}", f.loss_preset));
        }
        if f.loss_preset == "custom" {
            for (name, p) in [("loss_p1", f.loss_p1), ("loss_p2", f.loss_p2), ("loss_p3", f.loss_p3)] {
                if !(0.0..=1.0).contains(&p) {
                    errs.push(format!("failure.{name}: must be in [0, 1]"));
                }
            }
            if f.loss_p1 + f.loss_p2 + f.loss_p3 > 1.0 {
                errs.push("failure: loss probabilities sum above 1".into());
            }
            if f.loss_block_len < 3 {
                errs.push("failure.loss_block_len: must be >= 3".into());
            }
        }
        if !["border", "all"].contains(&f.loss_apply_to.as_str()) {
            errs.push(format!("failure.loss_apply_to: unknown value {:?}", f.loss_apply_to));
        }
        for (i, lf) in f.link_failures.iter().enumerate() {
            if let Some(rest) = lf.link.strip_prefix("border:") {
                match rest.parse::<u32>() {
                    Ok(idx) if idx < t.border_links => {}
                    _ => errs.push(format!(
                        "failure.link_failures[{i}].link: border index out of range: {:?}",
                        lf.link
                    )),
                }
            } else if lf.link.parse::<u32>().is_err() {
                errs.push(format!(
                    "failure.link_failures[{i}].link: expected \"border:<idx>\" or a link id, got {:?}",
                    lf.link
                ));
            }
            if lf.restore_at_us >= 0.0 && lf.restore_at_us <= lf.at_us {
                errs.push(format!(
                    "failure.link_failures[{i}]: restore_at_us must exceed at_us"
                ));
            }
        }

        if self.run.duration_ms <= 0.0 {
            errs.push("run.duration_ms: must be positive".into());
        }
        if self.run.trace_queues && self.run.queue_sample_us <= 0.0 {
            errs.push("run.queue_sample_us: must be positive when tracing queues".into());
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    // resolved values

    pub fn link_bw_bps(&self) -> u64 {
        (self.topology.link_bw_gbps * 1e9).round() as u64
    }

    pub fn intra_rtt(&self) -> SimTime {
        SimTime((self.topology.intra_rtt_us * 1e3).round() as u64)
    }

    pub fn inter_rtt(&self) -> SimTime {
        SimTime((self.topology.inter_rtt_us * 1e3).round() as u64)
    }

    /// Class bandwidth-delay product in bytes.
    pub fn bdp_bytes(&self, class: crate::topo::FlowClass) -> f64 {
        let rtt = match class {
            crate::topo::FlowClass::Intra => self.intra_rtt(),
            crate::topo::FlowClass::Inter => self.inter_rtt(),
        };
        self.link_bw_bps() as f64 * rtt.as_secs_f64() / 8.0
    }

    pub fn fat_tree_params(&self) -> FatTreeParams {
        FatTreeParams {
            k: self.topology.k,
            border_links: self.topology.border_links,
            link_bw_bps: self.link_bw_bps(),
            border_uplink_bps: (self.topology.border_uplink_gbps * 1e9).round() as u64,
            intra_rtt: self.intra_rtt(),
            inter_rtt: self.inter_rtt(),
        }
    }

    pub fn cc_kind(&self) -> CcKind {
        CcKind::parse(&self.transport.cc).expect("validated")
    }

    pub fn lb_kind(&self) -> LbKind {
        LbKind::parse(&self.reliability.lb).expect("validated")
    }

    pub fn ec_scheme(&self) -> Option<EcScheme> {
        if self.reliability.ec_enabled {
            Some(EcScheme {
                x: self.reliability.ec_x,
                y: self.reliability.ec_y,
            })
        } else {
            None
        }
    }

    pub fn duration(&self) -> SimTime {
        SimTime((self.run.duration_ms * 1e6).round() as u64)
    }

    pub fn rate_bucket(&self) -> SimTime {
        if self.run.rate_bucket_us > 0.0 {
            SimTime((self.run.rate_bucket_us * 1e3).round() as u64)
        } else {
            self.inter_rtt()
        }
    }

    pub fn block_loss_model(&self) -> Option<crate::topo::BlockLossModel> {
        match self.failure.loss_preset.as_str() {
            "none" => None,
            "setup1" => Some(crate::topo::BlockLossModel::setup1()),
            "setup2" => Some(crate::topo::BlockLossModel::setup2()),
            "custom" => Some(crate::topo::BlockLossModel::new(
                self.failure.loss_block_len,
                self.failure.loss_p1,
                self.failure.loss_p2,
                self.failure.loss_p3,
            )),
            _ => unreachable!("validated"),
        }
    }

    /// Flatten to dotted key = value lines for the summary echo.
    pub fn flatten(&self) -> Vec<(String, String)> {
        let toml_v = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
            match v {
                toml::Value::Table(t) => {
                    for (k, v) in t {
                        let p = if prefix.is_empty() {
                            k.clone()
                        } else {
                            format!("{prefix}.{k}")
                        };
                        walk(&p, v, out);
                    }
                }
                toml::Value::Array(a) => {
                    for (i, v) in a.iter().enumerate() {
                        walk(&format!("{prefix}[{i}]"), v, out);
                    }
                }
                other => out.push((prefix.to_string(), other.to_string())),
            }
        }
        walk("", &toml_v, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().expect("table defaults validate");
        assert_eq!(cfg.transport.beta, 0.5);
        assert_eq!(cfg.transport.alpha_bdp_fraction, 0.001);
        assert_eq!(cfg.topology.phantom.drain_ratio, 0.9);
        assert_eq!(cfg.intra_rtt(), SimTime::from_us(14));
        assert_eq!(cfg.inter_rtt(), SimTime::from_ms(2));
        // intra BDP at 100 Gb/s x 14 us = 175 kB
        assert!((cfg.bdp_bytes(crate::topo::FlowClass::Intra) - 175_000.0).abs() < 1e-6);
    }

    #[test]
    fn odd_k_reports_field_path() {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.k = 7;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("topology.k"), "{err}");
    }

    #[test]
    fn beta_out_of_range() {
        let mut cfg = ScenarioConfig::default();
        cfg.transport.beta = 1.5;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("transport.beta"), "{err}");
    }

    #[test]
    fn multiple_violations_all_reported() {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.k = 3;
        cfg.transport.beta = -1.0;
        cfg.reliability.lb = "bogus".into();
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("topology.k") && msg.contains("transport.beta") && msg.contains("reliability.lb"));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = ScenarioConfig::from_toml("[topology]\nk = 4\nnot_a_key = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
    }

    #[test]
    fn unknown_cc_kind_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.transport.cc = "cubic".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn flatten_has_dotted_keys() {
        let cfg = ScenarioConfig::default();
        let flat = cfg.flatten();
        assert!(flat.iter().any(|(k, v)| k == "topology.k" && v == "8"));
        assert!(flat.iter().any(|(k, _)| k == "transport.beta"));
    }
}
