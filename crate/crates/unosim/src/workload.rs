//! Traffic generation: size CDFs with inverse-transform sampling, Poisson
//! arrival processes scaled to a target load, incast and permutation
//! patterns, and periodic collective bursts for training traffic.

use crate::sim::{RngStream, SimTime};
use crate::topo::{FlowClass, NodeId, Topology};

/// Piecewise-linear flow-size CDF, anchored at (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SizeCdf {
    points: Vec<(u64, f64)>,
}

impl SizeCdf {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("cdf needs at least one point".into());
        }
        let mut last_p = 0.0;
        let mut last_s = 0u64;
        for (i, &(s, p)) in points.iter().enumerate() {
            if s <= last_s && i > 0 {
                return Err(format!("cdf sizes must strictly increase (point {i})"));
            }
            if p <= last_p {
                return Err(format!("cdf probabilities must strictly increase (point {i})"));
            }
            if s == 0 {
                return Err("cdf sizes must be positive".into());
            }
            last_p = p;
            last_s = s;
        }
        if last_p != 1.0 {
            return Err(format!("cdf must end at probability 1.0, got {last_p}"));
        }
        Ok(SizeCdf { points })
    }

    /// One "size<TAB>probability" pair per line; '#' lines ignored.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut points = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let size: u64 = it
                .next()
                .ok_or(format!("line {}: missing size", ln + 1))?
                .parse()
                .map_err(|e| format!("line {}: bad size: {e}", ln + 1))?;
            let prob: f64 = it
                .next()
                .ok_or(format!("line {}: missing probability", ln + 1))?
                .parse()
                .map_err(|e| format!("line {}: bad probability: {e}", ln + 1))?;
            points.push((size, prob));
        }
        SizeCdf::new(points)
    }

    /// Inverse-transform sample with linear interpolation between points;
    /// below the first point interpolates from the (0, 0) anchor. A
    /// single-point CDF is the degenerate constant distribution.
    pub fn sample(&self, u: f64) -> u64 {
        debug_assert!((0.0..1.0).contains(&u));
        if self.points.len() == 1 {
            return self.points[0].0;
        }
        let mut prev = (0u64, 0.0f64);
        for &(s, p) in &self.points {
            if u < p {
                let span = p - prev.1;
                let frac = (u - prev.1) / span;
                let size = prev.0 as f64 + frac * (s - prev.0) as f64;
                return (size.round() as u64).max(1);
            }
            prev = (s, p);
        }
        self.points.last().unwrap().0
    }

    /// Mean of the sampled distribution (piecewise-linear segments).
    pub fn mean(&self) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].0 as f64;
        }
        let mut prev = (0u64, 0.0f64);
        let mut mean = 0.0;
        for &(s, p) in &self.points {
            mean += (p - prev.1) * (prev.0 + s) as f64 / 2.0;
            prev = (s, p);
        }
        mean
    }

    pub fn max_size(&self) -> u64 {
        self.points.last().unwrap().0
    }

    /// Clamp the support at `max_bytes`, renormalizing the tail mass onto the
    /// cap (used to keep desk-scale runs bounded).
    pub fn truncate(&self, max_bytes: u64) -> SizeCdf {
        let mut points: Vec<(u64, f64)> = self
            .points
            .iter()
            .copied()
            .filter(|&(s, _)| s < max_bytes)
            .collect();
        points.push((max_bytes, 1.0));
        SizeCdf::new(points).expect("truncated cdf is valid")
    }
}

/// One generated flow.
#[derive(Debug, Clone, Copy)]
pub struct FlowSpec {
    pub start: SimTime,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bytes: u64,
    pub class: FlowClass,
}

/// Poisson arrivals scaled so the aggregate offered load matches
/// `load` x hosts x per-host bandwidth, split between the two classes by a
/// byte (or flow-count) ratio.
#[allow(clippy::too_many_arguments)]
pub fn poisson_arrivals(
    topo: &Topology,
    load: f64,
    per_host_bps: u64,
    intra_cdf: &SizeCdf,
    inter_cdf: &SizeCdf,
    ratio_intra: f64,
    ratio_inter: f64,
    ratio_by_bytes: bool,
    duration: SimTime,
    rng: &mut RngStream,
) -> Vec<FlowSpec> {
    assert!(load > 0.0 && load <= 1.0);
    let hosts = topo.servers.len() as f64;
    let m_intra = intra_cdf.mean();
    let m_inter = inter_cdf.mean();
    // probability a flow is intra-class
    let p_intra = if ratio_by_bytes {
        // byte shares intra:inter = ratio -> p_i*m_i : p_e*m_e = r_i : r_e
        let w_intra = ratio_intra / m_intra;
        let w_inter = ratio_inter / m_inter;
        w_intra / (w_intra + w_inter)
    } else {
        ratio_intra / (ratio_intra + ratio_inter)
    };
    let mean_size = p_intra * m_intra + (1.0 - p_intra) * m_inter;
    let lambda = load * hosts * per_host_bps as f64 / (8.0 * mean_size);
    let dc_servers = [topo.servers_in_dc(0), topo.servers_in_dc(1)];

    let mut flows = Vec::new();
    let mut t = 0u64;
    loop {
        t += rng.exp_ns(lambda);
        if t >= duration.0 {
            break;
        }
        let intra = rng.uniform() < p_intra;
        let src = topo.servers[rng.below(topo.servers.len() as u64) as usize];
        let sdc = topo.dc_of(src) as usize;
        let (pool, class) = if intra {
            (&dc_servers[sdc], FlowClass::Intra)
        } else {
            (&dc_servers[1 - sdc], FlowClass::Inter)
        };
        let dst = loop {
            let d = pool[rng.below(pool.len() as u64) as usize];
            if d != src {
                break d;
            }
        };
        let cdf = if intra { intra_cdf } else { inter_cdf };
        let size = cdf.sample(rng.uniform());
        flows.push(FlowSpec {
            start: SimTime(t),
            src,
            dst,
            size_bytes: size,
            class,
        });
    }
    flows
}

/// n_intra senders in the destination's DC plus n_inter in the remote DC, all
/// starting at t=0 with the same size. Local senders are drawn from outside
/// the destination's pod first, so competing paths have equal lengths.
pub fn gen_incast(
    topo: &Topology,
    n_intra: usize,
    n_inter: usize,
    flow_size: u64,
    dst: NodeId,
    rng: &mut RngStream,
) -> Result<Vec<FlowSpec>, String> {
    let all_local: Vec<NodeId> = topo
        .servers_in_dc(topo.dc_of(dst))
        .into_iter()
        .filter(|s| *s != dst)
        .collect();
    let mut local: Vec<NodeId> = all_local
        .iter()
        .copied()
        .filter(|s| !topo.same_pod(*s, dst))
        .collect();
    if local.len() < n_intra {
        local = all_local;
    }
    let remote = topo.servers_in_dc(1 - topo.dc_of(dst));
    if n_intra > local.len() || n_inter > remote.len() {
        return Err(format!(
            "incast needs {n_intra} local + {n_inter} remote senders; have {} + {}",
            local.len(),
            remote.len()
        ));
    }
    let mut flows = Vec::new();
    for &i in &rng.distinct_below(n_intra, local.len() as u64) {
        flows.push(FlowSpec {
            start: SimTime::ZERO,
            src: local[i as usize],
            dst,
            size_bytes: flow_size,
            class: FlowClass::Intra,
        });
    }
    for &i in &rng.distinct_below(n_inter, remote.len() as u64) {
        flows.push(FlowSpec {
            start: SimTime::ZERO,
            src: remote[i as usize],
            dst,
            size_bytes: flow_size,
            class: FlowClass::Inter,
        });
    }
    Ok(flows)
}

/// Random derangement over all servers: every server sends one flow to its
/// image, no self-loops. With `fraction_cross_dc` set, that share of each
/// DC's senders is matched to remote receivers instead.
pub fn gen_permutation(
    topo: &Topology,
    fraction_cross_dc: Option<f64>,
    size: u64,
    rng: &mut RngStream,
) -> Vec<FlowSpec> {
    let servers = &topo.servers;
    let n = servers.len();
    assert!(n >= 2);
    let mapping: Vec<usize> = match fraction_cross_dc {
        None => derangement(n, rng),
        Some(f) => {
            let dc0: Vec<usize> = (0..n).filter(|&i| topo.dc_of(servers[i]) == 0).collect();
            let dc1: Vec<usize> = (0..n).filter(|&i| topo.dc_of(servers[i]) == 1).collect();
            let k = ((f * dc0.len() as f64).round() as usize).min(dc0.len()).min(dc1.len());
            let cross0 = rng.distinct_below(k, dc0.len() as u64);
            let cross1 = rng.distinct_below(k, dc1.len() as u64);
            let mut map = vec![usize::MAX; n];
            // cross senders pair bijectively with remote cross senders
            for (a, b) in cross0.iter().zip(cross1.iter()) {
                map[dc0[*a as usize]] = dc1[*b as usize];
                map[dc1[*b as usize]] = dc0[*a as usize];
            }
            for dc in [&dc0, &dc1] {
                let rest: Vec<usize> = dc.iter().copied().filter(|i| map[*i] == usize::MAX).collect();
                if rest.is_empty() {
                    continue;
                }
                if rest.len() == 1 {
                    // cannot derange a singleton within its DC; send cross
                    let other = if topo.dc_of(servers[rest[0]]) == 0 { &dc1 } else { &dc0 };
                    map[rest[0]] = other[rng.below(other.len() as u64) as usize];
                    continue;
                }
                let sub = derangement(rest.len(), rng);
                for (i, &s) in rest.iter().enumerate() {
                    map[s] = rest[sub[i]];
                }
            }
            map
        }
    };
    mapping
        .iter()
        .enumerate()
        .map(|(i, &j)| FlowSpec {
            start: SimTime::ZERO,
            src: servers[i],
            dst: servers[j],
            size_bytes: size,
            class: topo.class_of(servers[i], servers[j]),
        })
        .collect()
}

fn derangement(n: usize, rng: &mut RngStream) -> Vec<usize> {
    // Sattolo's algorithm yields a uniform cyclic permutation: no fixed points.
    let mut v: Vec<usize> = (0..n).collect();
    let mut i = n - 1;
    while i > 0 {
        let j = rng.below(i as u64) as usize;
        v.swap(i, j);
        i -= 1;
    }
    v
}

/// Closed-loop collective schedule: each iteration launches `groups` paired
/// transfers in both directions; the next iteration starts `compute_gap`
/// after the previous one completes.
#[derive(Debug, Clone)]
pub struct AllReduceSchedule {
    pub burst_min_bytes: u64,
    pub burst_max_bytes: u64,
    pub iterations: u32,
    pub groups: u32,
    pub compute_gap: SimTime,
}

impl AllReduceSchedule {
    /// Per-direction bytes moved in one iteration.
    pub fn draw_burst(&self, rng: &mut RngStream) -> u64 {
        if self.burst_max_bytes <= self.burst_min_bytes {
            return self.burst_min_bytes;
        }
        self.burst_min_bytes + rng.below(self.burst_max_bytes - self.burst_min_bytes + 1)
    }

    /// The flows of one iteration: `groups` pairs, both directions.
    pub fn iteration_flows(
        &self,
        topo: &Topology,
        start: SimTime,
        burst_bytes: u64,
    ) -> Vec<FlowSpec> {
        let dc0 = topo.servers_in_dc(0);
        let dc1 = topo.servers_in_dc(1);
        let per_group = (burst_bytes / self.groups as u64).max(1);
        let mut flows = Vec::new();
        for g in 0..self.groups as usize {
            let a = dc0[g % dc0.len()];
            let b = dc1[g % dc1.len()];
            for (src, dst) in [(a, b), (b, a)] {
                flows.push(FlowSpec {
                    start,
                    src,
                    dst,
                    size_bytes: per_group,
                    class: FlowClass::Inter,
                });
            }
        }
        flows
    }
}
