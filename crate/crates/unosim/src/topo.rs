//! Two-datacenter fat-tree topology: node/link construction, equal-cost path
//! enumeration with parallel border links, link failures, and the correlated
//! per-block loss model.

use std::collections::HashMap;
use std::sync::Arc;

use crate::sim::{RngStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Server,
    Edge,
    Agg,
    Core,
    Border,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub dc: u8,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Intra,
    BorderUplink,
    Border,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: u64,
    pub delay: SimTime,
    pub kind: LinkKind,
}

/// Correlated per-block loss process parameterized from measured drop counts:
/// probabilities of exactly 1, exactly 2, and >= 3 losses within a block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLossModel {
    pub block_len: u32,
    pub p_exact: [f64; 3],
}

impl BlockLossModel {
    pub fn new(block_len: u32, p1: f64, p2: f64, p3_plus: f64) -> Self {
        assert!(block_len >= 3);
        for p in [p1, p2, p3_plus] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(p1 + p2 + p3_plus <= 1.0);
        BlockLossModel {
            block_len,
            p_exact: [p1, p2, p3_plus],
        }
    }

    /// 33 ms RTT cloud pair: 12785 / 7262 / 1560 flagged blocks out of 32e6.
    pub fn setup2() -> Self {
        let blocks = 32.0e6;
        Self::new(10, 12_785.0 / blocks, 7_262.0 / blocks, 1_560.0 / blocks)
    }

    /// 65 ms RTT cloud pair: 97403 / 23984 / 5007 flagged blocks out of 32e6.
    pub fn setup1() -> Self {
        let blocks = 32.0e6;
        Self::new(10, 97_403.0 / blocks, 23_984.0 / blocks, 5_007.0 / blocks)
    }

    /// Sample the lost positions within the next block. The >=3 case returns
    /// exactly 3 distinct positions (the undecodable worst case).
    pub fn sample(&self, rng: &mut RngStream) -> Vec<u32> {
        let u = rng.uniform();
        let n_lost = if u < self.p_exact[0] {
            1
        } else if u < self.p_exact[0] + self.p_exact[1] {
            2
        } else if u < self.p_exact[0] + self.p_exact[1] + self.p_exact[2] {
            3
        } else {
            0
        };
        rng.distinct_below(n_lost, self.block_len as u64)
            .into_iter()
            .map(|v| v as u32)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FlowClass {
    Intra,
    Inter,
}

impl FlowClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowClass::Intra => "intra",
            FlowClass::Inter => "inter",
        }
    }
}

/// Parameters for [`build_two_dc_fattree`].
#[derive(Debug, Clone)]
pub struct FatTreeParams {
    pub k: u32,
    pub border_links: u32,
    pub link_bw_bps: u64,
    /// Border uplink (core -> border) bandwidth; 0 means same as link_bw.
    pub border_uplink_bps: u64,
    pub intra_rtt: SimTime,
    pub inter_rtt: SimTime,
}

/// Path identity within the equal-cost set of a (src, dst) pair.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub src: NodeId,
    pub dst: NodeId,
    up_count: u32,
    border_count: u32,
    down_count: u32,
    total: u32,
}

impl PathSet {
    pub fn count(&self) -> u32 {
        self.total
    }
    /// Border link slot used by path `idx` (cross-DC sets only).
    pub fn border_slot(&self, idx: u32) -> Option<u32> {
        if self.border_count > 1 || (self.border_count == 1 && self.up_count > 0) {
            Some((idx / self.up_count.max(1)) % self.border_count)
        } else {
            None
        }
    }
    /// Compose a cross-DC path index from (up, border, down) choices.
    pub fn compose(&self, up: u32, border: u32, down: u32) -> u32 {
        debug_assert!(self.border_count > 0);
        (up % self.up_count.max(1))
            + self.up_count.max(1) * ((border % self.border_count) + self.border_count * (down % self.down_count.max(1)))
    }
    pub fn up_count(&self) -> u32 {
        self.up_count
    }
    pub fn down_count(&self) -> u32 {
        self.down_count
    }
    pub fn border_count(&self) -> u32 {
        self.border_count
    }
}

/// The two-datacenter fat-tree. Immutable after build except link state,
/// which is owned by the runtime network.
pub struct Topology {
    pub k: u32,
    pub border_links: u32,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub servers: Vec<NodeId>,
    adjacency: HashMap<(NodeId, NodeId), LinkId>,
    // per DC indices
    edges: [Vec<NodeId>; 2],  // pod * k/2 + e
    aggs: [Vec<NodeId>; 2],   // pod * k/2 + a
    cores: [Vec<NodeId>; 2],  // group * k/2 + i
    borders: [NodeId; 2],
    border_link_ids: Vec<LinkId>,
    srv_index: HashMap<NodeId, (u8, u32, u32, u32)>, // dc, pod, edge, slot
}

pub fn build_two_dc_fattree(p: &FatTreeParams) -> Result<Topology, String> {
    if p.k < 4 || p.k % 2 != 0 {
        return Err(format!("k must be even and >= 4, got {}", p.k));
    }
    if p.border_links < 1 {
        return Err("border_links must be >= 1".into());
    }
    let half = p.k / 2;
    // Longest intra path is 6 links; uniform per-hop propagation delay so the
    // unloaded cross-pod RTT matches the configured intra RTT.
    let hop_delay = SimTime((p.intra_rtt.0 + 11) / 12);
    let cross_intra = SimTime(16 * hop_delay.0);
    if p.inter_rtt.0 <= cross_intra.0 {
        return Err(format!(
            "inter RTT {} too small for intra per-hop delays (needs > {})",
            p.inter_rtt, cross_intra
        ));
    }
    let border_delay = SimTime((p.inter_rtt.0 - cross_intra.0 + 1) / 2);
    let uplink_bw = if p.border_uplink_bps == 0 {
        p.link_bw_bps
    } else {
        p.border_uplink_bps
    };

    let mut t = Topology {
        k: p.k,
        border_links: p.border_links,
        nodes: Vec::new(),
        links: Vec::new(),
        servers: Vec::new(),
        adjacency: HashMap::new(),
        edges: [Vec::new(), Vec::new()],
        aggs: [Vec::new(), Vec::new()],
        cores: [Vec::new(), Vec::new()],
        borders: [NodeId(0), NodeId(0)],
        border_link_ids: Vec::new(),
        srv_index: HashMap::new(),
    };

    let add_node = |t: &mut Topology, kind, dc: u8, name: String| {
        let id = NodeId(t.nodes.len() as u32);
        t.nodes.push(Node { id, kind, dc, name });
        id
    };
    let add_link =
        |t: &mut Topology, a: NodeId, b: NodeId, bw: u64, delay: SimTime, kind: LinkKind| {
            let id = LinkId(t.links.len() as u32);
            t.links.push(Link {
                id,
                a,
                b,
                bandwidth_bps: bw,
                delay,
                kind,
            });
            t.adjacency.insert((a, b), id);
            t.adjacency.insert((b, a), id);
            id
        };

    for dc in 0..2u8 {
        for g in 0..half {
            for i in 0..half {
                let id = add_node(&mut t, NodeKind::Core, dc, format!("dc{dc}.core{g}_{i}"));
                t.cores[dc as usize].push(id);
            }
        }
        for pod in 0..p.k {
            for a in 0..half {
                let id = add_node(&mut t, NodeKind::Agg, dc, format!("dc{dc}.p{pod}.agg{a}"));
                t.aggs[dc as usize].push(id);
            }
            for e in 0..half {
                let id = add_node(&mut t, NodeKind::Edge, dc, format!("dc{dc}.p{pod}.edge{e}"));
                t.edges[dc as usize].push(id);
                for s in 0..half {
                    let sid = add_node(
                        &mut t,
                        NodeKind::Server,
                        dc,
                        format!("dc{dc}.p{pod}.e{e}.srv{s}"),
                    );
                    t.servers.push(sid);
                    t.srv_index.insert(sid, (dc, pod, e, s));
                    add_link(&mut t, sid, id, p.link_bw_bps, hop_delay, LinkKind::Intra);
                }
            }
        }
        let border = add_node(&mut t, NodeKind::Border, dc, format!("dc{dc}.border"));
        t.borders[dc as usize] = border;

        for pod in 0..p.k {
            for e in 0..half {
                let edge = t.edges[dc as usize][(pod * half + e) as usize];
                for a in 0..half {
                    let agg = t.aggs[dc as usize][(pod * half + a) as usize];
                    add_link(&mut t, edge, agg, p.link_bw_bps, hop_delay, LinkKind::Intra);
                }
            }
            // agg j connects to core group j
            for a in 0..half {
                let agg = t.aggs[dc as usize][(pod * half + a) as usize];
                for i in 0..half {
                    let core = t.cores[dc as usize][(a * half + i) as usize];
                    add_link(&mut t, agg, core, p.link_bw_bps, hop_delay, LinkKind::Intra);
                }
            }
        }
        // every core attaches to this DC's border switch
        for g in 0..half {
            for i in 0..half {
                let core = t.cores[dc as usize][(g * half + i) as usize];
                add_link(
                    &mut t,
                    core,
                    border,
                    uplink_bw,
                    hop_delay,
                    LinkKind::BorderUplink,
                );
            }
        }
    }
    let (b0, b1) = (t.borders[0], t.borders[1]);
    for _ in 0..p.border_links {
        let id = add_link(&mut t, b0, b1, p.link_bw_bps, border_delay, LinkKind::Border);
        t.border_link_ids.push(id);
    }
    Ok(t)
}

impl Topology {
    pub fn dc_of(&self, n: NodeId) -> u8 {
        self.nodes[n.0 as usize].dc
    }

    pub fn is_server(&self, n: NodeId) -> bool {
        self.nodes[n.0 as usize].kind == NodeKind::Server
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.nodes[n.0 as usize].name
    }

    pub fn class_of(&self, src: NodeId, dst: NodeId) -> FlowClass {
        if self.dc_of(src) == self.dc_of(dst) {
            FlowClass::Intra
        } else {
            FlowClass::Inter
        }
    }

    pub fn same_pod(&self, a: NodeId, b: NodeId) -> bool {
        match (self.srv_index.get(&a), self.srv_index.get(&b)) {
            (Some((dc_a, pod_a, _, _)), Some((dc_b, pod_b, _, _))) => {
                dc_a == dc_b && pod_a == pod_b
            }
            _ => false,
        }
    }

    pub fn border_link_ids(&self) -> &[LinkId] {
        &self.border_link_ids
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency.get(&(a, b)).copied()
    }

    pub fn servers_in_dc(&self, dc: u8) -> Vec<NodeId> {
        self.servers
            .iter()
            .copied()
            .filter(|s| self.dc_of(*s) == dc)
            .collect()
    }

    fn half(&self) -> u32 {
        self.k / 2
    }

    /// Structural equal-cost path set for a server pair.
    pub fn path_set(&self, src: NodeId, dst: NodeId) -> PathSet {
        assert!(src != dst, "src == dst");
        assert!(self.is_server(src) && self.is_server(dst));
        let half = self.half();
        let (sdc, spod, sedge, _) = self.srv_index[&src];
        let (ddc, dpod, dedge, _) = self.srv_index[&dst];
        let (up, border, down) = if sdc != ddc {
            (half * half, self.border_links, half * half)
        } else if spod != dpod {
            (half * half, 0, 0)
        } else if sedge != dedge {
            (half, 0, 0)
        } else {
            (1, 0, 0)
        };
        let total = if border > 0 {
            up * border * down
        } else {
            up.max(1)
        };
        PathSet {
            src,
            dst,
            up_count: up.max(1),
            border_count: border,
            down_count: down.max(1),
            total,
        }
    }

    /// Materialize path `idx` of the pair's equal-cost set as a link sequence.
    pub fn path_links(&self, set: &PathSet, idx: u32) -> Arc<[LinkId]> {
        debug_assert!(idx < set.total);
        let half = self.half();
        let (sdc, spod, sedge, _) = self.srv_index[&set.src];
        let (ddc, dpod, dedge, _) = self.srv_index[&set.dst];
        let l = |a, b| self.link_between(a, b).expect("adjacent");
        let edge_s = self.edges[sdc as usize][(spod * half + sedge) as usize];
        let edge_d = self.edges[ddc as usize][(dpod * half + dedge) as usize];
        let mut links: Vec<LinkId> = Vec::with_capacity(9);
        links.push(l(set.src, edge_s));
        if sdc != ddc {
            let up = idx % set.up_count;
            let border = (idx / set.up_count) % set.border_count;
            let down = idx / (set.up_count * set.border_count);
            let (a, i) = (up / half, up % half);
            let agg_s = self.aggs[sdc as usize][(spod * half + a) as usize];
            let core_s = self.cores[sdc as usize][(a * half + i) as usize];
            links.push(l(edge_s, agg_s));
            links.push(l(agg_s, core_s));
            links.push(l(core_s, self.borders[sdc as usize]));
            links.push(self.border_link_ids[border as usize]);
            let (g, j) = (down / half, down % half);
            let core_d = self.cores[ddc as usize][(g * half + j) as usize];
            let agg_d = self.aggs[ddc as usize][(dpod * half + g) as usize];
            links.push(l(self.borders[ddc as usize], core_d));
            links.push(l(core_d, agg_d));
            links.push(l(agg_d, edge_d));
        } else if spod != dpod {
            let (a, i) = (idx / half, idx % half);
            let agg_s = self.aggs[sdc as usize][(spod * half + a) as usize];
            let core = self.cores[sdc as usize][(a * half + i) as usize];
            let agg_d = self.aggs[ddc as usize][(dpod * half + a) as usize];
            links.push(l(edge_s, agg_s));
            links.push(l(agg_s, core));
            links.push(l(core, agg_d));
            links.push(l(agg_d, edge_d));
        } else if sedge != dedge {
            let agg = self.aggs[sdc as usize][(spod * half + idx) as usize];
            links.push(l(edge_s, agg));
            links.push(l(agg, edge_d));
        }
        links.push(l(edge_d, set.dst));
        links.into()
    }

    /// All equal-length shortest paths whose links are currently up, in
    /// deterministic index order. `down` reports current link state.
    pub fn enumerate_paths<F: Fn(LinkId) -> bool>(
        &self,
        src: NodeId,
        dst: NodeId,
        down: F,
    ) -> Vec<Arc<[LinkId]>> {
        let set = self.path_set(src, dst);
        (0..set.count())
            .map(|i| self.path_links(&set, i))
            .filter(|p| !p.iter().any(|l| down(*l)))
            .collect()
    }

    /// Unloaded propagation RTT along the first path of the pair's set.
    pub fn path_prop_rtt(&self, src: NodeId, dst: NodeId) -> SimTime {
        let set = self.path_set(src, dst);
        let links = self.path_links(&set, 0);
        SimTime(2 * links.iter().map(|l| self.links[l.0 as usize].delay.0).sum::<u64>())
    }

    /// Hop count of the longest server-to-server path for the class.
    pub fn class_hop_count(class: FlowClass) -> u32 {
        match class {
            FlowClass::Intra => 6,
            FlowClass::Inter => 9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: u32, border_links: u32) -> FatTreeParams {
        FatTreeParams {
            k,
            border_links,
            link_bw_bps: 100_000_000_000,
            border_uplink_bps: 0,
            intra_rtt: SimTime::from_us(14),
            inter_rtt: SimTime::from_ms(2),
        }
    }

    fn count_kind(t: &Topology, dc: u8, kind: NodeKind) -> usize {
        t.nodes.iter().filter(|n| n.dc == dc && n.kind == kind).count()
    }

    #[test]
    fn paper_scale_counts() {
        let t = build_two_dc_fattree(&params(8, 8)).unwrap();
        for dc in 0..2 {
            assert_eq!(count_kind(&t, dc, NodeKind::Core), 16);
            assert_eq!(count_kind(&t, dc, NodeKind::Agg), 32);
            assert_eq!(count_kind(&t, dc, NodeKind::Edge), 32);
            assert_eq!(count_kind(&t, dc, NodeKind::Server), 128);
            assert_eq!(count_kind(&t, dc, NodeKind::Border), 1);
        }
        assert_eq!(t.border_link_ids().len(), 8);
        // all cores attach to the border: 16 uplinks per DC
        let uplinks = t
            .links
            .iter()
            .filter(|l| l.kind == LinkKind::BorderUplink)
            .count();
        assert_eq!(uplinks, 32);
    }

    #[test]
    fn fat_tree_formulas_hold() {
        // property over the even k values the spec calls out
        for k in [4u32, 6, 8] {
            let t = build_two_dc_fattree(&params(k, 2)).unwrap();
            let half = (k / 2) as usize;
            for dc in 0..2 {
                assert_eq!(count_kind(&t, dc, NodeKind::Core), half * half);
                assert_eq!(count_kind(&t, dc, NodeKind::Agg), k as usize * half);
                assert_eq!(count_kind(&t, dc, NodeKind::Edge), k as usize * half);
                assert_eq!(count_kind(&t, dc, NodeKind::Server), k as usize * half * half);
            }
        }
    }

    #[test]
    fn odd_k_rejected() {
        assert!(build_two_dc_fattree(&params(3, 2)).is_err());
        assert!(build_two_dc_fattree(&params(7, 2)).is_err());
        assert!(build_two_dc_fattree(&params(2, 2)).is_err());
    }

    #[test]
    fn path_counts() {
        let t = build_two_dc_fattree(&params(4, 8)).unwrap();
        // same edge switch pair: exactly 1 path
        let (a, b) = (t.servers[0], t.servers[1]);
        assert_eq!(t.path_set(a, b).count(), 1);
        assert_eq!(t.enumerate_paths(a, b, |_| false).len(), 1);
        // cross-pod intra-DC: (k/2)^2 = 4
        let dc0 = t.servers_in_dc(0);
        let cross_pod = (dc0[0], dc0[8]);
        assert_eq!(t.path_set(cross_pod.0, cross_pod.1).count(), 4);
        // cross-DC: divisible by border links
        let dc1 = t.servers_in_dc(1);
        let set = t.path_set(dc0[0], dc1[0]);
        assert_eq!(set.count() % 8, 0);
        assert_eq!(set.count(), 4 * 8 * 4);
    }

    #[test]
    fn paths_have_consistent_shape() {
        let t = build_two_dc_fattree(&params(4, 3)).unwrap();
        let dc0 = t.servers_in_dc(0);
        let dc1 = t.servers_in_dc(1);
        let set = t.path_set(dc0[0], dc1[5]);
        for idx in 0..set.count() {
            let links = t.path_links(&set, idx);
            assert_eq!(links.len(), 9);
            // consecutive links share a node
            let mut node = set.src;
            for l in links.iter() {
                let link = &t.links[l.0 as usize];
                node = if link.a == node { link.b } else { link.a };
            }
            assert_eq!(node, set.dst);
            // the border slot decodes to the actual border link
            let slot = set.border_slot(idx).unwrap();
            assert_eq!(links[4], t.border_link_ids()[slot as usize]);
        }
    }

    #[test]
    fn border_disjointness() {
        let t = build_two_dc_fattree(&params(4, 8)).unwrap();
        let (s, d) = (t.servers_in_dc(0)[0], t.servers_in_dc(1)[0]);
        let set = t.path_set(s, d);
        for i in 0..set.count() {
            for j in 0..set.count() {
                if set.border_slot(i) != set.border_slot(j) {
                    let a = t.path_links(&set, i)[4];
                    let b = t.path_links(&set, j)[4];
                    assert_ne!(a, b);
                }
            }
        }
    }

    #[test]
    fn all_border_links_down_means_unreachable() {
        let t = build_two_dc_fattree(&params(4, 2)).unwrap();
        let (s, d) = (t.servers_in_dc(0)[0], t.servers_in_dc(1)[0]);
        let border: Vec<LinkId> = t.border_link_ids().to_vec();
        let paths = t.enumerate_paths(s, d, |l| border.contains(&l));
        assert!(paths.is_empty());
    }

    #[test]
    fn loss_model_frequencies_match() {
        // Monte-Carlo oracle against the sampled branch probabilities.
        let m = BlockLossModel::setup2();
        let mut rng = RngStream::new("loss", 11);
        let n = 2_000_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[m.sample(&mut rng).len()] += 1;
        }
        for k in 1..=3usize {
            let p = m.p_exact[k - 1];
            let expect = p * n as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (counts[k] as f64 - expect).abs() <= 3.0 * sigma,
                "k={k} count={} expect={expect}",
                counts[k]
            );
        }
    }

    #[test]
    fn loss_model_zero_probabilities() {
        let m = BlockLossModel::new(10, 0.0, 0.0, 0.0);
        let mut rng = RngStream::new("loss", 1);
        for _ in 0..10_000 {
            assert!(m.sample(&mut rng).is_empty());
        }
    }

    #[test]
    fn setup2_probabilities_exact() {
        let m = BlockLossModel::setup2();
        assert!((m.p_exact[0] - 3.995e-4).abs() < 1e-7);
        assert!((m.p_exact[1] - 2.269e-4).abs() < 1e-7);
        assert!((m.p_exact[2] - 4.875e-5).abs() < 1e-8);
    }
}
