//! Pluggable load balancers: round-robin subflows with rate-limited adaptive
//! rerouting, plus ECMP, per-packet spraying, and repath-on-congestion
//! baselines. Paths are indices into the pair's equal-cost set.

use std::collections::VecDeque;

use crate::sim::{stable_hash, RngStream, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbKind {
    UnoLb,
    Ecmp,
    Spray,
    Plb,
}

impl LbKind {
    pub fn parse(s: &str) -> Option<LbKind> {
        match s {
            "unolb" => Some(LbKind::UnoLb),
            "ecmp" => Some(LbKind::Ecmp),
            "spray" => Some(LbKind::Spray),
            "plb" => Some(LbKind::Plb),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Subflow {
    pub path_idx: u32,
    pub last_ack: Option<SimTime>,
    /// Send log of not-yet-acknowledged packets, oldest first.
    outstanding: VecDeque<(u32, SimTime)>,
    pub last_send: Option<SimTime>,
}

/// Round-robin subflow table. Consecutive sends advance the index by exactly
/// one modulo the subflow count between reroutes.
#[derive(Debug, Clone)]
pub struct SubflowTable {
    pub subflows: Vec<Subflow>,
    pub index: u32,
    pub last_reroute: Option<SimTime>,
    pub reroutes: u64,
}

impl SubflowTable {
    pub fn new(initial_paths: Vec<u32>) -> Self {
        SubflowTable {
            subflows: initial_paths
                .into_iter()
                .map(|path_idx| Subflow {
                    path_idx,
                    last_ack: None,
                    outstanding: VecDeque::new(),
                    last_send: None,
                })
                .collect(),
            index: 0,
            last_reroute: None,
            reroutes: 0,
        }
    }

    pub fn n_sf(&self) -> u32 {
        self.subflows.len() as u32
    }

    /// Pick the next subflow for a packet and advance the round-robin index.
    pub fn on_send(&mut self, seq: u32, now: SimTime) -> (u8, u32) {
        let sf = self.index as usize;
        self.index = (self.index + 1) % self.n_sf();
        let s = &mut self.subflows[sf];
        s.outstanding.push_back((seq, now));
        s.last_send = Some(now);
        (sf as u8, s.path_idx)
    }

    pub fn on_ack(&mut self, sf: u8, seq: u32, now: SimTime) {
        let s = &mut self.subflows[sf as usize];
        s.last_ack = Some(now);
        // the ACKed packet may be anywhere in the log; drop it by value
        if let Some(pos) = s.outstanding.iter().position(|(q, _)| *q == seq) {
            s.outstanding.remove(pos);
        }
    }

    /// Clear a subflow's send log (its packets will be recovered elsewhere).
    pub fn clear_outstanding(&mut self, sf: u8) {
        self.subflows[sf as usize].outstanding.clear();
    }

    pub fn drop_outstanding(&mut self, sf: u8, seq: u32) {
        let s = &mut self.subflows[sf as usize];
        if let Some(pos) = s.outstanding.iter().position(|(q, _)| *q == seq) {
            s.outstanding.remove(pos);
        }
    }

    /// Subflow whose oldest outstanding packet exceeded `stale_after` with no
    /// ACK inside that window; the stalest one when several qualify.
    pub fn stalest_timed_out(&self, now: SimTime, stale_after: SimTime) -> Option<u8> {
        let mut best: Option<(u8, SimTime)> = None;
        for (i, s) in self.subflows.iter().enumerate() {
            let Some(&(_, oldest)) = s.outstanding.front() else {
                continue;
            };
            if now.saturating_sub(oldest) <= stale_after {
                continue;
            }
            if let Some(ack) = s.last_ack {
                if now.saturating_sub(ack) <= stale_after {
                    continue;
                }
            }
            let staleness = s.last_ack.unwrap_or(SimTime::ZERO).max(oldest);
            match best {
                Some((_, b)) if staleness >= b => {}
                _ => best = Some((i as u8, staleness)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Rate-limited reroute of `target`'s path. Replacement comes from a
    /// subflow with a recent ACK, else uniformly from the unassigned paths.
    pub fn reroute(
        &mut self,
        target: u8,
        now: SimTime,
        base_rtt: SimTime,
        path_count: u32,
        rng: &mut RngStream,
    ) -> bool {
        if let Some(last) = self.last_reroute {
            if now.saturating_sub(last) <= base_rtt {
                return false;
            }
        }
        let fresh: Vec<u32> = self
            .subflows
            .iter()
            .enumerate()
            .filter(|(i, s)| {
                *i != target as usize
                    && s.last_ack
                        .map(|a| now.saturating_sub(a) <= base_rtt)
                        .unwrap_or(false)
            })
            .map(|(_, s)| s.path_idx)
            .collect();
        let new_path = if !fresh.is_empty() {
            fresh[rng.below(fresh.len() as u64) as usize]
        } else {
            // fallback: a path not currently assigned to any subflow
            let assigned: Vec<u32> = self.subflows.iter().map(|s| s.path_idx).collect();
            let free = path_count as u64 - assigned.iter().collect::<std::collections::HashSet<_>>().len() as u64;
            if free == 0 {
                rng.below(path_count as u64) as u32
            } else {
                let mut pick = rng.below(free);
                let mut chosen = 0;
                for p in 0..path_count {
                    if !assigned.contains(&p) {
                        if pick == 0 {
                            chosen = p;
                            break;
                        }
                        pick -= 1;
                    }
                }
                chosen
            }
        };
        let s = &mut self.subflows[target as usize];
        s.path_idx = new_path;
        s.outstanding.clear();
        s.last_ack = Some(now); // grace so the fresh path is not re-flagged
        self.last_reroute = Some(now);
        self.reroutes += 1;
        true
    }
}

/// PLB-style flow-level repathing state.
#[derive(Debug, Clone)]
pub struct PlbState {
    pub path_idx: u32,
    hash_counter: u64,
    consec_congested: u32,
    pub last_repath: Option<SimTime>,
    pub repaths: u64,
    round_acked: u64,
    round_marked: u64,
}

impl PlbState {
    pub fn new(initial_path: u32) -> Self {
        PlbState {
            path_idx: initial_path,
            hash_counter: 0,
            consec_congested: 0,
            last_repath: None,
            repaths: 0,
            round_acked: 0,
            round_marked: 0,
        }
    }

    pub fn on_ack(&mut self, marked: bool) {
        self.round_acked += 1;
        if marked {
            self.round_marked += 1;
        }
    }

    fn try_repath(
        &mut self,
        now: SimTime,
        base_rtt: SimTime,
        seed: u64,
        flow: u64,
        path_count: u32,
    ) -> bool {
        if let Some(last) = self.last_repath {
            if now.saturating_sub(last) <= base_rtt {
                return false;
            }
        }
        self.hash_counter += 1;
        self.path_idx = (stable_hash(&[seed, flow, 0x9e37, self.hash_counter]) % path_count as u64) as u32;
        self.last_repath = Some(now);
        self.repaths += 1;
        self.consec_congested = 0;
        true
    }

    /// Repath after the marked fraction exceeds 1/2 for two consecutive RTTs.
    pub fn on_round(
        &mut self,
        now: SimTime,
        base_rtt: SimTime,
        seed: u64,
        flow: u64,
        path_count: u32,
    ) -> bool {
        if self.round_acked == 0 {
            return false;
        }
        let fraction = self.round_marked as f64 / self.round_acked as f64;
        self.round_acked = 0;
        self.round_marked = 0;
        if fraction > 0.5 {
            self.consec_congested += 1;
        } else {
            self.consec_congested = 0;
            return false;
        }
        if self.consec_congested >= 2 {
            return self.try_repath(now, base_rtt, seed, flow, path_count);
        }
        false
    }

}

/// Static per-flow ECMP placement.
pub fn ecmp_path(seed: u64, flow: u64, src: u64, dst: u64, source_port: u64, path_count: u32) -> u32 {
    (stable_hash(&[seed, flow, src, dst, source_port]) % path_count as u64) as u32
}
