//! Output-port model: drop-tail physical FIFO, RED-based ECN marking, and a
//! phantom queue that marks independently of physical capacity.

use crate::packet::Packet;
use crate::sim::SimTime;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct RedParams {
    pub min_thresh: u64,
    pub max_thresh: u64,
}

impl RedParams {
    /// Thresholds at 25% / 75% of the marking queue's capacity.
    pub fn quarter_three_quarter(capacity: u64) -> Self {
        RedParams {
            min_thresh: capacity / 4,
            max_thresh: capacity * 3 / 4,
        }
    }
}

/// Linear RED marking probability: 0 below min, 1 at/above max.
pub fn red_mark_probability(occupancy: u64, min_thresh: u64, max_thresh: u64) -> f64 {
    debug_assert!(min_thresh < max_thresh);
    if occupancy < min_thresh {
        0.0
    } else if occupancy >= max_thresh {
        1.0
    } else {
        (occupancy - min_thresh) as f64 / (max_thresh - min_thresh) as f64
    }
}

/// Virtual counter fed by the same arrivals as the physical queue but drained
/// at a constant rate below line rate. Occupancy saturates at `capacity_bytes`
/// and is accounted lazily from elapsed time.
#[derive(Debug, Clone)]
pub struct PhantomQueue {
    occ_bits: u64,
    pub capacity_bytes: u64,
    pub drain_bps: u64,
    last_update: SimTime,
    drain_carry: u128, // bit-ns numerator not yet converted to whole bits
}

impl PhantomQueue {
    pub fn new(capacity_bytes: u64, drain_bps: u64) -> Self {
        PhantomQueue {
            occ_bits: 0,
            capacity_bytes,
            drain_bps,
            last_update: SimTime::ZERO,
            drain_carry: 0,
        }
    }

    fn drain_to(&mut self, now: SimTime) {
        if now > self.last_update {
            let dt = (now - self.last_update).0;
            let num = self.drain_carry + self.drain_bps as u128 * dt as u128;
            let bits = num / 1_000_000_000;
            self.drain_carry = num % 1_000_000_000;
            self.occ_bits = self.occ_bits.saturating_sub(bits.min(u64::MAX as u128) as u64);
            if self.occ_bits == 0 {
                self.drain_carry = 0;
            }
        }
        self.last_update = now;
    }

    pub fn add(&mut self, bytes: u64, now: SimTime) {
        self.drain_to(now);
        self.occ_bits = (self.occ_bits + bytes * 8).min(self.capacity_bytes * 8);
    }

    pub fn occupancy_bytes(&mut self, now: SimTime) -> u64 {
        self.drain_to(now);
        self.occ_bits / 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted { mark: bool },
    Dropped,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PortCounters {
    pub enq_bytes: u64,
    pub deq_bytes: u64,
    pub drop_bytes: u64,
    pub drops: u64,
    pub last_drop_at: Option<SimTime>,
    pub marks: u64,
}

/// One directed output port (one per link direction).
pub struct SwitchPort {
    pub capacity_bytes: u64,
    pub occupancy_bytes: u64,
    pub line_bps: u64,
    pub red: RedParams,
    pub phantom: Option<PhantomQueue>,
    pub fifo: VecDeque<Packet>,
    pub busy: bool,
    pub counters: PortCounters,
    occ_integral: u128, // byte-ns
    occ_last_change: SimTime,
}

impl SwitchPort {
    pub fn new(
        capacity_bytes: u64,
        line_bps: u64,
        red: RedParams,
        phantom: Option<PhantomQueue>,
    ) -> Self {
        SwitchPort {
            capacity_bytes,
            occupancy_bytes: 0,
            line_bps,
            red,
            phantom,
            fifo: VecDeque::new(),
            busy: false,
            counters: PortCounters::default(),
            occ_integral: 0,
            occ_last_change: SimTime::ZERO,
        }
    }

    fn touch_integral(&mut self, now: SimTime) {
        if now > self.occ_last_change {
            self.occ_integral +=
                self.occupancy_bytes as u128 * (now - self.occ_last_change).0 as u128;
            self.occ_last_change = now;
        }
    }

    /// Time-average physical occupancy in bytes over [from, now].
    pub fn avg_occupancy(&mut self, now: SimTime) -> f64 {
        self.touch_integral(now);
        if now.0 == 0 {
            return 0.0;
        }
        self.occ_integral as f64 / now.0 as f64
    }

    /// Drop-tail admission, phantom accounting, and the marking decision.
    /// `mark_draw` is a uniform [0,1) sample consumed for the RED decision.
    pub fn enqueue(&mut self, mut pkt: Packet, now: SimTime, mark_draw: f64) -> EnqueueOutcome {
        let size = pkt.size_bytes as u64;
        debug_assert!(size <= self.capacity_bytes);
        if self.occupancy_bytes + size > self.capacity_bytes {
            self.counters.drop_bytes += size;
            self.counters.drops += 1;
            self.counters.last_drop_at = Some(now);
            return EnqueueOutcome::Dropped;
        }
        self.touch_integral(now);
        self.occupancy_bytes += size;
        self.counters.enq_bytes += size;
        let marking_occ = match &mut self.phantom {
            Some(ph) => {
                ph.add(size, now);
                ph.occupancy_bytes(now)
            }
            None => self.occupancy_bytes,
        };
        let p = red_mark_probability(marking_occ, self.red.min_thresh, self.red.max_thresh);
        let mark = p > 0.0 && mark_draw < p;
        if mark {
            pkt.ce = true;
            self.counters.marks += 1;
        }
        self.fifo.push_back(pkt);
        EnqueueOutcome::Accepted { mark }
    }

    /// Release the head packet (serialization complete).
    pub fn dequeue(&mut self, now: SimTime) -> Option<Packet> {
        let pkt = self.fifo.pop_front()?;
        self.touch_integral(now);
        self.occupancy_bytes -= pkt.size_bytes as u64;
        self.counters.deq_bytes += pkt.size_bytes as u64;
        Some(pkt)
    }

    pub fn phantom_occupancy(&mut self, now: SimTime) -> u64 {
        match &mut self.phantom {
            Some(ph) => ph.occupancy_bytes(now),
            None => 0,
        }
    }

    /// Byte conservation: enqueued == dequeued + resident (drops never enter).
    pub fn conservation_holds(&self) -> bool {
        self.counters.enq_bytes == self.counters.deq_bytes + self.occupancy_bytes
    }
}
