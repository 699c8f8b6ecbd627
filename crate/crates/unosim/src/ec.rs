//! Erasure-coded block framing and receiver-side block recovery. Parity
//! packets carry no field arithmetic; a block is decodable exactly when the
//! count of distinct received packets reaches the data-packet count.

use crate::sim::SimTime;

/// Block geometry: n = x data + y parity packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EcScheme {
    pub x: u32,
    pub y: u32,
}

impl EcScheme {
    pub fn n(&self) -> u32 {
        self.x + self.y
    }
}

/// Packet layout of a framed message. With EC disabled this degenerates to
/// plain segmentation.
#[derive(Debug, Clone)]
pub struct Framing {
    pub message_bytes: u64,
    pub payload_bytes: u32,
    pub ec: Option<EcScheme>,
    pub n_packets: u32,
    pub n_blocks: u32,
}

/// Split a message into erasure-coded blocks (or raw segments when `ec` is
/// None). The final block may carry padding, accounted in wire overhead.
pub fn frame_blocks(message_bytes: u64, ec: Option<EcScheme>, payload_bytes: u32) -> Framing {
    assert!(message_bytes > 0 && payload_bytes > 0);
    match ec {
        Some(s) => {
            assert!(s.x >= 1);
            let block_payload = s.x as u64 * payload_bytes as u64;
            let n_blocks = message_bytes.div_ceil(block_payload) as u32;
            Framing {
                message_bytes,
                payload_bytes,
                ec: Some(s),
                n_packets: n_blocks * s.n(),
                n_blocks,
            }
        }
        None => {
            let n_packets = message_bytes.div_ceil(payload_bytes as u64) as u32;
            Framing {
                message_bytes,
                payload_bytes,
                ec: None,
                n_packets,
                n_blocks: 0,
            }
        }
    }
}

impl Framing {
    pub fn block_of(&self, seq: u32) -> u32 {
        debug_assert!(self.ec.is_some());
        seq / self.ec.unwrap().n()
    }

    pub fn position_of(&self, seq: u32) -> u32 {
        debug_assert!(self.ec.is_some());
        seq % self.ec.unwrap().n()
    }

    pub fn is_parity(&self, seq: u32) -> bool {
        match self.ec {
            Some(s) => self.position_of(seq) >= s.x,
            None => false,
        }
    }

    pub fn seqs_of_block(&self, block: u32) -> std::ops::Range<u32> {
        let n = self.ec.unwrap().n();
        block * n..(block + 1) * n
    }

    /// On-wire size of packet `seq`. EC packets are always full (padding);
    /// plain segmentation trims the final packet.
    pub fn packet_size(&self, seq: u32) -> u32 {
        debug_assert!(seq < self.n_packets);
        match self.ec {
            Some(_) => self.payload_bytes,
            None => {
                let offset = seq as u64 * self.payload_bytes as u64;
                (self.message_bytes - offset).min(self.payload_bytes as u64) as u32
            }
        }
    }

    /// Application bytes credited when `block` decodes (padding excluded).
    pub fn block_app_bytes(&self, block: u32) -> u64 {
        let s = self.ec.unwrap();
        let block_payload = s.x as u64 * self.payload_bytes as u64;
        (self.message_bytes - (block as u64 * block_payload).min(self.message_bytes))
            .min(block_payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Pending,
    Decoded,
    Nacked,
}

/// Receiver-side tracker for one erasure-coding block.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub block_id: u32,
    pub x: u32,
    pub n: u32,
    received: u16,
    pub status: BlockStatus,
    /// Deadline is armed at the first arrival (of each transmission round).
    pub deadline_armed: bool,
    pub deadline_gen: u32,
    pub nacks_sent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockArrival {
    /// Deadline timer must be armed.
    FirstArrival,
    Progress,
    /// This arrival completed the block.
    Decoded,
    /// Already decoded; arrival ignored.
    AlreadyDecoded,
}

impl BlockState {
    pub fn new(block_id: u32, scheme: EcScheme) -> Self {
        assert!(scheme.n() <= 16, "block bitmap holds up to 16 positions");
        BlockState {
            block_id,
            x: scheme.x,
            n: scheme.n(),
            received: 0,
            status: BlockStatus::Pending,
            deadline_armed: false,
            deadline_gen: 0,
            nacks_sent: 0,
        }
    }

    pub fn distinct_received(&self) -> u32 {
        self.received.count_ones()
    }

    pub fn decodable(&self) -> bool {
        self.distinct_received() >= self.x
    }

    pub fn missing_bitmap(&self) -> u16 {
        !self.received & ((1u16 << self.n) - 1)
    }

    /// Register arrival of the packet at `position`. Duplicates are idempotent
    /// and arrivals after decode are ignored. The caller re-arms the deadline
    /// on every arrival: the timer measures stall since the last progress, so
    /// it never expires on a block that a window-limited sender is still
    /// pacing out.
    pub fn on_packet(&mut self, position: u32) -> BlockArrival {
        debug_assert!(position < self.n);
        if self.status == BlockStatus::Decoded {
            return BlockArrival::AlreadyDecoded;
        }
        let first = self.received == 0 && !self.deadline_armed;
        let bit = 1u16 << position;
        let dup = self.received & bit != 0;
        self.received |= bit;
        if !dup && self.decodable() {
            self.status = BlockStatus::Decoded;
            return BlockArrival::Decoded;
        }
        if first {
            self.deadline_armed = true;
            return BlockArrival::FirstArrival;
        }
        BlockArrival::Progress
    }

    /// Deadline expiry: emit a NACK at most once per expiry and re-arm on the
    /// next arrival.
    pub fn on_deadline_expiry(&mut self) -> Option<u16> {
        if self.status == BlockStatus::Decoded {
            return None;
        }
        self.status = BlockStatus::Nacked;
        self.deadline_armed = false;
        self.nacks_sent += 1;
        Some(self.missing_bitmap())
    }

    pub fn arm(&mut self) -> u32 {
        self.deadline_armed = true;
        self.deadline_gen += 1;
        self.deadline_gen
    }
}

/// Receiver deadline: factor x (block serialization at the bottleneck plus
/// the worst-case queuing along the path), floored at the class base RTT so
/// the stall timer never undercuts a window-limited sender's ACK-clock gaps.
pub fn block_deadline(
    n: u32,
    payload_bytes: u32,
    bottleneck_bps: u64,
    hop_count: u32,
    buffer_bytes: u64,
    base_rtt: SimTime,
    factor: f64,
) -> SimTime {
    let ser = crate::sim::serialization_time(n as u64 * payload_bytes as u64, bottleneck_bps);
    let per_hop_queue = crate::sim::serialization_time(buffer_bytes, bottleneck_bps);
    let base = (ser.0 + per_hop_queue.0 * hop_count as u64).max(base_rtt.0);
    SimTime((base as f64 * factor).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIB: u64 = 1024 * 1024;

    #[test]
    fn five_mib_message_framing() {
        let f = frame_blocks(5 * MIB, Some(EcScheme { x: 8, y: 2 }), 4096);
        assert_eq!(f.n_blocks, 160);
        assert_eq!(f.n_packets, 1600);
        // 20% packet overhead: 2 parity out of every 10
        let parity = (0..f.n_packets).filter(|s| f.is_parity(*s)).count();
        assert_eq!(parity, 320);
        assert_eq!(parity * 5, f.n_packets as usize);
        // exact n/x wire overhead for a message that fills its blocks
        let wire: u64 = (0..f.n_packets).map(|s| f.packet_size(s) as u64).sum();
        assert_eq!(wire as f64 / (5 * MIB) as f64, 1.25);
    }

    #[test]
    fn zero_parity_degenerates_to_segmentation() {
        let f = frame_blocks(10_000, Some(EcScheme { x: 8, y: 0 }), 4096);
        assert_eq!(f.n_blocks, 1);
        assert_eq!(f.n_packets, 8);
        assert!((0..8).all(|s| !f.is_parity(s)));
    }

    #[test]
    fn one_byte_message_pads_to_a_full_block() {
        let f = frame_blocks(1, Some(EcScheme { x: 8, y: 2 }), 4096);
        assert_eq!(f.n_blocks, 1);
        assert_eq!(f.n_packets, 10);
        assert_eq!(f.block_app_bytes(0), 1);
    }

    #[test]
    fn plain_segmentation_trims_tail() {
        let f = frame_blocks(10_000, None, 4096);
        assert_eq!(f.n_packets, 3);
        assert_eq!(f.packet_size(0), 4096);
        assert_eq!(f.packet_size(2), 10_000 - 2 * 4096);
    }

    #[test]
    fn decode_at_eighth_distinct_arrival() {
        let mut b = BlockState::new(0, EcScheme { x: 8, y: 2 });
        assert_eq!(b.on_packet(0), BlockArrival::FirstArrival);
        for p in 1..7 {
            assert_eq!(b.on_packet(p), BlockArrival::Progress);
        }
        assert_eq!(b.on_packet(7), BlockArrival::Decoded);
        // 9th and 10th arrivals ignored
        assert_eq!(b.on_packet(8), BlockArrival::AlreadyDecoded);
        assert_eq!(b.on_packet(9), BlockArrival::AlreadyDecoded);
    }

    #[test]
    fn duplicates_idempotent() {
        let mut b = BlockState::new(0, EcScheme { x: 8, y: 2 });
        b.on_packet(3);
        for _ in 0..5 {
            b.on_packet(3);
        }
        assert_eq!(b.distinct_received(), 1);
    }

    #[test]
    fn seven_arrivals_then_expiry_nacks() {
        let mut b = BlockState::new(0, EcScheme { x: 8, y: 2 });
        for p in 0..7 {
            b.on_packet(p);
        }
        let missing = b.on_deadline_expiry().expect("nack");
        assert_eq!(missing.count_ones(), 3);
        assert_eq!(b.status, BlockStatus::Nacked);
        // NACKed at most once per expiry; decode still possible afterwards
        assert_eq!(b.on_packet(7), BlockArrival::Decoded);
        assert!(b.on_deadline_expiry().is_none());
    }

    #[test]
    fn mds_predicate_exhaustive_1024_patterns() {
        // Oracle: a block decodes iff the number of lost packets is <= y.
        let scheme = EcScheme { x: 8, y: 2 };
        for mask in 0u16..1024 {
            let mut b = BlockState::new(0, scheme);
            let mut decoded = false;
            for p in 0..10 {
                if mask & (1 << p) == 0 {
                    decoded |= b.on_packet(p) == BlockArrival::Decoded;
                }
            }
            let losses = mask.count_ones();
            assert_eq!(decoded, losses <= 2, "mask {mask:#012b}");
            assert_eq!(b.decodable(), losses <= 2);
        }
    }

    #[test]
    fn deadline_arithmetic() {
        // n=10 x 4096 B at 100 Gb/s ~ 3.3 us; 5 hops x 1 MiB buffers ~ 419.5 us
        let rtt = SimTime::from_us(14);
        let d = block_deadline(10, 4096, 100_000_000_000, 5, 1 << 20, rtt, 2.0);
        let approx = 2.0 * (3.3e3 + 5.0 * 83.9e3);
        assert!((d.0 as f64 - approx).abs() / approx < 0.01, "deadline {d}");
        // factor doubled -> deadline doubles
        let d2 = block_deadline(10, 4096, 100_000_000_000, 5, 1 << 20, rtt, 4.0);
        assert!((d2.0 as f64 / d.0 as f64 - 2.0).abs() < 1e-9);
        // long-RTT paths: the base RTT floor dominates
        let d3 = block_deadline(10, 4096, 100_000_000_000, 9, 1 << 20, SimTime::from_ms(2), 2.0);
        assert_eq!(d3, SimTime::from_ms(4));
    }
}
