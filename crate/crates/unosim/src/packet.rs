//! Simulated datagrams and the control messages that flow back to senders.

use std::sync::Arc;

use crate::sim::SimTime;
use crate::topo::LinkId;

pub const CTRL_BYTES: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(pub u32);

/// A data-plane packet. Control traffic never enters queues and uses
/// [`ControlMsg`] instead.
#[derive(Debug, Clone)]
pub struct Packet {
    pub flow: FlowId,
    pub seq: u32,
    pub size_bytes: u32,
    /// Send or most recent re-send time.
    pub sent_at: SimTime,
    pub ce: bool,
    pub subflow: u8,
    pub hop: u8,
    pub path: Arc<[LinkId]>,
}

impl Packet {
    #[cfg(test)]
    pub fn test_packet(size: u32) -> Packet {
        Packet {
            flow: FlowId(0),
            seq: 0,
            size_bytes: size,
            sent_at: SimTime::ZERO,
            ce: false,
            subflow: 0,
            hop: 0,
            path: Arc::from(Vec::new()),
        }
    }
}

/// Fields echoed to the sender for one delivered data packet.
#[derive(Debug, Clone, Copy)]
pub struct AckInfo {
    pub flow: FlowId,
    pub seq: u32,
    pub bytes_acked: u32,
    pub ecn_echo: bool,
    /// The data packet's send/re-send time.
    pub pkt_send_time: SimTime,
    pub subflow: u8,
    /// Receiver had already seen this position.
    pub duplicate: bool,
    /// Block that became decodable on this arrival, if any.
    pub decoded_block: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
pub enum ControlKind {
    Ack(AckInfo),
    /// Unrecoverable block: requests full-block retransmission. Carries the
    /// missing-position bitmap at deadline expiry.
    Nack { flow: FlowId, block: u32, missing: u16 },
}

#[derive(Debug, Clone, Copy)]
pub struct ControlMsg {
    pub kind: ControlKind,
}
