//! Bidirectional flow assembly and per-packet attack labeling.

mod label;

use std::collections::HashMap;
use std::net::Ipv4Addr;

use crate::ingest::{ParsedHeaders, Protocol, RawPacket, TCP_FIN, TCP_RST};

pub use label::*;

pub const DEFAULT_FLOW_TIMEOUT_US: u64 = 120 * 1_000_000;

/// Canonical 5-tuple: the lower (ip, port) endpoint always comes first, so
/// both directions of a conversation share one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub ip_lo: Ipv4Addr,
    pub port_lo: u16,
    pub ip_hi: Ipv4Addr,
    pub port_hi: u16,
    pub protocol: Protocol,
}

impl FlowKey {
    pub fn new(a: (Ipv4Addr, u16), b: (Ipv4Addr, u16), protocol: Protocol) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        FlowKey {
            ip_lo: lo.0,
            port_lo: lo.1,
            ip_hi: hi.0,
            port_hi: hi.1,
            protocol,
        }
    }
}

pub fn canonical_flow_key(h: &ParsedHeaders) -> Option<FlowKey> {
    let protocol = h.protocol();
    if protocol == Protocol::Other {
        return None;
    }
    Some(FlowKey::new(
        (h.src_ip?, h.src_port?),
        (h.dst_ip?, h.dst_port?),
        protocol,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub initiator_ip: Ipv4Addr,
    pub initiator_port: u16,
    pub first_ts: u64,
    pub last_ts: u64,
    /// (packet position in the capture, direction), in timestamp order.
    pub packets: Vec<(usize, Direction)>,
    pub terminated: bool,
}

impl FlowRecord {
    pub fn responder(&self) -> (Ipv4Addr, u16) {
        if (self.key.ip_lo, self.key.port_lo) == (self.initiator_ip, self.initiator_port) {
            (self.key.ip_hi, self.key.port_hi)
        } else {
            (self.key.ip_lo, self.key.port_lo)
        }
    }
}

/// Groups TCP/UDP packets into flows. `packets` and `headers` are parallel and
/// must be in timestamp order; a packet's position is its global index.
///
/// A packet joins the live flow for its key when the gap since that flow's
/// last packet is at most `timeout_us`; otherwise, or when the live flow saw a
/// FIN or RST, it opens a new flow.
pub fn assemble_flows(
    packets: &[RawPacket],
    headers: &[ParsedHeaders],
    timeout_us: u64,
) -> Vec<FlowRecord> {
    assert_eq!(packets.len(), headers.len(), "packets and headers must be parallel");
    let mut flows: Vec<FlowRecord> = Vec::new();
    let mut live: HashMap<FlowKey, usize> = HashMap::new();

    for (idx, (pkt, h)) in packets.iter().zip(headers).enumerate() {
        let Some(key) = canonical_flow_key(h) else {
            continue;
        };
        let (src_ip, src_port) = (h.src_ip.unwrap(), h.src_port.unwrap());
        let ts = pkt.ts_us;

        let current = live.get(&key).copied().filter(|&f| {
            let flow = &flows[f];
            !flow.terminated && ts.saturating_sub(flow.last_ts) <= timeout_us
        });
        let f = match current {
            Some(f) => f,
            None => {
                flows.push(FlowRecord {
                    key,
                    initiator_ip: src_ip,
                    initiator_port: src_port,
                    first_ts: ts,
                    last_ts: ts,
                    packets: Vec::new(),
                    terminated: false,
                });
                live.insert(key, flows.len() - 1);
                flows.len() - 1
            }
        };

        let flow = &mut flows[f];
        let dir = if (src_ip, src_port) == (flow.initiator_ip, flow.initiator_port) {
            Direction::Forward
        } else {
            Direction::Backward
        };
        flow.packets.push((idx, dir));
        flow.last_ts = flow.last_ts.max(ts);
        if h.tcp_flags.is_some_and(|fl| fl & (TCP_FIN | TCP_RST) != 0) {
            flow.terminated = true;
        }
    }
    flows
}
