//! Randomized replacement of identifying header fields followed by checksum
//! recomputation, so rewritten packets stay protocol-valid.

mod checksum;
mod map;

use std::net::Ipv4Addr;

pub use checksum::*;
pub use map::*;

use crate::ingest::{parse_headers, ParsedHeaders, Protocol, RawPacket};

/// Rewrites MACs always, and IPv4 addresses and TCP/UDP ports when present.
/// Checksums are not touched here; see [`fix_checksums`].
pub fn replace_fields(pkt: &RawPacket, h: &ParsedHeaders, map: &mut ReplacementMap) -> RawPacket {
    let mut out = pkt.clone();
    let d = &mut out.data;
    if let Some(eth) = h.eth_offset {
        for off in [eth, eth + 6] {
            let orig: MacAddr = d[off..off + 6].try_into().unwrap();
            d[off..off + 6].copy_from_slice(&map.map_mac(orig));
        }
    }
    if let (Some(ip), Some(src), Some(dst)) = (h.ip_offset, h.src_ip, h.dst_ip) {
        d[ip + 12..ip + 16].copy_from_slice(&map.map_ip(src).octets());
        d[ip + 16..ip + 20].copy_from_slice(&map.map_ip(dst).octets());
    }
    if let (Some(t), Some(sp), Some(dp)) = (h.transport_offset, h.src_port, h.dst_port) {
        d[t..t + 2].copy_from_slice(&map.map_port(sp).to_be_bytes());
        d[t + 2..t + 4].copy_from_slice(&map.map_port(dp).to_be_bytes());
    }
    out
}

fn checksum_field(h: &ParsedHeaders) -> Option<usize> {
    let t = h.transport_offset?;
    match h.protocol() {
        Protocol::Tcp => Some(t + 16),
        Protocol::Udp => Some(t + 6),
        Protocol::Other => None,
    }
}

/// TCP/UDP checksum of the segment in `data`, computed as if its checksum
/// field were zero. Addresses are read from the packet bytes. `None` when the
/// capture holds fewer bytes than the IPv4 header declares for the segment.
pub fn transport_checksum(data: &[u8], h: &ParsedHeaders) -> Option<u16> {
    let proto = h.protocol().ip_number()?;
    let ip = h.ip_offset?;
    let t = h.transport_offset?;
    let len = h.transport_len()?;
    let field = checksum_field(h)?;
    if data.len() < t + len || field + 2 > t + len {
        return None;
    }
    let src = Ipv4Addr::new(data[ip + 12], data[ip + 13], data[ip + 14], data[ip + 15]);
    let dst = Ipv4Addr::new(data[ip + 16], data[ip + 17], data[ip + 18], data[ip + 19]);
    let mut segment = data[t..t + len].to_vec();
    segment[field - t] = 0;
    segment[field - t + 1] = 0;
    Some(transport_segment_checksum(src, dst, proto, &segment))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChecksumStats {
    pub ip_fixed: usize,
    pub transport_fixed: usize,
    /// Segments cut by snaplen: checksum field left zeroed.
    pub transport_uncomputable: usize,
}

/// Recomputes the IPv4 header and TCP/UDP checksums in place.
pub fn fix_checksums(data: &mut [u8], h: &ParsedHeaders, stats: &mut ChecksumStats) {
    let (Some(ip), Some(ihl)) = (h.ip_offset, h.ip_header_len) else {
        return;
    };
    data[ip + 10] = 0;
    data[ip + 11] = 0;
    let csum = ipv4_header_checksum(&data[ip..ip + ihl]).expect("parsed IPv4 header is >= 20 bytes");
    data[ip + 10..ip + 12].copy_from_slice(&csum.to_be_bytes());
    stats.ip_fixed += 1;

    let Some(field) = checksum_field(h) else {
        return;
    };
    if field + 2 > data.len() {
        stats.transport_uncomputable += 1;
        return;
    }
    data[field] = 0;
    data[field + 1] = 0;
    match transport_checksum(data, h) {
        Some(c) => {
            data[field..field + 2].copy_from_slice(&c.to_be_bytes());
            stats.transport_fixed += 1;
        }
        None => stats.transport_uncomputable += 1,
    }
}

#[derive(Debug, Clone)]
pub struct AnonymizedCapture {
    pub packets: Vec<RawPacket>,
    pub map: ReplacementMap,
    pub stats: ChecksumStats,
}

/// Applies randomized replacement and checksum fix-up to every packet with a
/// single per-capture map. Bytes past the transport header are never changed.
pub fn anonymize_capture(packets: &[RawPacket], seed: u64) -> AnonymizedCapture {
    let mut map = ReplacementMap::new(seed);
    let mut stats = ChecksumStats::default();
    let packets = packets
        .iter()
        .map(|p| {
            let h = parse_headers(&p.data);
            let mut out = replace_fields(p, &h, &mut map);
            fix_checksums(&mut out.data, &h, &mut stats);
            out
        })
        .collect();
    AnonymizedCapture {
        packets,
        map,
        stats,
    }
}
