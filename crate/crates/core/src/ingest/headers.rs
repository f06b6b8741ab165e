//! Ethernet / IPv4 / TCP / UDP header offsets.

use std::net::Ipv4Addr;

use super::pcap::RawPacket;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETH_HEADER_LEN: usize = 14;

pub const TCP_FIN: u8 = 0x01;
pub const TCP_SYN: u8 = 0x02;
pub const TCP_RST: u8 = 0x04;
pub const TCP_ACK: u8 = 0x10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Other,
}

impl Protocol {
    pub fn ip_number(self) -> Option<u8> {
        match self {
            Protocol::Tcp => Some(6),
            Protocol::Udp => Some(17),
            Protocol::Other => None,
        }
    }
}

/// Byte offsets into a frame. IPv4 fields are present for every IPv4 packet;
/// ports and the transport/payload offsets only for TCP and UDP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedHeaders {
    pub eth_offset: Option<usize>,
    pub ip_offset: Option<usize>,
    pub transport_offset: Option<usize>,
    pub payload_offset: Option<usize>,
    pub ip_version: Option<u8>,
    pub protocol: Option<Protocol>,
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub ttl_offset: Option<usize>,
    /// IPv4 header length in bytes (IHL × 4).
    pub ip_header_len: Option<usize>,
    /// IPv4 total length field.
    pub ip_total_len: Option<usize>,
    pub tcp_flags: Option<u8>,
}

impl ParsedHeaders {
    pub fn protocol(&self) -> Protocol {
        self.protocol.unwrap_or(Protocol::Other)
    }

    pub fn is_ipv4(&self) -> bool {
        self.ip_version == Some(4)
    }

    /// Length of the transport segment as declared by the IPv4 header.
    pub fn transport_len(&self) -> Option<usize> {
        Some(self.ip_total_len?.checked_sub(self.ip_header_len?)?)
    }
}

pub fn parse_packet(pkt: &RawPacket) -> ParsedHeaders {
    parse_headers(&pkt.data)
}

pub fn parse_headers(data: &[u8]) -> ParsedHeaders {
    let mut h = ParsedHeaders {
        protocol: Some(Protocol::Other),
        ..ParsedHeaders::default()
    };
    if data.len() < ETH_HEADER_LEN {
        return h;
    }
    h.eth_offset = Some(0);

    let mut type_at = 12;
    let mut ethertype = u16::from_be_bytes([data[12], data[13]]);
    while ethertype == ETHERTYPE_VLAN {
        type_at += 4;
        if data.len() < type_at + 2 {
            return h;
        }
        ethertype = u16::from_be_bytes([data[type_at], data[type_at + 1]]);
    }
    if ethertype != ETHERTYPE_IPV4 {
        return h;
    }

    let ip = type_at + 2;
    if data.len() < ip + 20 || data[ip] >> 4 != 4 {
        return h;
    }
    let ihl = usize::from(data[ip] & 0x0f) * 4;
    if ihl < 20 || data.len() < ip + ihl {
        return h;
    }
    h.ip_offset = Some(ip);
    h.ip_version = Some(4);
    h.ip_header_len = Some(ihl);
    h.ip_total_len = Some(usize::from(u16::from_be_bytes([data[ip + 2], data[ip + 3]])));
    h.ttl_offset = Some(ip + 8);
    h.src_ip = Some(Ipv4Addr::new(
        data[ip + 12],
        data[ip + 13],
        data[ip + 14],
        data[ip + 15],
    ));
    h.dst_ip = Some(Ipv4Addr::new(
        data[ip + 16],
        data[ip + 17],
        data[ip + 18],
        data[ip + 19],
    ));

    // Non-first fragments carry no transport header.
    let frag_offset = u16::from_be_bytes([data[ip + 6], data[ip + 7]]) & 0x1fff;
    if frag_offset != 0 {
        return h;
    }

    let t = ip + ihl;
    let ports = |d: &[u8]| {
        (
            u16::from_be_bytes([d[t], d[t + 1]]),
            u16::from_be_bytes([d[t + 2], d[t + 3]]),
        )
    };
    match data[ip + 9] {
        6 if data.len() >= t + 20 => {
            let doff = usize::from(data[t + 12] >> 4) * 4;
            if doff < 20 {
                return h;
            }
            let (sp, dp) = ports(data);
            h.protocol = Some(Protocol::Tcp);
            h.transport_offset = Some(t);
            h.payload_offset = Some(t + doff);
            h.src_port = Some(sp);
            h.dst_port = Some(dp);
            h.tcp_flags = Some(data[t + 13]);
        }
        17 if data.len() >= t + 8 => {
            let (sp, dp) = ports(data);
            h.protocol = Some(Protocol::Udp);
            h.transport_offset = Some(t);
            h.payload_offset = Some(t + 8);
            h.src_port = Some(sp);
            h.dst_port = Some(dp);
        }
        _ => {}
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eth(ethertype: u16) -> Vec<u8> {
        let mut f = vec![0xaa; 6];
        f.extend([0xbb; 6]);
        f.extend(ethertype.to_be_bytes());
        f
    }

    fn ipv4(ihl_words: u8, proto: u8, transport: &[u8]) -> Vec<u8> {
        let ihl = usize::from(ihl_words) * 4;
        let mut ip = vec![0u8; ihl];
        ip[0] = 0x40 | ihl_words;
        let total = (ihl + transport.len()) as u16;
        ip[2..4].copy_from_slice(&total.to_be_bytes());
        ip[8] = 64;
        ip[9] = proto;
        ip[12..16].copy_from_slice(&[10, 0, 0, 1]);
        ip[16..20].copy_from_slice(&[10, 0, 0, 2]);
        ip.extend_from_slice(transport);
        ip
    }

    fn tcp(sp: u16, dp: u16, flags: u8) -> Vec<u8> {
        let mut t = vec![0u8; 20];
        t[0..2].copy_from_slice(&sp.to_be_bytes());
        t[2..4].copy_from_slice(&dp.to_be_bytes());
        t[12] = 5 << 4;
        t[13] = flags;
        t
    }

    #[test]
    fn minimal_tcp_offsets() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(5, 6, &tcp(80, 12345, TCP_SYN)));
        let h = parse_headers(&f);
        assert_eq!(h.ip_offset, Some(14));
        assert_eq!(h.transport_offset, Some(34));
        assert_eq!(h.payload_offset, Some(54));
        assert_eq!(h.ttl_offset, Some(22));
        assert_eq!(h.protocol(), Protocol::Tcp);
        assert_eq!(h.src_ip, Some(Ipv4Addr::new(10, 0, 0, 1)));
        assert_eq!((h.src_port, h.dst_port), (Some(80), Some(12345)));
        assert_eq!(h.tcp_flags, Some(TCP_SYN));
        assert_eq!(h.transport_len(), Some(20));
    }

    #[test]
    fn ip_options_shift_transport() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(6, 17, &[0, 53, 0, 99, 0, 8, 0, 0]));
        let h = parse_headers(&f);
        assert_eq!(h.transport_offset, Some(38));
        assert_eq!(h.payload_offset, Some(46));
        assert_eq!(h.protocol(), Protocol::Udp);
        assert_eq!(h.dst_port, Some(99));
    }

    #[test]
    fn arp_is_other() {
        let mut f = eth(0x0806);
        f.extend([0u8; 28]);
        let h = parse_headers(&f);
        assert_eq!(h.ip_version, None);
        assert_eq!(h.protocol(), Protocol::Other);
        assert_eq!(h.eth_offset, Some(0));
        assert_eq!(h.src_port, None);
    }

    #[test]
    fn icmp_keeps_addresses_but_no_ports() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(5, 1, &[8, 0, 0, 0, 0, 0, 0, 0]));
        let h = parse_headers(&f);
        assert!(h.is_ipv4());
        assert_eq!(h.protocol(), Protocol::Other);
        assert!(h.src_ip.is_some());
        assert_eq!(h.transport_offset, None);
        assert_eq!(h.src_port, None);
    }

    #[test]
    fn vlan_tag_is_skipped() {
        let mut f = eth(ETHERTYPE_VLAN);
        f.extend([0x00, 0x0a]);
        f.extend(ETHERTYPE_IPV4.to_be_bytes());
        f.extend(ipv4(5, 6, &tcp(1, 2, 0)));
        let h = parse_headers(&f);
        assert_eq!(h.ip_offset, Some(18));
        assert_eq!(h.transport_offset, Some(38));
    }

    #[test]
    fn ipv6_and_runt_frames_degrade() {
        let mut f = eth(0x86dd);
        f.extend([0x60; 40]);
        assert_eq!(parse_headers(&f).protocol(), Protocol::Other);
        assert_eq!(parse_headers(&[1, 2, 3]), ParsedHeaders {
            protocol: Some(Protocol::Other),
            ..Default::default()
        });
        // TCP header cut short by the capture
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(5, 6, &tcp(1, 2, 0)));
        f.truncate(40);
        let h = parse_headers(&f);
        assert!(h.is_ipv4());
        assert_eq!(h.protocol(), Protocol::Other);
    }
}
