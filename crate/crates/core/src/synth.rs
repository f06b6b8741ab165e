//! Synthetic Ethernet/IPv4 traffic: a frame builder and a labeled capture
//! generator with attack sessions that carry a fixed payload signature and
//! tight inter-packet timing.

use std::net::Ipv4Addr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anonymize::{ipv4_header_checksum, transport_segment_checksum};
use crate::flow::LabelRule;
use crate::ingest::{PcapFileHeader, RawPacket, TCP_ACK, TCP_FIN, TCP_SYN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L4 {
    Tcp {
        src_port: u16,
        dst_port: u16,
        flags: u8,
        seq: u32,
        ack: u32,
        window: u16,
    },
    Udp {
        src_port: u16,
        dst_port: u16,
    },
    /// ICMP echo request
    Icmp,
}

#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub src_mac: [u8; 6],
    pub dst_mac: [u8; 6],
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub ttl: u8,
    pub l4: L4,
    pub payload: Vec<u8>,
}

/// Builds a checksum-valid Ethernet II + IPv4 (no options) frame.
pub fn build_frame(spec: &FrameSpec) -> Vec<u8> {
    let mut seg = Vec::new();
    let proto = match spec.l4 {
        L4::Tcp {
            src_port,
            dst_port,
            flags,
            seq,
            ack,
            window,
        } => {
            seg.extend(src_port.to_be_bytes());
            seg.extend(dst_port.to_be_bytes());
            seg.extend(seq.to_be_bytes());
            seg.extend(ack.to_be_bytes());
            seg.push(5 << 4);
            seg.push(flags);
            seg.extend(window.to_be_bytes());
            seg.extend([0, 0, 0, 0]);
            6
        }
        L4::Udp { src_port, dst_port } => {
            seg.extend(src_port.to_be_bytes());
            seg.extend(dst_port.to_be_bytes());
            seg.extend(((8 + spec.payload.len()) as u16).to_be_bytes());
            seg.extend([0, 0]);
            17
        }
        L4::Icmp => {
            seg.extend([8, 0, 0, 0, 0, 1, 0, 1]);
            1
        }
    };
    seg.extend_from_slice(&spec.payload);
    match spec.l4 {
        L4::Tcp { .. } => {
            let c = transport_segment_checksum(spec.src_ip, spec.dst_ip, 6, &seg);
            seg[16..18].copy_from_slice(&c.to_be_bytes());
        }
        L4::Udp { .. } => {
            let c = transport_segment_checksum(spec.src_ip, spec.dst_ip, 17, &seg);
            seg[6..8].copy_from_slice(&c.to_be_bytes());
        }
        L4::Icmp => {
            let c = !crate::anonymize::ones_complement_sum(0, &seg);
            seg[2..4].copy_from_slice(&c.to_be_bytes());
        }
    }

    let mut ip = [0u8; 20];
    ip[0] = 0x45;
    ip[2..4].copy_from_slice(&((20 + seg.len()) as u16).to_be_bytes());
    ip[6] = 0x40;
    ip[8] = spec.ttl;
    ip[9] = proto;
    ip[12..16].copy_from_slice(&spec.src_ip.octets());
    ip[16..20].copy_from_slice(&spec.dst_ip.octets());
    let c = ipv4_header_checksum(&ip).unwrap();
    ip[10..12].copy_from_slice(&c.to_be_bytes());

    let mut frame = Vec::with_capacity(34 + seg.len());
    frame.extend_from_slice(&spec.dst_mac);
    frame.extend_from_slice(&spec.src_mac);
    frame.extend([0x08, 0x00]);
    frame.extend_from_slice(&ip);
    frame.extend(seg);
    frame
}

/// Payload prefix carried by every attacker-sourced packet.
pub const ATTACK_SIGNATURE: &[u8] = b"\x13\x37XPLOIT/../../etc/passwd\x00\xde\xad\xbe\xef";
/// Payload prefix of victim responses inside attack sessions.
pub const ATTACK_RESPONSE: &[u8] = b"HTTP/1.1 414 URI Too Long\r\nX-Trap: \xca\xfe\r\n";

pub const ATTACKER_IP: Ipv4Addr = Ipv4Addr::new(172, 16, 0, 1);
pub const VICTIM_IP: Ipv4Addr = Ipv4Addr::new(192, 168, 10, 50);
pub const VICTIM_PORT: u16 = 80;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub packets: usize,
    pub seed: u64,
    /// Approximate share of sessions that are attacks (within the attack period).
    pub attack_share: f64,
    pub start_us: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            packets: 10_000,
            seed: 1,
            attack_share: 0.3,
            start_us: 1_499_000_000_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCapture {
    pub header: PcapFileHeader,
    /// Chronologically ordered; `index` is the position.
    pub packets: Vec<RawPacket>,
    pub rules: Vec<LabelRule>,
}

struct Host {
    mac: [u8; 6],
    ip: Ipv4Addr,
}

fn host(ip: Ipv4Addr) -> Host {
    let o = ip.octets();
    Host {
        mac: [0x00, 0x1b, 0x21, o[1], o[2], o[3]],
        ip,
    }
}

fn framed(ts_us: u64, spec: FrameSpec) -> RawPacket {
    let data = build_frame(&spec);
    RawPacket {
        index: 0,
        ts_us,
        original_len: data.len() as u32,
        data,
    }
}

fn text_payload(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    const WORDS: [&[u8]; 8] = [
        b"GET /index.html HTTP/1.1\r\n",
        b"Host: intranet.local\r\n",
        b"Accept: */*\r\n",
        b"HTTP/1.1 200 OK\r\n",
        b"Content-Type: text/html\r\n",
        b"<html><body>",
        b"lorem ipsum dolor sit amet ",
        b"Connection: keep-alive\r\n",
    ];
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        out.extend_from_slice(WORDS.choose(rng).unwrap());
    }
    out.truncate(len);
    out
}

/// Generates `cfg.packets` packets of mixed benign TCP/UDP/ICMP/ARP traffic
/// with attack sessions from [`ATTACKER_IP`] against [`VICTIM_IP`] during the
/// middle half of the capture. The returned rules cover exactly that period.
pub fn generate_capture(cfg: &SynthConfig) -> SyntheticCapture {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let clients: Vec<Host> = (10..40).map(|i| host(Ipv4Addr::new(192, 168, 10, i))).collect();
    let servers: Vec<Host> = [50u8, 51, 52, 53]
        .iter()
        .map(|&i| host(Ipv4Addr::new(192, 168, 10, i)))
        .chain([host(Ipv4Addr::new(8, 8, 8, 8))])
        .collect();
    let attacker = host(ATTACKER_IP);
    let victim = host(VICTIM_IP);

    // ~2 ms of capture time per packet
    let duration = (cfg.packets as u64).max(1) * 2_000;
    let attack_start = cfg.start_us + duration / 4;
    let attack_end = cfg.start_us + duration * 3 / 4;

    let mut out: Vec<RawPacket> = Vec::with_capacity(cfg.packets + 64);

    let mut generated = 0usize;
    while generated < cfg.packets {
        let start = cfg.start_us + rng.gen_range(0..duration);
        let in_attack = (attack_start..attack_end).contains(&start);
        if in_attack && rng.gen_bool(cfg.attack_share) {
            // attack session: bursts with sub-millisecond spacing, signature payloads
            let sport = rng.gen_range(1024..65535u16);
            let mut ts = start;
            let exchanges = rng.gen_range(3..8);
            for k in 0..exchanges {
                let mut payload = ATTACK_SIGNATURE.to_vec();
                payload.extend(std::iter::repeat(b'A').take(rng.gen_range(40..200)));
                out.push(framed(ts, FrameSpec {
                    src_mac: attacker.mac,
                    dst_mac: victim.mac,
                    src_ip: attacker.ip,
                    dst_ip: victim.ip,
                    ttl: 128,
                    l4: L4::Tcp {
                        src_port: sport,
                        dst_port: VICTIM_PORT,
                        flags: 0x18,
                        seq: 1000 + k,
                        ack: 1,
                        window: 1024,
                    },
                    payload,
                }));
                ts += rng.gen_range(50..300);
                let mut resp = ATTACK_RESPONSE.to_vec();
                resp.extend(std::iter::repeat(b'Z').take(rng.gen_range(10..60)));
                out.push(framed(ts, FrameSpec {
                    src_mac: victim.mac,
                    dst_mac: attacker.mac,
                    src_ip: victim.ip,
                    dst_ip: attacker.ip,
                    ttl: 64,
                    l4: L4::Tcp {
                        src_port: VICTIM_PORT,
                        dst_port: sport,
                        flags: 0x18,
                        seq: 1,
                        ack: 1000 + k,
                        window: 29200,
                    },
                    payload: resp,
                }));
                ts += rng.gen_range(50..300);
                generated += 2;
            }
            continue;
        }

        let client = clients.choose(&mut rng).unwrap();
        let server = servers.choose(&mut rng).unwrap();
        let sport = rng.gen_range(1024..65535u16);
        let mut ts = start;
        let gap = |rng: &mut ChaCha8Rng| rng.gen_range(2_000..60_000u64);
        match rng.gen_range(0..10) {
            0..=5 => {
                // TCP: handshake, request/response pairs, FIN teardown
                let mut tcp = |ts: u64, from_client: bool, flags: u8, payload: Vec<u8>| {
                    let (s, d, sp, dp, win) = if from_client {
                        (client, server, sport, 443, 64240)
                    } else {
                        (server, client, 443, sport, 65160)
                    };
                    out.push(framed(ts, FrameSpec {
                        src_mac: s.mac,
                        dst_mac: d.mac,
                        src_ip: s.ip,
                        dst_ip: d.ip,
                        ttl: 64,
                        l4: L4::Tcp {
                            src_port: sp,
                            dst_port: dp,
                            flags,
                            seq: 0,
                            ack: 0,
                            window: win,
                        },
                        payload,
                    }));
                };
                tcp(ts, true, TCP_SYN, vec![]);
                ts += gap(&mut rng);
                tcp(ts, false, TCP_SYN | TCP_ACK, vec![]);
                ts += gap(&mut rng);
                tcp(ts, true, TCP_ACK, vec![]);
                generated += 3;
                for _ in 0..rng.gen_range(1..5) {
                    ts += gap(&mut rng);
                    let len = rng.gen_range(20..300);
                    tcp(ts, true, 0x18, text_payload(&mut rng, len));
                    ts += gap(&mut rng);
                    let len = rng.gen_range(100..1400);
                    tcp(ts, false, 0x18, text_payload(&mut rng, len));
                    generated += 2;
                }
                ts += gap(&mut rng);
                tcp(ts, true, TCP_FIN | TCP_ACK, vec![]);
                generated += 1;
            }
            6..=8 => {
                // UDP query/response
                for _ in 0..rng.gen_range(1..3) {
                    let mut q = rng.gen::<[u8; 12]>().to_vec();
                    q.extend_from_slice(b"\x07example\x03com\x00\x00\x01\x00\x01");
                    let mut r = q.clone();
                    r.extend(rng.gen::<[u8; 16]>());
                    out.push(framed(ts, FrameSpec {
                        src_mac: client.mac,
                        dst_mac: server.mac,
                        src_ip: client.ip,
                        dst_ip: server.ip,
                        ttl: 64,
                        l4: L4::Udp { src_port: sport, dst_port: 53 },
                        payload: q,
                    }));
                    ts += gap(&mut rng);
                    out.push(framed(ts, FrameSpec {
                        src_mac: server.mac,
                        dst_mac: client.mac,
                        src_ip: server.ip,
                        dst_ip: client.ip,
                        ttl: 64,
                        l4: L4::Udp { src_port: 53, dst_port: sport },
                        payload: r,
                    }));
                    ts += gap(&mut rng);
                    generated += 2;
                }
            }
            _ => {
                // ICMP echo, and an ARP request
                out.push(framed(ts, FrameSpec {
                    src_mac: client.mac,
                    dst_mac: server.mac,
                    src_ip: client.ip,
                    dst_ip: server.ip,
                    ttl: 64,
                    l4: L4::Icmp,
                    payload: (0..32).collect(),
                }));
                let mut arp = vec![0xff; 6];
                arp.extend_from_slice(&client.mac);
                arp.extend([0x08, 0x06, 0, 1, 8, 0, 6, 4, 0, 1]);
                arp.extend_from_slice(&client.mac);
                arp.extend_from_slice(&client.ip.octets());
                arp.extend([0; 6]);
                arp.extend_from_slice(&server.ip.octets());
                out.push(RawPacket {
                    index: 0,
                    ts_us: ts + gap(&mut rng),
                    original_len: arp.len() as u32,
                    data: arp,
                });
                generated += 2;
            }
        }
    }

    out.sort_by_key(|p| p.ts_us);
    out.truncate(cfg.packets);
    for (i, p) in out.iter_mut().enumerate() {
        p.index = i as u64;
    }
    SyntheticCapture {
        header: PcapFileHeader::ethernet(65535),
        packets: out,
        rules: vec![LabelRule {
            attack_name: "Synthetic Exploit".into(),
            ts_start: attack_start,
            // attack sessions may spill past the nominal end by a few ms
            ts_end: attack_end + 10_000,
            attacker_ip: ATTACKER_IP,
            victim_ip: VICTIM_IP,
            victim_port: Some(VICTIM_PORT),
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_headers, Protocol};

    #[test]
    fn generator_is_deterministic_and_sized() {
        let cfg = SynthConfig { packets: 2_000, seed: 5, ..Default::default() };
        let a = generate_capture(&cfg);
        let b = generate_capture(&cfg);
        assert_eq!(a.packets.len(), 2_000);
        assert_eq!(a.packets, b.packets);
        assert!(a.packets.windows(2).all(|w| w[0].ts_us <= w[1].ts_us));
    }

    #[test]
    fn capture_contains_attacks_and_other_protocols() {
        let cap = generate_capture(&SynthConfig { packets: 3_000, seed: 2, ..Default::default() });
        let hs: Vec<_> = cap.packets.iter().map(|p| parse_headers(&p.data)).collect();
        let attacks = hs.iter().filter(|h| h.src_ip == Some(ATTACKER_IP)).count();
        let other = hs.iter().filter(|h| h.protocol() == Protocol::Other).count();
        assert!(attacks > 100, "attacks={attacks}");
        assert!(other > 10);
    }
}
