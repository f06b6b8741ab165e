use std::collections::{BTreeSet, HashMap, HashSet};
use std::net::Ipv4Addr;

use pktwin::anonymize::{
    anonymize_capture, ipv4_header_checksum, replace_fields, transport_segment_checksum, ReplacementMap,
};
use pktwin::flow::{assemble_flows, DEFAULT_FLOW_TIMEOUT_US};
use pktwin::ingest::{parse_headers, parse_packet, Protocol, RawPacket};
use pktwin::synth::{build_frame, generate_capture, FrameSpec, SynthConfig, L4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straightforward 32-bit accumulate then fold; odd tail padded with zero.
fn oracle_sum(chunks: &[&[u8]]) -> u16 {
    let mut bytes = Vec::new();
    for c in chunks {
        bytes.extend_from_slice(c);
    }
    if bytes.len() % 2 == 1 {
        bytes.push(0);
    }
    let mut acc: u64 = bytes.chunks(2).map(|w| ((w[0] as u64) << 8) | w[1] as u64).sum();
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    acc as u16
}

fn pseudo(src: Ipv4Addr, dst: Ipv4Addr, proto: u8, len: usize) -> Vec<u8> {
    let mut p = Vec::new();
    p.extend(src.octets());
    p.extend(dst.octets());
    p.extend([0, proto]);
    p.extend((len as u16).to_be_bytes());
    p
}

fn random_packet(rng: &mut ChaCha8Rng, index: u64) -> RawPacket {
    let ip = |rng: &mut ChaCha8Rng| Ipv4Addr::new(10, 0, rng.gen_range(0..4), rng.gen_range(1..6));
    let l4 = if rng.gen_bool(0.6) {
        L4::Tcp {
            src_port: rng.gen_range(1000..1010),
            dst_port: [80, 443, 22][rng.gen_range(0..3)],
            flags: 0x18,
            seq: rng.gen(),
            ack: rng.gen(),
            window: rng.gen(),
        }
    } else {
        L4::Udp {
            src_port: rng.gen_range(5000..5005),
            dst_port: 53,
        }
    };
    let len = rng.gen_range(0..120);
    let data = build_frame(&FrameSpec {
        src_mac: [2, 0, 0, 0, 0, rng.gen_range(0..8)],
        dst_mac: [2, 0, 0, 0, 1, rng.gen_range(0..8)],
        src_ip: ip(rng),
        dst_ip: ip(rng),
        ttl: rng.gen_range(1..255),
        l4,
        payload: (0..len).map(|_| rng.gen()).collect(),
    });
    RawPacket {
        index,
        ts_us: index * 1000,
        original_len: data.len() as u32,
        data,
    }
}

fn random_packets(n: usize, seed: u64) -> Vec<RawPacket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64).map(|i| random_packet(&mut rng, i)).collect()
}

#[test]
fn header_checksum_examples() {
    assert_eq!(ipv4_header_checksum(&[0; 20]).unwrap(), 0xffff);
    let h = [
        0x45, 0x00, 0x00, 0x3c, 0x1c, 0x46, 0x40, 0x00, 0x40, 0x06, 0x00, 0x00, 0xac, 0x10, 0x0a, 0x63, 0xac, 0x10,
        0x0a, 0x0c,
    ];
    assert_eq!(ipv4_header_checksum(&h).unwrap(), 0xb1e6);
    assert_eq!(!oracle_sum(&[&h]), 0xb1e6);
    assert!(ipv4_header_checksum(&h[..19]).is_err());
}

#[test]
fn transport_checksum_matches_oracle() {
    let (src, dst) = (Ipv4Addr::new(192, 0, 2, 1), Ipv4Addr::new(198, 51, 100, 7));
    // Minimal UDP header, zero payload, checksum field zeroed.
    let seg = [0x04, 0xd2, 0x00, 0x35, 0x00, 0x08, 0x00, 0x00];
    let expect = !oracle_sum(&[&pseudo(src, dst, 17, 8), &seg]);
    assert_eq!(transport_segment_checksum(src, dst, 17, &seg), expect);

    // Odd length equals the explicitly even-padded computation.
    let odd = [0x04, 0xd2, 0x00, 0x35, 0x00, 0x09, 0x00, 0x00, 0xab];
    let padded = [&odd[..], &[0]].concat();
    let expect = !oracle_sum(&[&pseudo(src, dst, 17, 9), &padded]);
    assert_eq!(transport_segment_checksum(src, dst, 17, &odd), expect);
}

#[test]
fn every_rewritten_packet_validates() {
    let input = random_packets(400, 21);
    let out = anonymize_capture(&input, 5);
    assert_eq!(out.packets.len(), input.len());
    assert_eq!(out.stats.transport_fixed, input.len());
    assert_eq!(out.stats.transport_uncomputable, 0);
    for p in &out.packets {
        let h = parse_packet(p);
        let ip = h.ip_offset.unwrap();
        let ihl = h.ip_header_len.unwrap();
        assert_eq!(oracle_sum(&[&p.data[ip..ip + ihl]]), 0xffff);
        let t = h.transport_offset.unwrap();
        let proto = if h.protocol() == Protocol::Tcp { 6 } else { 17 };
        let seg = &p.data[t..];
        assert_eq!(oracle_sum(&[&pseudo(h.src_ip.unwrap(), h.dst_ip.unwrap(), proto, seg.len()), seg]), 0xffff);
    }
}

#[test]
fn maps_are_injective_and_consistent() {
    let input = random_packets(500, 22);
    let out = anonymize_capture(&input, 9);
    let originals: Vec<_> = out.map.ip.iter().map(|(o, _)| *o).collect();
    let images: HashSet<_> = out.map.ip.iter().map(|(_, r)| *r).collect();
    assert_eq!(images.len(), originals.len());
    let ports: HashSet<_> = out.map.port.iter().map(|(_, r)| *r).collect();
    assert_eq!(ports.len(), out.map.port.len());
    let macs: HashSet<_> = out.map.mac.iter().map(|(_, r)| *r).collect();
    assert_eq!(macs.len(), out.map.mac.len());
    assert!(macs.iter().all(|m| m[0] & 0x03 == 0x02));

    // Every occurrence of an original maps to the recorded replacement.
    for (a, b) in input.iter().zip(&out.packets) {
        let (ha, hb) = (parse_packet(a), parse_packet(b));
        assert_eq!(out.map.ip.get(&ha.src_ip.unwrap()), hb.src_ip);
        assert_eq!(out.map.ip.get(&ha.dst_ip.unwrap()), hb.dst_ip);
        assert_eq!(out.map.port.get(&ha.src_port.unwrap()), hb.src_port);
        assert_eq!(out.map.port.get(&ha.dst_port.unwrap()), hb.dst_port);
    }
}

#[test]
fn repeated_value_reuses_mapping() {
    let mut map = ReplacementMap::new(3);
    let first = map.map_port(80);
    map.map_port(443);
    assert_eq!(map.map_port(80), first);
    let a = map.map_ip(Ipv4Addr::new(10, 0, 0, 1));
    assert_eq!(map.map_ip(Ipv4Addr::new(10, 0, 0, 1)), a);
    assert_eq!(map.port.len(), 2);
}

#[test]
fn same_insertion_sequence_gives_same_map() {
    let input = random_packets(200, 23);
    let a = anonymize_capture(&input, 4).map;
    let b = anonymize_capture(&input, 4).map;
    assert!(a.ip.iter().eq(b.ip.iter()));
    assert!(a.port.iter().eq(b.port.iter()));
    assert!(a.mac.iter().eq(b.mac.iter()));
}

#[test]
fn seeds_change_headers_not_payloads() {
    let input = random_packets(100, 24);
    let a = anonymize_capture(&input, 7);
    let again = anonymize_capture(&input, 7);
    let b = anonymize_capture(&input, 8);
    assert_eq!(a.packets, again.packets);
    let mut differing = 0;
    for ((orig, x), y) in input.iter().zip(&a.packets).zip(&b.packets) {
        if x.data[0..12] != y.data[0..12] {
            differing += 1;
        }
        let off = parse_packet(orig).payload_offset.unwrap();
        assert_eq!(&x.data[off..], &orig.data[off..]);
        assert_eq!(&y.data[off..], &orig.data[off..]);
        assert_eq!((x.ts_us, x.index, x.original_len), (orig.ts_us, orig.index, orig.original_len));
    }
    assert_eq!(differing, input.len());
}

/// Packet positions grouped per flow, as a set of sets.
fn flow_partition(packets: &[RawPacket]) -> BTreeSet<Vec<usize>> {
    let headers: Vec<_> = packets.iter().map(parse_packet).collect();
    assemble_flows(packets, &headers, DEFAULT_FLOW_TIMEOUT_US)
        .into_iter()
        .map(|f| f.packets.iter().map(|&(i, _)| i).collect())
        .collect()
}

#[test]
fn flow_membership_survives_anonymization() {
    let synth = generate_capture(&SynthConfig {
        packets: 3000,
        seed: 12,
        ..SynthConfig::default()
    });
    let out = anonymize_capture(&synth.packets, 77);
    let before = flow_partition(&synth.packets);
    assert!(before.len() > 10);
    assert_eq!(flow_partition(&out.packets), before);

    let random = random_packets(600, 25);
    assert_eq!(flow_partition(&anonymize_capture(&random, 1).packets), flow_partition(&random));
}

#[test]
fn only_identifying_fields_change() {
    let input = random_packets(50, 26);
    let mut map = ReplacementMap::new(2);
    for p in &input {
        let h = parse_packet(p);
        let out = replace_fields(p, &h, &mut map);
        let ip = h.ip_offset.unwrap();
        let t = h.transport_offset.unwrap();
        let mut touched: HashSet<usize> = (0..12).collect();
        touched.extend(ip + 12..ip + 20);
        touched.extend(t..t + 4);
        for (i, (a, b)) in p.data.iter().zip(&out.data).enumerate() {
            if !touched.contains(&i) {
                assert_eq!(a, b, "byte {i} changed");
            }
        }
    }
}

#[test]
fn truncated_segments_are_counted() {
    let mut input = random_packets(20, 27);
    let mut cut = 0;
    for p in input.iter_mut().step_by(3) {
        let h = parse_packet(p);
        let t = h.transport_offset.unwrap();
        // Keep the transport header but lose the payload.
        let keep = if h.protocol() == Protocol::Tcp { t + 20 } else { t + 8 };
        if p.data.len() > keep {
            p.data.truncate(keep);
            cut += 1;
        }
    }
    let out = anonymize_capture(&input, 3);
    assert_eq!(out.stats.transport_uncomputable, cut);
    assert_eq!(out.stats.transport_fixed, input.len() - cut);
    assert_eq!(out.packets.len(), input.len());
}

#[test]
fn map_csv_lists_every_pair() {
    let input = random_packets(30, 28);
    let out = anonymize_capture(&input, 6);
    let mut buf = Vec::new();
    out.map.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(&buf[..]);
    let mut kinds: HashMap<String, usize> = HashMap::new();
    for row in reader.records() {
        *kinds.entry(row.unwrap()[0].to_string()).or_default() += 1;
    }
    assert_eq!(kinds["mac"], out.map.mac.len());
    assert_eq!(kinds["ip"], out.map.ip.len());
    assert_eq!(kinds["port"], out.map.port.len());
}

proptest! {
    #[test]
    fn udp_never_emits_zero(src in any::<u32>(), dst in any::<u32>(), payload in prop::collection::vec(any::<u8>(), 0..64)) {
        let data = build_frame(&FrameSpec {
            src_mac: [2, 0, 0, 0, 0, 1],
            dst_mac: [2, 0, 0, 0, 0, 2],
            src_ip: Ipv4Addr::from(src),
            dst_ip: Ipv4Addr::from(dst),
            ttl: 64,
            l4: L4::Udp { src_port: 1, dst_port: 2 },
            payload,
        });
        let h = parse_headers(&data);
        let t = h.transport_offset.unwrap();
        let mut seg = data[t..].to_vec();
        seg[6] = 0;
        seg[7] = 0;
        let c = transport_segment_checksum(h.src_ip.unwrap(), h.dst_ip.unwrap(), 17, &seg);
        prop_assert_ne!(c, 0);
        let raw = !oracle_sum(&[&pseudo(h.src_ip.unwrap(), h.dst_ip.unwrap(), 17, seg.len()), &seg]);
        prop_assert_eq!(c, if raw == 0 { 0xffff } else { raw });
    }
}
