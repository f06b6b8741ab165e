use pktwin::ingest::{
    capture_to_bytes, parse_capture, parse_headers, read_capture, read_captures, reorder_chronologically, write_capture,
    PcapFileHeader, Protocol, RawPacket,
};
use pktwin::synth::{build_frame, generate_capture, FrameSpec, SynthConfig, L4};
use proptest::prelude::*;
use std::net::Ipv4Addr;

/// Hand-assembled classic pcap, independent of the library writer.
fn pcap(big_endian: bool, magic: u32, snaplen: u32, linktype: u32, records: &[(u32, u32, u32, &[u8])]) -> Vec<u8> {
    let u32b = |v: u32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let u16b = |v: u16| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
    let mut out = Vec::new();
    out.extend(u32b(magic));
    out.extend(u16b(2));
    out.extend(u16b(4));
    out.extend(u32b(0));
    out.extend(u32b(0));
    out.extend(u32b(snaplen));
    out.extend(u32b(linktype));
    for &(sec, frac, orig, data) in records {
        out.extend(u32b(sec));
        out.extend(u32b(frac));
        out.extend(u32b(data.len() as u32));
        out.extend(u32b(orig));
        out.extend_from_slice(data);
    }
    out
}

fn tcp_frame(payload: &[u8]) -> Vec<u8> {
    build_frame(&FrameSpec {
        src_mac: [2, 0, 0, 0, 0, 1],
        dst_mac: [2, 0, 0, 0, 0, 2],
        src_ip: Ipv4Addr::new(10, 0, 0, 1),
        dst_ip: Ipv4Addr::new(10, 0, 0, 2),
        ttl: 64,
        l4: L4::Tcp {
            src_port: 80,
            dst_port: 12345,
            flags: 0x18,
            seq: 1,
            ack: 1,
            window: 512,
        },
        payload: payload.to_vec(),
    })
}

#[test]
fn three_packet_micro_file() {
    let f = tcp_frame(b"abc");
    let bytes = pcap(false, 0xa1b2c3d4, 65535, 1, &[(1, 0, f.len() as u32, &f), (1, 5, 60, &f[..40]), (2, 0, f.len() as u32, &f)]);
    let cap = parse_capture(&bytes).unwrap();
    assert_eq!(cap.packets.len(), 3);
    assert_eq!(cap.stats.skipped, 0);
    assert_eq!(cap.packets[1].ts_us, 1_000_005);
    assert_eq!(cap.packets[1].data, &f[..40]);
}

#[test]
fn record_running_past_eof_is_skipped() {
    let f = tcp_frame(b"");
    let mut bytes = pcap(false, 0xa1b2c3d4, 65535, 1, &[(1, 0, 54, &f), (2, 0, 54, &f)]);
    // Third record header claims 60 bytes, only 10 follow.
    bytes.extend(3u32.to_le_bytes());
    bytes.extend(0u32.to_le_bytes());
    bytes.extend(60u32.to_le_bytes());
    bytes.extend(60u32.to_le_bytes());
    bytes.extend([0u8; 10]);
    let cap = parse_capture(&bytes).unwrap();
    assert_eq!(cap.packets.len(), 2);
    assert_eq!(cap.stats.skipped, 1);
}

#[test]
fn oversized_records_are_skipped_not_fatal() {
    let f = tcp_frame(b"0123456789");
    let bytes = pcap(false, 0xa1b2c3d4, 40, 1, &[(1, 0, 60, &f[..40]), (1, 1, f.len() as u32, &f), (1, 2, 20, &f[..30])]);
    let cap = parse_capture(&bytes).unwrap();
    // Second exceeds snaplen, third has captured > original.
    assert_eq!(cap.packets.len(), 1);
    assert_eq!(cap.stats.skipped, 2);
}

#[test]
fn nanosecond_big_endian_file() {
    let f = tcp_frame(b"x");
    let bytes = pcap(true, 0xa1b23c4d, 65535, 1, &[(1, 500, f.len() as u32, &f), (1, 499, f.len() as u32, &f)]);
    let cap = parse_capture(&bytes).unwrap();
    assert_eq!(cap.packets[0].ts_us, 1_000_001);
    assert_eq!(cap.packets[1].ts_us, 1_000_000);
}

proptest! {
    #[test]
    fn nanosecond_rounding_matches_decimal_oracle(sec in 0u32..4_000_000_000, ns in 0u32..1_000_000_000) {
        let f = tcp_frame(b"");
        let bytes = pcap(false, 0xa1b23c4d, 65535, 1, &[(sec, ns, 54, &f)]);
        let got = parse_capture(&bytes).unwrap().packets[0].ts_us;
        // Round half up on the decimal string of the sub-microsecond digits.
        let digits = format!("{ns:09}");
        let micros: u64 = digits[..6].parse().unwrap();
        let up = digits.as_bytes()[6] >= b'5';
        prop_assert_eq!(got, sec as u64 * 1_000_000 + micros + up as u64);
    }
}

#[test]
fn bad_magic_and_short_header() {
    let mut bytes = pcap(false, 0xa1b2c3d4, 65535, 1, &[]);
    bytes[0] ^= 0xff;
    assert_eq!(parse_capture(&bytes).unwrap_err().code(), "unsupported_format");
    assert_eq!(parse_capture(&bytes[..10]).unwrap_err().code(), "truncated_header");
}

#[test]
fn non_ethernet_and_zero_snaplen_rejected() {
    assert!(parse_capture(&pcap(false, 0xa1b2c3d4, 65535, 101, &[])).is_err());
    assert!(parse_capture(&pcap(false, 0xa1b2c3d4, 0, 1, &[])).is_err());
}

#[test]
fn file_round_trip_and_parallel_read() {
    let synth = generate_capture(&SynthConfig {
        packets: 300,
        ..SynthConfig::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pcap");
    let b = dir.path().join("b.pcap");
    write_capture(&a, &synth.header, &synth.packets).unwrap();
    write_capture(&b, &synth.header, &synth.packets[..100]).unwrap();
    let back = read_capture(&a).unwrap();
    assert_eq!(back.packets, synth.packets);
    let both = read_captures(&[&a, &b]);
    assert_eq!(both[0].as_ref().unwrap().packets.len(), 300);
    assert_eq!(both[1].as_ref().unwrap().packets.len(), 100);
}

fn packets(ts: &[u64]) -> Vec<RawPacket> {
    ts.iter()
        .enumerate()
        .map(|(i, &t)| RawPacket {
            index: i as u64,
            ts_us: t,
            original_len: 1,
            data: vec![i as u8],
        })
        .collect()
}

#[test]
fn reorder_examples() {
    let order = |ts: &[u64]| reorder_chronologically(packets(ts)).iter().map(|p| p.index).collect::<Vec<_>>();
    assert_eq!(order(&[3, 1, 2]), [1, 2, 0]);
    assert_eq!(order(&[1, 2, 3]), [0, 1, 2]);
    assert_eq!(order(&[2, 2, 1]), [2, 0, 1]);
}

proptest! {
    #[test]
    fn reorder_is_stable_sorted_idempotent(ts in prop::collection::vec(0u64..20, 0..60)) {
        let once = reorder_chronologically(packets(&ts));
        prop_assert!(once.windows(2).all(|w| w[0].ts_us < w[1].ts_us || (w[0].ts_us == w[1].ts_us && w[0].index < w[1].index)));
        let mut idx: Vec<u64> = once.iter().map(|p| p.index).collect();
        idx.sort();
        prop_assert_eq!(idx, (0..ts.len() as u64).collect::<Vec<_>>());
        prop_assert_eq!(reorder_chronologically(once.clone()), once);
    }

    #[test]
    fn capture_bytes_round_trip(
        recs in prop::collection::vec((0u64..4_000_000_000_000_000, prop::collection::vec(any::<u8>(), 1..200)), 0..20)
    ) {
        let pkts: Vec<RawPacket> = recs
            .iter()
            .enumerate()
            .map(|(i, (ts, d))| RawPacket { index: i as u64, ts_us: *ts, original_len: d.len() as u32 + 3, data: d.clone() })
            .collect();
        let header = PcapFileHeader::ethernet(65535);
        let back = parse_capture(&capture_to_bytes(&header, &pkts)).unwrap();
        prop_assert_eq!(back.packets, pkts);
    }

    #[test]
    fn tcp_payload_offset_formula(ihl in 5u8..16, doff in 5u8..16, payload in 0usize..40) {
        let ip_len = ihl as usize * 4;
        let tcp_len = doff as usize * 4;
        let mut f = vec![0u8; 14 + ip_len + tcp_len + payload];
        f[12] = 0x08;
        f[14] = 0x40 | ihl;
        let total = (ip_len + tcp_len + payload) as u16;
        f[16..18].copy_from_slice(&total.to_be_bytes());
        f[23] = 6;
        f[14 + ip_len + 12] = doff << 4;
        let h = parse_headers(&f);
        prop_assert_eq!(h.protocol(), Protocol::Tcp);
        prop_assert_eq!(h.transport_offset, Some(14 + ip_len));
        prop_assert_eq!(h.payload_offset, Some(14 + ihl as usize * 4 + doff as usize * 4));
    }
}

#[test]
fn header_examples() {
    let h = parse_headers(&tcp_frame(b""));
    assert_eq!((h.ip_offset, h.transport_offset, h.payload_offset), (Some(14), Some(34), Some(54)));
    let mut arp = vec![0u8; 42];
    arp[12..14].copy_from_slice(&[0x08, 0x06]);
    let h = parse_headers(&arp);
    assert_eq!((h.ip_version, h.protocol()), (None, Protocol::Other));
    assert_eq!(h.src_port, None);
}

#[test]
fn vlan_tag_is_skipped() {
    let f = tcp_frame(b"hi");
    let mut tagged = f[..12].to_vec();
    tagged.extend([0x81, 0x00, 0x00, 0x0a]);
    tagged.extend_from_slice(&f[12..]);
    let h = parse_headers(&tagged);
    assert_eq!(h.ip_offset, Some(18));
    assert_eq!(h.src_port, Some(80));
}
