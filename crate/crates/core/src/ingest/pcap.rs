//! Classic libpcap container: reading with light record sanitization,
//! writing, and chronological reordering.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
pub const MAGIC_NANOS: u32 = 0xa1b2_3c4d;
pub const LINKTYPE_ETHERNET: u32 = 1;

const FILE_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimestampResolution {
    Micros,
    Nanos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcapFileHeader {
    /// Magic as it reads in the file's own byte order (one of the two constants above).
    pub magic: u32,
    pub byte_order: ByteOrder,
    pub resolution: TimestampResolution,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
}

impl PcapFileHeader {
    pub fn ethernet(snaplen: u32) -> Self {
        PcapFileHeader {
            magic: MAGIC_MICROS,
            byte_order: ByteOrder::Little,
            resolution: TimestampResolution::Micros,
            version_major: 2,
            version_minor: 4,
            snaplen,
            linktype: LINKTYPE_ETHERNET,
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FILE_HEADER_LEN {
            return Err(Error::TruncatedHeader(bytes.len()));
        }
        let raw_le = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let raw_be = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
        let (byte_order, magic) = match (raw_le, raw_be) {
            (MAGIC_MICROS | MAGIC_NANOS, _) => (ByteOrder::Little, raw_le),
            (_, MAGIC_MICROS | MAGIC_NANOS) => (ByteOrder::Big, raw_be),
            _ => {
                return Err(Error::UnsupportedFormat(format!(
                    "bad magic 0x{raw_be:08x}"
                )))
            }
        };
        let resolution = if magic == MAGIC_NANOS {
            TimestampResolution::Nanos
        } else {
            TimestampResolution::Micros
        };
        let u16_at = |off: usize| read_u16(bytes, off, byte_order);
        let u32_at = |off: usize| read_u32(bytes, off, byte_order);
        let header = PcapFileHeader {
            magic,
            byte_order,
            resolution,
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            linktype: u32_at(20),
        };
        if header.snaplen == 0 {
            return Err(Error::UnsupportedFormat("snaplen is zero".into()));
        }
        if header.linktype != LINKTYPE_ETHERNET {
            return Err(Error::UnsupportedFormat(format!(
                "linktype {} (only Ethernet is supported)",
                header.linktype
            )));
        }
        Ok(header)
    }

    fn to_bytes(&self) -> [u8; FILE_HEADER_LEN] {
        let mut out = [0u8; FILE_HEADER_LEN];
        let put16 = |v: u16| match self.byte_order {
            ByteOrder::Little => v.to_le_bytes(),
            ByteOrder::Big => v.to_be_bytes(),
        };
        let put32 = |v: u32| match self.byte_order {
            ByteOrder::Little => v.to_le_bytes(),
            ByteOrder::Big => v.to_be_bytes(),
        };
        out[0..4].copy_from_slice(&put32(self.magic));
        out[4..6].copy_from_slice(&put16(self.version_major));
        out[6..8].copy_from_slice(&put16(self.version_minor));
        // thiszone and sigfigs stay zero
        out[16..20].copy_from_slice(&put32(self.snaplen));
        out[20..24].copy_from_slice(&put32(self.linktype));
        out
    }
}

/// One captured frame. `ts_us` is the capture timestamp in microseconds since the epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub index: u64,
    pub ts_us: u64,
    pub original_len: u32,
    pub data: Vec<u8>,
}

impl RawPacket {
    pub fn captured_len(&self) -> u32 {
        self.data.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SanitizeStats {
    /// Records dropped because their declared length ran past end-of-file,
    /// exceeded snaplen, or exceeded their own original length.
    pub skipped: usize,
    pub truncated_tail: bool,
}

#[derive(Debug, Clone)]
pub struct Capture {
    pub header: PcapFileHeader,
    pub packets: Vec<RawPacket>,
    pub stats: SanitizeStats,
}

fn read_u16(b: &[u8], off: usize, order: ByteOrder) -> u16 {
    let a = [b[off], b[off + 1]];
    match order {
        ByteOrder::Little => u16::from_le_bytes(a),
        ByteOrder::Big => u16::from_be_bytes(a),
    }
}

fn read_u32(b: &[u8], off: usize, order: ByteOrder) -> u32 {
    let a = b[off..off + 4].try_into().unwrap();
    match order {
        ByteOrder::Little => u32::from_le_bytes(a),
        ByteOrder::Big => u32::from_be_bytes(a),
    }
}

/// Nanoseconds to microseconds, rounding half up.
pub fn nanos_to_micros(ns: u64) -> u64 {
    ns / 1000 + u64::from(ns % 1000 >= 500)
}

pub fn read_capture(path: impl AsRef<Path>) -> Result<Capture> {
    let bytes = fs::read(path)?;
    parse_capture(&bytes)
}

/// Reads several captures concurrently, one thread per file.
pub fn read_captures<P: AsRef<Path> + Sync>(paths: &[P]) -> Vec<Result<Capture>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| s.spawn(move || read_capture(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("capture reader panicked"))
            .collect()
    })
}

pub fn parse_capture(bytes: &[u8]) -> Result<Capture> {
    let header = PcapFileHeader::parse(bytes)?;
    let order = header.byte_order;
    let mut packets = Vec::new();
    let mut stats = SanitizeStats::default();
    let mut pos = FILE_HEADER_LEN;
    let mut ordinal = 0u64;

    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            stats.skipped += 1;
            stats.truncated_tail = true;
            break;
        }
        let ts_sec = u64::from(read_u32(bytes, pos, order));
        let ts_frac = u64::from(read_u32(bytes, pos + 4, order));
        let incl_len = read_u32(bytes, pos + 8, order);
        let orig_len = read_u32(bytes, pos + 12, order);
        let body = pos + RECORD_HEADER_LEN;
        let remaining = bytes.len() - body;

        if incl_len as usize > remaining {
            stats.skipped += 1;
            stats.truncated_tail = true;
            break;
        }
        let next = body + incl_len as usize;
        let index = ordinal;
        ordinal += 1;
        pos = next;
        if incl_len > header.snaplen || incl_len > orig_len {
            stats.skipped += 1;
            continue;
        }

        let frac_us = match header.resolution {
            TimestampResolution::Micros => ts_frac,
            TimestampResolution::Nanos => nanos_to_micros(ts_frac),
        };
        packets.push(RawPacket {
            index,
            ts_us: ts_sec * 1_000_000 + frac_us,
            original_len: orig_len,
            data: bytes[body..next].to_vec(),
        });
    }

    Ok(Capture {
        header,
        packets,
        stats,
    })
}

/// Serializes packets as a microsecond-resolution pcap in the header's byte order.
pub fn capture_to_bytes(header: &PcapFileHeader, packets: &[RawPacket]) -> Vec<u8> {
    let header = PcapFileHeader {
        magic: MAGIC_MICROS,
        resolution: TimestampResolution::Micros,
        ..header.clone()
    };
    let total: usize = packets.iter().map(|p| p.data.len() + RECORD_HEADER_LEN).sum();
    let mut out = Vec::with_capacity(FILE_HEADER_LEN + total);
    out.extend_from_slice(&header.to_bytes());
    let put32 = |out: &mut Vec<u8>, v: u32| match header.byte_order {
        ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
        ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
    };
    for p in packets {
        put32(&mut out, (p.ts_us / 1_000_000) as u32);
        put32(&mut out, (p.ts_us % 1_000_000) as u32);
        put32(&mut out, p.data.len() as u32);
        put32(&mut out, p.original_len.max(p.data.len() as u32));
        out.extend_from_slice(&p.data);
    }
    out
}

pub fn write_capture(
    path: impl AsRef<Path>,
    header: &PcapFileHeader,
    packets: &[RawPacket],
) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&capture_to_bytes(header, packets))?;
    file.flush()?;
    Ok(())
}

/// Stable sort by timestamp; packets with equal timestamps keep file order.
pub fn reorder_chronologically(mut packets: Vec<RawPacket>) -> Vec<RawPacket> {
    packets.sort_by_key(|p| p.ts_us);
    packets
}
