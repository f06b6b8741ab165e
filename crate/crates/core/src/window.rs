//! Fixed-width packet vectors and 150-row windows.

use crate::ingest::RawPacket;

pub const PACKET_BYTES: usize = 350;
pub const VECTOR_WIDTH: usize = PACKET_BYTES + 1;
pub const WINDOW_ROWS: usize = 150;

/// Logarithmic time-delta quantizer: `min(255, floor(16 · log2(1 + Δms)))`.
pub fn encode_time_delta(delta_us: u64) -> u8 {
    let ms = delta_us as f64 / 1000.0;
    let b = (16.0 * (1.0 + ms).log2()).floor();
    if b >= 255.0 {
        255
    } else {
        b as u8
    }
}

/// One packet row: byte 0 is the time-delta byte, bytes 1..=350 the first 350
/// packet bytes, zero-padded.
#[derive(Clone, PartialEq, Eq)]
pub struct PacketVector {
    pub bytes: [u8; VECTOR_WIDTH],
    pub label: u8,
    pub valid: bool,
}

impl std::fmt::Debug for PacketVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PacketVector")
            .field("delta", &self.bytes[0])
            .field("head", &&self.bytes[1..17])
            .field("label", &self.label)
            .field("valid", &self.valid)
            .finish()
    }
}

impl PacketVector {
    pub fn padding() -> Self {
        PacketVector {
            bytes: [0; VECTOR_WIDTH],
            label: 0,
            valid: false,
        }
    }
}

pub fn encode_packet(pkt: &RawPacket, prev_ts_us: Option<u64>, label: u8) -> PacketVector {
    let mut bytes = [0u8; VECTOR_WIDTH];
    bytes[0] = prev_ts_us.map_or(0, |prev| encode_time_delta(pkt.ts_us.saturating_sub(prev)));
    let n = pkt.data.len().min(PACKET_BYTES);
    bytes[1..1 + n].copy_from_slice(&pkt.data[..n]);
    PacketVector {
        bytes,
        label,
        valid: true,
    }
}

/// Encodes a chronologically ordered capture; each packet's delta is taken
/// from its predecessor.
pub fn encode_capture(packets: &[RawPacket], labels: &[u8]) -> Vec<PacketVector> {
    assert_eq!(packets.len(), labels.len());
    packets
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (p, &l))| encode_packet(p, i.checked_sub(1).map(|j| packets[j].ts_us), l))
        .collect()
}

/// Identifies where a row came from. Padding rows use [`Provenance::PADDING`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub capture_id: u32,
    pub packet_index: u64,
}

impl Provenance {
    pub const PADDING: Provenance = Provenance {
        capture_id: u32::MAX,
        packet_index: u64::MAX,
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub rows: Vec<PacketVector>,
    pub provenance: Vec<Provenance>,
}

impl Window {
    pub fn origin(&self) -> Provenance {
        self.provenance[0]
    }

    pub fn valid_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.valid).count()
    }

    /// At least one valid attack row.
    pub fn is_infected(&self) -> bool {
        self.rows.iter().any(|r| r.valid && r.label == 1)
    }
}

/// Cuts the stream into consecutive non-overlapping windows of
/// [`WINDOW_ROWS`]; the last one is padded with invalid zero rows.
pub fn build_windows(vectors: &[PacketVector], provenance: &[Provenance]) -> Vec<Window> {
    assert_eq!(vectors.len(), provenance.len());
    vectors
        .chunks(WINDOW_ROWS)
        .zip(provenance.chunks(WINDOW_ROWS))
        .map(|(rows, prov)| {
            let mut rows = rows.to_vec();
            let mut prov = prov.to_vec();
            rows.resize(WINDOW_ROWS, PacketVector::padding());
            prov.resize(WINDOW_ROWS, Provenance::PADDING);
            Window {
                rows,
                provenance: prov,
            }
        })
        .collect()
}
