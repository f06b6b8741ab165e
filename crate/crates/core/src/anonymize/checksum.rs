//! RFC 1071 Internet checksum and the IPv4 / TCP / UDP variants.

use std::net::Ipv4Addr;

use crate::error::{Error, Result};

/// Folded ones-complement sum of big-endian 16-bit words (not complemented).
/// An odd trailing byte is padded with zero.
pub fn ones_complement_sum(initial: u16, bytes: &[u8]) -> u16 {
    let mut sum = u32::from(initial);
    let mut chunks = bytes.chunks_exact(2);
    for w in &mut chunks {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
        // fold eagerly so the accumulator never overflows
        if sum > 0xffff {
            sum = (sum & 0xffff) + (sum >> 16);
        }
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum as u16
}

/// Checksum of an IPv4 header whose checksum field is zero.
pub fn ipv4_header_checksum(header: &[u8]) -> Result<u16> {
    if header.len() < 20 {
        return Err(Error::InvalidArgument(format!(
            "IPv4 header is {} bytes, need at least 20",
            header.len()
        )));
    }
    Ok(!ones_complement_sum(0, header))
}

pub fn pseudo_header_sum(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, transport_len: u16) -> u16 {
    let mut ph = [0u8; 12];
    ph[0..4].copy_from_slice(&src.octets());
    ph[4..8].copy_from_slice(&dst.octets());
    ph[9] = protocol;
    ph[10..12].copy_from_slice(&transport_len.to_be_bytes());
    ones_complement_sum(0, &ph)
}

/// TCP or UDP checksum over pseudo-header plus `segment` (checksum field zeroed).
/// A UDP result of zero is transmitted as 0xFFFF.
pub fn transport_segment_checksum(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8, segment: &[u8]) -> u16 {
    let ph = pseudo_header_sum(src, dst, protocol, segment.len() as u16);
    let csum = !ones_complement_sum(ph, segment);
    if protocol == 17 && csum == 0 {
        0xffff
    } else {
        csum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_header() {
        assert_eq!(ipv4_header_checksum(&[0u8; 20]).unwrap(), 0xffff);
    }

    #[test]
    fn reference_header() {
        let h = [
            0x45, 0x00, 0x00, 0x3c, 0x1c, 0x46, 0x40, 0x00, 0x40, 0x06, 0x00, 0x00, 0xac, 0x10,
            0x0a, 0x63, 0xac, 0x10, 0x0a, 0x0c,
        ];
        assert_eq!(ipv4_header_checksum(&h).unwrap(), 0xb1e6);
        let mut filled = h;
        filled[10..12].copy_from_slice(&0xb1e6u16.to_be_bytes());
        assert_eq!(ones_complement_sum(0, &filled), 0xffff);
    }

    #[test]
    fn short_header_rejected() {
        assert!(ipv4_header_checksum(&[0x45; 19]).is_err());
    }

    #[test]
    fn odd_length_pads_with_zero() {
        assert_eq!(ones_complement_sum(0, &[0x12, 0x34, 0x56]), ones_complement_sum(0, &[0x12, 0x34, 0x56, 0x00]));
    }

    #[test]
    fn udp_zero_becomes_ffff() {
        // Pick a segment whose ones-complement sum with the pseudo-header is 0xFFFF.
        let src = Ipv4Addr::new(0, 0, 0, 0);
        let dst = Ipv4Addr::new(0, 0, 0, 0);
        let ph = pseudo_header_sum(src, dst, 17, 10);
        let filler = !ph; // ph + filler == 0xFFFF
        let mut seg = [0u8; 10];
        seg[8..10].copy_from_slice(&filler.to_be_bytes());
        // first 8 bytes (header) are zero so the length field contributes nothing extra
        assert_eq!(!ones_complement_sum(ph, &seg), 0);
        assert_eq!(transport_segment_checksum(src, dst, 17, &seg), 0xffff);
        // TCP keeps a computed zero.
        let filler = !pseudo_header_sum(src, dst, 6, 10);
        seg[8..10].copy_from_slice(&filler.to_be_bytes());
        assert_eq!(transport_segment_checksum(src, dst, 6, &seg), 0x0000);
    }
}
