//! Capture ingest: pcap reading with light sanitization, chronological
//! ordering, and header parsing.

mod headers;
mod pcap;

pub use headers::*;
pub use pcap::*;
