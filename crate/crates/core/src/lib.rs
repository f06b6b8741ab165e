//! Raw-packet network intrusion detection.
//!
//! The pipeline turns packet captures into per-packet labeled, anonymized
//! windows of 150 packets × 351 bytes and trains compact classifiers that
//! label every packet of a window as attack or benign:
//!
//! 1. [`ingest`]: read pcap files, drop malformed records, order by time, parse headers.
//! 2. [`flow`]: assemble bidirectional flows and label packets from an attack schedule.
//! 3. [`anonymize`]: consistent random replacement of MAC/IP/port, checksum repair.
//! 4. [`window`]: 351-byte packet vectors and 150-row windows.
//! 5. [`dataset`]: seeded group split, oversampling, and the PKW1 container.
//! 6. [`nn`]: tensors, layers with reverse-mode gradients, losses, Adam, training.
//! 7. [`eval`]: confusion matrices, metrics, and gradient saliency maps.

pub mod anonymize;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod flow;
pub mod ingest;
pub mod nn;
pub mod synth;
pub mod window;

pub use error::{Error, Result};
