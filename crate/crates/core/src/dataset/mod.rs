//! Dataset partitions: group split, oversampling, and the PKW1 container.

mod container;
mod oversample;
mod rng;
mod split;

pub use container::*;
pub use oversample::*;
pub use rng::*;
pub use split::*;

use crate::window::{build_windows, PacketVector, Provenance, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Unspecified,
    Train,
    Val,
    Test,
}

impl Role {
    fn to_bits(self) -> u16 {
        match self {
            Role::Unspecified => 0,
            Role::Train => 1,
            Role::Val => 2,
            Role::Test => 3,
        }
    }

    fn from_bits(bits: u16) -> Self {
        match bits & 0b11 {
            1 => Role::Train,
            2 => Role::Val,
            3 => Role::Test,
            _ => Role::Unspecified,
        }
    }
}

/// Ordered packet vectors with their provenance (parallel vectors).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPartition {
    pub role: Role,
    pub vectors: Vec<PacketVector>,
    pub provenance: Vec<Provenance>,
    /// Records are whole windows: a multiple of 150 rows where each chunk of
    /// 150 is one window (set by window-level oversampling).
    pub window_aligned: bool,
}

impl DatasetPartition {
    pub fn new(role: Role, vectors: Vec<PacketVector>, provenance: Vec<Provenance>) -> Self {
        assert_eq!(vectors.len(), provenance.len());
        DatasetPartition {
            role,
            vectors,
            provenance,
            window_aligned: false,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn windows(&self) -> Vec<Window> {
        build_windows(&self.vectors, &self.provenance)
    }

    pub fn from_windows(role: Role, windows: &[Window]) -> Self {
        let mut p = DatasetPartition::new(
            role,
            windows.iter().flat_map(|w| w.rows.iter().cloned()).collect(),
            windows.iter().flat_map(|w| w.provenance.iter().copied()).collect(),
        );
        p.window_aligned = true;
        p
    }

    /// (benign, attack) counts over valid vectors.
    pub fn class_counts(&self) -> (usize, usize) {
        self.vectors
            .iter()
            .filter(|v| v.valid)
            .fold((0, 0), |(b, a), v| if v.label == 1 { (b, a + 1) } else { (b + 1, a) })
    }
}
