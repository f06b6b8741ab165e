use std::collections::HashSet;
use std::hash::Hash;
use std::io::Write;
use std::net::Ipv4Addr;

use indexmap::IndexMap;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;

pub type MacAddr = [u8; 6];

/// Injective original→replacement table that remembers insertion order.
#[derive(Debug, Clone)]
pub struct Injection<T> {
    forward: IndexMap<T, T>,
    used: HashSet<T>,
}

impl<T: Copy + Eq + Hash> Default for Injection<T> {
    fn default() -> Self {
        Injection {
            forward: IndexMap::new(),
            used: HashSet::new(),
        }
    }
}

impl<T: Copy + Eq + Hash> Injection<T> {
    fn get_or_draw(&mut self, original: T, mut draw: impl FnMut() -> T) -> T {
        if let Some(&r) = self.forward.get(&original) {
            return r;
        }
        let replacement = loop {
            let candidate = draw();
            if self.used.insert(candidate) {
                break candidate;
            }
        };
        self.forward.insert(original, replacement);
        replacement
    }

    pub fn get(&self, original: &T) -> Option<T> {
        self.forward.get(original).copied()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Pairs in first-seen order.
    pub fn iter(&self) -> impl Iterator<Item = (&T, &T)> {
        self.forward.iter()
    }
}

/// Capture-wide consistent replacement of MAC addresses, IPv4 addresses and
/// ports. The first occurrence of a value draws a fresh replacement from a
/// ChaCha20 stream seeded with `seed`; later occurrences reuse it.
#[derive(Debug, Clone)]
pub struct ReplacementMap {
    pub seed: u64,
    pub mac: Injection<MacAddr>,
    pub ip: Injection<Ipv4Addr>,
    pub port: Injection<u16>,
    rng: ChaCha20Rng,
}

impl ReplacementMap {
    pub fn new(seed: u64) -> Self {
        ReplacementMap {
            seed,
            mac: Injection::default(),
            ip: Injection::default(),
            port: Injection::default(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Replacement MACs are always locally administered unicast.
    pub fn map_mac(&mut self, original: MacAddr) -> MacAddr {
        let rng = &mut self.rng;
        self.mac.get_or_draw(original, || {
            let v = rng.next_u64().to_be_bytes();
            let mut m = [v[2], v[3], v[4], v[5], v[6], v[7]];
            m[0] = (m[0] & 0xfc) | 0x02;
            m
        })
    }

    pub fn map_ip(&mut self, original: Ipv4Addr) -> Ipv4Addr {
        let rng = &mut self.rng;
        self.ip.get_or_draw(original, || loop {
            let v = rng.next_u32();
            if v != 0 && v != u32::MAX {
                return Ipv4Addr::from(v);
            }
        })
    }

    pub fn map_port(&mut self, original: u16) -> u16 {
        let rng = &mut self.rng;
        self.port.get_or_draw(original, || loop {
            let v = (rng.next_u32() >> 16) as u16;
            if v != 0 {
                return v;
            }
        })
    }

    /// Audit export: `kind,original,replacement` rows in first-seen order.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "original", "replacement"])?;
        let mac = |m: &MacAddr| {
            m.iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(":")
        };
        for (o, r) in self.mac.iter() {
            w.write_record(["mac", &mac(o), &mac(r)])?;
        }
        for (o, r) in self.ip.iter() {
            w.write_record(["ip", &o.to_string(), &r.to_string()])?;
        }
        for (o, r) in self.port.iter() {
            w.write_record(["port", &o.to_string(), &r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
