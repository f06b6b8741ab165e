//! PKW1: a flat little-endian container of labeled packet vectors.
//!
//! ```text
//! header (32 bytes)
//!   0  magic        "PKW1"
//!   4  version      u16 = 1
//!   6  flags        u16  bits 0-1 role (0 none, 1 train, 2 val, 3 test)
//!                        bit 2 window-aligned records
//!   8  width        u16 = 351
//!  10  count        u64
//!  18  reserved     14 zero bytes
//! record (365 bytes)
//!   0  label        u8
//!   1  valid        u8
//!   2  capture_id   u32
//!   6  packet_index u64
//!  14  bytes        [u8; 351]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DatasetPartition, Role};
use crate::error::{Error, Result};
use crate::window::{PacketVector, Provenance, VECTOR_WIDTH};

pub const CONTAINER_MAGIC: [u8; 4] = *b"PKW1";
pub const CONTAINER_VERSION: u16 = 1;
pub const CONTAINER_HEADER_LEN: usize = 32;
pub const CONTAINER_RECORD_LEN: usize = 2 + 4 + 8 + VECTOR_WIDTH;

const FLAG_WINDOW_ALIGNED: u16 = 0b100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub role: Role,
    pub window_aligned: bool,
    pub count: u64,
}

impl ContainerHeader {
    pub fn for_partition(p: &DatasetPartition) -> Self {
        ContainerHeader {
            role: p.role,
            window_aligned: p.window_aligned,
            count: p.len() as u64,
        }
    }

    pub fn to_bytes(&self) -> [u8; CONTAINER_HEADER_LEN] {
        let mut h = [0u8; CONTAINER_HEADER_LEN];
        h[0..4].copy_from_slice(&CONTAINER_MAGIC);
        h[4..6].copy_from_slice(&CONTAINER_VERSION.to_le_bytes());
        let flags = self.role.to_bits() | if self.window_aligned { FLAG_WINDOW_ALIGNED } else { 0 };
        h[6..8].copy_from_slice(&flags.to_le_bytes());
        h[8..10].copy_from_slice(&(VECTOR_WIDTH as u16).to_le_bytes());
        h[10..18].copy_from_slice(&self.count.to_le_bytes());
        h
    }

    pub fn parse(h: &[u8]) -> Result<Self> {
        let err = |offset: u64, reason: String| Error::Container { offset, reason };
        if h.len() < CONTAINER_HEADER_LEN {
            // report the first missing byte, unless the bytes present are already wrong
            if !CONTAINER_MAGIC.starts_with(&h[..h.len().min(4)]) {
                return Err(err(0, "bad magic".into()));
            }
            return Err(err(h.len() as u64, format!("truncated header ({} of 32 bytes)", h.len())));
        }
        if h[0..4] != CONTAINER_MAGIC {
            return Err(err(0, format!("bad magic {:02x?}", &h[0..4])));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != CONTAINER_VERSION {
            return Err(err(4, format!("unsupported version {version}")));
        }
        let flags = u16::from_le_bytes([h[6], h[7]]);
        if flags & !0b111 != 0 {
            return Err(err(6, format!("unknown flags 0x{flags:04x}")));
        }
        let width = u16::from_le_bytes([h[8], h[9]]);
        if usize::from(width) != VECTOR_WIDTH {
            return Err(err(8, format!("vector width {width}, expected {VECTOR_WIDTH}")));
        }
        Ok(ContainerHeader {
            role: Role::from_bits(flags),
            window_aligned: flags & FLAG_WINDOW_ALIGNED != 0,
            count: u64::from_le_bytes(h[10..18].try_into().unwrap()),
        })
    }
}

fn encode_record(v: &PacketVector, p: &Provenance, out: &mut [u8]) {
    out[0] = v.label;
    out[1] = u8::from(v.valid);
    out[2..6].copy_from_slice(&p.capture_id.to_le_bytes());
    out[6..14].copy_from_slice(&p.packet_index.to_le_bytes());
    out[14..].copy_from_slice(&v.bytes);
}

fn decode_record(r: &[u8], offset: u64) -> Result<(PacketVector, Provenance)> {
    if r[0] > 1 {
        return Err(Error::Container {
            offset,
            reason: format!("label byte {} is not 0 or 1", r[0]),
        });
    }
    if r[1] > 1 {
        return Err(Error::Container {
            offset: offset + 1,
            reason: format!("valid byte {} is not 0 or 1", r[1]),
        });
    }
    let mut bytes = [0u8; VECTOR_WIDTH];
    bytes.copy_from_slice(&r[14..]);
    Ok((
        PacketVector {
            bytes,
            label: r[0],
            valid: r[1] == 1,
        },
        Provenance {
            capture_id: u32::from_le_bytes(r[2..6].try_into().unwrap()),
            packet_index: u64::from_le_bytes(r[6..14].try_into().unwrap()),
        },
    ))
}

/// Streaming writer. The record count is fixed up front by the header;
/// [`ContainerWriter::finish`] checks it was honoured.
pub struct ContainerWriter<W: Write> {
    inner: W,
    declared: u64,
    written: u64,
    buf: [u8; CONTAINER_RECORD_LEN],
}

impl<W: Write> ContainerWriter<W> {
    pub fn new(mut inner: W, header: ContainerHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(ContainerWriter {
            inner,
            declared: header.count,
            written: 0,
            buf: [0; CONTAINER_RECORD_LEN],
        })
    }

    pub fn write(&mut self, v: &PacketVector, p: &Provenance) -> Result<()> {
        if self.written == self.declared {
            return Err(Error::Invariant(format!(
                "more records than the {} declared",
                self.declared
            )));
        }
        encode_record(v, p, &mut self.buf);
        self.inner.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.declared {
            return Err(Error::Invariant(format!(
                "wrote {} records, header declares {}",
                self.written, self.declared
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming reader yielding records in file order.
pub struct ContainerReader<R: Read> {
    inner: R,
    pub header: ContainerHeader,
    read: u64,
    buf: [u8; CONTAINER_RECORD_LEN],
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

impl<R: Read> ContainerReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut h = [0u8; CONTAINER_HEADER_LEN];
        let got = read_full(&mut inner, &mut h)?;
        let header = ContainerHeader::parse(&h[..got])?;
        Ok(ContainerReader {
            inner,
            header,
            read: 0,
            buf: [0; CONTAINER_RECORD_LEN],
        })
    }

    fn offset(&self) -> u64 {
        CONTAINER_HEADER_LEN as u64 + self.read * CONTAINER_RECORD_LEN as u64
    }

    pub fn next_record(&mut self) -> Result<Option<(PacketVector, Provenance)>> {
        let offset = self.offset();
        if self.read == self.header.count {
            let mut probe = [0u8; 1];
            if read_full(&mut self.inner, &mut probe)? != 0 {
                return Err(Error::Container {
                    offset,
                    reason: "trailing bytes after declared records".into(),
                });
            }
            return Ok(None);
        }
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got < CONTAINER_RECORD_LEN {
            return Err(Error::Container {
                offset,
                reason: format!(
                    "truncated record {} ({got} of {CONTAINER_RECORD_LEN} bytes)",
                    self.read
                ),
            });
        }
        let rec = decode_record(&self.buf, offset)?;
        self.read += 1;
        Ok(Some(rec))
    }
}

impl<R: Read> Iterator for ContainerReader<R> {
    type Item = Result<(PacketVector, Provenance)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

pub fn encode_container(p: &DatasetPartition) -> Vec<u8> {
    let mut out = Vec::with_capacity(CONTAINER_HEADER_LEN + p.len() * CONTAINER_RECORD_LEN);
    write_container_to(&mut out, p).expect("writing to a Vec cannot fail");
    out
}

pub fn write_container_to(w: impl Write, p: &DatasetPartition) -> Result<()> {
    let mut writer = ContainerWriter::new(w, ContainerHeader::for_partition(p))?;
    for (v, prov) in p.vectors.iter().zip(&p.provenance) {
        writer.write(v, prov)?;
    }
    writer.finish()?;
    Ok(())
}

pub fn read_container_from(r: impl Read) -> Result<DatasetPartition> {
    let mut reader = ContainerReader::new(r)?;
    let h = reader.header;
    let mut p = DatasetPartition::new(h.role, Vec::new(), Vec::new());
    p.window_aligned = h.window_aligned;
    while let Some((v, prov)) = reader.next_record()? {
        p.vectors.push(v);
        p.provenance.push(prov);
    }
    Ok(p)
}

pub fn decode_container(bytes: &[u8]) -> Result<DatasetPartition> {
    read_container_from(bytes)
}

pub fn write_container(path: impl AsRef<Path>, p: &DatasetPartition) -> Result<()> {
    write_container_to(BufWriter::new(File::create(path)?), p)
}

pub fn read_container(path: impl AsRef<Path>) -> Result<DatasetPartition> {
    read_container_from(BufReader::new(File::open(path)?))
}

/// Random access to records of a container file; `&self` reads use positional
/// I/O and may run from several threads at once.
#[cfg(unix)]
pub struct ContainerFile {
    file: File,
    pub header: ContainerHeader,
}

#[cfg(unix)]
impl ContainerFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut h = [0u8; CONTAINER_HEADER_LEN];
        let got = read_full(&mut file, &mut h)?;
        let header = ContainerHeader::parse(&h[..got])?;
        let expected = CONTAINER_HEADER_LEN as u64 + header.count * CONTAINER_RECORD_LEN as u64;
        let actual = file.metadata()?.len();
        if actual < expected {
            let complete = (actual - CONTAINER_HEADER_LEN as u64) / CONTAINER_RECORD_LEN as u64;
            return Err(Error::Container {
                offset: CONTAINER_HEADER_LEN as u64 + complete * CONTAINER_RECORD_LEN as u64,
                reason: format!("truncated record {complete}"),
            });
        }
        Ok(ContainerFile { file, header })
    }

    pub fn len(&self) -> u64 {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn get(&self, index: u64) -> Result<(PacketVector, Provenance)> {
        use std::os::unix::fs::FileExt;
        if index >= self.header.count {
            return Err(Error::InvalidArgument(format!(
                "record {index} out of range (count {})",
                self.header.count
            )));
        }
        let offset = CONTAINER_HEADER_LEN as u64 + index * CONTAINER_RECORD_LEN as u64;
        let mut buf = [0u8; CONTAINER_RECORD_LEN];
        self.file.read_exact_at(&mut buf, offset)?;
        decode_record(&buf, offset)
    }
}
