use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::StorageError;
use crate::hwmodel::{round_half_up, SsdCosts};

const CHUNK: u64 = 64 * 1024;

#[derive(Debug)]
enum Backing {
    /// Sparse: chunks appear on first write; unwritten bytes read as zero.
    Memory(BTreeMap<u64, Box<[u8]>>),
    File(File),
}

/// Byte-addressed device with per-lane timing. Contents are real; timing
/// comes from [`EmulatedSsd::service`].
#[derive(Debug)]
pub struct EmulatedSsd {
    costs: SsdCosts,
    backing: Backing,
    lanes: Vec<u64>,
    failures: Vec<(u64, u64)>,
}

impl EmulatedSsd {
    pub fn in_memory(costs: &SsdCosts) -> Self {
        Self::with_backing(costs, Backing::Memory(BTreeMap::new()))
    }

    /// Persists contents in a single file of `capacity_bytes`, created if
    /// missing.
    pub fn file_backed(costs: &SsdCosts, path: &Path) -> Result<Self, StorageError> {
        let io = |e: std::io::Error| StorageError::Io(format!("{}: {e}", path.display()));
        let file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io)?;
        if file.metadata().map_err(io)?.len() < costs.capacity_bytes {
            file.set_len(costs.capacity_bytes).map_err(io)?;
        }
        Ok(Self::with_backing(costs, Backing::File(file)))
    }

    fn with_backing(costs: &SsdCosts, backing: Backing) -> Self {
        EmulatedSsd { costs: costs.clone(), backing, lanes: vec![0; costs.lanes as usize], failures: Vec::new() }
    }

    pub fn capacity(&self) -> u64 {
        self.costs.capacity_bytes
    }

    /// Every later access overlapping `[offset, offset + len)` fails.
    pub fn inject_failure(&mut self, offset: u64, len: u64) {
        self.failures.push((offset, offset + len));
    }

    fn check(&self, offset: u64, len: u64) -> Result<(), StorageError> {
        let end = offset + len;
        if end > self.capacity() {
            return Err(StorageError::OutOfRange { offset, len, file_len: self.capacity() });
        }
        match self.failures.iter().find(|(lo, hi)| offset < *hi && *lo < end) {
            Some((lo, _)) => Err(StorageError::SsdFailure((*lo).max(offset))),
            None => Ok(()),
        }
    }

    pub fn read(&mut self, offset: u64, len: u64) -> Result<Vec<u8>, StorageError> {
        self.check(offset, len)?;
        let mut out = vec![0u8; len as usize];
        match &mut self.backing {
            Backing::Memory(chunks) => {
                let mut pos = offset;
                while pos < offset + len {
                    let (idx, within) = (pos / CHUNK, pos % CHUNK);
                    let n = (CHUNK - within).min(offset + len - pos);
                    if let Some(chunk) = chunks.get(&idx) {
                        let dst = (pos - offset) as usize;
                        out[dst..dst + n as usize].copy_from_slice(&chunk[within as usize..(within + n) as usize]);
                    }
                    pos += n;
                }
            }
            Backing::File(f) => {
                f.seek(SeekFrom::Start(offset)).and_then(|_| f.read_exact(&mut out)).map_err(|e| StorageError::Io(e.to_string()))?;
            }
        }
        Ok(out)
    }

    pub fn write(&mut self, offset: u64, data: &[u8]) -> Result<(), StorageError> {
        self.check(offset, data.len() as u64)?;
        match &mut self.backing {
            Backing::Memory(chunks) => {
                let mut pos = offset;
                let end = offset + data.len() as u64;
                while pos < end {
                    let (idx, within) = (pos / CHUNK, pos % CHUNK);
                    let n = (CHUNK - within).min(end - pos);
                    let chunk = chunks.entry(idx).or_insert_with(|| vec![0; CHUNK as usize].into_boxed_slice());
                    let src = (pos - offset) as usize;
                    chunk[within as usize..(within + n) as usize].copy_from_slice(&data[src..src + n as usize]);
                    pos += n;
                }
            }
            Backing::File(f) => {
                f.seek(SeekFrom::Start(offset)).and_then(|_| f.write_all(data)).map_err(|e| StorageError::Io(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Media time for one access on the earliest-free lane; returns the
    /// finish time.
    pub fn service(&mut self, at: u64, write: bool, len: u64) -> u64 {
        let (lat, bw) = if write {
            (self.costs.write_lat_ns, self.costs.write_bw_bps)
        } else {
            (self.costs.read_lat_ns, self.costs.read_bw_bps)
        };
        let (i, _) = self.lanes.iter().enumerate().min_by_key(|(i, t)| (**t, *i)).expect("lanes >= 1");
        let start = at.max(self.lanes[i]);
        let finish = start + lat + round_half_up(len as f64 * 1e9 / bw as f64);
        self.lanes[i] = finish;
        finish
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwmodel::CostDefaults;

    fn costs() -> SsdCosts {
        CostDefaults::builtin().ssd
    }

    #[test]
    fn read_back_across_chunks() {
        let mut ssd = EmulatedSsd::in_memory(&costs());
        let data: Vec<u8> = (0..200_000u32).map(|i| (i % 251) as u8).collect();
        ssd.write(CHUNK - 100, &data).unwrap();
        assert_eq!(ssd.read(CHUNK - 100, data.len() as u64).unwrap(), data);
        assert_eq!(ssd.read(0, 10).unwrap(), vec![0; 10]);
    }

    #[test]
    fn injected_failure() {
        let mut ssd = EmulatedSsd::in_memory(&costs());
        ssd.inject_failure(4096, 10);
        assert_eq!(ssd.read(4000, 200), Err(StorageError::SsdFailure(4096)));
        assert!(ssd.read(0, 4096).is_ok());
    }

    #[test]
    fn file_backed_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ssd.img");
        let mut c = costs();
        c.capacity_bytes = 1 << 20;
        {
            let mut ssd = EmulatedSsd::file_backed(&c, &path).unwrap();
            ssd.write(8192, b"persisted").unwrap();
        }
        let mut ssd = EmulatedSsd::file_backed(&c, &path).unwrap();
        assert_eq!(ssd.read(8192, 9).unwrap(), b"persisted");
    }

    #[test]
    fn lanes_run_in_parallel() {
        let mut c = costs();
        c.lanes = 2;
        let mut ssd = EmulatedSsd::in_memory(&c);
        let one = ssd.service(0, false, 7000);
        assert_eq!(one, c.read_lat_ns + 1000);
        assert_eq!(ssd.service(0, false, 7000), one);
        assert_eq!(ssd.service(0, false, 7000), 2 * one);
    }
}
