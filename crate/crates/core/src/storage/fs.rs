//! File mapping: file id to byte-exact SSD extents, allocated first-fit.

use std::collections::BTreeMap;

use crate::error::StorageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub ssd_offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub extents: Vec<Extent>,
    pub len: u64,
}

#[derive(Debug, Clone)]
pub struct FileSystem {
    capacity: u64,
    /// Free space keyed by start offset; adjacent runs are always merged.
    free: BTreeMap<u64, u64>,
    files: BTreeMap<u64, FileEntry>,
}

impl FileSystem {
    pub fn new(capacity: u64) -> Self {
        let mut free = BTreeMap::new();
        if capacity > 0 {
            free.insert(0, capacity);
        }
        FileSystem { capacity, free, files: BTreeMap::new() }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn free_bytes(&self) -> u64 {
        self.free.values().sum()
    }

    pub fn files(&self) -> impl Iterator<Item = (u64, &FileEntry)> {
        self.files.iter().map(|(id, e)| (*id, e))
    }

    pub fn entry(&self, file_id: u64) -> Result<&FileEntry, StorageError> {
        self.files.get(&file_id).ok_or(StorageError::UnknownFile(file_id))
    }

    /// Allocates `len` bytes from the lowest-addressed free runs. A file may
    /// span several runs when space is fragmented.
    pub fn create(&mut self, file_id: u64, len: u64) -> Result<&FileEntry, StorageError> {
        if self.files.contains_key(&file_id) {
            return Err(StorageError::FileExists(file_id));
        }
        let free = self.free_bytes();
        if len > free {
            return Err(StorageError::OutOfSpace { requested: len, free });
        }
        let mut extents = Vec::new();
        let mut need = len;
        while need > 0 {
            let (&start, &run) = self.free.iter().next().expect("free space accounted above");
            self.free.remove(&start);
            let take = run.min(need);
            if take < run {
                self.free.insert(start + take, run - take);
            }
            extents.push(Extent { ssd_offset: start, len: take });
            need -= take;
        }
        Ok(self.files.entry(file_id).or_insert(FileEntry { extents, len }))
    }

    pub fn delete(&mut self, file_id: u64) -> Result<(), StorageError> {
        let entry = self.files.remove(&file_id).ok_or(StorageError::UnknownFile(file_id))?;
        for e in entry.extents {
            self.release(e);
        }
        Ok(())
    }

    fn release(&mut self, e: Extent) {
        let mut start = e.ssd_offset;
        let mut len = e.len;
        if let Some((&ps, &pl)) = self.free.range(..start).next_back() {
            if ps + pl == start {
                self.free.remove(&ps);
                start = ps;
                len += pl;
            }
        }
        if let Some(&nl) = self.free.get(&(start + len)) {
            self.free.remove(&(start + len));
            len += nl;
        }
        self.free.insert(start, len);
    }

    /// Ordered SSD ranges covering `[offset, offset + len)` of the file.
    pub fn lookup(&self, file_id: u64, offset: u64, len: u64) -> Result<Vec<Extent>, StorageError> {
        let entry = self.entry(file_id)?;
        if len == 0 {
            return Err(StorageError::ZeroLength);
        }
        if offset.checked_add(len).is_none_or(|end| end > entry.len) {
            return Err(StorageError::OutOfRange { offset, len, file_len: entry.len });
        }
        let mut cover = Vec::new();
        let mut pos = 0u64;
        let end = offset + len;
        for e in &entry.extents {
            let (lo, hi) = (pos.max(offset), (pos + e.len).min(end));
            if lo < hi {
                cover.push(Extent { ssd_offset: e.ssd_offset + (lo - pos), len: hi - lo });
            }
            pos += e.len;
            if pos >= end {
                break;
            }
        }
        Ok(cover)
    }
}
