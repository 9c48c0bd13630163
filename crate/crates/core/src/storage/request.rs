//! Storage request/response payload codec (little-endian).
//!
//! Request: io_type u8 (0 read, 1 write), file_id u64, offset u64, len u32,
//! then `len` data bytes for writes only. Response: status u8 (0 ok, 1 err),
//! then the read data, or the error text.

use crate::error::StorageError;

pub const REQUEST_HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IoType {
    Read = 0,
    Write = 1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileOp {
    pub io_type: IoType,
    pub file_id: u64,
    pub offset: u64,
    pub len: u32,
    /// Write data; empty for reads.
    pub data: Vec<u8>,
}

impl FileOp {
    pub fn read(file_id: u64, offset: u64, len: u32) -> Self {
        FileOp { io_type: IoType::Read, file_id, offset, len, data: Vec::new() }
    }

    pub fn write(file_id: u64, offset: u64, data: Vec<u8>) -> Self {
        let len = u32::try_from(data.len()).expect("write larger than u32");
        FileOp { io_type: IoType::Write, file_id, offset, len, data }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(REQUEST_HEADER_LEN + self.data.len());
        out.push(self.io_type as u8);
        out.extend_from_slice(&self.file_id.to_le_bytes());
        out.extend_from_slice(&self.offset.to_le_bytes());
        out.extend_from_slice(&self.len.to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }
}

pub fn parse_storage_request(payload: &[u8]) -> Result<FileOp, StorageError> {
    if payload.len() < REQUEST_HEADER_LEN {
        return Err(StorageError::ShortPayload(payload.len()));
    }
    let io_type = match payload[0] {
        0 => IoType::Read,
        1 => IoType::Write,
        t => return Err(StorageError::BadIoType(t)),
    };
    let file_id = u64::from_le_bytes(payload[1..9].try_into().unwrap());
    let offset = u64::from_le_bytes(payload[9..17].try_into().unwrap());
    let len = u32::from_le_bytes(payload[17..21].try_into().unwrap());
    if len == 0 {
        return Err(StorageError::ZeroLength);
    }
    let data = &payload[REQUEST_HEADER_LEN..];
    let expected = match io_type {
        IoType::Read => 0,
        IoType::Write => len,
    };
    if data.len() != expected as usize {
        return Err(StorageError::PayloadLength { expected, got: data.len() });
    }
    Ok(FileOp { io_type, file_id, offset, len, data: data.to_vec() })
}

pub fn encode_response(result: &Result<Vec<u8>, StorageError>) -> Vec<u8> {
    match result {
        Ok(data) => {
            let mut out = Vec::with_capacity(1 + data.len());
            out.push(0);
            out.extend_from_slice(data);
            out
        }
        Err(e) => {
            let mut out = vec![1];
            out.extend_from_slice(e.to_string().as_bytes());
            out
        }
    }
}

/// Splits a response into its status and body.
pub fn decode_response(payload: &[u8]) -> Result<(bool, &[u8]), StorageError> {
    match payload.first() {
        Some(0) => Ok((true, &payload[1..])),
        Some(1) => Ok((false, &payload[1..])),
        Some(t) => Err(StorageError::BadIoType(*t)),
        None => Err(StorageError::ShortPayload(0)),
    }
}
