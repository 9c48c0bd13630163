//! 20-byte little-endian frame header and message framing.

use crate::error::NetError;

pub const MAGIC: [u8; 4] = *b"DPDP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgType {
    Data = 0,
    StorageReq = 1,
    StorageResp = 2,
    Rdma = 3,
}

impl TryFrom<u8> for MsgType {
    type Error = NetError;

    fn try_from(v: u8) -> Result<Self, NetError> {
        Ok(match v {
            0 => MsgType::Data,
            1 => MsgType::StorageReq,
            2 => MsgType::StorageResp,
            3 => MsgType::Rdma,
            t => return Err(NetError::BadFrame(format!("message type {t}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub msg_type: MsgType,
    pub tenant: u8,
    pub conn_id: u32,
    pub seq: u32,
    pub payload_len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(msg_type: MsgType, tenant: u8, conn_id: u32, seq: u32, payload: Vec<u8>) -> Self {
        let payload_len = u32::try_from(payload.len()).expect("payload exceeds u32");
        Message { header: Header { msg_type, tenant, conn_id, seq, payload_len }, payload }
    }

    pub fn wire_len(&self) -> u64 {
        (HEADER_LEN + self.payload.len()) as u64
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(h.msg_type as u8);
        out.push(h.tenant);
        out.push(0);
        out.extend_from_slice(&h.conn_id.to_le_bytes());
        out.extend_from_slice(&h.seq.to_le_bytes());
        out.extend_from_slice(&h.payload_len.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(frame: &[u8]) -> Result<Message, NetError> {
        if frame.len() < HEADER_LEN {
            return Err(NetError::BadFrame(format!("{} bytes is shorter than a header", frame.len())));
        }
        if frame[..4] != MAGIC {
            return Err(NetError::BadFrame("bad magic".into()));
        }
        if frame[4] != VERSION {
            return Err(NetError::BadFrame(format!("version {}", frame[4])));
        }
        let u32_at = |i: usize| u32::from_le_bytes(frame[i..i + 4].try_into().unwrap());
        let header = Header {
            msg_type: MsgType::try_from(frame[5])?,
            tenant: frame[6],
            conn_id: u32_at(8),
            seq: u32_at(12),
            payload_len: u32_at(16),
        };
        let payload = &frame[HEADER_LEN..];
        if payload.len() != header.payload_len as usize {
            return Err(NetError::BadFrame(format!(
                "payload_len {} but {} bytes follow",
                header.payload_len,
                payload.len()
            )));
        }
        Ok(Message { header, payload: payload.to_vec() })
    }
}
