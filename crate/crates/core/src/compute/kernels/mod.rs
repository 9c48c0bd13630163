//! Functional reference implementations of every DP kernel. Output bytes
//! depend only on the input, never on where the kernel is placed.

pub mod cipher;
pub mod dedup;
pub mod deflate;
pub mod regex;
pub mod relational;

use super::KernelKind;
use crate::error::KernelError;
use regex::Match;
use relational::{AggFn, Predicate, RowBatch};

/// A kernel invocation's input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelOp {
    Compress(Vec<u8>),
    Decompress(Vec<u8>),
    Encrypt { data: Vec<u8>, key: Vec<u8> },
    Decrypt { data: Vec<u8>, key: Vec<u8> },
    RegexMatch { data: Vec<u8>, pattern: String },
    Filter { rows: RowBatch, predicate: Predicate },
    Aggregate { rows: RowBatch, func: AggFn, column: String },
    Dedup(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelOutput {
    Bytes(Vec<u8>),
    Matches(Vec<Match>),
    Rows(RowBatch),
    Scalar(i64),
}

impl KernelOutput {
    pub fn into_bytes(self) -> Option<Vec<u8>> {
        match self {
            KernelOutput::Bytes(b) => Some(b),
            _ => None,
        }
    }
}

impl KernelOp {
    pub fn kind(&self) -> KernelKind {
        match self {
            KernelOp::Compress(_) => KernelKind::Compress,
            KernelOp::Decompress(_) => KernelKind::Decompress,
            KernelOp::Encrypt { .. } => KernelKind::Encrypt,
            KernelOp::Decrypt { .. } => KernelKind::Decrypt,
            KernelOp::RegexMatch { .. } => KernelKind::RegexMatch,
            KernelOp::Filter { .. } => KernelKind::Filter,
            KernelOp::Aggregate { .. } => KernelKind::Aggregate,
            KernelOp::Dedup(_) => KernelKind::Dedup,
        }
    }

    /// Input size the cost model charges for.
    pub fn cost_bytes(&self) -> u64 {
        match self {
            KernelOp::Compress(d) | KernelOp::Decompress(d) | KernelOp::Dedup(d) => d.len() as u64,
            KernelOp::Encrypt { data, .. } | KernelOp::Decrypt { data, .. } | KernelOp::RegexMatch { data, .. } => {
                data.len() as u64
            }
            KernelOp::Filter { rows, .. } | KernelOp::Aggregate { rows, .. } => rows.cost_bytes(),
        }
    }

    /// Parameter checks that reject a call before any unit is charged.
    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            KernelOp::Encrypt { key, .. } | KernelOp::Decrypt { key, .. } if key.len() != cipher::KEY_LEN => {
                Err(KernelError::KeyLength(key.len()))
            }
            KernelOp::RegexMatch { pattern, .. } => regex::Regex::new(pattern).map(|_| ()),
            KernelOp::Filter { rows, predicate } => relational::check_predicate(predicate, &rows.schema),
            KernelOp::Aggregate { rows, column, .. } => rows.schema.index_of(column).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn execute(&self) -> Result<KernelOutput, KernelError> {
        Ok(match self {
            KernelOp::Compress(d) => KernelOutput::Bytes(deflate::compress(d)),
            KernelOp::Decompress(d) => KernelOutput::Bytes(deflate::decompress(d)?),
            KernelOp::Encrypt { data, key } => KernelOutput::Bytes(cipher::encrypt(data, key)?),
            KernelOp::Decrypt { data, key } => KernelOutput::Bytes(cipher::decrypt(data, key)?),
            KernelOp::RegexMatch { data, pattern } => KernelOutput::Matches(regex::regex_match(data, pattern)?),
            KernelOp::Filter { rows, predicate } => KernelOutput::Rows(relational::filter(rows, predicate)?),
            KernelOp::Aggregate { rows, func, column } => KernelOutput::Scalar(relational::aggregate(rows, *func, column)?),
            KernelOp::Dedup(d) => KernelOutput::Bytes(dedup::dedup(d)),
        })
    }
}
