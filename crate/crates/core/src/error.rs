use thiserror::Error;

use crate::hwmodel::UnitClass;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown profile `{0}` (not built in and no such file)")]
    UnknownProfile(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{class} index {index} out of range (profile has {count})")]
    UnitIndex { class: UnitClass, index: u32, count: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("cannot schedule at {at} ns, clock is already at {now} ns")]
    InPast { at: u64, now: u64 },
    #[error("cannot skip to {at} ns past a pending event at {pending} ns")]
    PendingBefore { at: u64, pending: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("corrupt compressed stream: {0}")]
    CorruptStream(String),
    #[error("key must be 32 bytes, got {0}")]
    KeyLength(usize),
    #[error("unsupported pattern: {0}")]
    UnsupportedPattern(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("{0} over an empty batch is undefined")]
    EmptyAggregate(&'static str),
    #[error("row batch is malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("channel {0} is closed")]
    Closed(u32),
    #[error("unknown channel {0}")]
    UnknownChannel(u32),
    #[error("submission ring full; retry later")]
    Backpressure,
    #[error("send payload must be nonempty")]
    EmptySend,
    #[error("access [{offset}, {offset}+{len}) outside region of {region_len} bytes")]
    OutOfBounds { offset: u64, len: u64, region_len: u64 },
    #[error("unknown memory region {0}")]
    UnknownRegion(u64),
    #[error("peer has no posted receive and its send queue is full")]
    RecvNotPosted,
    #[error("malformed frame: {0}")]
    BadFrame(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("no space for {requested} bytes ({free} free)")]
    OutOfSpace { requested: u64, free: u64 },
    #[error("unknown file {0}")]
    UnknownFile(u64),
    #[error("file {0} already exists")]
    FileExists(u64),
    #[error("range [{offset}, {offset}+{len}) outside file of {file_len} bytes")]
    OutOfRange { offset: u64, len: u64, file_len: u64 },
    #[error("zero-length file operation")]
    ZeroLength,
    #[error("storage request payload too short: {0} bytes")]
    ShortPayload(usize),
    #[error("bad io type tag {0}")]
    BadIoType(u8),
    #[error("write payload length {got} does not match header length {expected}")]
    PayloadLength { expected: u32, got: usize },
    #[error("injected ssd failure at offset {0}")]
    SsdFailure(u64),
    #[error("backing store i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("shared-state keys must be nonempty")]
    EmptyKey,
    #[error("write of {needed} bytes exceeds the shared-state budget ({available} available)")]
    OverBudget { needed: u64, available: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("unknown sproc `{0}`")]
    UnknownSproc(String),
    #[error("sproc `{0}` already registered")]
    DuplicateSproc(String),
    #[error("kernel call refused: no free accelerator slot")]
    Refused,
    #[error("event loop stalled with {0} unfinished activities")]
    Stalled(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
