use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The closed catalog of DP kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Compress,
    Decompress,
    Encrypt,
    Decrypt,
    RegexMatch,
    Filter,
    Aggregate,
    Dedup,
}

impl KernelKind {
    pub const ALL: [KernelKind; 8] = [
        KernelKind::Compress,
        KernelKind::Decompress,
        KernelKind::Encrypt,
        KernelKind::Decrypt,
        KernelKind::RegexMatch,
        KernelKind::Filter,
        KernelKind::Aggregate,
        KernelKind::Dedup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Compress => "compress",
            KernelKind::Decompress => "decompress",
            KernelKind::Encrypt => "encrypt",
            KernelKind::Decrypt => "decrypt",
            KernelKind::RegexMatch => "regex_match",
            KernelKind::Filter => "filter",
            KernelKind::Aggregate => "aggregate",
            KernelKind::Dedup => "dedup",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kernel kind `{s}`"))
    }
}
