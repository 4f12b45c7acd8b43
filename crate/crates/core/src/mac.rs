//! Satellite media-access comparison data and the slotted ALOHA curve.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ordinal {
    Low,
    Medium,
    High,
    Poor,
    Variable,
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordinal::Low => "Low",
            Ordinal::Medium => "Medium",
            Ordinal::High => "High",
            Ordinal::Poor => "Poor",
            Ordinal::Variable => "Variable",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacProtocolRecord {
    pub name: &'static str,
    pub efficiency_range: (f64, f64),
    pub delay: Ordinal,
    pub stability: Ordinal,
    pub robustness: Ordinal,
    pub complexity: Ordinal,
}

use Ordinal::*;

pub const MAC_TABLE: [MacProtocolRecord; 4] = [
    MacProtocolRecord {
        name: "S-ALOHA",
        efficiency_range: (0.37, 0.37),
        delay: Low,
        stability: Low,
        robustness: High,
        complexity: Low,
    },
    MacProtocolRecord {
        name: "Tree CRA",
        efficiency_range: (0.43, 0.49),
        delay: Medium,
        stability: Medium,
        robustness: Poor,
        complexity: Medium,
    },
    MacProtocolRecord {
        name: "DAMA",
        efficiency_range: (0.6, 0.8),
        delay: High,
        stability: High,
        robustness: High,
        complexity: Medium,
    },
    MacProtocolRecord {
        name: "Hybrid",
        efficiency_range: (0.6, 0.8),
        delay: Variable,
        stability: Medium,
        robustness: High,
        complexity: Medium,
    },
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown media access protocol '{0}'")]
pub struct UnknownProtocol(pub String);

/// Case-insensitive lookup by protocol name.
pub fn table_lookup(name: &str) -> Result<&'static MacProtocolRecord, UnknownProtocol> {
    MAC_TABLE
        .iter()
        .find(|r| r.name.eq_ignore_ascii_case(name.trim()))
        .ok_or_else(|| UnknownProtocol(name.to_string()))
}

/// Slotted ALOHA throughput `S = G e^-G` at offered load `G`.
pub fn slotted_aloha_throughput(offered_load: f64) -> f64 {
    assert!(offered_load >= 0.0, "offered load must be non-negative");
    offered_load * (-offered_load).exp()
}
