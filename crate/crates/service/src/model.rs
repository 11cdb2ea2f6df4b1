//! JSON payloads exchanged over the API.

use serde::{Deserialize, Serialize};

use idtrace_core::Status;

/// An entropy value with its exact bit pattern alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitsValue {
    pub bits: f64,
    /// `f64::to_bits` as 16 hex digits, for exact comparison.
    pub raw: String,
}

impl BitsValue {
    pub fn new(bits: f64) -> Self {
        BitsValue {
            bits,
            raw: format!("{:016x}", bits.to_bits()),
        }
    }
}

impl From<idtrace_core::Bits> for BitsValue {
    fn from(b: idtrace_core::Bits) -> Self {
        BitsValue::new(b.value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: String,
    pub name: String,
    /// SHA-256 of the uploaded CSV bytes.
    pub digest: String,
    pub n_objects: usize,
    pub n_attributes: usize,
    pub created_at: String,
    pub attributes: Vec<AttributeInfo>,
}

/// An attribute/value pair by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedObservation {
    pub attribute: String,
    pub value: String,
}

/// A known observation as `{"attribute", "value"}` or `"attribute=value"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnownEntry {
    Pair(NamedObservation),
    Text(String),
}

impl KnownEntry {
    pub fn into_pair(self) -> Option<NamedObservation> {
        match self {
            KnownEntry::Pair(p) => Some(p),
            KnownEntry::Text(t) => {
                let (attribute, value) = t.split_once('=')?;
                Some(NamedObservation {
                    attribute: attribute.trim().to_string(),
                    value: value.trim().to_string(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    pub dataset_id: String,
    #[serde(default)]
    pub known: Vec<KnownEntry>,
    /// Keep recommending after every remaining attribute carries zero bits.
    #[serde(default)]
    pub literal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostObservation {
    pub attribute: String,
    pub value: String,
    pub expected_revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostUnavailable {
    pub attribute: String,
    pub expected_revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub attribute: String,
    pub value: String,
    /// Entropy after this step; absent when the step emptied the candidates.
    pub entropy_after: Option<BitsValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub object_id: String,
    /// In dataset attribute order; `?` for missing cells.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub dataset_id: String,
    pub revision: u64,
    pub status: Status,
    pub literal: bool,
    pub candidate_count: usize,
    /// Absent once the candidates are empty.
    pub entropy: Option<BitsValue>,
    pub known: Vec<NamedObservation>,
    pub path: Vec<PathStep>,
    pub unavailable: Vec<String>,
    pub entropy_history: Vec<BitsValue>,
    /// The identified object, once there is exactly one candidate.
    pub identified: Option<ObjectRow>,
    /// Candidate rows when there are at most the display threshold of them.
    pub survivors: Option<Vec<ObjectRow>>,
    pub created_at: String,
    pub updated_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfOutcome {
    pub value: String,
    pub count: usize,
    pub entropy: BitsValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfView {
    pub attribute: String,
    pub outcomes: Vec<WhatIfOutcome>,
    /// Candidates with no value for the attribute.
    pub missing: usize,
    /// Expected candidates left after observing the attribute, assuming the
    /// target's value follows the candidates' value distribution.
    pub expected_candidates: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedView {
    pub rank: usize,
    pub attribute: String,
    pub bits: BitsValue,
    pub whatif: WhatIfView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationsView {
    pub session_id: String,
    pub revision: u64,
    pub candidate_count: usize,
    /// Number of attributes ranked in total, before truncation to `top`.
    pub total: usize,
    pub ranking: Vec<RankedView>,
}
