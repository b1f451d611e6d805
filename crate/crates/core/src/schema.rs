//! Attribute slot layout.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A contiguous group of slots describing one multi-valued attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFamily {
    pub name: String,
    pub start: usize,
    pub len: usize,
    /// At most one slot of an exclusive family is active (one-hot).
    pub exclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct AttributeSchema {
    slots: Vec<String>,
    families: Vec<AttributeFamily>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    slots: Vec<String>,
    families: Vec<AttributeFamily>,
}

impl TryFrom<RawSchema> for AttributeSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        AttributeSchema::new(raw.slots, raw.families)
    }
}

impl From<AttributeSchema> for RawSchema {
    fn from(s: AttributeSchema) -> Self {
        RawSchema {
            slots: s.slots,
            families: s.families,
        }
    }
}

const DEFAULT_FAMILIES: &[(&str, &[&str], bool)] = &[
    ("gender", &["gender"], false),
    ("age", &["age_young", "age_teen", "age_middle", "age_old"], true),
    ("eye", &["eye_open"], false),
    ("mouth_variation", &["mouth_variation"], false),
    ("mouth", &["mouth_open"], false),
    ("teeth", &["teeth_visible"], false),
    ("smile", &["smile"], false),
    ("glasses", &["glasses"], false),
    ("beard", &["beard"], false),
    ("skin_color", &["skin_bright"], false),
    ("hair_color", &["hair_black", "hair_blonde", "hair_other"], true),
    ("hair_ornaments", &["hair_ornaments"], false),
    ("face_cover", &["face_cover"], false),
    // also reported as "cheek smoothness"
    ("skin_smoothness", &["skin_smoothness"], false),
];

impl AttributeSchema {
    pub fn new(slots: Vec<String>, mut families: Vec<AttributeFamily>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &slots {
            if !seen.insert(s.as_str()) {
                return Err(Error::Schema(format!("duplicate slot name {s:?}")));
            }
        }
        families.sort_by_key(|f| f.start);
        let mut next = 0;
        for f in &families {
            if f.len == 0 {
                return Err(Error::Schema(format!("family {:?} is empty", f.name)));
            }
            if f.start != next {
                return Err(Error::Schema(format!(
                    "family {:?} starts at {}, expected {next}: families must partition the slots",
                    f.name, f.start
                )));
            }
            next = f.start + f.len;
        }
        if next != slots.len() {
            return Err(Error::Schema(format!(
                "families cover {next} slots but the schema has {}",
                slots.len()
            )));
        }
        Ok(AttributeSchema { slots, families })
    }

    /// The 19-slot person attribute layout.
    pub fn default_person() -> Self {
        let mut slots = Vec::new();
        let mut families = Vec::new();
        for (name, members, exclusive) in DEFAULT_FAMILIES {
            families.push(AttributeFamily {
                name: (*name).to_string(),
                start: slots.len(),
                len: members.len(),
                exclusive: *exclusive,
            });
            slots.extend(members.iter().map(|s| (*s).to_string()));
        }
        AttributeSchema::new(slots, families).expect("default schema is valid")
    }

    /// Anonymous schema with `n` independent slots `attr_0 … attr_{n-1}`.
    pub fn anonymous(n: usize) -> Self {
        let slots = (0..n).map(|i| format!("attr_{i}")).collect();
        let families = (0..n)
            .map(|i| AttributeFamily {
                name: format!("attr_{i}"),
                start: i,
                len: 1,
                exclusive: false,
            })
            .collect();
        AttributeSchema::new(slots, families).expect("anonymous schema is valid")
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn families(&self) -> &[AttributeFamily] {
        &self.families
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Default for AttributeSchema {
    fn default() -> Self {
        AttributeSchema::default_person()
    }
}
