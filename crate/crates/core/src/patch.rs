//! The patch genome and how it rewrites a pass sequence.
//!
//! A patch carries a relative position in `[0, 1]`. Insertions address the
//! `len + 1` gaps of the current sequence, deletions and replacements
//! address its `len` elements; both map by floor scaling and clamp at the
//! top, so `1.0` appends (gap mode) or hits the last element (element mode).
//! Patches in an individual are applied in order, each resolved against the
//! sequence produced by the previous one.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use thiserror::Error;

use crate::catalog::{PassCatalog, PassName, PassSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatchError {
    #[error("line {line}: malformed patch line")]
    MalformedPatchLine { line: usize },
    #[error("unknown pass `{name}` at line {line}")]
    UnknownPass { name: String, line: usize },
    #[error("line {line}: position out of range [0, 1]")]
    PositionOutOfRange { line: usize },
    #[error("position {0} out of range [0, 1]")]
    InvalidPosition(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PatchType {
    Insertion,
    Deletion,
    Replacement,
}

impl PatchType {
    pub const ALL: [PatchType; 3] = [PatchType::Insertion, PatchType::Deletion, PatchType::Replacement];

    pub fn needs_value(self) -> bool {
        !matches!(self, PatchType::Deletion)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            PatchType::Insertion => "insert",
            PatchType::Deletion => "delete",
            PatchType::Replacement => "replace",
        }
    }

    pub fn slot_mode(self) -> SlotMode {
        match self {
            PatchType::Insertion => SlotMode::Gap,
            PatchType::Deletion | PatchType::Replacement => SlotMode::Element,
        }
    }
}

/// One edit. `value` is present exactly for insertions and replacements.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Patch {
    ptype: PatchType,
    position: f64,
    value: Option<PassName>,
}

fn check_position(position: f64) -> Result<f64, PatchError> {
    if (0.0..=1.0).contains(&position) {
        Ok(position)
    } else {
        Err(PatchError::InvalidPosition(position))
    }
}

impl Patch {
    pub fn insertion(position: f64, value: PassName) -> Result<Self, PatchError> {
        Ok(Patch { ptype: PatchType::Insertion, position: check_position(position)?, value: Some(value) })
    }

    pub fn deletion(position: f64) -> Result<Self, PatchError> {
        Ok(Patch { ptype: PatchType::Deletion, position: check_position(position)?, value: None })
    }

    pub fn replacement(position: f64, value: PassName) -> Result<Self, PatchError> {
        Ok(Patch { ptype: PatchType::Replacement, position: check_position(position)?, value: Some(value) })
    }

    /// Builds a patch of the given type; `value` is dropped for deletions.
    ///
    /// Panics if a value-carrying type gets `None`.
    pub(crate) fn from_parts(ptype: PatchType, position: f64, value: Option<PassName>) -> Self {
        debug_assert!((0.0..=1.0).contains(&position));
        let value = if ptype.needs_value() {
            Some(value.expect("insertion/replacement patch requires a value"))
        } else {
            None
        };
        Patch { ptype, position, value }
    }

    pub fn ptype(&self) -> PatchType {
        self.ptype
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn value(&self) -> Option<&PassName> {
        self.value.as_ref()
    }

    pub(crate) fn set_position(&mut self, position: f64) {
        self.position = position.clamp(0.0, 1.0);
    }

    pub(crate) fn set_value(&mut self, value: PassName) {
        if self.ptype.needs_value() {
            self.value = Some(value);
        }
    }

    /// True if the patch satisfies its structural invariants and any value
    /// is a member of `catalog`.
    pub fn is_valid_for(&self, catalog: &PassCatalog) -> bool {
        (0.0..=1.0).contains(&self.position)
            && self.ptype.needs_value() == self.value.is_some()
            && self.value.as_ref().map_or(true, |v| catalog.contains(v.as_str()))
    }
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.ptype.keyword(), format_position(self.position))?;
        if let Some(v) = &self.value {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

/// Six decimals unless that loses precision, in which case the shortest
/// representation that parses back to the same value.
fn format_position(p: f64) -> String {
    let fixed = format!("{p:.6}");
    if fixed.parse::<f64>() == Ok(p) {
        fixed
    } else {
        p.to_string()
    }
}

/// A genome: patches in application order. Empty means identity.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Individual {
    pub patches: Vec<Patch>,
}

impl Individual {
    pub fn new(patches: Vec<Patch>) -> Self {
        Individual { patches }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotMode {
    /// The `len + 1` insertion points.
    Gap,
    /// The `len` existing elements.
    Element,
}

/// Maps a relative position onto a concrete index. `None` means there is no
/// element to target (element mode on an empty sequence).
pub fn resolve_index(position: f64, length: usize, mode: SlotMode) -> Option<usize> {
    let slots = match mode {
        SlotMode::Gap => length + 1,
        SlotMode::Element if length == 0 => return None,
        SlotMode::Element => length,
    };
    let scaled = libm::floor(position * slots as f64);
    let idx = if scaled <= 0.0 { 0 } else { scaled as usize };
    Some(idx.min(slots - 1))
}

fn apply_in_place(passes: &mut Vec<PassName>, patch: &Patch) {
    let target = resolve_index(patch.position, passes.len(), patch.ptype.slot_mode());
    match (patch.ptype, target) {
        (PatchType::Insertion, Some(i)) => {
            passes.insert(i, patch.value.clone().expect("insertion carries a value"))
        }
        (PatchType::Deletion, Some(i)) => {
            passes.remove(i);
        }
        (PatchType::Replacement, Some(i)) => {
            passes[i] = patch.value.clone().expect("replacement carries a value")
        }
        (_, None) => {}
    }
}

/// Returns a new sequence with one patch applied.
pub fn apply_patch(seq: &PassSequence, patch: &Patch) -> PassSequence {
    let mut passes = seq.passes.clone();
    apply_in_place(&mut passes, patch);
    PassSequence::new(passes, seq.label.clone())
}

/// Applies every patch of `ind` to `baseline`, left to right.
pub fn apply_individual(baseline: &PassSequence, ind: &Individual) -> PassSequence {
    let mut passes = baseline.passes.clone();
    for patch in &ind.patches {
        apply_in_place(&mut passes, patch);
    }
    PassSequence::new(passes, baseline.label.clone())
}

/// One patch per line: `insert <pos> <pass>`, `delete <pos>`,
/// `replace <pos> <pass>`.
pub fn serialize_individual(ind: &Individual) -> String {
    let mut out = String::new();
    for p in &ind.patches {
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn parse_individual(text: &str, catalog: &PassCatalog) -> Result<Individual, PatchError> {
    let mut patches = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let ptype = match fields[0] {
            "insert" => PatchType::Insertion,
            "delete" => PatchType::Deletion,
            "replace" => PatchType::Replacement,
            _ => return Err(PatchError::MalformedPatchLine { line }),
        };
        let expected = if ptype.needs_value() { 3 } else { 2 };
        if fields.len() != expected {
            return Err(PatchError::MalformedPatchLine { line });
        }
        let position: f64 = fields[1].parse().map_err(|_| PatchError::MalformedPatchLine { line })?;
        if !(0.0..=1.0).contains(&position) {
            return Err(PatchError::PositionOutOfRange { line });
        }
        let value = if ptype.needs_value() {
            let name = fields[2];
            match catalog.get(name) {
                Some(p) => Some(p.clone()),
                None => return Err(PatchError::UnknownPass { name: name.into(), line }),
            }
        } else {
            None
        };
        patches.push(Patch { ptype, position, value });
    }
    Ok(Individual { patches })
}
