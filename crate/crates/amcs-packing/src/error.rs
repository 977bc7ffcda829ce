//! Error and warning types for the packing layer.

use thiserror::Error;

/// Hard errors at ingestion time.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    /// An arriving info set mixes the end-of-computation marker with
    /// ordinary information; such data sets are malformed.
    #[error("info set of {computation} mixes eoc with other information")]
    MixedEoc { computation: String },
}

/// Hard errors when interpreting a chosen answer set.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// Both package variants (process_as_schema and process/2) appear in
    /// one answer set.
    #[error("answer set mixes process_as_schema with process/2 directives")]
    MixedVariants,
    /// More than one process_as_schema atom — the single-package variant
    /// admits exactly one schema.
    #[error("answer set contains {count} process_as_schema atoms")]
    MultipleSchemas { count: usize },
    /// The same tag is both added and removed on the same target; we refuse
    /// to pick a winner.
    #[error("tag {tag} on {target} is both added and removed")]
    TagConflict { target: String, tag: String },
}

/// Soft findings while decoding; the directive is skipped (or, for
/// DanglingInPack, simply forms no package) and evaluation continues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeWarning {
    /// in_pack atoms present but no process_as_schema: no package forms.
    /// Removal-only answer sets legitimately look like this.
    DanglingInPack { ids: Vec<String> },
    /// A directive referenced an id that is neither a buffered data set
    /// nor a known computation.
    UnknownId { atom: String },
    /// A package directive ended up with no members.
    EmptyPackage { schema: String },
}

impl std::fmt::Display for DecodeWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeWarning::DanglingInPack { ids } => {
                write!(f, "in_pack without process_as_schema: {}", ids.join(", "))
            }
            DecodeWarning::UnknownId { atom } => write!(f, "unknown id in directive {atom}"),
            DecodeWarning::EmptyPackage { schema } => {
                write!(f, "package of schema {schema} has no members")
            }
        }
    }
}

/// Soft findings while applying a directive set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyWarning {
    /// A removal or tag edit referenced something no longer in the buffer.
    AlreadyRemoved { id: String },
}

impl std::fmt::Display for ApplyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApplyWarning::AlreadyRemoved { id } => {
                write!(f, "directive target {id} already removed")
            }
        }
    }
}
