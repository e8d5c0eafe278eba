// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::Serialize;
use thiserror::Error;

/// A single defect found while validating a user-supplied distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFinite {
        i: usize,
        j: usize,
        value: f64,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    NonzeroDiagonal {
        i: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        upper: f64,
        lower: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFinite { i, j, value } => write!(f, "non-finite entry {value} at ({i},{j})"),
            Self::Negative { i, j, value } => write!(f, "negative entry {value} at ({i},{j})"),
            Self::NonzeroDiagonal { i, value } => {
                write!(f, "nonzero diagonal {value} at ({i},{i})")
            }
            Self::Asymmetric { i, j, upper, lower } => {
                write!(f, "asymmetry at ({i},{j}): {upper} vs {lower}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CpdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid distance matrix: {} violation(s), first: {}", .0.len(), .0[0])]
    InvalidDistanceMatrix(Vec<Violation>),

    #[error("segment of length {len} is too short for minimum segment size {min_seg}")]
    SegmentTooShort { len: usize, min_seg: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CpdError {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidInput(_) => "invalid_input",
            Self::InvalidDistanceMatrix(_) => "invalid_distance_matrix",
            Self::SegmentTooShort { .. } => "segment_too_short",
            Self::IndexOutOfRange { .. } => "index_out_of_range",
            Self::Io(_) => "io",
            Self::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, CpdError>;
