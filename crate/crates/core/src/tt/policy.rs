use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Error budget for TT rounding: a relative 2-norm tolerance and a hard
/// cap on every internal rank. Whichever is more restrictive wins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub rel_tolerance: f64,
    pub max_rank: usize,
}

impl TruncationPolicy {
    pub fn new(rel_tolerance: f64, max_rank: usize) -> Result<Self> {
        if !(rel_tolerance >= 0.0) || !rel_tolerance.is_finite() {
            return Err(invalid(format!("rel_tolerance must be >= 0, got {rel_tolerance}")));
        }
        if max_rank == 0 {
            return Err(invalid("max_rank must be >= 1"));
        }
        Ok(Self { rel_tolerance, max_rank })
    }

    /// Only numerical-noise singular values are discarded.
    pub const fn exact() -> Self {
        Self { rel_tolerance: 0.0, max_rank: usize::MAX }
    }

    pub const fn with_tolerance(rel_tolerance: f64) -> Self {
        Self { rel_tolerance, max_rank: usize::MAX }
    }

    pub const fn with_max_rank(max_rank: usize) -> Self {
        Self { rel_tolerance: 0.0, max_rank }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::exact()
    }
}
