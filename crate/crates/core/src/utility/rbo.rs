use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RBO_P: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboScore {
    /// Truncated sum divided by `1 − p^d_max`; identical lists score 1.
    pub normalized: f64,
    /// `(1 − p) Σ_{d ≤ d_max} p^{d−1} A_d`.
    pub raw: f64,
    pub depth: usize,
}

/// Rank-biased overlap of two rankings of the same items.
pub fn rbo<T: Eq + Hash>(a: &[T], b: &[T], p: f64) -> Result<RboScore> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let sa: HashSet<&T> = a.iter().collect();
    let sb: HashSet<&T> = b.iter().collect();
    if sa.len() != a.len() || sb.len() != b.len() {
        return Err(Error::DuplicateItems);
    }
    if sa != sb {
        return Err(Error::MismatchedUniverse);
    }
    if a.is_empty() {
        return Err(Error::EmptySet("ranked list"));
    }
    let depth = a.len();
    let mut seen_a = HashSet::new();
    let mut seen_b = HashSet::new();
    let mut overlap = 0usize;
    let mut sum = 0.0;
    let mut weight = 1.0;
    for d in 0..depth {
        let (x, y) = (&a[d], &b[d]);
        if x == y {
            overlap += 1;
        } else {
            if seen_b.contains(x) {
                overlap += 1;
            }
            if seen_a.contains(y) {
                overlap += 1;
            }
        }
        seen_a.insert(x);
        seen_b.insert(y);
        sum += weight * overlap as f64 / (d + 1) as f64;
        weight *= p;
    }
    let raw = (1.0 - p) * sum;
    // weight now equals p^depth
    Ok(RboScore { normalized: (raw / (1.0 - weight)).min(1.0), raw, depth })
}
