//! Sets of pairwise-disjoint closed intervals over the extended reals.
//!
//! Endpoints may be `±∞`. Construction normalizes the input: intervals are
//! sorted, and overlapping or touching intervals are merged, so the stored
//! representation is canonical. Degenerate intervals (`lo == hi`) are kept;
//! they matter for membership even though they carry zero length.

use crate::{Error, Result};

/// One closed interval `[lo, hi]` with `lo ≤ hi`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn length(&self) -> f64 {
        self.hi - self.lo
    }

    fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A finite union of disjoint closed intervals, sorted by lower endpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    /// The empty set.
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    /// The whole extended real line.
    pub fn all() -> Self {
        IntervalSet {
            parts: vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    /// A single interval `[lo, hi]`.
    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Self::from_pairs(&[(lo, hi)])
    }

    /// Builds a set from endpoint pairs, merging overlaps and touching edges.
    ///
    /// Rejects NaN endpoints and pairs with `lo > hi`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut parts = Vec::with_capacity(pairs.len());
        for &(lo, hi) in pairs {
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidParameter {
                    name: "interval",
                    detail: "endpoint is NaN".into(),
                });
            }
            if lo > hi {
                return Err(Error::InvalidParameter {
                    name: "interval",
                    detail: format!("lo {lo} exceeds hi {hi}"),
                });
            }
            parts.push(Interval { lo, hi });
        }
        parts.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for iv in parts {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(IntervalSet { parts: merged })
    }

    /// The stored disjoint intervals, sorted ascending.
    pub fn intervals(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Membership in the closed union.
    pub fn contains(&self, x: f64) -> bool {
        if x.is_nan() {
            return false;
        }
        // Binary search for the last interval starting at or before x.
        let idx = self.parts.partition_point(|iv| iv.lo <= x);
        idx > 0 && self.parts[idx - 1].contains(x)
    }

    /// Total length; `+∞` if any member is unbounded.
    pub fn total_length(&self) -> f64 {
        self.parts.iter().map(Interval::length).sum()
    }

    /// Smallest single interval covering the set; `None` when empty.
    pub fn hull(&self) -> Option<Interval> {
        match (self.parts.first(), self.parts.last()) {
            (Some(first), Some(last)) => Some(Interval {
                lo: first.lo,
                hi: last.hi,
            }),
            _ => None,
        }
    }

    /// Set intersection.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut parts = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                parts.push(Interval { lo, hi });
            }
            // Advance whichever interval ends first.
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { parts }
    }

    /// Set difference `self \ other` (up to boundary points, which stay in).
    pub fn subtract(&self, other: &IntervalSet) -> IntervalSet {
        let mut parts = Vec::new();
        for &a in &self.parts {
            let mut lo = a.lo;
            for &b in &other.parts {
                if b.hi < lo {
                    continue;
                }
                if b.lo > a.hi {
                    break;
                }
                if b.lo > lo {
                    parts.push(Interval { lo, hi: b.lo });
                }
                lo = lo.max(b.hi);
                if lo >= a.hi {
                    break;
                }
            }
            if lo < a.hi {
                parts.push(Interval { lo, hi: a.hi });
            } else if lo == a.hi && !other.contains(a.hi) {
                parts.push(Interval { lo: a.hi, hi: a.hi });
            }
        }
        IntervalSet { parts }
    }

    /// True when every point of `self` lies in `other` up to slack `tol`:
    /// the uncovered length must not exceed `tol` and no uncovered part may
    /// be unbounded.
    pub fn is_subset_within(&self, other: &IntervalSet, tol: f64) -> bool {
        let uncovered = self.subtract(other);
        let len = uncovered.total_length();
        len.is_finite() && len <= tol
    }

    /// Replaces infinite endpoints by the given finite bounds and drops parts
    /// that fall outside `[lo, hi]` entirely.
    pub fn clamp_to(&self, lo: f64, hi: f64) -> IntervalSet {
        let mut parts = Vec::new();
        for &iv in &self.parts {
            let a = iv.lo.max(lo);
            let b = iv.hi.min(hi);
            if a <= b {
                parts.push(Interval { lo: a, hi: b });
            }
        }
        IntervalSet { parts }
    }

    /// True when all member intervals are bounded.
    pub fn is_bounded(&self) -> bool {
        self.parts.iter().all(Interval::is_bounded)
    }
}
