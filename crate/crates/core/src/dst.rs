//! Dempster-Shafer fusion over quantized factor values.
//!
//! Each factor's value range is cut into `Γ` left-closed, right-open
//! intervals (the frame). An observation of weight `w` that falls into
//! interval `γ` becomes the mass function `{γ: w, Ω: 1 - w}`. Because every
//! such mass only has singleton intervals and the whole frame `Ω` as focal
//! elements, and Dempster's rule maps that family onto itself (a singleton
//! intersected with `Ω` is the singleton, two different singletons are
//! disjoint), masses are stored as `Γ` singleton values plus the `Ω` value.
//! Combination is then linear in `Γ`.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::ids::FactorId;
use crate::num;

/// Normalizers at or below this value are treated as total conflict.
pub const CONFLICT_EPSILON: f64 = 1e-9;

const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DstError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("masses must be non-negative and sum to 1")]
    InvalidMass,
    #[error("mass functions are defined over frames of different sizes ({0} vs {1})")]
    FrameMismatch(usize, usize),
    #[error("interval {interval} outside a frame of {size} intervals")]
    IntervalOutOfRange { interval: usize, size: usize },
    /// The two bodies of evidence contradict each other (almost) completely.
    #[error("total conflict between evidence (conflict mass {conflict})")]
    TotalConflict { conflict: f64 },
    #[error("no evidence to fuse")]
    EmptyEvidence,
}

/// Zero-based index of an interval within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Interval(pub usize);

/// Frame of discernment of one factor: the cut-points `r_1 < ... < r_{Γ-1}`
/// defining `(-∞, r_1), [r_1, r_2), ..., [r_{Γ-1}, +∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    factor: FactorId,
    boundaries: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Frame {
    pub fn new(factor: FactorId, boundaries: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self, DstError> {
        if boundaries.is_empty() {
            return Err(DstError::InvalidFrame("at least one cut-point (two intervals) is required".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(DstError::InvalidFrame("cut-points must be finite".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DstError::InvalidFrame("cut-points must be strictly increasing".into()));
        }
        if let Some(l) = &labels {
            if l.len() != boundaries.len() + 1 {
                return Err(DstError::InvalidFrame(alloc::format!(
                    "{} labels for {} intervals",
                    l.len(),
                    boundaries.len() + 1
                )));
            }
        }
        Ok(Self { factor, boundaries, labels })
    }

    pub fn factor(&self) -> FactorId {
        self.factor
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Number of intervals, `Γ`.
    pub fn size(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Bounds of interval `i`; the outer intervals are unbounded.
    pub fn bounds(&self, i: Interval) -> (f64, f64) {
        let lo = if i.0 == 0 { f64::NEG_INFINITY } else { self.boundaries[i.0 - 1] };
        let hi = self.boundaries.get(i.0).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }
}

/// Interval containing `value`.
pub fn quantize(value: f64, frame: &Frame) -> Interval {
    Interval(frame.boundaries.partition_point(|&b| b <= value))
}

/// A mass function restricted to singleton intervals and `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    singletons: Vec<f64>,
    omega: f64,
}

impl MassFunction {
    pub fn new(singletons: Vec<f64>, omega: f64) -> Result<Self, DstError> {
        let nonneg = omega >= 0.0 && singletons.iter().all(|&m| m >= 0.0);
        let total = num::sum(singletons.iter().copied().chain([omega]));
        if singletons.len() < 2 || !nonneg || (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(DstError::InvalidMass);
        }
        Ok(Self { singletons, omega })
    }

    /// All mass on `Ω`: total ignorance, the identity of [`combine`].
    pub fn vacuous(size: usize) -> Self {
        Self { singletons: alloc::vec![0.0; size], omega: 1.0 }
    }

    pub fn size(&self) -> usize {
        self.singletons.len()
    }

    pub fn singleton(&self, i: Interval) -> f64 {
        self.singletons.get(i.0).copied().unwrap_or(0.0)
    }

    pub fn singletons(&self) -> &[f64] {
        &self.singletons
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn total(&self) -> f64 {
        num::sum(self.singletons.iter().copied().chain([self.omega]))
    }
}

/// `{interval: weight, Ω: 1 - weight}`.
pub fn mass_from_observation(weight: f64, interval: Interval, frame: &Frame) -> Result<MassFunction, DstError> {
    let size = frame.size();
    if interval.0 >= size {
        return Err(DstError::IntervalOutOfRange { interval: interval.0, size });
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(DstError::InvalidMass);
    }
    let mut singletons = alloc::vec![0.0; size];
    singletons[interval.0] = weight;
    Ok(MassFunction { singletons, omega: 1.0 - weight })
}

/// Conflict mass `K`: product mass falling on disjoint focal pairs.
pub fn conflict(a: &MassFunction, b: &MassFunction) -> Result<f64, DstError> {
    check_sizes(a, b)?;
    let mut k = 0.0;
    for (i, &x) in a.singletons.iter().enumerate() {
        for (j, &y) in b.singletons.iter().enumerate() {
            if i != j {
                k += x * y;
            }
        }
    }
    Ok(k)
}

/// Dempster's rule of combination.
///
/// Each term is written so that swapping `a` and `b` produces the same
/// floating-point operations, which makes the rule bit-for-bit commutative.
pub fn combine(a: &MassFunction, b: &MassFunction) -> Result<MassFunction, DstError> {
    check_sizes(a, b)?;
    let joint: Vec<f64> = a
        .singletons
        .iter()
        .zip(&b.singletons)
        .map(|(&x, &y)| x * y + (x * b.omega + a.omega * y))
        .collect();
    let omega = a.omega * b.omega;
    // 1 - K, accumulated from the non-conflicting products.
    let norm = num::sum(joint.iter().copied().chain([omega]));
    if norm <= CONFLICT_EPSILON {
        return Err(DstError::TotalConflict { conflict: 1.0 - norm });
    }
    Ok(MassFunction { singletons: joint.into_iter().map(|m| m / norm).collect(), omega: omega / norm })
}

/// Joint mass of one user's observations, folded left to right.
pub fn fuse_user(masses: &[MassFunction]) -> Result<MassFunction, DstError> {
    let (first, rest) = masses.split_first().ok_or(DstError::EmptyEvidence)?;
    rest.iter().try_fold(first.clone(), |acc, m| combine(&acc, m))
}

/// Joint mass of all contributing users of one (area, factor) pair, read
/// out as a data-trustworthiness vector.
pub fn fuse_area(user_masses: &[MassFunction]) -> Result<DataTrustVector, DstError> {
    fuse_user(user_masses).map(DataTrustVector::from)
}

/// Per-interval joint masses plus the residual mass left on `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTrustVector {
    masses: Vec<f64>,
    omega: f64,
}

impl DataTrustVector {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: Interval) -> f64 {
        self.masses.get(i.0).copied().unwrap_or(0.0)
    }

    /// Residual mass on `Ω`.
    pub fn residual(&self) -> f64 {
        self.omega
    }

    /// The interval with the largest joint mass (lowest index on ties).
    pub fn leading_interval(&self) -> Interval {
        let mut best = 0;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > self.masses[best] {
                best = i;
            }
        }
        Interval(best)
    }
}

impl From<MassFunction> for DataTrustVector {
    fn from(m: MassFunction) -> Self {
        Self { masses: m.singletons, omega: m.omega }
    }
}

fn check_sizes(a: &MassFunction, b: &MassFunction) -> Result<(), DstError> {
    if a.size() == b.size() {
        Ok(())
    } else {
        Err(DstError::FrameMismatch(a.size(), b.size()))
    }
}
