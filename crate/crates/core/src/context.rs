//! Context weighting of individual observations.
//!
//! Three context signals scale how much an observation counts:
//!
//! * spatial: observations from one of the user's home areas get `high`,
//!   everything else `low`;
//! * temporal: observations made close to the end of the epoch get more
//!   weight, in three bands;
//! * semantic: a preset table scoring how suitable a class of users is for
//!   reporting on a class of factors.
//!
//! The overall weight is the convex combination
//! `alpha * (trust * mu_c) + beta * mu_l + theta * mu_t`, clamped into
//! `[w_min, w_max]` so that no single observation is ever fully certain.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::ids::AreaId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContextError {
    #[error("spatial weights need 0 < low <= high <= 1 (got high {high}, low {low})")]
    InvalidSpatial { high: f64, low: f64 },
    #[error("temporal params need 0 < t1 < t2, t_update > 0 and 0 <= low <= mid <= high <= 1")]
    InvalidTemporal,
    #[error("coefficients must be non-negative and sum to 1 (got {alpha}, {beta}, {theta})")]
    InvalidCoefficients { alpha: f64, beta: f64, theta: f64 },
    #[error("weight clamp needs 0 < min <= max < 1 (got [{min}, {max}])")]
    InvalidClamp { min: f64, max: f64 },
    #[error("semantic table: {0}")]
    InvalidTable(String),
    #[error("unknown {kind} class `{name}`")]
    UnknownClass { kind: &'static str, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialParams {
    high: f64,
    low: f64,
}

impl SpatialParams {
    pub fn new(high: f64, low: f64) -> Result<Self, ContextError> {
        if 0.0 < low && low <= high && high <= 1.0 {
            Ok(Self { high, low })
        } else {
            Err(ContextError::InvalidSpatial { high, low })
        }
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn low(&self) -> f64 {
        self.low
    }
}

impl Default for SpatialParams {
    fn default() -> Self {
        Self { high: 1.0, low: 0.4 }
    }
}

/// `high` for an observation made in any of the user's home areas.
pub fn spatial_weight(area: AreaId, home_areas: &[AreaId], p: &SpatialParams) -> f64 {
    if home_areas.contains(&area) {
        p.high
    } else {
        p.low
    }
}

/// Freshness bands. An observation's age is measured back from the end of
/// its epoch: `age < t1` is fresh, `t1 <= age < t2` medium, older is stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalParams {
    pub(crate) t_update: f64,
    pub(crate) t1: f64,
    pub(crate) t2: f64,
    pub(crate) high: f64,
    pub(crate) mid: f64,
    pub(crate) low: f64,
}

impl TemporalParams {
    pub fn new(t_update: f64, t1: f64, t2: f64, high: f64, mid: f64, low: f64) -> Result<Self, ContextError> {
        let ok = t_update > 0.0
            && t_update.is_finite()
            && 0.0 < t1
            && t1 < t2
            && 0.0 <= low
            && low <= mid
            && mid <= high
            && high <= 1.0;
        if ok {
            Ok(Self { t_update, t1, t2, high, mid, low })
        } else {
            Err(ContextError::InvalidTemporal)
        }
    }

    /// Epoch length.
    pub fn t_update(&self) -> f64 {
        self.t_update
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn mid(&self) -> f64 {
        self.mid
    }

    pub fn low(&self) -> f64 {
        self.low
    }
}

impl Default for TemporalParams {
    fn default() -> Self {
        Self { t_update: 1.0, t1: 0.25, t2: 0.6, high: 1.0, mid: 0.7, low: 0.4 }
    }
}

/// Step function of the observation's age. Bands are left-closed,
/// right-open: `age == t1` is already medium, `age == t2` already stale.
pub fn temporal_weight(age: f64, p: &TemporalParams) -> f64 {
    if age < p.t1 {
        p.high
    } else if age < p.t2 {
        p.mid
    } else {
        p.low
    }
}

/// Index of a user class in a [`SemanticTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UserClass(pub u16);

/// Index of a factor class in a [`SemanticTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FactorClass(pub u16);

/// Expert-preset suitability of each user class for each factor class.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticTable {
    user_classes: Vec<String>,
    factor_classes: Vec<String>,
    // row-major, user class by factor class
    weights: Vec<f64>,
}

impl SemanticTable {
    pub const HEALTHCARE: UserClass = UserClass(0);
    pub const VULNERABLE: UserClass = UserClass(1);
    pub const GOVERNMENT: UserClass = UserClass(2);
    pub const REGULAR: UserClass = UserClass(3);
    pub const ENVIRONMENTAL_HEALTH: FactorClass = FactorClass(0);
    pub const URBAN_ACCESSIBILITY: FactorClass = FactorClass(1);

    pub fn new(
        user_classes: Vec<String>,
        factor_classes: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, ContextError> {
        if user_classes.is_empty() || factor_classes.is_empty() {
            return Err(ContextError::InvalidTable("needs at least one user and one factor class".to_string()));
        }
        if rows.len() != user_classes.len() || rows.iter().any(|r| r.len() != factor_classes.len()) {
            return Err(ContextError::InvalidTable(alloc::format!(
                "expected a {}x{} matrix",
                user_classes.len(),
                factor_classes.len()
            )));
        }
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(bad) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(ContextError::InvalidTable(alloc::format!("weight {bad} outside [0, 1]")));
        }
        for names in [&user_classes, &factor_classes] {
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    return Err(ContextError::InvalidTable(alloc::format!("duplicate class `{n}`")));
                }
            }
        }
        Ok(Self { user_classes, factor_classes, weights })
    }

    /// The four-by-two layout used by default, parametrized by the high,
    /// medium and low semantic weights.
    pub fn with_levels(high: f64, mid: f64, low: f64) -> Result<Self, ContextError> {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self::new(
            names(&["healthcare-professional", "vulnerable-group", "government-professional", "regular-people"]),
            names(&["environmental-health", "urban-accessibility"]),
            alloc::vec![
                alloc::vec![high, mid],
                alloc::vec![mid, high],
                alloc::vec![high, mid],
                alloc::vec![low, low],
            ],
        )
    }

    pub fn user_classes(&self) -> &[String] {
        &self.user_classes
    }

    pub fn factor_classes(&self) -> &[String] {
        &self.factor_classes
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.factor_classes.len())
    }

    pub fn user_class(&self, name: &str) -> Result<UserClass, ContextError> {
        self.user_classes
            .iter()
            .position(|n| n == name)
            .map(|i| UserClass(i as u16))
            .ok_or_else(|| ContextError::UnknownClass { kind: "user", name: name.to_string() })
    }

    pub fn factor_class(&self, name: &str) -> Result<FactorClass, ContextError> {
        self.factor_classes
            .iter()
            .position(|n| n == name)
            .map(|i| FactorClass(i as u16))
            .ok_or_else(|| ContextError::UnknownClass { kind: "factor", name: name.to_string() })
    }

    pub fn user_class_name(&self, class: UserClass) -> Option<&str> {
        self.user_classes.get(class.0 as usize).map(String::as_str)
    }
}

impl Default for SemanticTable {
    fn default() -> Self {
        Self::with_levels(1.0, 0.8, 0.6).expect("default semantic levels are valid")
    }
}

/// Table lookup of `mu_c(user_class, factor_class)`.
pub fn semantic_weight(user: UserClass, factor: FactorClass, table: &SemanticTable) -> Result<f64, ContextError> {
    let (u, f) = (user.0 as usize, factor.0 as usize);
    if u >= table.user_classes.len() {
        return Err(ContextError::UnknownClass { kind: "user", name: alloc::format!("#{u}") });
    }
    if f >= table.factor_classes.len() {
        return Err(ContextError::UnknownClass { kind: "factor", name: alloc::format!("#{f}") });
    }
    Ok(table.weights[u * table.factor_classes.len() + f])
}

/// `(alpha, beta, theta)` of the convex weight combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCoefficients {
    alpha: f64,
    beta: f64,
    theta: f64,
}

impl WeightCoefficients {
    pub fn new(alpha: f64, beta: f64, theta: f64) -> Result<Self, ContextError> {
        let nonneg = alpha >= 0.0 && beta >= 0.0 && theta >= 0.0;
        if nonneg && (alpha + beta + theta - 1.0).abs() <= 1e-9 {
            Ok(Self { alpha, beta, theta })
        } else {
            Err(ContextError::InvalidCoefficients { alpha, beta, theta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for WeightCoefficients {
    /// Temporal context unused.
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.3, theta: 0.0 }
    }
}

/// Bounds applied to every observation weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightClamp {
    min: f64,
    max: f64,
}

impl WeightClamp {
    pub fn new(min: f64, max: f64) -> Result<Self, ContextError> {
        if 0.0 < min && min <= max && max < 1.0 {
            Ok(Self { min, max })
        } else {
            Err(ContextError::InvalidClamp { min, max })
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

impl Default for WeightClamp {
    fn default() -> Self {
        Self { min: 0.01, max: 0.99 }
    }
}

/// `alpha * (trust * mu_c) + beta * mu_l + theta * mu_t`, clamped when a
/// clamp is given.
pub fn observation_weight(
    trust: f64,
    mu_c: f64,
    mu_l: f64,
    mu_t: f64,
    c: &WeightCoefficients,
    clamp: Option<&WeightClamp>,
) -> f64 {
    let w = c.alpha * (trust * mu_c) + c.beta * mu_l + c.theta * mu_t;
    match clamp {
        Some(k) => w.clamp(k.min, k.max),
        None => w.clamp(0.0, 1.0),
    }
}

/// Every parameter block needed to weigh an observation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextParams {
    pub spatial: SpatialParams,
    pub temporal: TemporalParams,
    pub semantic: SemanticTable,
    pub coefficients: WeightCoefficients,
    /// `None` disables clamping; fusion may then hit total conflict.
    pub clamp: Option<WeightClamp>,
}

impl ContextParams {
    /// Defaults with the standard clamp enabled.
    pub fn standard() -> Self {
        Self { clamp: Some(WeightClamp::default()), ..Self::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn spatial_branches() {
        let p = SpatialParams::default();
        assert_eq!(spatial_weight(AreaId(7), &[AreaId(7)], &p), 1.0);
        assert_eq!(spatial_weight(AreaId(3), &[AreaId(7)], &p), 0.4);
        assert_eq!(spatial_weight(AreaId(3), &[AreaId(1), AreaId(3)], &p), 1.0);
        let flat = SpatialParams::new(0.6, 0.6).unwrap();
        assert_eq!(spatial_weight(AreaId(3), &[AreaId(7)], &flat), 0.6);
        assert_eq!(spatial_weight(AreaId(7), &[AreaId(7)], &flat), 0.6);
        assert!(SpatialParams::new(0.4, 1.0).is_err());
        assert!(SpatialParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn temporal_band_boundaries() {
        let p = TemporalParams::default();
        assert_eq!(temporal_weight(0.0, &p), p.high());
        assert_eq!(temporal_weight(0.2499, &p), 1.0);
        assert_eq!(temporal_weight(p.t1(), &p), p.mid());
        assert_eq!(temporal_weight(0.5999, &p), 0.7);
        assert_eq!(temporal_weight(p.t2(), &p), p.low());
        assert_eq!(temporal_weight(0.9, &p), 0.4);
        assert!(TemporalParams::new(1.0, 0.6, 0.25, 1.0, 0.7, 0.4).is_err());
        assert!(TemporalParams::new(1.0, 0.2, 0.5, 0.5, 0.7, 0.4).is_err());
    }

    #[test]
    fn semantic_table_cells() {
        let t = SemanticTable::default();
        let hc = t.user_class("healthcare-professional").unwrap();
        let env = t.factor_class("environmental-health").unwrap();
        let acc = t.factor_class("urban-accessibility").unwrap();
        assert_eq!(semantic_weight(hc, env, &t).unwrap(), 1.0);
        assert_eq!(semantic_weight(SemanticTable::REGULAR, acc, &t).unwrap(), 0.6);
        assert_eq!(semantic_weight(SemanticTable::VULNERABLE, acc, &t).unwrap(), 1.0);
        assert_eq!(semantic_weight(SemanticTable::VULNERABLE, env, &t).unwrap(), 0.8);
        assert_eq!(semantic_weight(SemanticTable::GOVERNMENT, env, &t).unwrap(), 1.0);
        assert!(matches!(
            semantic_weight(UserClass(4), env, &t),
            Err(ContextError::UnknownClass { kind: "user", .. })
        ));
        assert!(matches!(
            semantic_weight(hc, FactorClass(2), &t),
            Err(ContextError::UnknownClass { kind: "factor", .. })
        ));
        assert!(t.user_class("astronaut").is_err());
    }

    #[test]
    fn semantic_table_validation() {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(SemanticTable::new(names(&["a"]), names(&["x"]), vec![vec![1.2]]).is_err());
        assert!(SemanticTable::new(names(&["a", "b"]), names(&["x"]), vec![vec![1.0]]).is_err());
        assert!(SemanticTable::new(names(&["a", "a"]), names(&["x"]), vec![vec![1.0], vec![0.5]]).is_err());
        assert!(SemanticTable::new(names(&["a"]), names(&["x", "y"]), vec![vec![1.0, 0.5]]).is_ok());
    }

    #[test]
    fn weight_examples() {
        let c = WeightCoefficients::default();
        let k = WeightClamp::default();
        let w = observation_weight(0.95, 1.0, 1.0, 0.0, &c, Some(&k));
        assert!((w - 0.965).abs() < 1e-12);
        let w = observation_weight(0.5, 0.6, 0.4, 1.0, &c, Some(&k));
        assert!((w - 0.33).abs() < 1e-12);
        let any = WeightCoefficients::new(0.2, 0.5, 0.3).unwrap();
        assert_eq!(observation_weight(1.0, 1.0, 1.0, 1.0, &any, None), 1.0);
        assert_eq!(observation_weight(1.0, 1.0, 1.0, 1.0, &any, Some(&k)), 0.99);
        assert_eq!(observation_weight(0.0, 0.0, 0.0, 0.0, &any, Some(&k)), 0.01);
    }

    #[test]
    fn coefficient_validation() {
        assert!(WeightCoefficients::new(0.7, 0.3, 0.1).is_err());
        assert!(WeightCoefficients::new(1.1, -0.1, 0.0).is_err());
        assert!(WeightClamp::new(0.0, 0.9).is_err());
        assert!(WeightClamp::new(0.5, 1.0).is_err());
        assert!(WeightClamp::new(0.6, 0.5).is_err());
    }
}
