//! Majority-agreement comparison scheme.
//!
//! A reconstruction of the weighted-sum approach the proposed engine is
//! compared against. It is not specified in enough detail to reproduce
//! exactly; this version is the simplest mechanism consistent with its
//! description:
//!
//! * entity trust: each report about an (area, factor) pair is compared with
//!   the reports of the *other* contributors to that pair. Agreement with
//!   their majority interval is an indicator of 1, disagreement 0, and the
//!   indicator is folded into trust with an exponential moving average. No
//!   update happens when the other contributors are tied or absent.
//! * data trust: each interval scores the trust mass of its supporters,
//!   normalized by the trust mass of all reports (or, optionally, divided by
//!   the number of reports).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::dst::Interval;
use crate::ids::UserId;
use crate::num;

/// How interval scores are read out of supporter trusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaselineReadout {
    /// Supporter trust mass over total trust mass; scores sum to 1.
    #[default]
    Normalized,
    /// Supporter trust mass over the number of reports.
    PlainAverage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    /// EMA step `λ` in `trust <- (1 - λ) trust + λ indicator`.
    pub lambda: f64,
    pub initial_trust: f64,
    pub readout: BaselineReadout,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { lambda: 0.2, initial_trust: 0.5, readout: BaselineReadout::Normalized }
    }
}

impl BaselineParams {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.lambda) && (0.0..=1.0).contains(&self.initial_trust)
    }
}

/// One quantized report: who said which interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Report {
    pub user: UserId,
    pub interval: Interval,
}

/// Running agreement scores of every user.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    params: BaselineParams,
    trust: BTreeMap<UserId, f64>,
}

impl BaselineState {
    pub fn new(params: BaselineParams, users: impl IntoIterator<Item = UserId>) -> Self {
        let trust = users.into_iter().map(|u| (u, params.initial_trust)).collect();
        Self { params, trust }
    }

    pub fn params(&self) -> &BaselineParams {
        &self.params
    }

    pub fn trust(&self, user: UserId) -> f64 {
        self.trust.get(&user).copied().unwrap_or(self.params.initial_trust)
    }

    pub fn trusts(&self) -> &BTreeMap<UserId, f64> {
        &self.trust
    }

    fn fold(&mut self, user: UserId, indicator: bool) {
        let lambda = self.params.lambda;
        let t = self.trust.entry(user).or_insert(self.params.initial_trust);
        let x = if indicator { 1.0 } else { 0.0 };
        *t = ((1.0 - lambda) * *t + lambda * x).clamp(0.0, 1.0);
    }
}

/// Agreement indicator of every report in one group against the majority of
/// the other contributors' reports; `None` where that majority is undefined.
pub fn agreement_indicators(reports: &[Report]) -> Vec<Option<bool>> {
    let size = reports.iter().map(|r| r.interval.0 + 1).max().unwrap_or(0);
    reports
        .iter()
        .map(|r| {
            let mut counts = alloc::vec![0usize; size];
            for other in reports.iter().filter(|o| o.user != r.user) {
                counts[other.interval.0] += 1;
            }
            majority(&counts).map(|m| m == r.interval)
        })
        .collect()
}

fn majority(counts: &[usize]) -> Option<Interval> {
    let max = counts.iter().copied().max()?;
    if max == 0 || counts.iter().filter(|&&c| c == max).count() > 1 {
        return None;
    }
    counts.iter().position(|&c| c == max).map(Interval)
}

/// Applies one epoch of agreement updates. Groups are processed in map
/// order and reports within a group in slice order.
pub fn baseline_update_entity<K: Ord>(groups: &BTreeMap<K, Vec<Report>>, state: &mut BaselineState) {
    for reports in groups.values() {
        let indicators = agreement_indicators(reports);
        for (r, ind) in reports.iter().zip(indicators) {
            if let Some(agrees) = ind {
                state.fold(r.user, agrees);
            }
        }
    }
}

/// Interval scores of one (area, factor) group over a frame of `size`
/// intervals. Returns `None` for an empty group.
pub fn baseline_data_trust(reports: &[Report], state: &BaselineState, size: usize) -> Option<Vec<f64>> {
    if reports.is_empty() {
        return None;
    }
    let mut support = alloc::vec![0.0; size];
    let mut votes = alloc::vec![0.0; size];
    for r in reports {
        support[r.interval.0] += state.trust(r.user);
        votes[r.interval.0] += 1.0;
    }
    let n = reports.len() as f64;
    let scores = match state.params.readout {
        BaselineReadout::Normalized => {
            let total = num::sum(support.iter().copied());
            if total > 0.0 {
                support.iter().map(|s| s / total).collect()
            } else {
                votes.iter().map(|v| v / n).collect()
            }
        }
        BaselineReadout::PlainAverage => support.iter().map(|s| s / n).collect(),
    };
    Some(scores)
}
