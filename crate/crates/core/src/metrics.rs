//! Summary series over a [`TrustLedger`].
//!
//! Every series has one entry per recorded epoch; `None` marks epochs where
//! nothing matched the selection. Epochs are numbered from 1, so entry `i`
//! belongs to epoch `i + 1`.

use alloc::vec::Vec;

use crate::dst::Interval;
use crate::ids::{AreaId, FactorId};
use crate::sim::{Role, TrustLedger};

pub type Series = Vec<Option<f64>>;

/// Ground-truth class of an area with respect to factor 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaKind {
    /// True interval is the first one.
    Healthy,
    /// Any other true interval.
    Unhealthy,
}

/// Which trust scheme a series is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Proposed,
    Baseline,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Mean entity trust of the users drawn with `role`.
pub fn role_trust(ledger: &TrustLedger, role: Role, scheme: Scheme) -> Series {
    let ids: Vec<_> = ledger.users.iter().filter(|u| u.role == role).map(|u| u.id).collect();
    ledger
        .epochs
        .iter()
        .map(|rec| {
            let table = match scheme {
                Scheme::Proposed => &rec.report.user_trust,
                Scheme::Baseline => &rec.baseline.as_ref()?.user_trust,
            };
            mean(ids.iter().filter_map(|id| table.get(id).copied()))
        })
        .collect()
}

/// Estimation error per epoch: the mean of `|trust - current true score|`
/// within each of the good and malicious groups, averaged over the groups
/// present so both weigh equally.
pub fn estimation_error(ledger: &TrustLedger) -> Series {
    ledger
        .epochs
        .iter()
        .map(|rec| {
            let epoch = rec.report.epoch;
            let group = |role: Role| {
                mean(ledger.users.iter().filter(|u| u.role == role).filter_map(|u| {
                    rec.report.user_trust.get(&u.id).map(|t| (t - u.score_at(epoch)).abs())
                }))
            };
            mean([group(Role::Good), group(Role::Malicious)].into_iter().flatten())
        })
        .collect()
}

/// Areas a data-trust series averages over: the hotspots of that kind when
/// the run has any, otherwise every area of that kind.
pub fn tracked_areas(ledger: &TrustLedger, kind: AreaKind) -> Vec<AreaId> {
    let of_kind = |a: &AreaId| {
        ledger.truth.get(*a, FactorId(0)).is_some_and(|iv| (iv == Interval(0)) == (kind == AreaKind::Healthy))
    };
    let hot: Vec<AreaId> = if ledger.config.placement.hotspot_share > 0.0 {
        ledger.hotspots.iter().copied().filter(of_kind).collect()
    } else {
        Vec::new()
    };
    if !hot.is_empty() {
        return hot;
    }
    (0..ledger.config.n_areas).map(AreaId).filter(of_kind).collect()
}

/// Mean mass on the true interval of factor 0 over the tracked areas that
/// received a fused result in each epoch.
pub fn true_interval_mass(ledger: &TrustLedger, kind: AreaKind, scheme: Scheme) -> Series {
    let areas = tracked_areas(ledger, kind);
    ledger
        .epochs
        .iter()
        .map(|rec| {
            mean(areas.iter().filter_map(|&a| {
                let truth = ledger.truth.get(a, FactorId(0))?;
                match scheme {
                    Scheme::Proposed => {
                        rec.report.areas.get(&(a, FactorId(0)))?.vector().map(|v| v.mass(truth))
                    }
                    Scheme::Baseline => {
                        rec.baseline.as_ref()?.areas.get(&(a, FactorId(0))).map(|v| v[truth.0])
                    }
                }
            }))
        })
        .collect()
}

/// Entry-wise mean over runs, skipping missing entries. The result is as
/// long as the longest input.
pub fn average(runs: &[Series]) -> Series {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len).map(|i| mean(runs.iter().filter_map(|r| r.get(i).copied().flatten()))).collect()
}

/// Mean of the present entries among the last `n`.
pub fn tail_mean(series: &Series, n: usize) -> Option<f64> {
    mean(series.iter().rev().take(n).flatten().copied())
}

/// First epoch after `after_epoch` from which the series stays within `tol`
/// of `target` through the end. Missing entries break the run.
pub fn convergence_epoch(series: &Series, target: f64, tol: f64, after_epoch: u64) -> Option<u64> {
    let mut start = None;
    for (i, x) in series.iter().enumerate() {
        let epoch = i as u64 + 1;
        if epoch <= after_epoch {
            continue;
        }
        match x {
            Some(v) if (v - target).abs() <= tol => {
                start.get_or_insert(epoch);
            }
            _ => start = None,
        }
    }
    start
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn averaging_and_tails() {
        let a = vec![Some(1.0), None, Some(3.0)];
        let b = vec![Some(3.0), Some(2.0)];
        assert_eq!(average(&[a.clone(), b]), vec![Some(2.0), Some(2.0), Some(3.0)]);
        assert_eq!(tail_mean(&a, 2), Some(3.0));
        assert_eq!(tail_mean(&a, 3), Some(2.0));
        assert_eq!(tail_mean(&vec![None, None], 2), None);
    }

    #[test]
    fn convergence_requires_staying() {
        let s = vec![Some(0.9), Some(0.1), Some(0.06), Some(0.2), Some(0.07), Some(0.05)];
        assert_eq!(convergence_epoch(&s, 0.05, 0.05, 0), Some(5));
        assert_eq!(convergence_epoch(&s, 0.05, 0.05, 5), Some(6));
        assert_eq!(convergence_epoch(&s, 0.9, 0.01, 0), None);
        let gap = vec![Some(0.05), None, Some(0.05)];
        assert_eq!(convergence_epoch(&gap, 0.05, 0.01, 0), Some(3));
    }
}
