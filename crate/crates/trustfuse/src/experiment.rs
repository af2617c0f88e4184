//! Sweep execution and seed-averaged summaries.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use trustfuse_core::metrics::{self, AreaKind, Scheme, Series};
use trustfuse_core::sim::{self, Role, SimError, TrustLedger};

use crate::scenario::{Cell, ExperimentSpec};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "TRUSTFUSE_THREADS";
/// Trailing epochs averaged into "final" values.
pub const FINAL_WINDOW: usize = 5;
/// Band around the expected score that counts as converged.
pub const CONVERGENCE_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cell pmu={pmu} f={f:?} seed={seed}: {source}")]
    Cell {
        pmu: f64,
        f: Option<f64>,
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A finished cell.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub cell: Cell,
    pub ledger: TrustLedger,
}

/// Worker count from [`THREADS_ENV`]; `None` leaves the choice to rayon.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every cell on a bounded pool. Results come back in cell order.
pub fn run_cells(spec: &ExperimentSpec) -> Result<Vec<CellRun>, ExperimentError> {
    spec.validate().map_err(|(field, message)| ExperimentError::Invalid { field, message })?;
    let cells = spec.cells();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let fail = |source| ExperimentError::Cell { pmu: cell.pmu, f: cell.f, seed: cell.seed, source };
                let cfg = spec.cell_config(cell).map_err(|m| fail(SimError::InvalidConfig(m)))?;
                let ledger = sim::run(&cfg).map_err(fail)?;
                Ok(CellRun { cell: *cell, ledger })
            })
            .collect()
    })
}

/// Runs sharing a (pmu, f) point, in seed order.
pub fn group_by_point(runs: &[CellRun]) -> Vec<(f64, Option<f64>, Vec<&CellRun>)> {
    let mut groups: Vec<(f64, Option<f64>, Vec<&CellRun>)> = Vec::new();
    for run in runs {
        match groups.iter_mut().find(|(p, f, _)| *p == run.cell.pmu && *f == run.cell.f) {
            Some((_, _, v)) => v.push(run),
            None => groups.push((run.cell.pmu, run.cell.f, vec![run])),
        }
    }
    groups
}

/// Named seed-averaged series of one scheme at one sweep point.
pub fn point_series(runs: &[&CellRun], scheme: Scheme) -> Vec<(&'static str, Series)> {
    let avg = |f: &dyn Fn(&TrustLedger) -> Series| {
        metrics::average(&runs.iter().map(|r| f(&r.ledger)).collect::<Vec<_>>())
    };
    let mut out = vec![
        ("good_trust", avg(&|l| metrics::role_trust(l, Role::Good, scheme))),
        ("malicious_trust", avg(&|l| metrics::role_trust(l, Role::Malicious, scheme))),
        ("ignorant_trust", avg(&|l| metrics::role_trust(l, Role::Ignorant, scheme))),
    ];
    if scheme == Scheme::Proposed {
        out.push(("estimation_error", avg(&metrics::estimation_error)));
    }
    out.push(("healthy_mass", avg(&|l| metrics::true_interval_mass(l, AreaKind::Healthy, scheme))));
    out.push(("unhealthy_mass", avg(&|l| metrics::true_interval_mass(l, AreaKind::Unhealthy, scheme))));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleValues {
    pub good: Option<f64>,
    pub malicious: Option<f64>,
    pub ignorant: Option<f64>,
}

/// Seed-averaged headline numbers of one (scheme, pmu, f) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scheme: &'static str,
    pub pmu: f64,
    pub f: f64,
    pub seeds: usize,
    /// Mean over the final epochs of the seed-averaged trust.
    pub final_trust: RoleValues,
    /// First epoch from which the seed-averaged trust stays near the
    /// role's score at the end of the run.
    pub convergence_epoch: RoleValues,
    pub estimation_error: Option<f64>,
    pub healthy_mass: Option<f64>,
    pub unhealthy_mass: Option<f64>,
    pub mean_queries_answered: f64,
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Proposed => "proposed",
        Scheme::Baseline => "baseline",
    }
}

/// Channel noise reported for a cell: the swept value, else the configured
/// false-positive rate.
pub fn cell_f(run: &CellRun) -> f64 {
    run.cell.f.unwrap_or(run.ledger.config.channel.f_p())
}

pub fn schemes(spec: &ExperimentSpec) -> Vec<Scheme> {
    let mut v = Vec::new();
    if spec.scheme.proposed() {
        v.push(Scheme::Proposed);
    }
    if spec.scheme.baseline() {
        v.push(Scheme::Baseline);
    }
    v
}

pub fn summarize(spec: &ExperimentSpec, runs: &[CellRun]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for (pmu, _, group) in group_by_point(runs) {
        let first = &group[0].ledger;
        let last_epoch = first.config.epochs;
        for scheme in schemes(spec) {
            let series = point_series(&group, scheme);
            let get = |name: &str| series.iter().find(|(n, _)| *n == name).map(|(_, s)| s);
            let tail = |name: &str| get(name).and_then(|s| metrics::tail_mean(s, FINAL_WINDOW));
            let converge = |role: Role, name: &str| {
                let user = first.users.iter().find(|u| u.role == role)?;
                let after = user.change.map_or(0, |(after, _)| after);
                metrics::convergence_epoch(get(name)?, user.score_at(last_epoch), CONVERGENCE_TOL, after)
                    .map(|e| e as f64)
            };
            out.push(CellSummary {
                scheme: scheme_name(scheme),
                pmu,
                f: cell_f(group[0]),
                seeds: group.len(),
                final_trust: RoleValues {
                    good: tail("good_trust"),
                    malicious: tail("malicious_trust"),
                    ignorant: tail("ignorant_trust"),
                },
                convergence_epoch: RoleValues {
                    good: converge(Role::Good, "good_trust"),
                    malicious: converge(Role::Malicious, "malicious_trust"),
                    ignorant: converge(Role::Ignorant, "ignorant_trust"),
                },
                estimation_error: tail("estimation_error"),
                healthy_mass: tail("healthy_mass"),
                unhealthy_mass: tail("unhealthy_mass"),
                mean_queries_answered: group
                    .iter()
                    .map(|r| r.ledger.epochs.iter().map(|e| f64::from(e.queries_answered)).sum::<f64>())
                    .sum::<f64>()
                    / group.len() as f64,
            });
        }
    }
    out
}
