//! Result files.
//!
//! | file | columns |
//! |------|---------|
//! | `entity_trust.csv` | `epoch,user,true_score,estimated_trust,scheme,seed,pmu,f` |
//! | `data_trust.csv` | `epoch,area,factor,interval,mass,scheme,seed,pmu` |
//! | `series.csv` | `epoch,series,scheme,pmu,f,value` (seed-averaged) |
//! | `summary.json` | `meta` block plus one entry per (scheme, pmu, f) |
//! | `plot.gp` | optional gnuplot script over `series.csv` |
//!
//! All content except `meta.generated_at` is a pure function of the
//! experiment, so reruns produce identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use trustfuse_core::engine::AreaOutcome;
use trustfuse_core::metrics::Scheme;

use crate::config::FileConfig;
use crate::experiment::{self, cell_f, scheme_name, CellRun, CellSummary, ExperimentError};
use crate::scenario::{ExperimentSpec, Scenario};

pub const ENTITY_TRUST_CSV: &str = "entity_trust.csv";
pub const DATA_TRUST_CSV: &str = "data_trust.csv";
pub const SERIES_CSV: &str = "series.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLOT_SCRIPT: &str = "plot.gp";

const BASELINE_NOTE: &str = "the baseline scheme is a reconstruction: leave-one-out majority agreement folded into \
                             trust by an exponential moving average, data trust read out as supporter trust mass";

#[derive(Serialize)]
struct EntityRow {
    epoch: u64,
    user: u32,
    true_score: f64,
    estimated_trust: f64,
    scheme: &'static str,
    seed: u64,
    pmu: f64,
    f: f64,
}

#[derive(Serialize)]
struct DataRow {
    epoch: u64,
    area: u32,
    factor: u32,
    interval: usize,
    mass: f64,
    scheme: &'static str,
    seed: u64,
    pmu: f64,
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    epoch: usize,
    series: &'a str,
    scheme: &'static str,
    pmu: f64,
    f: f64,
    value: f64,
}

pub fn write_entity_trust<W: Write>(spec: &ExperimentSpec, runs: &[CellRun], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for run in runs {
        let f = cell_f(run);
        for rec in &run.ledger.epochs {
            let epoch = rec.report.epoch;
            for scheme in experiment::schemes(spec) {
                let table = match scheme {
                    Scheme::Proposed => &rec.report.user_trust,
                    Scheme::Baseline => match &rec.baseline {
                        Some(b) => &b.user_trust,
                        None => continue,
                    },
                };
                for user in &run.ledger.users {
                    let Some(&trust) = table.get(&user.id) else { continue };
                    w.serialize(EntityRow {
                        epoch,
                        user: user.id.0,
                        true_score: user.score_at(epoch),
                        estimated_trust: trust,
                        scheme: scheme_name(scheme),
                        seed: run.cell.seed,
                        pmu: run.cell.pmu,
                        f,
                    })?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows for every interval of every fused area. Areas whose fusion hit
/// total conflict have no rows.
pub fn write_data_trust<W: Write>(spec: &ExperimentSpec, runs: &[CellRun], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for run in runs {
        for rec in &run.ledger.epochs {
            let epoch = rec.report.epoch;
            let mut emit = |scheme, area: u32, factor: u32, masses: &[f64]| -> Result<(), csv::Error> {
                for (interval, &mass) in masses.iter().enumerate() {
                    w.serialize(DataRow {
                        epoch,
                        area,
                        factor,
                        interval,
                        mass,
                        scheme: scheme_name(scheme),
                        seed: run.cell.seed,
                        pmu: run.cell.pmu,
                    })?;
                }
                Ok(())
            };
            if spec.scheme.proposed() {
                for (&(a, k), outcome) in &rec.report.areas {
                    if let AreaOutcome::Fused(v) = outcome {
                        emit(Scheme::Proposed, a.0, k.0, v.masses())?;
                    }
                }
            }
            if let Some(b) = rec.baseline.as_ref().filter(|_| spec.scheme.baseline()) {
                for (&(a, k), scores) in &b.areas {
                    emit(Scheme::Baseline, a.0, k.0, scores)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_series<W: Write>(spec: &ExperimentSpec, runs: &[CellRun], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for (pmu, _, group) in experiment::group_by_point(runs) {
        let f = cell_f(group[0]);
        for scheme in experiment::schemes(spec) {
            for (name, series) in experiment::point_series(&group, scheme) {
                for (i, v) in series.iter().enumerate() {
                    if let Some(value) = *v {
                        w.serialize(SeriesRow { epoch: i + 1, series: name, scheme: scheme_name(scheme), pmu, f, value })?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    generated_at: u64,
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    scheme: crate::scenario::SchemeSelection,
    seeds: &'a [u64],
    baseline_note: Option<&'static str>,
    config: String,
}

#[derive(Serialize)]
struct Summary<'a> {
    meta: Meta<'a>,
    cells: &'a [CellSummary],
}

pub fn write_summary<W: Write>(spec: &ExperimentSpec, summaries: &[CellSummary], out: W) -> Result<(), ExperimentError> {
    let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let summary = Summary {
        meta: Meta {
            generated_at,
            tool: "trustfuse",
            version: env!("CARGO_PKG_VERSION"),
            scenario: spec.scenario.name(),
            scheme: spec.scheme,
            seeds: &spec.seeds,
            baseline_note: spec.scheme.baseline().then_some(BASELINE_NOTE),
            config: FileConfig::from_spec(spec).to_toml(),
        },
        cells: summaries,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Series a scenario is about.
pub fn headline_series(scenario: Scenario) -> &'static str {
    match scenario {
        Scenario::Fig4 => "malicious_trust",
        Scenario::Fig5 => "estimation_error",
        Scenario::Fig7 | Scenario::Fig11 => "healthy_mass",
        Scenario::Fig8 => "unhealthy_mass",
        _ => "good_trust",
    }
}

pub fn write_plot_script<W: Write>(spec: &ExperimentSpec, summaries: &[CellSummary], mut out: W) -> std::io::Result<()> {
    let series = headline_series(spec.scenario);
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set terminal pngcairo size 900,600")?;
    writeln!(out, "set output '{}.png'", spec.scenario)?;
    writeln!(out, "set xlabel 'epoch'")?;
    writeln!(out, "set ylabel '{series}'")?;
    writeln!(out, "set yrange [0:1]")?;
    writeln!(out, "set key outside right")?;
    let lines: Vec<String> = summaries
        .iter()
        .map(|s| {
            format!(
                "'{SERIES_CSV}' every ::1 using 1:((strcol(2) eq '{series}' && strcol(3) eq '{sch}' && $4 == {pmu} && $5 == {f}) ? $6 : 1/0) \
                 with lines title '{sch} pmu={pmu} f={f}'",
                sch = s.scheme,
                pmu = s.pmu,
                f = s.f,
            )
        })
        .collect();
    writeln!(out, "plot {}", lines.join(", \\\n     "))?;
    Ok(())
}

/// Writes every output file into `dir`, returning the paths written.
pub fn write_all(spec: &ExperimentSpec, runs: &[CellRun], dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let open = |name: &str| -> Result<(PathBuf, BufWriter<File>), ExperimentError> {
        let path = dir.join(name);
        Ok((path.clone(), BufWriter::new(File::create(path)?)))
    };
    let mut written = Vec::new();

    let (p, w) = open(ENTITY_TRUST_CSV)?;
    write_entity_trust(spec, runs, w)?;
    written.push(p);
    let (p, w) = open(DATA_TRUST_CSV)?;
    write_data_trust(spec, runs, w)?;
    written.push(p);
    let (p, w) = open(SERIES_CSV)?;
    write_series(spec, runs, w)?;
    written.push(p);

    let summaries = experiment::summarize(spec, runs);
    let (p, mut w) = open(SUMMARY_JSON)?;
    write_summary(spec, &summaries, &mut w)?;
    w.flush()?;
    written.push(p);
    if spec.plot {
        let (p, mut w) = open(PLOT_SCRIPT)?;
        write_plot_script(spec, &summaries, &mut w)?;
        w.flush()?;
        written.push(p);
    }
    Ok(written)
}
