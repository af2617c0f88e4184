use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use trustfuse::config::{self, parse_seed_range};
use trustfuse::{load_config, output, run_cells, ExperimentSpec, FileConfig, Scenario, SchemeSelection};

/// Trust-managed crowdsensing simulator.
///
/// Runs a scenario preset or a config file over a sweep of malicious-user
/// shares, channel noise levels and seeds, and writes CSV and JSON results.
/// TRUSTFUSE_THREADS caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "trustfuse", version)]
struct Args {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset; applied on top of the config file.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed range `a..b` (half-open) or `a..=b`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated malicious-user shares.
    #[arg(long, value_delimiter = ',')]
    pmu: Option<Vec<f64>>,
    /// Comma-separated symmetric channel noise levels.
    #[arg(long, value_delimiter = ',')]
    f: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeSelection>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Observations per factor per user per epoch.
    #[arg(long)]
    m_per_epoch: Option<u32>,
    /// Also write a gnuplot script.
    #[arg(long)]
    plot: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> Result<ExperimentSpec, String> {
    let mut spec = match &args.config {
        Some(path) => load_config(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => ExperimentSpec::default(),
    };
    if let Some(sc) = args.scenario {
        spec.apply_preset(sc);
    }
    if let Some(s) = args.seed {
        spec.seeds = vec![s];
    }
    if let Some(r) = &args.seeds {
        spec.seeds = parse_seed_range(r).map_err(|e| format!("--seeds: {e}"))?;
    }
    if let Some(p) = &args.pmu {
        spec.pmus = p.clone();
    }
    if let Some(f) = &args.f {
        spec.fs = Some(f.clone());
    }
    if let Some(s) = args.scheme {
        spec.set_scheme(s);
    }
    if let Some(o) = &args.out {
        spec.out = o.clone();
    }
    if let Some(m) = args.m_per_epoch {
        spec.base.m_per_epoch = m;
    }
    spec.plot |= args.plot;
    spec.validate().map_err(|(field, message)| format!("invalid `{field}`: {message}"))?;
    // re-parse so flag overrides get the same checks as file values
    FileConfig::parse(&FileConfig::from_spec(&spec).to_toml())
        .and_then(config::FileConfig::into_spec)
        .map_err(|e| e.to_string())?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match resolve(&args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", FileConfig::from_spec(&spec).to_toml());
        return ExitCode::SUCCESS;
    }
    let result = run_cells(&spec).and_then(|runs| output::write_all(&spec, &runs, &spec.out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
