//! Experiment descriptions and the named presets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use trustfuse_core::baseline::BaselineParams;
use trustfuse_core::entity::ChannelParams;
use trustfuse_core::sim::{BehaviorChange, Role, SimConfig};

/// Named experiment layouts. Each preset pins the axes and simulation
/// settings of one study; `Custom` leaves everything to the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Good-user trust over time.
    Fig3,
    /// Malicious-user trust over time.
    Fig4,
    /// Trust estimation error against channel noise.
    Fig5,
    /// Good users turn malicious after epoch 10.
    Fig6a,
    /// Good users turn malicious after epoch 20.
    Fig6b,
    /// Healthy-area data trust across malicious shares.
    Fig7,
    /// Unhealthy-area data trust across malicious shares.
    Fig8,
    /// Good-user trust, proposed against comparison scheme.
    Fig9,
    /// Same as `fig9` at the full malicious-share sweep.
    Fig10,
    /// Data trust, proposed against comparison scheme.
    Fig11,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig5,
        Scenario::Fig6a,
        Scenario::Fig6b,
        Scenario::Fig7,
        Scenario::Fig8,
        Scenario::Fig9,
        Scenario::Fig10,
        Scenario::Fig11,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::Fig5 => "fig5",
            Scenario::Fig6a => "fig6a",
            Scenario::Fig6b => "fig6b",
            Scenario::Fig7 => "fig7",
            Scenario::Fig8 => "fig8",
            Scenario::Fig9 => "fig9",
            Scenario::Fig10 => "fig10",
            Scenario::Fig11 => "fig11",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Which trust schemes a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeSelection {
    #[default]
    Proposed,
    Baseline,
    Both,
}

impl SchemeSelection {
    pub fn proposed(self) -> bool {
        self != SchemeSelection::Baseline
    }

    pub fn baseline(self) -> bool {
        self != SchemeSelection::Proposed
    }
}

pub const PMU_SWEEP: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
pub const F_SWEEP: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.55, 0.6];
pub const DEFAULT_SEEDS: std::ops::Range<u64> = 0..20;
pub const FLIP_RUN_EPOCHS: u64 = 200;

/// A fully resolved experiment: base configuration plus sweep axes.
///
/// Every combination of `pmus`, `fs` and `seeds` is one cell; a cell
/// overrides the base `pmu`, the channel (symmetric, when `fs` is set) and
/// the seed. `base.baseline` is set exactly when the scheme includes the
/// comparison scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub base: SimConfig,
    pub pmus: Vec<f64>,
    pub fs: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub scheme: SchemeSelection,
    pub out: PathBuf,
    pub plot: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let base = SimConfig::default();
        Self {
            scenario: Scenario::Custom,
            pmus: vec![base.pmu],
            fs: None,
            seeds: vec![base.seed],
            scheme: SchemeSelection::Proposed,
            out: PathBuf::from("results"),
            plot: false,
            base,
        }
    }
}

impl ExperimentSpec {
    /// Defaults with the scenario's preset applied.
    pub fn preset(scenario: Scenario) -> Self {
        let mut spec = Self::default();
        spec.apply_preset(scenario);
        spec
    }

    /// Pins the axes and settings the scenario defines, keeping the rest of
    /// the base configuration.
    pub fn apply_preset(&mut self, scenario: Scenario) {
        self.scenario = scenario;
        if scenario == Scenario::Custom {
            return;
        }
        self.seeds = DEFAULT_SEEDS.collect();
        self.fs = None;
        self.pmus = vec![0.1];
        self.base.epochs = 30;
        self.base.behavior_change = None;
        self.base.placement.hotspot_share = 0.0;
        self.set_scheme(SchemeSelection::Proposed);
        match scenario {
            Scenario::Fig3 | Scenario::Fig4 | Scenario::Custom => {}
            Scenario::Fig5 => self.fs = Some(F_SWEEP.to_vec()),
            Scenario::Fig6a | Scenario::Fig6b => {
                let after_epoch = if scenario == Scenario::Fig6a { 10 } else { 20 };
                self.base.epochs = FLIP_RUN_EPOCHS;
                self.base.behavior_change =
                    Some(BehaviorChange { after_epoch, new_score: self.base.levels.lowest(), role: Role::Good });
            }
            Scenario::Fig7 | Scenario::Fig8 | Scenario::Fig9 | Scenario::Fig10 | Scenario::Fig11 => {
                self.pmus = PMU_SWEEP.to_vec();
                self.base.placement.hotspot_share = 1.0;
                if matches!(scenario, Scenario::Fig9 | Scenario::Fig10 | Scenario::Fig11) {
                    self.set_scheme(SchemeSelection::Both);
                }
            }
        }
    }

    pub fn set_scheme(&mut self, scheme: SchemeSelection) {
        self.scheme = scheme;
        if scheme.baseline() {
            self.base.baseline.get_or_insert_with(BaselineParams::default);
        } else {
            self.base.baseline = None;
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let fs: Vec<Option<f64>> = match &self.fs {
            Some(fs) => fs.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut cells = Vec::new();
        for &pmu in &self.pmus {
            for &f in &fs {
                for &seed in &self.seeds {
                    cells.push(Cell { pmu, f, seed });
                }
            }
        }
        cells
    }

    /// Simulation configuration of one cell.
    pub fn cell_config(&self, cell: &Cell) -> Result<SimConfig, String> {
        let mut cfg = self.base.clone();
        cfg.pmu = cell.pmu;
        cfg.seed = cell.seed;
        if let Some(f) = cell.f {
            cfg.channel = ChannelParams::symmetric(f).map_err(|e| format!("f = {f}: {e}"))?;
        }
        Ok(cfg)
    }

    /// Checks the sweep axes; the base configuration is checked per cell.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.pmus.is_empty() {
            return Err(("experiment.pmu", "sweep list is empty".into()));
        }
        if let Some(p) = self.pmus.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(("experiment.pmu", format!("{p} outside [0, 1]")));
        }
        if let Some(fs) = &self.fs {
            if fs.is_empty() {
                return Err(("experiment.f", "sweep list is empty".into()));
            }
            if let Some(f) = fs.iter().find(|f| !(0.0..1.0).contains(*f)) {
                return Err(("experiment.f", format!("{f} outside [0, 1)")));
            }
        }
        if self.seeds.is_empty() {
            return Err(("experiment.seeds", "seed list is empty".into()));
        }
        Ok(())
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub pmu: f64,
    pub f: Option<f64>,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("fig12".parse::<Scenario>().is_err());
    }

    #[test]
    fn presets_pin_axes() {
        let fig5 = ExperimentSpec::preset(Scenario::Fig5);
        assert_eq!(fig5.fs.as_deref(), Some(&F_SWEEP[..]));
        assert_eq!(fig5.cells().len(), 8 * 20);

        let fig6b = ExperimentSpec::preset(Scenario::Fig6b);
        assert_eq!(fig6b.base.epochs, 200);
        assert_eq!(fig6b.base.behavior_change.unwrap().after_epoch, 20);

        let fig11 = ExperimentSpec::preset(Scenario::Fig11);
        assert_eq!(fig11.scheme, SchemeSelection::Both);
        assert!(fig11.base.baseline.is_some());
        assert_eq!(fig11.pmus, PMU_SWEEP);
        assert_eq!(fig11.base.placement.hotspot_share, 1.0);

        let fig3 = ExperimentSpec::preset(Scenario::Fig3);
        assert!(fig3.base.baseline.is_none());
        assert_eq!(fig3.cells().len(), 20);
    }

    #[test]
    fn cells_override_channel_and_seed() {
        let spec = ExperimentSpec::preset(Scenario::Fig5);
        let cell = spec.cells()[25];
        let cfg = spec.cell_config(&cell).unwrap();
        assert_eq!(cfg.seed, cell.seed);
        assert_eq!(cfg.channel.f_p(), cell.f.unwrap());
        assert_eq!(cfg.channel.f_n(), cell.f.unwrap());
    }
}
