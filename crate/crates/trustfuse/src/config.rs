//! TOML experiment files.
//!
//! Every key is optional; unset keys take the standard parameter values.
//! Unknown keys are rejected. Resolution order: the file's simulation
//! settings, then the scenario preset, then explicit `[experiment]` axes.
//!
//! ```toml
//! [experiment]
//! scenario = "fig7"
//! seeds = "0..20"        # or a list: [1, 2, 3]
//! scheme = "both"        # proposed | baseline | both
//!
//! [simulation]
//! n_users = 40
//! epochs = 30
//!
//! [trust]
//! levels = [0.05, 0.5, 0.95]
//! f_p = 0.2
//! f_n = 0.2
//!
//! [[factors]]
//! name = "pm25"
//! boundaries = [35.0]
//! labels = ["healthy", "unhealthy"]
//! class = "environmental-health"
//! ```

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use trustfuse_core::baseline::{BaselineParams, BaselineReadout};
use trustfuse_core::context::{
    ContextParams, SemanticTable, SpatialParams, TemporalParams, WeightClamp, WeightCoefficients,
};
use trustfuse_core::dst::Frame;
use trustfuse_core::engine::FactorSpec;
use trustfuse_core::entity::{ChannelParams, ScoreLevels};
use trustfuse_core::sim::{BehaviorChange, Placement, Role, SimConfig};
use trustfuse_core::FactorId;

use crate::scenario::{ExperimentSpec, Scenario, SchemeSelection};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.to_string() }
    }

    /// Dotted path of the offending key, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Seeds as an explicit list or a half-open range string `"a..b"`
/// (`"a..=b"` is inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSet {
    List(Vec<u64>),
    Range(String),
}

/// Parses `"a..b"`, `"a..=b"` or a single number.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed `{t}`: {e}"));
    if let Some((a, b)) = s.split_once("..=") {
        Ok((num(a)?..=num(b)?).collect())
    } else if let Some((a, b)) = s.split_once("..") {
        Ok((num(a)?..num(b)?).collect())
    } else {
        Ok(vec![num(s)?])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pmu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSelection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_users: u32,
    pub n_areas: u32,
    pub epochs: u64,
    pub m_per_epoch: u32,
    pub pmu: f64,
    pub ignorant_share: f64,
    pub seed: u64,
    /// Epochs of evidence kept; absent means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history_window: Option<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_users: d.n_users,
            n_areas: d.n_areas,
            epochs: d.epochs,
            m_per_epoch: d.m_per_epoch,
            pmu: d.pmu,
            ignorant_share: d.ignorant_share,
            seed: d.seed,
            history_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementSection {
    pub home_prob: f64,
    pub hotspot_share: f64,
    pub home_areas_per_user: u32,
}

impl Default for PlacementSection {
    fn default() -> Self {
        let p = Placement::default();
        Self { home_prob: p.home_prob, hotspot_share: p.hotspot_share, home_areas_per_user: p.home_areas_per_user }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleName {
    Good,
    Ignorant,
    Malicious,
}

impl From<RoleName> for Role {
    fn from(r: RoleName) -> Self {
        match r {
            RoleName::Good => Role::Good,
            RoleName::Ignorant => Role::Ignorant,
            RoleName::Malicious => Role::Malicious,
        }
    }
}

impl From<Role> for RoleName {
    fn from(r: Role) -> Self {
        match r {
            Role::Good => RoleName::Good,
            Role::Ignorant => RoleName::Ignorant,
            Role::Malicious => RoleName::Malicious,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorChangeSection {
    pub after_epoch: u64,
    pub new_score: f64,
    #[serde(default = "good")]
    pub role: RoleName,
}

fn good() -> RoleName {
    RoleName::Good
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustSection {
    pub levels: Vec<f64>,
    pub f_p: f64,
    pub f_n: f64,
}

impl Default for TrustSection {
    fn default() -> Self {
        let ch = ChannelParams::default();
        Self { levels: ScoreLevels::default().as_slice().to_vec(), f_p: ch.f_p(), f_n: ch.f_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialSection {
    pub high: f64,
    pub low: f64,
}

impl Default for SpatialSection {
    fn default() -> Self {
        let s = SpatialParams::default();
        Self { high: s.high(), low: s.low() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalSection {
    pub t_update: f64,
    pub t1: f64,
    pub t2: f64,
    pub high: f64,
    pub mid: f64,
    pub low: f64,
}

impl Default for TemporalSection {
    fn default() -> Self {
        let t = TemporalParams::default();
        Self { t_update: t.t_update(), t1: t.t1(), t2: t.t2(), high: t.high(), mid: t.mid(), low: t.low() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClampSection {
    pub enabled: bool,
    pub min: f64,
    pub max: f64,
}

impl Default for ClampSection {
    fn default() -> Self {
        let c = WeightClamp::default();
        Self { enabled: true, min: c.min(), max: c.max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemanticSection {
    pub user_classes: Vec<String>,
    pub factor_classes: Vec<String>,
    /// One row per user class, one column per factor class.
    pub weights: Vec<Vec<f64>>,
}

impl Default for SemanticSection {
    fn default() -> Self {
        Self::from(&SemanticTable::default())
    }
}

impl From<&SemanticTable> for SemanticSection {
    fn from(t: &SemanticTable) -> Self {
        Self {
            user_classes: t.user_classes().to_vec(),
            factor_classes: t.factor_classes().to_vec(),
            weights: t.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextSection {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub spatial: SpatialSection,
    pub temporal: TemporalSection,
    pub clamp: ClampSection,
    pub semantic: SemanticSection,
}

impl Default for ContextSection {
    fn default() -> Self {
        let c = WeightCoefficients::default();
        Self {
            alpha: c.alpha(),
            beta: c.beta(),
            theta: c.theta(),
            spatial: SpatialSection::default(),
            temporal: TemporalSection::default(),
            clamp: ClampSection::default(),
            semantic: SemanticSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSection {
    pub name: String,
    pub boundaries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub class: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutName {
    Normalized,
    PlainAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub lambda: f64,
    pub initial_trust: f64,
    pub readout: ReadoutName,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self::from(&BaselineParams::default())
    }
}

impl From<&BaselineParams> for BaselineSection {
    fn from(p: &BaselineParams) -> Self {
        let readout = match p.readout {
            BaselineReadout::Normalized => ReadoutName::Normalized,
            BaselineReadout::PlainAverage => ReadoutName::PlainAverage,
        };
        Self { lambda: p.lambda, initial_trust: p.initial_trust, readout }
    }
}

/// The on-disk document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub experiment: ExperimentSection,
    pub simulation: SimulationSection,
    pub placement: PlacementSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behavior_change: Option<BehaviorChangeSection>,
    pub trust: TrustSection,
    pub context: ContextSection,
    /// Absent means the single default factor.
    pub factors: Vec<FactorSection>,
    pub baseline: BaselineSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections always serialize")
    }

    /// Builds the simulation configuration from the file's sections.
    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let s = &self.simulation;
        let levels = ScoreLevels::new(self.trust.levels.clone()).map_err(|e| ConfigError::invalid("trust.levels", e))?;
        let channel =
            ChannelParams::new(self.trust.f_p, self.trust.f_n).map_err(|e| ConfigError::invalid("trust.f_p", e))?;
        let c = &self.context;
        let spatial =
            SpatialParams::new(c.spatial.high, c.spatial.low).map_err(|e| ConfigError::invalid("context.spatial", e))?;
        let t = &c.temporal;
        let temporal = TemporalParams::new(t.t_update, t.t1, t.t2, t.high, t.mid, t.low)
            .map_err(|e| ConfigError::invalid("context.temporal", e))?;
        let semantic = SemanticTable::new(
            c.semantic.user_classes.clone(),
            c.semantic.factor_classes.clone(),
            c.semantic.weights.clone(),
        )
        .map_err(|e| ConfigError::invalid("context.semantic", e))?;
        let coefficients =
            WeightCoefficients::new(c.alpha, c.beta, c.theta).map_err(|e| ConfigError::invalid("context.alpha", e))?;
        let clamp = if c.clamp.enabled {
            Some(WeightClamp::new(c.clamp.min, c.clamp.max).map_err(|e| ConfigError::invalid("context.clamp", e))?)
        } else {
            None
        };
        let factors = if self.factors.is_empty() {
            vec![trustfuse_core::sim::default_factor()]
        } else {
            self.factors
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let field = format!("factors[{i}]");
                    let frame = Frame::new(FactorId(i as u32), f.boundaries.clone(), f.labels.clone())
                        .map_err(|e| ConfigError::invalid(format!("{field}.boundaries"), e))?;
                    let class =
                        semantic.factor_class(&f.class).map_err(|e| ConfigError::invalid(format!("{field}.class"), e))?;
                    Ok(FactorSpec { name: f.name.clone(), frame, class })
                })
                .collect::<Result<_, ConfigError>>()?
        };
        let history_window = match s.history_window {
            None => None,
            Some(w) => Some(
                NonZeroUsize::new(w).ok_or_else(|| ConfigError::invalid("simulation.history_window", "must be at least 1"))?,
            ),
        };
        let b = &self.baseline;
        let baseline = BaselineParams {
            lambda: b.lambda,
            initial_trust: b.initial_trust,
            readout: match b.readout {
                ReadoutName::Normalized => BaselineReadout::Normalized,
                ReadoutName::PlainAverage => BaselineReadout::PlainAverage,
            },
        };
        if !baseline.is_valid() {
            return Err(ConfigError::invalid("baseline", "lambda and initial_trust must lie in [0, 1]"));
        }
        let cfg = SimConfig {
            n_users: s.n_users,
            n_areas: s.n_areas,
            epochs: s.epochs,
            m_per_epoch: s.m_per_epoch,
            levels,
            channel,
            context: ContextParams { spatial, temporal, semantic, coefficients, clamp },
            factors,
            pmu: s.pmu,
            ignorant_share: s.ignorant_share,
            placement: Placement {
                home_prob: self.placement.home_prob,
                hotspot_share: self.placement.hotspot_share,
                home_areas_per_user: self.placement.home_areas_per_user,
            },
            behavior_change: self.behavior_change.as_ref().map(|c| BehaviorChange {
                after_epoch: c.after_epoch,
                new_score: c.new_score,
                role: c.role.into(),
            }),
            history_window,
            baseline: Some(baseline),
            seed: s.seed,
        };
        validate_sim(&cfg)?;
        Ok(cfg)
    }

    /// Resolves the whole experiment.
    pub fn into_spec(self) -> Result<ExperimentSpec, ConfigError> {
        let base = self.sim_config()?;
        let baseline_params = base.baseline;
        let mut spec = ExperimentSpec { pmus: vec![base.pmu], seeds: vec![base.seed], base, ..Default::default() };
        spec.set_scheme(SchemeSelection::Proposed);
        let e = &self.experiment;
        if let Some(sc) = e.scenario {
            spec.apply_preset(sc);
        }
        if let Some(seeds) = &e.seeds {
            spec.seeds = match seeds {
                SeedSet::List(v) => v.clone(),
                SeedSet::Range(r) => parse_seed_range(r).map_err(|m| ConfigError::invalid("experiment.seeds", m))?,
            };
        }
        if let Some(p) = &e.pmu {
            spec.pmus = p.clone();
        }
        if let Some(f) = &e.f {
            spec.fs = Some(f.clone());
        }
        if let Some(s) = e.scheme {
            spec.set_scheme(s);
        }
        if spec.scheme.baseline() {
            spec.base.baseline = baseline_params;
        }
        if let Some(out) = &e.out {
            spec.out = out.clone();
        }
        spec.plot = e.plot;
        spec.validate().map_err(|(f, m)| ConfigError::invalid(f, m))?;
        Ok(spec)
    }

    /// The document that loads back to `spec`.
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        let mut file = Self::from_sim(&spec.base);
        file.experiment = ExperimentSection {
            scenario: Some(spec.scenario),
            seeds: Some(SeedSet::List(spec.seeds.clone())),
            pmu: Some(spec.pmus.clone()),
            f: spec.fs.clone(),
            scheme: Some(spec.scheme),
            out: Some(spec.out.clone()),
            plot: spec.plot,
        };
        file
    }

    /// Simulation sections describing `cfg`.
    pub fn from_sim(cfg: &SimConfig) -> Self {
        let ctx = &cfg.context;
        let t = &ctx.temporal;
        let clamp = match ctx.clamp {
            Some(c) => ClampSection { enabled: true, min: c.min(), max: c.max() },
            None => ClampSection { enabled: false, ..Default::default() },
        };
        let semantic = &ctx.semantic;
        Self {
            experiment: ExperimentSection {
                scheme: Some(if cfg.baseline.is_some() { SchemeSelection::Both } else { SchemeSelection::Proposed }),
                ..Default::default()
            },
            simulation: SimulationSection {
                n_users: cfg.n_users,
                n_areas: cfg.n_areas,
                epochs: cfg.epochs,
                m_per_epoch: cfg.m_per_epoch,
                pmu: cfg.pmu,
                ignorant_share: cfg.ignorant_share,
                seed: cfg.seed,
                history_window: cfg.history_window.map(NonZeroUsize::get),
            },
            placement: PlacementSection {
                home_prob: cfg.placement.home_prob,
                hotspot_share: cfg.placement.hotspot_share,
                home_areas_per_user: cfg.placement.home_areas_per_user,
            },
            behavior_change: cfg.behavior_change.map(|c| BehaviorChangeSection {
                after_epoch: c.after_epoch,
                new_score: c.new_score,
                role: c.role.into(),
            }),
            trust: TrustSection { levels: cfg.levels.as_slice().to_vec(), f_p: cfg.channel.f_p(), f_n: cfg.channel.f_n() },
            context: ContextSection {
                alpha: ctx.coefficients.alpha(),
                beta: ctx.coefficients.beta(),
                theta: ctx.coefficients.theta(),
                spatial: SpatialSection { high: ctx.spatial.high(), low: ctx.spatial.low() },
                temporal: TemporalSection {
                    t_update: t.t_update(),
                    t1: t.t1(),
                    t2: t.t2(),
                    high: t.high(),
                    mid: t.mid(),
                    low: t.low(),
                },
                clamp,
                semantic: SemanticSection::from(semantic),
            },
            factors: cfg
                .factors
                .iter()
                .map(|f| FactorSection {
                    name: f.name.clone(),
                    boundaries: f.frame.boundaries().to_vec(),
                    labels: f.frame.labels().map(<[String]>::to_vec),
                    class: semantic.factor_classes()[usize::from(f.class.0)].clone(),
                })
                .collect(),
            baseline: cfg.baseline.as_ref().map(BaselineSection::from).unwrap_or_default(),
        }
    }
}

/// Maps simulator range checks onto config keys.
fn validate_sim(cfg: &SimConfig) -> Result<(), ConfigError> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    let checks: [(&str, bool, String); 8] = [
        ("simulation.n_users", cfg.n_users >= 1, "must be at least 1".into()),
        ("simulation.n_areas", cfg.n_areas >= 1, "must be at least 1".into()),
        ("simulation.m_per_epoch", cfg.m_per_epoch >= 1, "must be at least 1".into()),
        ("simulation.pmu", unit(cfg.pmu), format!("{} outside [0, 1]", cfg.pmu)),
        (
            "simulation.ignorant_share",
            unit(cfg.ignorant_share) && cfg.pmu + cfg.ignorant_share <= 1.0 + 1e-12,
            format!("{} outside [0, 1 - pmu]", cfg.ignorant_share),
        ),
        ("placement.home_prob", unit(cfg.placement.home_prob), format!("{} outside [0, 1]", cfg.placement.home_prob)),
        (
            "placement.hotspot_share",
            unit(cfg.placement.hotspot_share),
            format!("{} outside [0, 1]", cfg.placement.hotspot_share),
        ),
        (
            "placement.home_areas_per_user",
            (1..=cfg.n_areas).contains(&cfg.placement.home_areas_per_user),
            format!("must lie in 1..={}", cfg.n_areas),
        ),
    ];
    for (field, ok, message) in checks {
        if !ok {
            return Err(ConfigError::invalid(field, message));
        }
    }
    cfg.validate().map_err(|e| ConfigError::invalid("behavior_change", e))
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    FileConfig::parse(&text)?.into_spec()
}
