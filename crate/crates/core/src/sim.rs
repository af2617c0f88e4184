//! Seeded crowdsensing simulator.
//!
//! A run draws a population and a static ground truth, then for every epoch
//! moves each user to one area, samples one behavior per user, synthesizes
//! `m_per_epoch` observations per factor, passes each through the evaluation
//! channel and feeds the engine. The comparison scheme, when enabled, sees
//! the identical observation stream.
//!
//! Randomness comes from one ChaCha8 generator per run split into streams:
//! population, ground truth, and one stream per user. A user's draws never
//! depend on another user's, so reordering users cannot change the outcome.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baseline::{self, BaselineParams, BaselineState, Report};
use crate::context::{ContextParams, SemanticTable, UserClass};
use crate::dst::{quantize, Frame, Interval};
use crate::engine::{Engine, EngineConfig, EngineError, EpochReport, FactorSpec, Observation, UserProfile};
use crate::entity::{ChannelParams, ScoreLevels, Verdict};
use crate::ids::{AreaId, FactorId, UserId};

const STREAM_POPULATION: u64 = 0;
const STREAM_TRUTH: u64 = 1;
const STREAM_USER_BASE: u64 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("engine failure in epoch {epoch}: {source}")]
    Engine {
        epoch: u64,
        #[source]
        source: EngineError,
    },
}

/// Where users go each epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    /// Probability of visiting one of the user's home areas.
    pub home_prob: f64,
    /// Share of away visits that go to a hotspot area instead of a uniformly
    /// chosen one.
    pub hotspot_share: f64,
    pub home_areas_per_user: u32,
}

impl Default for Placement {
    fn default() -> Self {
        Self { home_prob: 0.5, hotspot_share: 0.0, home_areas_per_user: 1 }
    }
}

/// Population segment a user is drawn into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Good,
    Ignorant,
    Malicious,
}

/// A sudden switch of true score for every user of one role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorChange {
    /// Last epoch with the original score.
    pub after_epoch: u64,
    pub new_score: f64,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_users: u32,
    pub n_areas: u32,
    pub epochs: u64,
    pub m_per_epoch: u32,
    pub levels: ScoreLevels,
    pub channel: ChannelParams,
    pub context: ContextParams,
    pub factors: Vec<FactorSpec>,
    pub pmu: f64,
    pub ignorant_share: f64,
    pub placement: Placement,
    pub behavior_change: Option<BehaviorChange>,
    pub history_window: Option<NonZeroUsize>,
    /// Runs the comparison scheme alongside when set.
    pub baseline: Option<BaselineParams>,
    pub seed: u64,
}

/// Single factor with a two-interval frame cut at 35.
pub fn default_factor() -> FactorSpec {
    let frame = Frame::new(FactorId(0), alloc::vec![35.0], Some(alloc::vec!["healthy".into(), "unhealthy".into()]))
        .expect("static frame is valid");
    FactorSpec { name: "pm25".into(), frame, class: SemanticTable::ENVIRONMENTAL_HEALTH }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_users: 40,
            n_areas: 100,
            epochs: 30,
            m_per_epoch: 1,
            levels: ScoreLevels::default(),
            channel: ChannelParams::default(),
            context: ContextParams::standard(),
            factors: alloc::vec![default_factor()],
            pmu: 0.1,
            ignorant_share: 0.0,
            placement: Placement::default(),
            behavior_change: None,
            history_window: None,
            baseline: None,
            seed: 0,
        }
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_users == 0 {
            return bad("n_users must be at least 1".into());
        }
        if self.n_areas == 0 {
            return bad("n_areas must be at least 1".into());
        }
        if self.m_per_epoch == 0 {
            return bad("m_per_epoch must be at least 1".into());
        }
        if self.factors.is_empty() {
            return bad("at least one factor is required".into());
        }
        for (i, f) in self.factors.iter().enumerate() {
            if f.frame.factor() != FactorId(i as u32) {
                return bad(format!("factor {i} has frame id {}", f.frame.factor()));
            }
            if usize::from(f.class.0) >= self.context.semantic.factor_classes().len() {
                return bad(format!("factor {i} has unknown class {}", f.class.0));
            }
        }
        if !unit(self.pmu) {
            return bad(format!("pmu {} outside [0, 1]", self.pmu));
        }
        if !unit(self.ignorant_share) || self.pmu + self.ignorant_share > 1.0 + 1e-12 {
            return bad(format!("ignorant_share {} outside [0, 1 - pmu]", self.ignorant_share));
        }
        let p = &self.placement;
        if !unit(p.home_prob) || !unit(p.hotspot_share) {
            return bad("placement probabilities must lie in [0, 1]".into());
        }
        if p.home_areas_per_user == 0 || p.home_areas_per_user > self.n_areas {
            return bad(format!("home_areas_per_user must lie in 1..={}", self.n_areas));
        }
        if let Some(c) = &self.behavior_change {
            if !unit(c.new_score) {
                return bad(format!("behavior change score {} outside [0, 1]", c.new_score));
            }
            if c.after_epoch > self.epochs {
                return bad(format!("behavior change after epoch {} beyond run of {}", c.after_epoch, self.epochs));
            }
        }
        if let Some(b) = &self.baseline {
            if !b.is_valid() {
                return bad("baseline lambda and initial trust must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            levels: self.levels.clone(),
            channel: self.channel,
            context: self.context.clone(),
            factors: self.factors.clone(),
            history_window: self.history_window,
        }
    }

    fn count(share: f64, n: u32) -> u32 {
        // the epsilon absorbs products such as 0.7 * 40 landing just below 28
        ((share * f64::from(n) + 1e-9) as u32).min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub id: UserId,
    pub role: Role,
    /// Probability of a correct observation before any change.
    pub true_score: f64,
    pub class: UserClass,
    pub home_areas: Vec<AreaId>,
    /// Epoch after which `.1` replaces the true score.
    pub change: Option<(u64, f64)>,
}

impl UserSpec {
    pub fn score_at(&self, epoch: u64) -> f64 {
        match self.change {
            Some((after, s)) if epoch > after => s,
            _ => self.true_score,
        }
    }

    pub fn profile(&self) -> UserProfile {
        UserProfile { id: self.id, class: self.class, home_areas: self.home_areas.clone() }
    }
}

/// True interval of every (area, factor) pair; fixed for the whole run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth(pub BTreeMap<(AreaId, FactorId), Interval>);

impl GroundTruth {
    pub fn get(&self, area: AreaId, factor: FactorId) -> Option<Interval> {
        self.0.get(&(area, factor)).copied()
    }

    pub fn generate(cfg: &SimConfig) -> Self {
        let mut rng = stream(cfg.seed, STREAM_TRUTH);
        let mut map = BTreeMap::new();
        for a in 0..cfg.n_areas {
            for (k, f) in cfg.factors.iter().enumerate() {
                map.insert((AreaId(a), FactorId(k as u32)), Interval(rng.random_range(0..f.frame.size())));
            }
        }
        Self(map)
    }

    /// For each interval of factor 0, the lowest-numbered area holding it.
    pub fn hotspots(&self) -> Vec<AreaId> {
        let mut first: BTreeMap<Interval, AreaId> = BTreeMap::new();
        for (&(area, factor), &iv) in &self.0 {
            if factor == FactorId(0) {
                first.entry(iv).or_insert(area);
            }
        }
        first.into_values().collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws the roster: `⌊pmu·N⌋` malicious users at the lowest score level,
/// `⌊ignorant_share·N⌋` at the middle level, the rest at the highest.
pub fn generate_population(cfg: &SimConfig) -> Vec<UserSpec> {
    let mut rng = stream(cfg.seed, STREAM_POPULATION);
    let n = cfg.n_users;
    let n_mal = SimConfig::count(cfg.pmu, n);
    let n_ign = SimConfig::count(cfg.ignorant_share, n).min(n - n_mal);
    let mut roles: Vec<Role> = (0..n)
        .map(|i| match i {
            i if i < n_mal => Role::Malicious,
            i if i < n_mal + n_ign => Role::Ignorant,
            _ => Role::Good,
        })
        .collect();
    roles.shuffle(&mut rng);

    let levels = cfg.levels.as_slice();
    let n_classes = cfg.context.semantic.user_classes().len() as u16;
    roles
        .into_iter()
        .enumerate()
        .map(|(i, role)| {
            let true_score = match role {
                Role::Good => cfg.levels.highest(),
                Role::Malicious => cfg.levels.lowest(),
                Role::Ignorant => levels[levels.len() / 2],
            };
            let class = UserClass(rng.random_range(0..n_classes));
            let mut home_areas: Vec<AreaId> = Vec::new();
            while home_areas.len() < cfg.placement.home_areas_per_user as usize {
                let a = AreaId(rng.random_range(0..cfg.n_areas));
                if !home_areas.contains(&a) {
                    home_areas.push(a);
                }
            }
            home_areas.sort_unstable();
            let change = cfg.behavior_change.filter(|c| c.role == role).map(|c| (c.after_epoch, c.new_score));
            UserSpec { id: UserId(i as u32), role, true_score, class, home_areas, change }
        })
        .collect()
}

/// Bernoulli draw of this epoch's behavior: correct with the user's current
/// true score.
pub fn sample_behavior<R: Rng + ?Sized>(user: &UserSpec, epoch: u64, rng: &mut R) -> Verdict {
    if rng.random::<f64>() < user.score_at(epoch) {
        Verdict::Correct
    } else {
        Verdict::Wrong
    }
}

/// Interval an observation reports: the truth when behaving correctly,
/// otherwise uniform over the remaining intervals.
pub fn reported_interval<R: Rng + ?Sized>(behavior: Verdict, truth: Interval, size: usize, rng: &mut R) -> Interval {
    match behavior {
        Verdict::Correct => truth,
        Verdict::Wrong => {
            let j = rng.random_range(0..size - 1);
            Interval(if j >= truth.0 { j + 1 } else { j })
        }
    }
}

/// A value inside `interval`. Open-ended intervals are cut at one padding
/// width beyond the outermost boundary.
pub fn value_in<R: Rng + ?Sized>(interval: Interval, frame: &Frame, rng: &mut R) -> f64 {
    let b = frame.boundaries();
    let (first, last) = (b[0], b[b.len() - 1]);
    let pad = if b.len() > 1 { last - first } else { first.abs().max(1.0) };
    let (lo, hi) = frame.bounds(interval);
    let lo = if lo.is_finite() { lo } else { first - pad };
    let hi = if hi.is_finite() { hi } else { last + pad };
    let v = lo + rng.random::<f64>() * (hi - lo);
    // rounding can land on the excluded upper edge
    if quantize(v, frame) == interval {
        v
    } else {
        lo
    }
}

/// One synthetic observation by `user` in `area` for `factor`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_observation<R: Rng + ?Sized>(
    user: &UserSpec,
    area: AreaId,
    factor: &FactorSpec,
    behavior: Verdict,
    truth: &GroundTruth,
    epoch: u64,
    seq: u32,
    t_update: f64,
    rng: &mut R,
) -> Observation {
    let f = factor.frame.factor();
    let true_iv = truth.get(area, f).expect("ground truth covers every pair");
    let iv = reported_interval(behavior, true_iv, factor.frame.size(), rng);
    let value = value_in(iv, &factor.frame, rng);
    let timestamp = rng.random::<f64>() * t_update;
    Observation { user: user.id, area, factor: f, value, timestamp, seq, epoch }
}

/// Passes a behavior through the evaluation channel.
pub fn channel_evaluate<R: Rng + ?Sized>(behavior: Verdict, ch: &ChannelParams, rng: &mut R) -> Verdict {
    let u = rng.random::<f64>();
    match behavior {
        Verdict::Correct if u < ch.f_p() => Verdict::Wrong,
        Verdict::Correct => Verdict::Correct,
        Verdict::Wrong if u < ch.f_n() => Verdict::Correct,
        Verdict::Wrong => Verdict::Wrong,
    }
}

/// Comparison-scheme state after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEpoch {
    pub user_trust: BTreeMap<UserId, f64>,
    pub areas: BTreeMap<(AreaId, FactorId), Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub report: EpochReport,
    /// Queries answered with a fused vector before this epoch's ingest.
    pub queries_answered: u32,
    pub baseline: Option<BaselineEpoch>,
}

/// Full result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustLedger {
    pub config: SimConfig,
    pub users: Vec<UserSpec>,
    pub truth: GroundTruth,
    pub hotspots: Vec<AreaId>,
    pub epochs: Vec<EpochRecord>,
}

impl TrustLedger {
    pub fn user(&self, id: UserId) -> Option<&UserSpec> {
        self.users.get(id.0 as usize).filter(|u| u.id == id)
    }
}

/// Runs the configured experiment.
pub fn run(cfg: &SimConfig) -> Result<TrustLedger, SimError> {
    cfg.validate()?;
    run_with(cfg, generate_population(cfg), GroundTruth::generate(cfg))
}

/// Runs with an explicit roster and ground truth. User ids must be
/// `0..users.len()` in order.
pub fn run_with(cfg: &SimConfig, users: Vec<UserSpec>, truth: GroundTruth) -> Result<TrustLedger, SimError> {
    cfg.validate()?;
    if users.iter().enumerate().any(|(i, u)| u.id != UserId(i as u32)) {
        return Err(SimError::InvalidConfig("user ids must be consecutive from 0".into()));
    }
    for a in 0..cfg.n_areas {
        for k in 0..cfg.factors.len() {
            if truth.get(AreaId(a), FactorId(k as u32)).is_none() {
                return Err(SimError::InvalidConfig(format!("ground truth missing area {a} factor {k}")));
            }
        }
    }
    let hotspots = truth.hotspots();
    let mut engine = Engine::new(cfg.engine_config(), users.iter().map(UserSpec::profile))
        .map_err(|source| SimError::Engine { epoch: 0, source })?;
    let mut base = cfg.baseline.map(|p| BaselineState::new(p, users.iter().map(|u| u.id)));
    let mut rngs: Vec<ChaCha8Rng> = users.iter().map(|u| stream(cfg.seed, STREAM_USER_BASE + u64::from(u.id.0))).collect();
    let t_update = cfg.context.temporal.t_update();
    let place = cfg.placement;

    let mut records = Vec::with_capacity(cfg.epochs as usize);
    for epoch in 1..=cfg.epochs {
        let mut queries_answered = 0;
        let mut groups: BTreeMap<(AreaId, FactorId), Vec<Report>> = BTreeMap::new();
        for (user, rng) in users.iter().zip(rngs.iter_mut()) {
            let area = if rng.random::<f64>() < place.home_prob {
                user.home_areas[rng.random_range(0..user.home_areas.len())]
            } else if !hotspots.is_empty() && rng.random::<f64>() < place.hotspot_share {
                hotspots[rng.random_range(0..hotspots.len())]
            } else {
                AreaId(rng.random_range(0..cfg.n_areas))
            };
            if engine.query(area, FactorId(0)).is_some() {
                queries_answered += 1;
            }
            let behavior = sample_behavior(user, epoch, rng);
            let mut seq = 0;
            for factor in &cfg.factors {
                for _ in 0..cfg.m_per_epoch {
                    let obs = synthesize_observation(user, area, factor, behavior, &truth, epoch, seq, t_update, rng);
                    seq += 1;
                    let verdict = channel_evaluate(behavior, &cfg.channel, rng);
                    if base.is_some() {
                        let interval = quantize(obs.value, &factor.frame);
                        groups.entry((area, obs.factor)).or_default().push(Report { user: user.id, interval });
                    }
                    engine.ingest(obs, verdict).map_err(|source| SimError::Engine { epoch, source })?;
                }
            }
        }
        let report = engine.close_epoch().map_err(|source| SimError::Engine { epoch, source })?;
        let baseline = base.as_mut().map(|st| {
            baseline::baseline_update_entity(&groups, st);
            let areas = groups
                .iter()
                .filter_map(|(&key, reports)| {
                    let size = cfg.factors[key.1 .0 as usize].frame.size();
                    baseline::baseline_data_trust(reports, st, size).map(|v| (key, v))
                })
                .collect();
            BaselineEpoch { user_trust: st.trusts().clone(), areas }
        });
        records.push(EpochRecord { report, queries_answered, baseline });
    }
    Ok(TrustLedger { config: cfg.clone(), users, truth, hotspots, epochs: records })
}
