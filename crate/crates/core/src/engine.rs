//! The epoch state machine of the monitoring service.
//!
//! During an epoch the engine only records: every ingested observation is
//! buffered and its verdict is added to the contributor's tally. All trust
//! computation happens in [`Engine::close_epoch`], in this order:
//!
//! 1. every user's score distribution is updated with the epoch's tally and
//!    the entity trust is re-read;
//! 2. each buffered observation is weighted with the *updated* trust of its
//!    contributor and the observation's context, and turned into a mass;
//! 3. masses are fused per user and then across users for every
//!    (area, factor) pair that received observations.
//!
//! Queries are answered from the last closed epoch only.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroUsize;

use thiserror::Error;

use crate::context::{self, ContextError, ContextParams, FactorClass, UserClass};
use crate::dst::{self, DataTrustVector, DstError, Frame, Interval, MassFunction};
use crate::entity::{
    self, ChannelParams, EntityError, EvaluationTally, ScoreDistribution, ScoreLevels, Verdict,
};
use crate::ids::{AreaId, FactorId, UserId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("observation for epoch {observed} arrived after that epoch closed (current epoch {current})")]
    EpochClosed { observed: u64, current: u64 },
    #[error("observation for epoch {observed} arrived while epoch {current} is open")]
    EpochNotOpen { observed: u64, current: u64 },
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("duplicate user {0}")]
    DuplicateUser(UserId),
    #[error("user {0} has no home area")]
    NoHomeArea(UserId),
    #[error("unknown factor {0}")]
    UnknownFactor(FactorId),
    #[error("factor {0} is declared more than once or out of order")]
    FactorOrder(FactorId),
    #[error("invalid observation: {0}")]
    InvalidObservation(&'static str),
    #[error(transparent)]
    Entity(#[from] EntityError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Dst(#[from] DstError),
}

/// A monitored factor: its frame and its semantic class.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub name: String,
    pub frame: Frame,
    pub class: FactorClass,
}

/// Static description of a registered user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub id: UserId,
    pub class: UserClass,
    pub home_areas: Vec<AreaId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub levels: ScoreLevels,
    pub channel: ChannelParams,
    pub context: ContextParams,
    /// Indexed by [`FactorId`]: entry `k` must describe factor `k`.
    pub factors: Vec<FactorSpec>,
    /// When set, a user's distribution is rebuilt each epoch from a uniform
    /// prior and only the last `n` epoch tallies. Off by default: plain
    /// recursive Bayes over the whole history.
    pub history_window: Option<NonZeroUsize>,
}

/// One reported reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub user: UserId,
    pub area: AreaId,
    pub factor: FactorId,
    pub value: f64,
    /// Offset from the start of the epoch, in `[0, t_update)`.
    pub timestamp: f64,
    /// Index `i` of this observation among the user's observations of the
    /// same (area, factor) in this epoch.
    pub seq: u32,
    pub epoch: u64,
}

/// Current belief about one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub profile: UserProfile,
    pub distribution: ScoreDistribution,
    pub trust: f64,
    history: VecDeque<EvaluationTally>,
}

/// Fusion result of one (area, factor) pair.
#[derive(Debug, Clone, PartialEq)]
pub enum AreaOutcome {
    Fused(DataTrustVector),
    /// Evidence for the pair was in total conflict; no vector this epoch.
    Conflict { conflict: f64 },
}

impl AreaOutcome {
    pub fn vector(&self) -> Option<&DataTrustVector> {
        match self {
            AreaOutcome::Fused(v) => Some(v),
            AreaOutcome::Conflict { .. } => None,
        }
    }
}

/// Snapshot produced when an epoch closes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: u64,
    pub user_trust: BTreeMap<UserId, f64>,
    /// Only pairs that received at least one observation this epoch.
    pub areas: BTreeMap<(AreaId, FactorId), AreaOutcome>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    users: BTreeMap<UserId, UserState>,
    tallies: BTreeMap<UserId, EvaluationTally>,
    buffer: Vec<Observation>,
    epoch: u64,
    last: Option<EpochReport>,
}

impl Engine {
    /// Starts at epoch 1 with every user at the uniform distribution.
    pub fn new(cfg: EngineConfig, users: impl IntoIterator<Item = UserProfile>) -> Result<Self, EngineError> {
        for (k, f) in cfg.factors.iter().enumerate() {
            if f.frame.factor().0 as usize != k {
                return Err(EngineError::FactorOrder(f.frame.factor()));
            }
            context::semantic_weight(UserClass(0), f.class, &cfg.context.semantic)?;
        }
        let uniform = ScoreDistribution::uniform(&cfg.levels);
        let trust = entity::entity_trust(&uniform, &cfg.levels);
        let mut map = BTreeMap::new();
        for profile in users {
            if profile.home_areas.is_empty() {
                return Err(EngineError::NoHomeArea(profile.id));
            }
            context::semantic_weight(profile.class, FactorClass(0), &cfg.context.semantic)?;
            let id = profile.id;
            let state = UserState { profile, distribution: uniform.clone(), trust, history: VecDeque::new() };
            if map.insert(id, state).is_some() {
                return Err(EngineError::DuplicateUser(id));
            }
        }
        Ok(Self { cfg, users: map, tallies: BTreeMap::new(), buffer: Vec::new(), epoch: 1, last: None })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Index of the currently open epoch (starting at 1).
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn user(&self, id: UserId) -> Option<&UserState> {
        self.users.get(&id)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserState> {
        self.users.values()
    }

    /// Tally accumulated so far in the open epoch.
    pub fn tally(&self, id: UserId) -> EvaluationTally {
        self.tallies.get(&id).copied().unwrap_or_default()
    }

    pub fn last_report(&self) -> Option<&EpochReport> {
        self.last.as_ref()
    }

    /// Records one observation together with the detector's verdict on it.
    pub fn ingest(&mut self, observation: Observation, verdict: Verdict) -> Result<(), EngineError> {
        if observation.epoch < self.epoch {
            return Err(EngineError::EpochClosed { observed: observation.epoch, current: self.epoch });
        }
        if observation.epoch > self.epoch {
            return Err(EngineError::EpochNotOpen { observed: observation.epoch, current: self.epoch });
        }
        if !self.users.contains_key(&observation.user) {
            return Err(EngineError::UnknownUser(observation.user));
        }
        if observation.factor.0 as usize >= self.cfg.factors.len() {
            return Err(EngineError::UnknownFactor(observation.factor));
        }
        if !observation.value.is_finite() {
            return Err(EngineError::InvalidObservation("value must be finite"));
        }
        let t_update = self.cfg.context.temporal.t_update();
        if !(0.0..t_update).contains(&observation.timestamp) {
            return Err(EngineError::InvalidObservation("timestamp outside the epoch"));
        }
        self.tallies.entry(observation.user).or_default().record(verdict);
        self.buffer.push(observation);
        Ok(())
    }

    /// Closes the open epoch, updates every trust value and returns the
    /// snapshot. On error the engine state is left untouched.
    pub fn close_epoch(&mut self) -> Result<EpochReport, EngineError> {
        let updated = self.updated_distributions()?;
        let mut user_trust = BTreeMap::new();
        for (id, (dist, history)) in updated {
            let state = self.users.get_mut(&id).expect("updated users are registered");
            state.trust = entity::entity_trust(&dist, &self.cfg.levels);
            state.distribution = dist;
            state.history = history;
            user_trust.insert(id, state.trust);
        }

        let areas = self.fuse_buffer()?;
        let report = EpochReport { epoch: self.epoch, user_trust, areas };
        self.tallies.clear();
        self.buffer.clear();
        self.epoch += 1;
        self.last = Some(report.clone());
        Ok(report)
    }

    /// Data-trustworthiness vector of the pair in the last closed epoch.
    pub fn query(&self, area: AreaId, factor: FactorId) -> Option<&DataTrustVector> {
        self.last.as_ref()?.areas.get(&(area, factor))?.vector()
    }

    #[allow(clippy::type_complexity)]
    fn updated_distributions(
        &self,
    ) -> Result<Vec<(UserId, (ScoreDistribution, VecDeque<EvaluationTally>))>, EngineError> {
        let levels = &self.cfg.levels;
        let ch = &self.cfg.channel;
        self.users
            .iter()
            .map(|(&id, state)| {
                let tally = self.tally(id);
                let updated = match self.cfg.history_window {
                    None => (entity::bayes_update(&state.distribution, tally, ch, levels)?, VecDeque::new()),
                    Some(w) => {
                        let mut history = state.history.clone();
                        history.push_back(tally);
                        while history.len() > w.get() {
                            history.pop_front();
                        }
                        let mut dist = ScoreDistribution::uniform(levels);
                        for t in &history {
                            dist = entity::bayes_update(&dist, *t, ch, levels)?;
                        }
                        (dist, history)
                    }
                };
                Ok((id, updated))
            })
            .collect()
    }

    /// Observation weight with the contributor's current trust.
    pub fn observation_weight(&self, obs: &Observation) -> Result<f64, EngineError> {
        let ctx = &self.cfg.context;
        let user = self.users.get(&obs.user).ok_or(EngineError::UnknownUser(obs.user))?;
        let factor = self.cfg.factors.get(obs.factor.0 as usize).ok_or(EngineError::UnknownFactor(obs.factor))?;
        let mu_c = context::semantic_weight(user.profile.class, factor.class, &ctx.semantic)?;
        let mu_l = context::spatial_weight(obs.area, &user.profile.home_areas, &ctx.spatial);
        let age = ctx.temporal.t_update() - obs.timestamp;
        let mu_t = context::temporal_weight(age, &ctx.temporal);
        Ok(context::observation_weight(user.trust, mu_c, mu_l, mu_t, &ctx.coefficients, ctx.clamp.as_ref()))
    }

    fn fuse_buffer(&self) -> Result<BTreeMap<(AreaId, FactorId), AreaOutcome>, EngineError> {
        // Canonical order so the fold (and its rounding) ignores ingest order.
        let mut order: Vec<&Observation> = self.buffer.iter().collect();
        order.sort_by(|a, b| {
            (a.area, a.factor, a.user, a.seq, a.timestamp.to_bits(), a.value.to_bits()).cmp(&(
                b.area,
                b.factor,
                b.user,
                b.seq,
                b.timestamp.to_bits(),
                b.value.to_bits(),
            ))
        });

        let mut grouped: BTreeMap<(AreaId, FactorId), BTreeMap<UserId, Vec<MassFunction>>> = BTreeMap::new();
        for obs in order {
            let frame = &self.cfg.factors[obs.factor.0 as usize].frame;
            let interval: Interval = dst::quantize(obs.value, frame);
            let mass = dst::mass_from_observation(self.observation_weight(obs)?, interval, frame)?;
            grouped.entry((obs.area, obs.factor)).or_default().entry(obs.user).or_default().push(mass);
        }

        let mut out = BTreeMap::new();
        for (key, per_user) in grouped {
            let outcome = per_user
                .values()
                .map(|masses| dst::fuse_user(masses))
                .collect::<Result<Vec<_>, _>>()
                .and_then(|users| dst::fuse_area(&users));
            let outcome = match outcome {
                Ok(v) => AreaOutcome::Fused(v),
                Err(DstError::TotalConflict { conflict }) => AreaOutcome::Conflict { conflict },
                Err(e) => return Err(e.into()),
            };
            out.insert(key, outcome);
        }
        Ok(out)
    }
}
