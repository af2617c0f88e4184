//! Entity trust: a discrete posterior over score levels per user.
//!
//! A user's score is the probability that they share a correct observation.
//! The score is assumed to sit on one of a small set of levels; the system
//! starts from a uniform belief over those levels and, at the end of every
//! epoch, folds in the binary verdicts its detector issued on that user's
//! observations. The detector is imperfect: it flags a correct observation
//! as wrong with probability `f_p` and passes a wrong one with probability
//! `f_n`.
//!
//! Within one epoch the user's behavior is a single hidden variable, so the
//! likelihood of a tally of verdicts given level `s` is a two-branch mixture
//! (see [`epoch_likelihood`]). The entity trust is the posterior mean.

use alloc::vec::Vec;

use thiserror::Error;

use crate::num;

/// Errors raised while building or updating score distributions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntityError {
    #[error("score levels must be strictly increasing values in (0, 1), at least two of them")]
    InvalidLevels,
    #[error("channel probabilities must lie in [0, 1): f_p = {f_p}, f_n = {f_n}")]
    InvalidChannel { f_p: f64, f_n: f64 },
    #[error("distribution has {got} entries but {expected} score levels")]
    LengthMismatch { expected: usize, got: usize },
    #[error("distribution entries must be in [0, 1] and sum to 1")]
    InvalidDistribution,
    /// Every level with prior mass has zero likelihood. This points at
    /// inconsistent parameters (e.g. a noiseless channel combined with a
    /// point prior), never at ordinary user behavior.
    #[error("evidence annihilated all posterior mass")]
    DegenerateEvidence,
}

/// The ordered set of admissible score levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLevels(Vec<f64>);

impl ScoreLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, EntityError> {
        let ok = levels.len() >= 2
            && levels.iter().all(|&s| s > 0.0 && s < 1.0)
            && levels.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self(levels))
        } else {
            Err(EntityError::InvalidLevels)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lowest level (the "malicious" score).
    pub fn lowest(&self) -> f64 {
        self.0[0]
    }

    /// Highest level (the "good" score).
    pub fn highest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

impl Default for ScoreLevels {
    /// Malicious, ignorant and good: `{0.05, 0.5, 0.95}`.
    fn default() -> Self {
        Self(alloc::vec![0.05, 0.5, 0.95])
    }
}

/// Posterior probabilities aligned with a [`ScoreLevels`] set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDistribution(Vec<f64>);

impl ScoreDistribution {
    const TOLERANCE: f64 = 1e-9;

    /// Wraps `probs` after checking it is a probability vector.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, EntityError> {
        let in_range = probs.iter().all(|&p| (0.0..=1.0).contains(&p));
        if !in_range || probs.is_empty() || (num::sum(probs.iter().copied()) - 1.0).abs() > Self::TOLERANCE {
            return Err(EntityError::InvalidDistribution);
        }
        Ok(Self(probs))
    }

    /// The uniform initial belief, `1/J` on every level.
    pub fn uniform(levels: &ScoreLevels) -> Self {
        let j = levels.len();
        Self(alloc::vec![1.0 / j as f64; j])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Verdict counts accumulated for one user during one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvaluationTally {
    pub n_correct: u32,
    pub n_wrong: u32,
}

impl EvaluationTally {
    pub const EMPTY: Self = Self { n_correct: 0, n_wrong: 0 };

    pub fn new(n_correct: u32, n_wrong: u32) -> Self {
        Self { n_correct, n_wrong }
    }

    pub fn total(&self) -> u32 {
        self.n_correct + self.n_wrong
    }

    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Correct => self.n_correct += 1,
            Verdict::Wrong => self.n_wrong += 1,
        }
    }

    pub fn merged(self, other: Self) -> Self {
        Self::new(self.n_correct + other.n_correct, self.n_wrong + other.n_wrong)
    }
}

/// A binary judgment: of a user's behavior, or of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Correct,
    Wrong,
}

/// False-positive / false-negative rates of the observation detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    f_p: f64,
    f_n: f64,
}

impl ChannelParams {
    pub fn new(f_p: f64, f_n: f64) -> Result<Self, EntityError> {
        if (0.0..1.0).contains(&f_p) && (0.0..1.0).contains(&f_n) {
            Ok(Self { f_p, f_n })
        } else {
            Err(EntityError::InvalidChannel { f_p, f_n })
        }
    }

    /// Same rate for both error kinds.
    pub fn symmetric(f: f64) -> Result<Self, EntityError> {
        Self::new(f, f)
    }

    /// Probability of flagging a correct observation as wrong.
    pub fn f_p(&self) -> f64 {
        self.f_p
    }

    /// Probability of passing a wrong observation as correct.
    pub fn f_n(&self) -> f64 {
        self.f_n
    }

    /// Probability of `verdict` given the true behavior.
    pub fn verdict_probability(&self, behavior: Verdict, verdict: Verdict) -> f64 {
        match (behavior, verdict) {
            (Verdict::Correct, Verdict::Wrong) => self.f_p,
            (Verdict::Correct, Verdict::Correct) => 1.0 - self.f_p,
            (Verdict::Wrong, Verdict::Correct) => self.f_n,
            (Verdict::Wrong, Verdict::Wrong) => 1.0 - self.f_n,
        }
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { f_p: 0.2, f_n: 0.2 }
    }
}

/// Probability of an epoch's tally given the user's score is `s`.
///
/// The behavior is correct with probability `s`, in which case each verdict
/// is wrong with probability `f_p`; otherwise each verdict is correct with
/// probability `f_n`:
///
/// `s * f_p^W * (1 - f_p)^C + (1 - s) * f_n^C * (1 - f_n)^W`
pub fn epoch_likelihood(s: f64, tally: EvaluationTally, ch: &ChannelParams) -> f64 {
    let EvaluationTally { n_correct, n_wrong } = tally;
    let honest = num::powu(ch.f_p, n_wrong) * num::powu(1.0 - ch.f_p, n_correct);
    let dishonest = num::powu(ch.f_n, n_correct) * num::powu(1.0 - ch.f_n, n_wrong);
    s * honest + (1.0 - s) * dishonest
}

/// One step of Bayes' rule: `posterior_j ∝ prior_j * L(s_j)`.
pub fn bayes_update(
    prior: &ScoreDistribution,
    tally: EvaluationTally,
    ch: &ChannelParams,
    levels: &ScoreLevels,
) -> Result<ScoreDistribution, EntityError> {
    if prior.len() != levels.len() {
        return Err(EntityError::LengthMismatch { expected: levels.len(), got: prior.len() });
    }
    if tally.total() == 0 {
        return Ok(prior.clone());
    }
    let unnormalized: Vec<f64> = prior
        .0
        .iter()
        .zip(levels.as_slice())
        .map(|(&p, &s)| p * epoch_likelihood(s, tally, ch))
        .collect();
    let z = num::sum(unnormalized.iter().copied());
    if !z.is_finite() || z <= 0.0 {
        return Err(EntityError::DegenerateEvidence);
    }
    Ok(ScoreDistribution(unnormalized.into_iter().map(|v| v / z).collect()))
}

/// Posterior mean of the score: `Σ_j s_j * P[S = s_j]`.
pub fn entity_trust(dist: &ScoreDistribution, levels: &ScoreLevels) -> f64 {
    num::sum(dist.0.iter().zip(levels.as_slice()).map(|(&p, &s)| p * s))
}
