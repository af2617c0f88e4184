use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trustfuse_core::dst::{Frame, Interval};
use trustfuse_core::entity::{ChannelParams, Verdict};
use trustfuse_core::metrics::{self, AreaKind, Scheme};
use trustfuse_core::sim::{
    self, channel_evaluate, generate_population, reported_interval, sample_behavior, GroundTruth, Placement, Role,
    SimConfig,
};
use trustfuse_core::{FactorId, UserId};

const DRAWS: usize = 10_000;
/// Absolute band for empirical frequencies over `DRAWS` draws.
const FREQ_TOL: f64 = 0.02;
/// Chi-square critical value, 4 degrees of freedom, p = 0.001.
const CHI2_CRIT_DF4: f64 = 18.467;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frequency(mut f: impl FnMut() -> bool) -> f64 {
    (0..DRAWS).filter(|_| f()).count() as f64 / DRAWS as f64
}

#[test]
fn behavior_frequency_matches_score() {
    let mut user = generate_population(&SimConfig::default())[0].clone();
    user.true_score = 0.95;
    user.change = None;
    let mut r = rng(1);
    let p = frequency(|| sample_behavior(&user, 1, &mut r) == Verdict::Correct);
    assert!((p - 0.95).abs() <= FREQ_TOL, "{p}");

    user.change = Some((10, 0.05));
    let p = frequency(|| sample_behavior(&user, 12, &mut r) == Verdict::Correct);
    assert!((p - 0.05).abs() <= FREQ_TOL, "{p}");
}

#[test]
fn channel_frequencies() {
    let ch = ChannelParams::default();
    let mut r = rng(2);
    let fp = frequency(|| channel_evaluate(Verdict::Correct, &ch, &mut r) == Verdict::Wrong);
    let fn_ = frequency(|| channel_evaluate(Verdict::Wrong, &ch, &mut r) == Verdict::Correct);
    assert!((fp - 0.2).abs() <= FREQ_TOL, "{fp}");
    assert!((fn_ - 0.2).abs() <= FREQ_TOL, "{fn_}");

    // three-sigma binomial band over a longer run
    let n = 100_000;
    let ch = ChannelParams::new(0.1, 0.3).unwrap();
    for (behavior, flip, p) in [(Verdict::Correct, Verdict::Wrong, 0.1), (Verdict::Wrong, Verdict::Correct, 0.3)] {
        let hits = (0..n).filter(|_| channel_evaluate(behavior, &ch, &mut r) == flip).count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 3.0 * sigma, "{behavior:?}: {hits}");
    }
}

#[test]
fn wrong_intervals_are_uniform() {
    let mut r = rng(3);
    let truth = Interval(2);
    let mut counts = [0usize; 6];
    for _ in 0..DRAWS {
        counts[reported_interval(Verdict::Wrong, truth, 6, &mut r).0] += 1;
    }
    assert_eq!(counts[2], 0);
    let expected = DRAWS as f64 / 5.0;
    let chi2: f64 =
        counts.iter().enumerate().filter(|&(i, _)| i != 2).map(|(_, &c)| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_CRIT_DF4, "chi2 = {chi2}");
}

#[test]
fn observations_follow_behavior() {
    let cfg = SimConfig::default();
    let users = generate_population(&cfg);
    let truth = GroundTruth::generate(&cfg);
    let factor = &cfg.factors[0];
    let mut r = rng(4);
    for a in 0..cfg.n_areas {
        let area = trustfuse_core::AreaId(a);
        let t = truth.get(area, FactorId(0)).unwrap();
        let good = sim::synthesize_observation(&users[0], area, factor, Verdict::Correct, &truth, 1, 0, 1.0, &mut r);
        assert_eq!(trustfuse_core::dst::quantize(good.value, &factor.frame), t);
        let bad = sim::synthesize_observation(&users[0], area, factor, Verdict::Wrong, &truth, 1, 1, 1.0, &mut r);
        assert_eq!(trustfuse_core::dst::quantize(bad.value, &factor.frame), Interval(1 - t.0));
        assert!((0.0..1.0).contains(&good.timestamp));
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = SimConfig { epochs: 8, seed: 99, baseline: Some(Default::default()), ..Default::default() };
    let a = sim::run(&cfg).unwrap();
    let b = sim::run(&cfg).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.epochs.iter().zip(&b.epochs) {
        for (u, t) in &x.report.user_trust {
            assert_eq!(t.to_bits(), y.report.user_trust[u].to_bits());
        }
    }
    let c = sim::run(&SimConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.epochs, c.epochs);
}

#[test]
fn queries_are_answered_after_first_epoch() {
    let cfg = SimConfig { epochs: 5, placement: Placement { hotspot_share: 1.0, ..Default::default() }, ..Default::default() };
    let ledger = sim::run(&cfg).unwrap();
    assert_eq!(ledger.epochs[0].queries_answered, 0);
    assert!(ledger.epochs[1..].iter().all(|r| r.queries_answered > 0));
}

/// Noiseless channel, no malicious users and users that always behave:
/// trust climbs monotonically toward the top level and crowded areas become
/// near-certain within ten epochs.
#[test]
fn noiseless_honest_population_converges() {
    let cfg = SimConfig {
        pmu: 0.0,
        channel: ChannelParams::new(0.0, 0.0).unwrap(),
        epochs: 10,
        placement: Placement { hotspot_share: 1.0, ..Default::default() },
        ..Default::default()
    };
    let mut users = generate_population(&cfg);
    for u in &mut users {
        u.true_score = 1.0;
    }
    let truth = GroundTruth::generate(&cfg);
    let ledger = sim::run_with(&cfg, users, truth).unwrap();
    for u in &ledger.users {
        let series: Vec<f64> = ledger.epochs.iter().map(|r| r.report.user_trust[&u.id]).collect();
        assert!(series.windows(2).all(|w| w[1] >= w[0]), "user {} not monotone: {series:?}", u.id);
        assert!((series[9] - 0.95).abs() < 0.01, "user {} at {}", u.id, series[9]);
    }
    for kind in [AreaKind::Healthy, AreaKind::Unhealthy] {
        let mass = metrics::true_interval_mass(&ledger, kind, Scheme::Proposed);
        let last = mass[9].expect("hotspots are visited");
        assert!(last > 0.99, "{kind:?}: {last}");
    }
}

#[test]
fn behavior_change_applies_to_selected_role() {
    let cfg = SimConfig {
        behavior_change: Some(sim::BehaviorChange { after_epoch: 10, new_score: 0.05, role: Role::Good }),
        ..Default::default()
    };
    let pop = generate_population(&cfg);
    for u in &pop {
        match u.role {
            Role::Good => assert_eq!((u.score_at(10), u.score_at(11)), (0.95, 0.05)),
            _ => assert_eq!(u.score_at(11), u.true_score),
        }
    }
    assert!(pop.iter().any(|u| u.id == UserId(0)));
}

#[test]
fn aqi_frame_runs() {
    let mut cfg = SimConfig { epochs: 3, ..Default::default() };
    cfg.factors[0].frame = Frame::new(FactorId(0), vec![12.0, 35.5, 55.5, 150.5, 250.5], None).unwrap();
    let ledger = sim::run(&cfg).unwrap();
    for rec in &ledger.epochs {
        for v in rec.report.areas.values() {
            assert_eq!(v.vector().unwrap().masses().len(), 6);
        }
    }
}
