use proptest::prelude::*;
use trustfuse_core::context::{
    self, observation_weight, temporal_weight, ContextParams, SemanticTable, TemporalParams, UserClass,
    WeightClamp, WeightCoefficients,
};
use trustfuse_core::dst::{self, Frame, MassFunction};
use trustfuse_core::engine::{Engine, EngineConfig, FactorSpec, Observation, UserProfile};
use trustfuse_core::entity::{
    self, bayes_update, entity_trust, ChannelParams, EvaluationTally, ScoreDistribution, ScoreLevels, Verdict,
};
use trustfuse_core::{AreaId, FactorId, UserId};

const NORM_TOL: f64 = 1e-9;
const COMMUTE_TOL: f64 = 1e-12;
const ASSOC_TOL: f64 = 1e-9;

fn levels() -> impl Strategy<Value = ScoreLevels> {
    proptest::collection::btree_set(1u32..1000, 2..6)
        .prop_map(|s| ScoreLevels::new(s.into_iter().map(|v| f64::from(v) / 1000.0).collect()).unwrap())
}

fn prior(n: usize) -> impl Strategy<Value = ScoreDistribution> {
    proptest::collection::vec(0.001f64..1.0, n).prop_map(|raw| {
        let t: f64 = raw.iter().sum();
        ScoreDistribution::from_probs(raw.iter().map(|v| v / t).collect()).unwrap()
    })
}

fn channel() -> impl Strategy<Value = ChannelParams> {
    (0.0f64..0.5, 0.0f64..0.5).prop_map(|(p, n)| ChannelParams::new(p, n).unwrap())
}

fn tally() -> impl Strategy<Value = EvaluationTally> {
    (0u32..12, 0u32..12).prop_map(|(c, w)| EvaluationTally::new(c, w))
}

fn setup() -> impl Strategy<Value = (ScoreLevels, ScoreDistribution, ChannelParams)> {
    levels().prop_flat_map(|l| {
        let n = l.len();
        (Just(l), prior(n), channel())
    })
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn posterior_is_normalized((lv, pr, ch) in setup(), t in tally()) {
        let post = bayes_update(&pr, t, &ch, &lv).unwrap();
        prop_assert!((post.probs().iter().sum::<f64>() - 1.0).abs() <= NORM_TOL);
        prop_assert!(post.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn likelihood_is_bounded(s in 0.0f64..=1.0, ch in channel(), t in tally()) {
        let l = entity::epoch_likelihood(s, t, &ch);
        prop_assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn sequential_updates_equal_batch_over_epochs((lv, pr, ch) in setup(), a in tally(), b in tally()) {
        // feeding each posterior back as the next prior equals one update
        // with the product of the two epochs' likelihoods
        let seq = bayes_update(&bayes_update(&pr, a, &ch, &lv).unwrap(), b, &ch, &lv).unwrap();
        let joint: Vec<f64> = lv.as_slice().iter().zip(pr.probs())
            .map(|(&s, &p)| p * entity::epoch_likelihood(s, a, &ch) * entity::epoch_likelihood(s, b, &ch))
            .collect();
        let z: f64 = joint.iter().sum();
        let batch: Vec<f64> = joint.iter().map(|v| v / z).collect();
        prop_assert!(close(seq.probs(), &batch, NORM_TOL));
    }

    #[test]
    fn empty_epoch_composes_with_any_tally((lv, pr, ch) in setup(), a in tally()) {
        let merged = bayes_update(&pr, a.merged(EvaluationTally::EMPTY), &ch, &lv).unwrap();
        let seq = bayes_update(&bayes_update(&pr, a, &ch, &lv).unwrap(), EvaluationTally::EMPTY, &ch, &lv).unwrap();
        prop_assert!(close(merged.probs(), seq.probs(), NORM_TOL));
    }

    #[test]
    fn evidence_is_monotone((lv, pr, _) in setup(), f in 0.0f64..0.49, t in tally()) {
        let ch = ChannelParams::symmetric(f).unwrap();
        let base = entity_trust(&bayes_update(&pr, t, &ch, &lv).unwrap(), &lv);
        let more_c = entity_trust(&bayes_update(&pr, EvaluationTally::new(t.n_correct + 1, t.n_wrong), &ch, &lv).unwrap(), &lv);
        let more_w = entity_trust(&bayes_update(&pr, EvaluationTally::new(t.n_correct, t.n_wrong + 1), &ch, &lv).unwrap(), &lv);
        prop_assert!(more_c >= base - NORM_TOL);
        prop_assert!(more_w <= base + NORM_TOL);
    }

    #[test]
    fn weight_is_monotone_and_clamped(
        t in 0.0f64..=1.0, c in 0.0f64..=1.0, l in 0.0f64..=1.0, m in 0.0f64..=1.0,
        dt in 0.0f64..0.2, which in 0usize..4,
        a in 0.0f64..=1.0, b in 0.0f64..=1.0, th in 0.0f64..=1.0,
    ) {
        let s = a + b + th;
        prop_assume!(s > 1e-6);
        let co = WeightCoefficients::new(a / s, b / s, th / s).unwrap();
        let clamp = WeightClamp::default();
        let mut x = [t, c, l, m];
        let w0 = observation_weight(x[0], x[1], x[2], x[3], &co, Some(&clamp));
        x[which] = (x[which] + dt).min(1.0);
        let w1 = observation_weight(x[0], x[1], x[2], x[3], &co, Some(&clamp));
        prop_assert!(w1 >= w0);
        prop_assert!((clamp.min()..=clamp.max()).contains(&w0));
    }

    #[test]
    fn zero_theta_ignores_time(t in 0.0f64..=1.0, c in 0.0f64..=1.0, l in 0.0f64..=1.0, m1 in 0.0f64..=1.0, m2 in 0.0f64..=1.0) {
        let co = WeightCoefficients::default();
        prop_assert_eq!(observation_weight(t, c, l, m1, &co, None), observation_weight(t, c, l, m2, &co, None));
    }

    #[test]
    fn temporal_weight_nonincreasing(a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let p = TemporalParams::default();
        let (young, old) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(temporal_weight(young, &p) >= temporal_weight(old, &p));
    }
}

fn mass(size: usize) -> impl Strategy<Value = MassFunction> {
    (0..size, 0.0f64..1.0).prop_map(move |(i, w)| {
        let mut s = vec![0.0; size];
        s[i] = w;
        MassFunction::new(s, 1.0 - w).unwrap()
    })
}

fn triple() -> impl Strategy<Value = (MassFunction, MassFunction, MassFunction)> {
    (2usize..6).prop_flat_map(|n| (mass(n), mass(n), mass(n)))
}

fn elementwise(a: &MassFunction, b: &MassFunction, tol: f64) -> bool {
    close(a.singletons(), b.singletons(), tol) && (a.omega() - b.omega()).abs() <= tol
}

proptest! {
    #[test]
    fn combine_commutes((a, b, _) in triple()) {
        match (dst::combine(&a, &b), dst::combine(&b, &a)) {
            (Ok(x), Ok(y)) => prop_assert!(elementwise(&x, &y, COMMUTE_TOL)),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }

    #[test]
    fn combine_associates((a, b, c) in triple()) {
        let left = dst::combine(&a, &b).and_then(|ab| dst::combine(&ab, &c));
        let right = dst::combine(&b, &c).and_then(|bc| dst::combine(&a, &bc));
        if let (Ok(l), Ok(r)) = (left, right) {
            prop_assert!(elementwise(&l, &r, ASSOC_TOL));
        }
    }

    #[test]
    fn combine_stays_normalized_and_closed((a, b, _) in triple()) {
        if let Ok(x) = dst::combine(&a, &b) {
            prop_assert!((x.total() - 1.0).abs() <= NORM_TOL);
            prop_assert_eq!(x.size(), a.size());
            prop_assert!(x.singletons().iter().all(|&v| v >= 0.0) && x.omega() >= 0.0);
        }
    }

    #[test]
    fn corroboration_never_weakens(n in 2usize..6, i in 0usize..6, w1 in 0.01f64..0.99, w2 in 0.01f64..0.99) {
        let i = i % n;
        let mk = |w: f64| {
            let mut s = vec![0.0; n];
            s[i] = w;
            MassFunction::new(s, 1.0 - w).unwrap()
        };
        let x = dst::combine(&mk(w1), &mk(w2)).unwrap();
        prop_assert!(x.singletons()[i] >= w1.max(w2));
    }
}

fn engine_config() -> EngineConfig {
    EngineConfig {
        levels: ScoreLevels::default(),
        channel: ChannelParams::default(),
        context: ContextParams::standard(),
        factors: vec![FactorSpec {
            name: "pm25".into(),
            frame: Frame::new(FactorId(0), vec![35.0], None).unwrap(),
            class: SemanticTable::ENVIRONMENTAL_HEALTH,
        }],
        history_window: None,
    }
}

#[derive(Debug, Clone)]
struct Ingest {
    user: u32,
    area: u32,
    value: f64,
    timestamp: f64,
    correct: bool,
}

fn ingests() -> impl Strategy<Value = Vec<Ingest>> {
    proptest::collection::vec(
        (0u32..5, 0u32..3, 0.0f64..70.0, 0.0f64..1.0, any::<bool>())
            .prop_map(|(user, area, value, timestamp, correct)| Ingest { user, area, value, timestamp, correct }),
        0..25,
    )
}

fn run_engine(batch: &[Ingest]) -> trustfuse_core::engine::EpochReport {
    let users = (0..5).map(|u| UserProfile { id: UserId(u), class: UserClass(u as u16 % 4), home_areas: vec![AreaId(u % 3)] });
    let mut e = Engine::new(engine_config(), users).unwrap();
    let mut seqs = [0u32; 5];
    for i in batch {
        let seq = seqs[i.user as usize];
        seqs[i.user as usize] += 1;
        let obs = Observation {
            user: UserId(i.user),
            area: AreaId(i.area),
            factor: FactorId(0),
            value: i.value,
            timestamp: i.timestamp,
            seq,
            epoch: 1,
        };
        e.ingest(obs, if i.correct { Verdict::Correct } else { Verdict::Wrong }).unwrap();
    }
    e.close_epoch().unwrap()
}

proptest! {
    #[test]
    fn engine_ignores_ingest_order(batch in ingests(), rot in 0usize..25) {
        let reference = run_engine(&batch);
        // permute while keeping each user's own sequence numbers attached
        let mut indexed: Vec<(usize, Ingest)> = batch.iter().cloned().enumerate().collect();
        if !indexed.is_empty() {
            let k = rot % indexed.len();
            indexed.rotate_left(k);
            indexed.reverse();
        }
        let mut seqs = [0u32; 5];
        let mut seq_of = vec![0u32; batch.len()];
        for (i, b) in batch.iter().enumerate() {
            seq_of[i] = seqs[b.user as usize];
            seqs[b.user as usize] += 1;
        }
        let users = (0..5).map(|u| UserProfile { id: UserId(u), class: UserClass(u as u16 % 4), home_areas: vec![AreaId(u % 3)] });
        let mut e = Engine::new(engine_config(), users).unwrap();
        for (orig, i) in &indexed {
            let obs = Observation {
                user: UserId(i.user), area: AreaId(i.area), factor: FactorId(0),
                value: i.value, timestamp: i.timestamp, seq: seq_of[*orig], epoch: 1,
            };
            e.ingest(obs, if i.correct { Verdict::Correct } else { Verdict::Wrong }).unwrap();
        }
        let permuted = e.close_epoch().unwrap();
        prop_assert_eq!(&permuted, &reference);
        prop_assert_eq!(run_engine(&batch), reference);
    }

    #[test]
    fn every_user_reported_and_idle_users_keep_prior(batch in ingests()) {
        let report = run_engine(&batch);
        prop_assert_eq!(report.user_trust.len(), 5);
        let uniform = entity_trust(&ScoreDistribution::uniform(&ScoreLevels::default()), &ScoreLevels::default());
        for u in 0..5u32 {
            if !batch.iter().any(|i| i.user == u) {
                prop_assert_eq!(report.user_trust[&UserId(u)], uniform);
            }
        }
        for v in report.areas.values() {
            let v = v.vector().unwrap();
            prop_assert!((v.masses().iter().sum::<f64>() + v.residual() - 1.0).abs() <= NORM_TOL);
        }
    }
}

#[test]
fn weight_uses_fresh_trust() {
    let users = [UserProfile { id: UserId(0), class: UserClass(0), home_areas: vec![AreaId(0)] }];
    let mut e = Engine::new(engine_config(), users).unwrap();
    let obs = Observation { user: UserId(0), area: AreaId(0), factor: FactorId(0), value: 10.0, timestamp: 0.5, seq: 0, epoch: 1 };
    e.ingest(obs, Verdict::Correct).unwrap();
    let report = e.close_epoch().unwrap();
    let fresh = report.user_trust[&UserId(0)];
    let expected = context::observation_weight(fresh, 1.0, 1.0, 1.0, &WeightCoefficients::default(), Some(&WeightClamp::default()));
    let got = report.areas[&(AreaId(0), FactorId(0))].vector().unwrap().masses()[0];
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    assert!(fresh > 0.5);
}
