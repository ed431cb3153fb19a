mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use scenemem_core::corpus::ImageId;
use scenemem_core::evaluation::srcc;
use scenemem_core::scoring::{
    collect_observations, filter_sessions, fit_decay, memorability_score, score_observations, score_table, DecayModel, Observation,
    ScoringConfig,
};
use scenemem_core::sequencer::SlotRole;
use scenemem_core::simulate::{
    simulate_observations, simulate_sessions, synthetic_pools, Behavior, IntervalDraw, PlantedModel, SimConfig,
    TargetBehavior,
};

fn planted_run(n_subjects: usize, sessions: usize, seed: u64) -> (PlantedModel, Vec<scenemem_core::game::SessionLog>) {
    let pools = synthetic_pools(1000, 200, 60);
    let model = PlantedModel::uniform(&pools.targets, 0.9, -0.08, 100.0, 0.25, seed);
    let behavior = Behavior {
        targets: TargetBehavior::Planted(model.clone()),
        vigilance_hit: 0.95,
        false_alarm: 0.05,
    };
    let cfg = SimConfig {
        n_subjects,
        sessions_per_subject: sessions,
        seed,
        ..SimConfig::default()
    };
    (model, simulate_sessions(&cfg, pools, &behavior).unwrap())
}

#[test]
fn planted_decay_and_ranking_are_recovered() {
    let (model, sessions) = planted_run(104, 15, 2024);
    let table = score_table(&sessions, &ScoringConfig::default()).unwrap();
    assert_eq!(table.images.len(), 1000);
    let min_obs = table.images.iter().map(|s| s.n_obs).min().unwrap();
    assert!(min_obs >= 80, "min observations per image {min_obs}");
    assert!((table.decay.beta + 0.08).abs() <= 0.01, "beta {}", table.decay.beta);

    let scores: Vec<f64> = table.images.iter().map(|s| s.score).collect();
    let planted: Vec<f64> = table.images.iter().map(|s| model.probabilities[&s.image_id]).collect();
    let rho = srcc(&scores, &planted).unwrap();
    assert!(rho >= 0.9, "rho {rho}");

    // the pooled fit agrees with the closed-form regression on the raw pairs
    let valid = filter_sessions(&sessions, &ScoringConfig::default().thresholds);
    assert_eq!(valid.len(), table.n_valid_sessions);
    let obs = collect_observations(valid.iter().copied()).unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = obs
        .values()
        .flatten()
        .map(|o| ((o.interval as f64).ln(), if o.hit { 1.0 } else { 0.0 }))
        .unzip();
    let (a, b) = common::ols_line(&x, &y);
    assert!((table.decay.alpha - a).abs() < 1e-9);
    assert!((table.decay.beta - b).abs() < 1e-9);
}

#[test]
fn observation_counts_match_plan_bookkeeping() {
    let (_, sessions) = planted_run(10, 10, 7);
    assert_eq!(sessions.len(), 100);
    let obs = collect_observations(sessions.iter()).unwrap();
    let mut expected: BTreeMap<ImageId, (usize, usize)> = BTreeMap::new();
    for s in &sessions {
        for slot in s.plan.slots.iter().filter(|sl| sl.role == SlotRole::TargetRepeat) {
            let e = expected.entry(slot.image_id.clone()).or_default();
            e.0 += 1;
            if s.events[slot.position].pressed {
                e.1 += 1;
            }
        }
    }
    assert_eq!(obs.len(), expected.len());
    for (id, list) in &obs {
        assert_eq!(list.len(), expected[id].0);
        assert_eq!(list.iter().filter(|o| o.hit).count(), expected[id].1);
    }
}

#[test]
fn aggregates_match_generator_moments() {
    // all intervals at the horizon: each raw rate is Binomial(n, m_i) / n
    let ids: Vec<ImageId> = (0..400).map(|i| format!("i{i}")).collect();
    let model = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.25, 11);
    let obs = simulate_observations(&ids, &TargetBehavior::Planted(model.clone()), 100, IntervalDraw::Fixed { interval: 100 }, 4);
    let mut grouped: BTreeMap<ImageId, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        grouped.entry(o.image_id.clone()).or_default().push(o);
    }
    let (_, scores) = score_observations(&grouped, 100.0).unwrap();
    let n = scores.len() as f64;
    let mean = scores.iter().map(|s| s.raw_hit_rate).sum::<f64>() / n;
    let var = scores.iter().map(|s| (s.raw_hit_rate - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // uniform(c - 0.25, c + 0.25) plus binomial noise at n = 100
    let c = 0.9 - 0.08 * 100f64.ln();
    let analytic_var = 0.5f64.powi(2) / 12.0 + (c * (1.0 - c) - 0.5f64.powi(2) / 12.0) / 100.0;
    assert!((mean - c).abs() < 0.02, "mean {mean} vs {c}");
    assert!((var.sqrt() - analytic_var.sqrt()).abs() < 0.015, "sd {} vs {}", var.sqrt(), analytic_var.sqrt());
}

#[test]
fn fixed_horizon_scores_equal_raw_rates() {
    let ids: Vec<ImageId> = (0..1000).map(|i| format!("img{i:04}")).collect();
    let model = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.25, 3);
    let obs = simulate_observations(&ids, &TargetBehavior::Planted(model), 104, IntervalDraw::Fixed { interval: 100 }, 9);
    let mut grouped: BTreeMap<ImageId, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        grouped.entry(o.image_id.clone()).or_default().push(o);
    }
    let (decay, scores) = score_observations(&grouped, 100.0).unwrap();
    assert_eq!(decay.beta, 0.0);
    for s in &scores {
        assert_eq!(s.score, s.raw_hit_rate, "{}", s.image_id);
    }
}

#[test]
fn planted_fit_on_direct_observations() {
    let ids: Vec<ImageId> = (0..1000).map(|i| format!("img{i:04}")).collect();
    let model = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.25, 5);
    let obs = simulate_observations(&ids, &TargetBehavior::Planted(model), 100, IntervalDraw::Uniform { min: 35, max: 150 }, 6);
    assert_eq!(obs.len(), 100_000);
    let d = fit_decay(obs.iter()).unwrap();
    assert!((d.beta + 0.08).abs() <= 0.01, "beta {}", d.beta);
    assert!((d.alpha - 0.9).abs() <= 0.05, "alpha {}", d.alpha);
}

fn arb_observations() -> impl Strategy<Value = Vec<Observation>> {
    prop::collection::vec((0usize..6, 0usize..4, any::<bool>(), 1u32..200), 2..60).prop_map(|v| {
        v.into_iter()
            .map(|(img, subj, hit, interval)| Observation {
                image_id: format!("i{img}"),
                subject_id: format!("s{subj}"),
                hit,
                interval,
            })
            .collect()
    })
}

fn scores_of(obs: &[Observation]) -> Vec<(ImageId, f64)> {
    let mut grouped: BTreeMap<ImageId, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        grouped.entry(o.image_id.clone()).or_default().push(o.clone());
    }
    let (_, s) = score_observations(&grouped, 100.0).unwrap();
    s.into_iter().map(|s| (s.image_id, s.score)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scores_ignore_observation_order(obs in arb_observations(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut scenemem_core::seed::rng(seed));
        prop_assert_eq!(scores_of(&obs), scores_of(&shuffled));
    }

    #[test]
    fn score_is_monotone_in_hit_rate(
        n in 1usize..50,
        hits_a in 0usize..50,
        hits_b in 0usize..50,
        t in 1u32..300,
        beta in -0.5f64..0.5,
    ) {
        let mk = |h: usize| -> Vec<Observation> {
            (0..n).map(|k| Observation {
                image_id: "x".into(),
                subject_id: format!("s{k}"),
                hit: k < h.min(n),
                interval: t,
            }).collect()
        };
        let d = DecayModel { alpha: 0.7, beta, n_obs: 10 };
        let (lo, hi) = (hits_a.min(hits_b), hits_a.max(hits_b));
        prop_assert!(memorability_score(&mk(lo), &d, 100.0).unwrap() <= memorability_score(&mk(hi), &d, 100.0).unwrap());
    }

    #[test]
    fn flat_decay_returns_raw_rate(obs in arb_observations(), horizon in 1.0f64..500.0) {
        let d = DecayModel::flat(0.5, 1);
        let raw = obs.iter().filter(|o| o.hit).count() as f64 / obs.len() as f64;
        prop_assert_eq!(memorability_score(&obs, &d, horizon).unwrap(), raw);
    }
}
