//! Synthetic subjects with known response generators.
//!
//! Used by the oracle tests and the `simulate` CLI command: a planted
//! per-image hit probability `m_i` and a log-linear decay give
//! `P(hit | i, t) = clamp(m_i + beta (ln t - ln T))`, whose pooled regression
//! on `(1, ln t)` has slope `beta` and intercept `mean(m) - beta ln T`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ImageId;
use crate::game::{GameConfig, GameEngine, GameError, Pools, SessionLog};
use crate::scoring::Observation;
use crate::seed;
use crate::sequencer::SlotRole;

/// Pools with ids `t0000.., f0000.., v0000..`.
pub fn synthetic_pools(targets: usize, fillers: usize, vigilance: usize) -> Pools {
    let ids = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i:04}")).collect();
    Pools {
        targets: ids("t", targets),
        fillers: ids("f", fillers),
        vigilance: ids("v", vigilance),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    /// Hit probability of each image at the horizon.
    pub probabilities: BTreeMap<ImageId, f64>,
}

impl PlantedModel {
    /// Probabilities drawn uniformly within `spread` of the level implied by
    /// `alpha` and `beta` at the horizon.
    pub fn uniform(images: &[ImageId], alpha: f64, beta: f64, horizon: f64, spread: f64, seed: u64) -> Self {
        let centre = alpha + beta * horizon.ln();
        let mut rng = seed::rng(seed);
        let probabilities = images
            .iter()
            .map(|id| {
                let u: f64 = rng.random_range(-1.0..=1.0);
                (id.clone(), (centre + spread * u).clamp(0.0, 1.0))
            })
            .collect();
        PlantedModel {
            alpha,
            beta,
            horizon,
            probabilities,
        }
    }

    pub fn hit_probability(&self, image_id: &str, interval: f64) -> f64 {
        let m = self.probabilities.get(image_id).copied().unwrap_or(self.alpha);
        (m + self.beta * (interval.ln() - self.horizon.ln())).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetBehavior {
    Planted(PlantedModel),
    /// Presses on target repeats with a fixed probability regardless of the image.
    Random { p_press: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub targets: TargetBehavior,
    pub vigilance_hit: f64,
    /// Press probability on every first presentation.
    pub false_alarm: f64,
}

impl Behavior {
    pub fn press_probability(&self, role: SlotRole, image_id: &str, interval: Option<usize>) -> f64 {
        match role {
            SlotRole::TargetRepeat => match &self.targets {
                TargetBehavior::Planted(m) => m.hit_probability(image_id, interval.unwrap_or(1) as f64),
                TargetBehavior::Random { p_press } => *p_press,
            },
            SlotRole::VigilanceRepeat => self.vigilance_hit,
            _ => self.false_alarm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub sessions_per_subject: usize,
    pub seed: u64,
    pub game: GameConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_subjects: 104,
            sessions_per_subject: 13,
            seed: 0,
            game: GameConfig::default(),
        }
    }
}

fn subject_id(k: usize) -> String {
    format!("subj-{k:03}")
}

/// Plays every session through an in-memory engine, subject by subject.
pub fn simulate_sessions(config: &SimConfig, pools: Pools, behavior: &Behavior) -> Result<Vec<SessionLog>, GameError> {
    let mut game = config.game.clone();
    game.master_seed = seed::derive(config.seed, 1);
    let mut engine = GameEngine::in_memory(game, pools);
    let mut now = 0u64;
    let step = u64::from(engine.config().display_duration_ms + engine.config().isi_ms);
    for k in 0..config.n_subjects {
        let subject = subject_id(k);
        for s in 0..config.sessions_per_subject {
            let mut rng: ChaCha8Rng = seed::rng(seed::derive_keyed(config.seed, &subject, s as u64));
            let state = engine.start_session(&subject, now)?;
            for slot in &state.plan.slots {
                let interval = state.plan.first_view_of(slot).map(|f| slot.position - f);
                let p = behavior.press_probability(slot.role, &slot.image_id, interval);
                let pressed = rng.random_bool(p.clamp(0.0, 1.0));
                let rt = pressed.then(|| rng.random_range(350..900));
                engine.record_response(&state.session_id, slot.position, pressed, rt, now)?;
                now += step;
            }
        }
    }
    let st = engine.state();
    Ok(st
        .sessions
        .values()
        .map(|s| SessionLog {
            session_id: s.session_id.clone(),
            subject_id: s.subject_id.clone(),
            plan: s.plan.clone(),
            events: st.events.get(&s.session_id).cloned().unwrap_or_default(),
            status: s.status,
        })
        .collect())
}

/// How a direct simulation picks repeat intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalDraw {
    Fixed { interval: u32 },
    Uniform { min: u32, max: u32 },
}

/// One observation per (subject, image), bypassing plans and the engine.
pub fn simulate_observations(
    images: &[ImageId],
    targets: &TargetBehavior,
    n_subjects: usize,
    intervals: IntervalDraw,
    seed: u64,
) -> Vec<Observation> {
    let behavior = Behavior {
        targets: targets.clone(),
        vigilance_hit: 1.0,
        false_alarm: 0.0,
    };
    let mut out = Vec::with_capacity(images.len() * n_subjects);
    for k in 0..n_subjects {
        let subject = subject_id(k);
        let mut rng = seed::rng(seed::derive_keyed(seed, &subject, 0));
        for id in images {
            let interval = match intervals {
                IntervalDraw::Fixed { interval } => interval,
                IntervalDraw::Uniform { min, max } => rng.random_range(min..=max),
            };
            let p = behavior.press_probability(SlotRole::TargetRepeat, id, Some(interval as usize));
            out.push(Observation {
                image_id: id.clone(),
                subject_id: subject.clone(),
                hit: rng.random_bool(p),
                interval,
            });
        }
    }
    out
}

/// `n_subjects` copies of one subject's responses: every subject answers
/// every image exactly like subject 0.
pub fn identical_subjects(template: &[Observation], n_subjects: usize) -> Vec<Observation> {
    (0..n_subjects)
        .flat_map(|k| {
            let subject = subject_id(k);
            template.iter().map(move |o| Observation {
                subject_id: subject.clone(),
                ..o.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_centre_matches_intercept() {
        let ids: Vec<ImageId> = (0..5).map(|i| i.to_string()).collect();
        let m = PlantedModel::uniform(&ids, 0.9, -0.08, 100.0, 0.0, 1);
        let c = 0.9 - 0.08 * 100f64.ln();
        for id in &ids {
            assert!((m.hit_probability(id, 100.0) - c).abs() < 1e-15);
            // the pooled line alpha + beta ln t
            assert!((m.hit_probability(id, 50.0) - (0.9 - 0.08 * 50f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn sessions_are_complete_and_deterministic() {
        let cfg = SimConfig {
            n_subjects: 2,
            sessions_per_subject: 2,
            seed: 5,
            ..SimConfig::default()
        };
        let behavior = Behavior {
            targets: TargetBehavior::Random { p_press: 0.5 },
            vigilance_hit: 1.0,
            false_alarm: 0.0,
        };
        let a = simulate_sessions(&cfg, synthetic_pools(140, 40, 15), &behavior).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|s| s.events.len() == 186));
        let b = simulate_sessions(&cfg, synthetic_pools(140, 40, 15), &behavior).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_copies_share_answers() {
        let ids: Vec<ImageId> = vec!["a".into(), "b".into()];
        let t = simulate_observations(&ids, &TargetBehavior::Random { p_press: 0.5 }, 1, IntervalDraw::Fixed { interval: 40 }, 3);
        let all = identical_subjects(&t, 4);
        assert_eq!(all.len(), 8);
        assert_eq!(all[5].hit, t[1].hit);
        assert_eq!(all[5].subject_id, "subj-002");
    }
}
