//! Level plans for the repeat-detection game.
//!
//! A level interleaves target pairs (first view and a repeat 35-150 slots
//! later), vigilance pairs (repeat within a few slots) and single fillers.
//! Plans are generated by randomized placement with backtracking and are a
//! pure function of the inputs and the seed.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ImageId;
use crate::seed;

/// Failed pair placements tolerated before a restart.
pub const MAX_FAILED_PLACEMENTS: usize = 10_000;
/// Restarts tolerated before the configuration is declared infeasible.
pub const MAX_RESTARTS: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequencerError {
    #[error("invalid sequencer config: {0}")]
    InvalidConfig(String),
    #[error("insufficient {pool} pool: need {needed}, have {available}")]
    InsufficientPool {
        pool: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("infeasible plan: {0}")]
    Infeasible(String),
}

/// Inclusive slot-count window between the first view and the repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spacing {
    pub min: usize,
    pub max: usize,
}

impl Spacing {
    pub const fn new(min: usize, max: usize) -> Self {
        Spacing { min, max }
    }

    pub fn contains(&self, gap: usize) -> bool {
        (self.min..=self.max).contains(&gap)
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequencerConfig {
    pub n_targets: usize,
    pub n_fillers: usize,
    pub n_vigilance: usize,
    pub target_spacing: Spacing,
    pub vigilance_spacing: Spacing,
    pub seed: u64,
}

impl Default for SequencerConfig {
    fn default() -> Self {
        SequencerConfig {
            n_targets: 66,
            n_fillers: 30,
            n_vigilance: 12,
            target_spacing: Spacing::new(35, 150),
            vigilance_spacing: Spacing::new(1, 7),
            seed: 0,
        }
    }
}

impl SequencerConfig {
    pub fn level_length(&self) -> usize {
        2 * self.n_targets + self.n_fillers + 2 * self.n_vigilance
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SequencerError> {
        let mut problems = Vec::new();
        if self.level_length() == 0 {
            problems.push("level is empty".to_owned());
        }
        if self.target_spacing.min < 1 {
            problems.push("target_spacing.min must be >= 1".to_owned());
        }
        if self.vigilance_spacing.min < 1 {
            problems.push("vigilance_spacing.min must be >= 1".to_owned());
        }
        if self.target_spacing.min > self.target_spacing.max {
            problems.push(format!("target_spacing {} is empty", self.target_spacing));
        }
        if self.vigilance_spacing.min > self.vigilance_spacing.max {
            problems.push(format!("vigilance_spacing {} is empty", self.vigilance_spacing));
        }
        if self.vigilance_spacing.max >= self.target_spacing.min {
            problems.push(format!(
                "vigilance_spacing.max ({}) must be below target_spacing.min ({})",
                self.vigilance_spacing.max, self.target_spacing.min
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SequencerError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    TargetFirst,
    TargetRepeat,
    VigilanceFirst,
    VigilanceRepeat,
    Filler,
}

impl SlotRole {
    pub const ALL: [SlotRole; 5] = [
        SlotRole::TargetFirst,
        SlotRole::TargetRepeat,
        SlotRole::VigilanceFirst,
        SlotRole::VigilanceRepeat,
        SlotRole::Filler,
    ];

    pub fn is_repeat(self) -> bool {
        matches!(self, SlotRole::TargetRepeat | SlotRole::VigilanceRepeat)
    }

    pub fn is_vigilance(self) -> bool {
        matches!(self, SlotRole::VigilanceFirst | SlotRole::VigilanceRepeat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub position: usize,
    pub image_id: ImageId,
    pub role: SlotRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub seed: u64,
    pub slots: Vec<Slot>,
}

impl SessionPlan {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn count(&self, role: SlotRole) -> usize {
        self.slots.iter().filter(|s| s.role == role).count()
    }

    /// Image ids shown as targets in this plan.
    pub fn target_ids(&self) -> Vec<ImageId> {
        self.slots
            .iter()
            .filter(|s| s.role == SlotRole::TargetFirst)
            .map(|s| s.image_id.clone())
            .collect()
    }

    /// Position of the first view matching a repeat slot.
    pub fn first_view_of(&self, repeat: &Slot) -> Option<usize> {
        let first_role = match repeat.role {
            SlotRole::TargetRepeat => SlotRole::TargetFirst,
            SlotRole::VigilanceRepeat => SlotRole::VigilanceFirst,
            _ => return None,
        };
        self.slots[..repeat.position.min(self.slots.len())]
            .iter()
            .find(|s| s.role == first_role && s.image_id == repeat.image_id)
            .map(|s| s.position)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `slot.position` disagrees with its index.
    PositionIndex,
    /// Slot counts per role differ from the configuration.
    Composition,
    TargetSpacing,
    VigilanceSpacing,
    FillerUniqueness,
    /// A repeat without an earlier first view, a first view without a
    /// repeat, or one image used under incompatible roles.
    Pairing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub positions: Vec<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {:?}: {}", self.rule, self.positions, self.message)
    }
}

/// Checks every plan invariant; an empty result means the plan is valid.
pub fn validate_plan(plan: &SessionPlan, config: &SequencerConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    for (i, s) in plan.slots.iter().enumerate() {
        if s.position != i {
            out.push(Violation {
                rule: Rule::PositionIndex,
                positions: vec![i],
                message: format!("slot {i} claims position {}", s.position),
            });
        }
    }

    let expected = [
        (SlotRole::TargetFirst, config.n_targets),
        (SlotRole::TargetRepeat, config.n_targets),
        (SlotRole::VigilanceFirst, config.n_vigilance),
        (SlotRole::VigilanceRepeat, config.n_vigilance),
        (SlotRole::Filler, config.n_fillers),
    ];
    for (role, want) in expected {
        let got = plan.count(role);
        if got != want {
            out.push(Violation {
                rule: Rule::Composition,
                positions: vec![],
                message: format!("{role:?}: expected {want} slots, found {got}"),
            });
        }
    }

    let mut by_image: BTreeMap<&str, Vec<(usize, SlotRole)>> = BTreeMap::new();
    for (i, s) in plan.slots.iter().enumerate() {
        by_image.entry(&s.image_id).or_default().push((i, s.role));
    }
    for (image, occ) in by_image {
        let roles: Vec<SlotRole> = occ.iter().map(|&(_, r)| r).collect();
        let positions: Vec<usize> = occ.iter().map(|&(p, _)| p).collect();
        match roles.as_slice() {
            [SlotRole::Filler] => {}
            [SlotRole::TargetFirst, SlotRole::TargetRepeat] => {
                let gap = positions[1] - positions[0];
                if !config.target_spacing.contains(gap) {
                    out.push(Violation {
                        rule: Rule::TargetSpacing,
                        positions,
                        message: format!(
                            "target `{image}` repeats after {gap} slots, outside {}",
                            config.target_spacing
                        ),
                    });
                }
            }
            [SlotRole::VigilanceFirst, SlotRole::VigilanceRepeat] => {
                let gap = positions[1] - positions[0];
                if !config.vigilance_spacing.contains(gap) {
                    out.push(Violation {
                        rule: Rule::VigilanceSpacing,
                        positions,
                        message: format!(
                            "vigilance `{image}` repeats after {gap} slots, outside {}",
                            config.vigilance_spacing
                        ),
                    });
                }
            }
            r if r.iter().all(|&x| x == SlotRole::Filler) => out.push(Violation {
                rule: Rule::FillerUniqueness,
                positions,
                message: format!("filler `{image}` shown {} times", r.len()),
            }),
            r => out.push(Violation {
                rule: Rule::Pairing,
                positions,
                message: format!("image `{image}` has inconsistent role sequence {r:?}"),
            }),
        }
    }
    out
}

/// Builds one level plan.
///
/// Images are drawn uniformly from each pool with the seeded generator.
/// Vigilance pairs are placed first, then target pairs in random order; each
/// pair takes a uniformly random first slot among those admitting at least
/// one gap, then a uniformly random feasible gap. Dead ends undo earlier
/// pairs; after [`MAX_FAILED_PLACEMENTS`] failures the search restarts from a
/// derived seed, and after [`MAX_RESTARTS`] restarts it gives up. Fillers
/// take the remaining slots in random order.
pub fn plan_level(
    target_ids: &[ImageId],
    filler_ids: &[ImageId],
    vigilance_ids: &[ImageId],
    config: &SequencerConfig,
) -> Result<SessionPlan, SequencerError> {
    config.validate()?;
    for (pool, needed, available) in [
        ("target", config.n_targets, target_ids.len()),
        ("filler", config.n_fillers, filler_ids.len()),
        ("vigilance", config.n_vigilance, vigilance_ids.len()),
    ] {
        if available < needed {
            return Err(SequencerError::InsufficientPool {
                pool,
                needed,
                available,
            });
        }
    }
    let n = config.level_length();
    for (what, count, spacing) in [
        ("target", config.n_targets, config.target_spacing),
        ("vigilance", config.n_vigilance, config.vigilance_spacing),
    ] {
        if count > 0 && spacing.min >= n {
            return Err(SequencerError::Infeasible(format!(
                "{what} spacing {spacing} cannot fit in a level of {n} slots"
            )));
        }
    }

    let mut rng = seed::rng(config.seed);
    let pick = |rng: &mut rand_chacha::ChaCha8Rng, pool: &[ImageId], k: usize| -> Vec<ImageId> {
        index::sample(rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    };
    let vigilance = pick(&mut rng, vigilance_ids, config.n_vigilance);
    let targets = pick(&mut rng, target_ids, config.n_targets);
    let fillers = pick(&mut rng, filler_ids, config.n_fillers);

    let mut pairs: Vec<PairSpec> = Vec::with_capacity(vigilance.len() + targets.len());
    pairs.extend((0..vigilance.len()).map(|i| PairSpec {
        item: i,
        vigilance: true,
        spacing: config.vigilance_spacing,
    }));
    pairs.extend((0..targets.len()).map(|i| PairSpec {
        item: i,
        vigilance: false,
        spacing: config.target_spacing,
    }));

    let mut placement = None;
    for restart in 0..MAX_RESTARTS {
        let mut prng = seed::rng(seed::derive(config.seed, restart as u64));
        // target order is randomized, vigilance always goes first
        let split = vigilance.len();
        shuffle(&mut prng, &mut pairs[split..]);
        if let Some(p) = place_pairs(&pairs, n, &mut prng) {
            placement = Some((p, prng));
            break;
        }
    }
    let Some((placed, mut prng)) = placement else {
        return Err(SequencerError::Infeasible(format!(
            "no valid arrangement after {MAX_RESTARTS} restarts"
        )));
    };

    let mut slots: Vec<Option<Slot>> = vec![None; n];
    for (pair, &(first, gap)) in pairs.iter().zip(&placed) {
        let (id, roles) = if pair.vigilance {
            (&vigilance[pair.item], (SlotRole::VigilanceFirst, SlotRole::VigilanceRepeat))
        } else {
            (&targets[pair.item], (SlotRole::TargetFirst, SlotRole::TargetRepeat))
        };
        slots[first] = Some(Slot {
            position: first,
            image_id: id.clone(),
            role: roles.0,
        });
        slots[first + gap] = Some(Slot {
            position: first + gap,
            image_id: id.clone(),
            role: roles.1,
        });
    }
    let mut free: Vec<usize> = (0..n).filter(|&i| slots[i].is_none()).collect();
    debug_assert_eq!(free.len(), fillers.len());
    shuffle(&mut prng, &mut free);
    for (pos, id) in free.into_iter().zip(fillers) {
        slots[pos] = Some(Slot {
            position: pos,
            image_id: id,
            role: SlotRole::Filler,
        });
    }

    Ok(SessionPlan {
        seed: config.seed,
        slots: slots.into_iter().map(|s| s.expect("every slot filled")).collect(),
    })
}

#[derive(Debug, Clone, Copy)]
struct PairSpec {
    item: usize,
    vigilance: bool,
    spacing: Spacing,
}

fn shuffle<T, R: Rng>(rng: &mut R, items: &mut [T]) {
    use rand::seq::SliceRandom;
    items.shuffle(rng);
}

/// Places every pair, returning `(first_position, gap)` per pair, or `None`
/// once the failure budget is spent.
fn place_pairs<R: Rng>(pairs: &[PairSpec], n: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut occupied = vec![false; n];
    let mut placed: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
    let mut failures = 0usize;
    let mut streak = 0usize;
    let mut gaps = Vec::new();
    let mut starts = Vec::new();

    while placed.len() < pairs.len() {
        let spacing = pairs[placed.len()].spacing;
        starts.clear();
        for first in 0..n {
            if !occupied[first] && (first + spacing.min..=(first + spacing.max).min(n - 1)).any(|r| !occupied[r]) {
                starts.push(first);
            }
        }
        if starts.is_empty() {
            failures += 1;
            if failures > MAX_FAILED_PLACEMENTS || placed.is_empty() {
                return None;
            }
            // undo a growing number of earlier pairs on consecutive dead ends
            streak += 1;
            for _ in 0..streak.min(placed.len()) {
                let (first, gap) = placed.pop().expect("non-empty");
                occupied[first] = false;
                occupied[first + gap] = false;
            }
            continue;
        }
        streak = 0;
        let first = starts[rng.random_range(0..starts.len())];
        gaps.clear();
        gaps.extend(
            (spacing.min..=spacing.max).filter(|&g| first + g < n && !occupied[first + g]),
        );
        let gap = gaps[rng.random_range(0..gaps.len())];
        occupied[first] = true;
        occupied[first + gap] = true;
        placed.push((first, gap));
    }
    Some(placed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<ImageId> {
        (0..n).map(|i| format!("{prefix}{i:04}")).collect()
    }

    fn default_plan(seed: u64) -> SessionPlan {
        let cfg = SequencerConfig::default().with_seed(seed);
        plan_level(&ids("t", 200), &ids("f", 100), &ids("v", 40), &cfg).unwrap()
    }

    #[test]
    fn default_composition() {
        let plan = default_plan(1);
        assert_eq!(plan.len(), 186);
        assert_eq!(plan.count(SlotRole::TargetFirst), 66);
        assert_eq!(plan.count(SlotRole::TargetRepeat), 66);
        assert_eq!(plan.count(SlotRole::VigilanceFirst), 12);
        assert_eq!(plan.count(SlotRole::VigilanceRepeat), 12);
        assert_eq!(plan.count(SlotRole::Filler), 30);
        assert!(validate_plan(&plan, &SequencerConfig::default()).is_empty());
    }

    #[test]
    fn single_target_lands_in_window() {
        let cfg = SequencerConfig {
            n_targets: 1,
            n_vigilance: 0,
            n_fillers: 40,
            target_spacing: Spacing::new(35, 41),
            ..SequencerConfig::default()
        };
        for s in 0..50 {
            let plan = plan_level(&ids("t", 3), &ids("f", 40), &[], &cfg.with_seed(s)).unwrap();
            let first = plan.slots.iter().find(|s| s.role == SlotRole::TargetFirst).unwrap();
            let rep = plan.slots.iter().find(|s| s.role == SlotRole::TargetRepeat).unwrap();
            let gap = rep.position - first.position;
            assert!((35..=41).contains(&gap), "gap {gap}");
            assert!(validate_plan(&plan, &cfg).is_empty());
        }
    }

    #[test]
    fn oversized_spacing_is_infeasible() {
        let cfg = SequencerConfig {
            target_spacing: Spacing::new(200, 300),
            ..SequencerConfig::default()
        };
        let err = plan_level(&ids("t", 200), &ids("f", 100), &ids("v", 40), &cfg).unwrap_err();
        assert!(matches!(err, SequencerError::Infeasible(_)));
    }

    #[test]
    fn insufficient_pool() {
        let err = plan_level(&ids("t", 10), &ids("f", 100), &ids("v", 40), &SequencerConfig::default())
            .unwrap_err();
        assert_eq!(
            err,
            SequencerError::InsufficientPool {
                pool: "target",
                needed: 66,
                available: 10
            }
        );
    }

    #[test]
    fn overlapping_windows_rejected() {
        let cfg = SequencerConfig {
            vigilance_spacing: Spacing::new(1, 40),
            ..SequencerConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(SequencerError::InvalidConfig(_))));
    }

    #[test]
    fn deterministic_for_seed() {
        assert_eq!(default_plan(42), default_plan(42));
        assert_ne!(default_plan(42), default_plan(43));
    }

    fn tiny_config() -> SequencerConfig {
        SequencerConfig {
            n_targets: 1,
            n_fillers: 2,
            n_vigilance: 0,
            target_spacing: Spacing::new(2, 3),
            vigilance_spacing: Spacing::new(1, 1),
            seed: 0,
        }
    }

    fn slot(position: usize, id: &str, role: SlotRole) -> Slot {
        Slot {
            position,
            image_id: id.into(),
            role,
        }
    }

    #[test]
    fn flags_short_target_gap() {
        let cfg = SequencerConfig {
            n_targets: 1,
            n_fillers: 9,
            n_vigilance: 0,
            target_spacing: Spacing::new(35, 150),
            vigilance_spacing: Spacing::new(1, 7),
            seed: 0,
        };
        let mut slots = Vec::new();
        for i in 0..11 {
            let s = match i {
                0 => slot(0, "t", SlotRole::TargetFirst),
                10 => slot(10, "t", SlotRole::TargetRepeat),
                _ => slot(i, &format!("f{i}"), SlotRole::Filler),
            };
            slots.push(s);
        }
        let v = validate_plan(&SessionPlan { seed: 0, slots }, &cfg);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::TargetSpacing);
        assert_eq!(v[0].positions, vec![0, 10]);
    }

    #[test]
    fn flags_repeated_filler() {
        let plan = SessionPlan {
            seed: 0,
            slots: vec![
                slot(0, "t", SlotRole::TargetFirst),
                slot(1, "f", SlotRole::Filler),
                slot(2, "f", SlotRole::Filler),
                slot(3, "t", SlotRole::TargetRepeat),
            ],
        };
        let v = validate_plan(&plan, &tiny_config());
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::FillerUniqueness);
        assert_eq!(v[0].positions, vec![1, 2]);
    }

    #[test]
    fn flags_orphan_repeat() {
        let plan = SessionPlan {
            seed: 0,
            slots: vec![
                slot(0, "a", SlotRole::Filler),
                slot(1, "b", SlotRole::Filler),
                slot(2, "x", SlotRole::TargetFirst),
                slot(3, "t", SlotRole::TargetRepeat),
            ],
        };
        let v = validate_plan(&plan, &tiny_config());
        assert!(v.iter().any(|v| v.rule == Rule::Pairing));
    }

    #[test]
    fn first_view_lookup() {
        let plan = default_plan(9);
        for s in plan.slots.iter().filter(|s| s.role.is_repeat()) {
            let first = plan.first_view_of(s).unwrap();
            assert_eq!(plan.slots[first].image_id, s.image_id);
            assert!(first < s.position);
        }
    }
}
