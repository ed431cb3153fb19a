//! Run configuration: a TOML file whose every field can be overridden by a
//! flag. Relative paths are taken relative to the working directory.

use std::path::{Path, PathBuf};

use scenemem_core::consistency::{CurveMode, DEFAULT_FILTER_LEN, DEFAULT_SPLITS};
use scenemem_core::evaluation::DEFAULT_PERMUTATIONS;
use scenemem_core::features::{GlcmConfig, PqftConfig};
use scenemem_core::game::GameConfig;
use scenemem_core::regressor::DEFAULT_FOLDS;
use scenemem_core::scoring::ScoringConfig;
use scenemem_core::sequencer::SequencerConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Corpus index; defaults to `<out>/corpus.json`.
    pub corpus: Option<PathBuf>,
    /// Event logs read by `score` and `consistency`; defaults to
    /// `<out>/events.jsonl`.
    pub logs: Vec<PathBuf>,
    pub ingest: IngestSection,
    pub annotate: AnnotateSection,
    pub plan: PlanSection,
    pub sequencer: SequencerConfig,
    pub game: GameConfig,
    pub serve: ServeSection,
    pub scoring: ScoringConfig,
    pub consistency: ConsistencySection,
    pub features: FeaturesSection,
    pub fit: FitSection,
    pub eval: EvalSection,
    pub report: ReportSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Directory the manifest paths are relative to.
    pub images: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    pub taxonomy: Option<PathBuf>,
    /// Vote files; each row names its task.
    pub votes: Vec<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub count: usize,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection { count: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind: String,
    /// Defaults to `<out>/events.jsonl`.
    pub log: Option<PathBuf>,
    /// Image root for `/images/{id}`; defaults to `ingest.images`.
    pub images: Option<PathBuf>,
    pub sweep_interval_ms: u64,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection {
            bind: "127.0.0.1:8080".into(),
            log: None,
            images: None,
            sweep_interval_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencySection {
    pub splits: usize,
    pub filter_len: usize,
    pub mode: CurveMode,
    pub top_k: Vec<usize>,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        ConsistencySection {
            splits: DEFAULT_SPLITS,
            filter_len: DEFAULT_FILTER_LEN,
            mode: CurveMode::default(),
            top_k: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Hsv,
    Glcm,
    Saliency,
    Category,
}

impl Extractor {
    pub fn name(self) -> &'static str {
        match self {
            Extractor::Hsv => "hsv",
            Extractor::Glcm => "glcm",
            Extractor::Saliency => "saliency",
            Extractor::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Extractor::Hsv, Extractor::Glcm, Extractor::Saliency, Extractor::Category]
            .into_iter()
            .find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalFeatures {
    pub path: PathBuf,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// Image root; defaults to `ingest.images`.
    pub images: Option<PathBuf>,
    pub extractors: Vec<Extractor>,
    pub glcm: GlcmConfig,
    pub pqft: PqftConfig,
    pub grid: usize,
    /// Also write every saliency map as a PGM under `<out>/saliency/`.
    pub export_maps: bool,
    pub external: Vec<ExternalFeatures>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            images: None,
            extractors: vec![Extractor::Hsv, Extractor::Glcm, Extractor::Saliency],
            glcm: GlcmConfig::default(),
            pqft: PqftConfig::default(),
            grid: 32,
            export_maps: false,
            external: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Hik,
    Rbf,
    Sum,
}

impl KernelChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hik" => Some(KernelChoice::Hik),
            "rbf" => Some(KernelChoice::Rbf),
            "sum" => Some(KernelChoice::Sum),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Feature set names under `<out>/features/` or feature file paths; the
    /// sets are concatenated in this order.
    pub features: Vec<String>,
    pub kernel: KernelChoice,
    /// Kernel applied to each feature block when `kernel = "sum"`.
    pub member_kernel: KernelChoice,
    pub lambdas: Option<Vec<f64>>,
    /// RBF widths; for sums the same list applies to every block.
    pub gammas: Option<Vec<f64>>,
    pub folds: usize,
    pub test_fraction: f64,
    /// Score table; defaults to `<out>/scores.tsv`.
    pub scores: Option<PathBuf>,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            features: vec!["hsv".into()],
            kernel: KernelChoice::Rbf,
            member_kernel: KernelChoice::Rbf,
            lambdas: None,
            gammas: None,
            folds: DEFAULT_FOLDS,
            test_fraction: 0.2,
            scores: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Defaults to `<out>/predictions.tsv`.
    pub predictions: Option<PathBuf>,
    /// Defaults to `<out>/truth_test.tsv`.
    pub truth: Option<PathBuf>,
    pub permutations: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            predictions: None,
            truth: None,
            permutations: DEFAULT_PERMUTATIONS,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Defaults to `<out>/eval.json`.
    pub eval: Option<PathBuf>,
    /// Defaults to `<out>/features/glcm.tsv`.
    pub glcm: Option<PathBuf>,
    /// Defaults to `<out>/scores.tsv`.
    pub scores: Option<PathBuf>,
    /// `term, frequency` table; the frequency report is skipped without it.
    pub frequencies: Option<PathBuf>,
    pub group_bounds: Option<Vec<usize>>,
    pub bands: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_subjects: usize,
    pub sessions_per_subject: usize,
    pub alpha: f64,
    pub beta: f64,
    pub horizon: f64,
    /// Half-width of the uniform spread of planted image probabilities.
    pub spread: f64,
    pub vigilance_hit: f64,
    pub false_alarm: f64,
    /// `[targets, fillers, vigilance]` synthetic pool sizes, used instead of
    /// the corpus when set.
    pub pools: Option<[usize; 3]>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            n_subjects: 104,
            sessions_per_subject: 13,
            alpha: 0.9,
            beta: -0.08,
            horizon: 100.0,
            spread: 0.08,
            vigilance_hit: 0.95,
            false_alarm: 0.05,
            pools: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            anyhow::anyhow!("config {}: {}", path.display(), e.message())
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.out_path("corpus.json"))
    }

    pub fn log_paths(&self) -> Vec<PathBuf> {
        if self.logs.is_empty() {
            vec![self.out_path("events.jsonl")]
        } else {
            self.logs.clone()
        }
    }

    pub fn image_root(&self, specific: &Option<PathBuf>) -> Option<PathBuf> {
        specific.clone().or_else(|| self.ingest.images.clone())
    }
}

/// Collects every validation problem before reporting.
#[derive(Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(msg());
        }
    }

    pub fn file(&mut self, what: &str, path: &Path) {
        if !path.is_file() {
            self.0.push(format!("{what} `{}` does not exist", path.display()));
        }
    }

    pub fn dir(&mut self, what: &str, path: &Path) {
        if !path.is_dir() {
            self.0.push(format!("{what} `{}` is not a directory", path.display()));
        }
    }

    pub fn required<'a, T>(&mut self, what: &str, value: &'a Option<T>) -> Option<&'a T> {
        if value.is_none() {
            self.0.push(format!("{what} is required"));
        }
        value.as_ref()
    }

    pub fn probability(&mut self, what: &str, v: f64) {
        self.check((0.0..=1.0).contains(&v), || format!("{what} must lie in [0, 1], got {v}"));
    }

    pub fn finish(self) -> anyhow::Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(anyhow::anyhow!("invalid config: {}", self.0.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problems_are_joined_in_order() {
        let mut p = Problems::default();
        p.probability("a", 1.5);
        p.required::<u64>("seed", &None);
        p.check(true, || unreachable!());
        let msg = p.finish().unwrap_err().to_string();
        assert_eq!(msg, "invalid config: a must lie in [0, 1], got 1.5; seed is required");
    }

    #[test]
    fn nested_sections_parse() {
        let cfg: RunConfig = toml::from_str(
            "[sequencer]\nn_targets = 5\ntarget_spacing = { min = 4, max = 9 }\n[features]\nextractors = [\"glcm\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.sequencer.n_targets, 5);
        assert_eq!(cfg.sequencer.n_fillers, 30);
        assert_eq!(cfg.features.extractors, vec![Extractor::Glcm]);
        assert!(toml::from_str::<RunConfig>("[plan]\ncounts = 2\n").is_err());
    }
}
