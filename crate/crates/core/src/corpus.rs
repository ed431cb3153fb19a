//! Image corpus: manifest ingestion, role pools, the scene taxonomy and
//! multi-label category annotation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delimited;

pub type ImageId = String;
pub type CategoryId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("line {line}: duplicate image_id `{image_id}`")]
    DuplicateImage { line: u64, image_id: ImageId },
    #[error("line {line}: unknown pool `{value}` for image `{image_id}`")]
    UnknownPool {
        line: u64,
        image_id: ImageId,
        value: String,
    },
    #[error("{} image(s) could not be loaded: {}", .0.len(), render_problems(.0))]
    Unreadable(Vec<ImageProblem>),
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("vote references unknown image `{0}`")]
    UnknownImage(ImageId),
    #[error("vote references unknown category `{0}`")]
    UnknownCategory(CategoryId),
    #[error("corpus has no taxonomy; run annotation first")]
    NoTaxonomy,
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
}

fn render_problems(problems: &[ImageProblem]) -> String {
    problems
        .iter()
        .map(|p| format!("{} ({})", p.image_id, p.reason))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One manifest row whose file was absent or failed to decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageProblem {
    pub image_id: ImageId,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Target,
    Filler,
    Vigilance,
}

impl FromStr for Pool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "target" => Ok(Pool::Target),
            "filler" => Ok(Pool::Filler),
            "vigilance" => Ok(Pool::Vigilance),
            other => Err(other.to_owned()),
        }
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pool::Target => "target",
            Pool::Filler => "filler",
            Pool::Vigilance => "vigilance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: ImageId,
    /// Absolute or corpus-relative path to the decodable file.
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub pool: Pool,
    #[serde(default)]
    pub categories: BTreeSet<CategoryId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

/// Ordered scene-category list. The order fixes the index of each category
/// in [`category_vector`] output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Category>", into = "Vec<Category>")]
pub struct Taxonomy {
    categories: Vec<Category>,
    #[serde(skip)]
    index: HashMap<CategoryId, usize>,
}

impl Taxonomy {
    pub fn new(categories: Vec<Category>) -> Result<Self, CorpusError> {
        if categories.is_empty() {
            return Err(CorpusError::Taxonomy("taxonomy must have at least one category".into()));
        }
        let mut index = HashMap::new();
        let mut names = BTreeSet::new();
        for (i, c) in categories.iter().enumerate() {
            if index.insert(c.id.clone(), i).is_some() {
                return Err(CorpusError::Taxonomy(format!("duplicate category id `{}`", c.id)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(CorpusError::Taxonomy(format!("duplicate category name `{}`", c.name)));
            }
        }
        Ok(Taxonomy { categories, index })
    }

    /// Convenience constructor where each name doubles as its id.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, CorpusError> {
        Taxonomy::new(
            names
                .iter()
                .map(|n| Category {
                    id: n.as_ref().to_owned(),
                    name: n.as_ref().to_owned(),
                })
                .collect(),
        )
    }

    /// Reads a `category_id, name` table.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let (header, rows) = delimited::read_table(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cols = delimited::column_indices(&header, &["category_id", "name"]).map_err(|message| {
            CorpusError::Format {
                path: path.to_owned(),
                message,
            }
        })?;
        let categories = rows
            .iter()
            .map(|(_, r)| Category {
                id: r.get(cols[0]).unwrap_or_default().to_owned(),
                name: r.get(cols[1]).unwrap_or_default().to_owned(),
            })
            .collect();
        Taxonomy::new(categories)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }
}

impl TryFrom<Vec<Category>> for Taxonomy {
    type Error = CorpusError;

    fn try_from(value: Vec<Category>) -> Result<Self, Self::Error> {
        Taxonomy::new(value)
    }
}

impl From<Taxonomy> for Vec<Category> {
    fn from(t: Taxonomy) -> Self {
        t.categories
    }
}

/// The persisted corpus: every manifest row plus, once annotated, the taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<Taxonomy>,
    pub images: Vec<ImageRecord>,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|r| r.image_id == image_id)
    }

    /// Image ids of one pool, in manifest order.
    pub fn pool(&self, pool: Pool) -> Vec<ImageId> {
        self.images
            .iter()
            .filter(|r| r.pool == pool)
            .map(|r| r.image_id.clone())
            .collect()
    }

    pub fn image_ids(&self) -> BTreeSet<ImageId> {
        self.images.iter().map(|r| r.image_id.clone()).collect()
    }

    /// Installs a taxonomy and per-image category sets produced by
    /// [`merge_annotations`]. Images absent from `assignments` end up with no
    /// categories.
    pub fn apply_categories(
        &mut self,
        taxonomy: Taxonomy,
        assignments: &BTreeMap<ImageId, BTreeSet<CategoryId>>,
    ) -> Result<(), CorpusError> {
        for cats in assignments.values() {
            if let Some(c) = cats.iter().find(|c| !taxonomy.contains(c)) {
                return Err(CorpusError::UnknownCategory(c.clone()));
            }
        }
        for rec in &mut self.images {
            rec.categories = assignments.get(&rec.image_id).cloned().unwrap_or_default();
        }
        self.taxonomy = Some(taxonomy);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CorpusError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Reads the `image_id, path, pool` manifest and opens every referenced image
/// relative to `directory`. All missing or undecodable files are collected and
/// reported together.
pub fn ingest_images(directory: &Path, manifest: &Path) -> Result<CorpusIndex, CorpusError> {
    let (header, rows) = delimited::read_table(manifest).map_err(|source| CorpusError::Io {
        path: manifest.to_owned(),
        source,
    })?;
    let cols = delimited::column_indices(&header, &["image_id", "path", "pool"]).map_err(
        |message| CorpusError::Format {
            path: manifest.to_owned(),
            message,
        },
    )?;

    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let image_id = rec.get(cols[0]).unwrap_or_default().to_owned();
        let rel = rec.get(cols[1]).unwrap_or_default();
        let pool_raw = rec.get(cols[2]).unwrap_or_default();
        if image_id.is_empty() || rel.is_empty() {
            return Err(CorpusError::Format {
                path: manifest.to_owned(),
                message: format!("line {line}: empty image_id or path"),
            });
        }
        if !seen.insert(image_id.clone()) {
            return Err(CorpusError::DuplicateImage {
                line: *line,
                image_id,
            });
        }
        let pool = pool_raw.parse::<Pool>().map_err(|value| CorpusError::UnknownPool {
            line: *line,
            image_id: image_id.clone(),
            value,
        })?;
        entries.push((image_id, PathBuf::from(rel), pool));
    }

    let mut problems = Vec::new();
    let mut images = Vec::with_capacity(entries.len());
    for (image_id, rel, pool) in entries {
        let full = directory.join(&rel);
        if !full.is_file() {
            problems.push(ImageProblem {
                image_id,
                path: full,
                reason: "file not found".into(),
            });
            continue;
        }
        match image::open(&full) {
            Ok(img) => {
                let rgb = img.to_rgb8();
                if rgb.width() == 0 || rgb.height() == 0 {
                    problems.push(ImageProblem {
                        image_id,
                        path: full,
                        reason: "zero-sized image".into(),
                    });
                    continue;
                }
                images.push(ImageRecord {
                    image_id,
                    path: rel,
                    width: rgb.width(),
                    height: rgb.height(),
                    pool,
                    categories: BTreeSet::new(),
                });
            }
            Err(e) => problems.push(ImageProblem {
                image_id,
                path: full,
                reason: format!("decode failed: {e}"),
            }),
        }
    }
    if !problems.is_empty() {
        return Err(CorpusError::Unreadable(problems));
    }
    Ok(CorpusIndex {
        taxonomy: None,
        images,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationTask {
    Classification,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationVote {
    pub image_id: ImageId,
    pub annotator_id: String,
    pub task: AnnotationTask,
    pub category_id: CategoryId,
    /// Verification answers are "no" unless explicitly set.
    #[serde(default)]
    pub answer: bool,
}

/// Reads `image_id, annotator_id, task, category_id, answer` rows. The task
/// column accepts `classification`/`verification` or `1`/`2`; the answer
/// column accepts yes/no, true/false or 1/0 and an empty cell means no.
pub fn load_votes(path: &Path) -> Result<Vec<AnnotationVote>, CorpusError> {
    let fmt_err = |message: String| CorpusError::Format {
        path: path.to_owned(),
        message,
    };
    let (header, rows) = delimited::read_table(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let cols = delimited::column_indices(
        &header,
        &["image_id", "annotator_id", "task", "category_id", "answer"],
    )
    .map_err(fmt_err)?;
    let mut votes = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let field = |i: usize| rec.get(cols[i]).unwrap_or_default();
        let task = match field(2).to_ascii_lowercase().as_str() {
            "classification" | "1" | "task1" => AnnotationTask::Classification,
            "verification" | "2" | "task2" => AnnotationTask::Verification,
            other => return Err(fmt_err(format!("line {line}: unknown task `{other}`"))),
        };
        let answer = match field(4).to_ascii_lowercase().as_str() {
            "yes" | "y" | "true" | "1" => true,
            "no" | "n" | "false" | "0" | "" => false,
            other => return Err(fmt_err(format!("line {line}: unknown answer `{other}`"))),
        };
        votes.push(AnnotationVote {
            image_id: field(0).to_owned(),
            annotator_id: field(1).to_owned(),
            task,
            category_id: field(3).to_owned(),
            answer,
        });
    }
    Ok(votes)
}

/// Majority vote over both annotation tasks.
///
/// For every (image, category) pair each annotator contributes one effective
/// answer: their verification answer if they gave one, otherwise their
/// classification answer. Repeated votes within the same task keep the last
/// one. A category is assigned iff strictly more than half of the pair's
/// effective voters said yes. Every image in `known_images` appears in the
/// output, possibly with an empty set.
pub fn merge_annotations(
    task1_votes: &[AnnotationVote],
    task2_votes: &[AnnotationVote],
    taxonomy: &Taxonomy,
    known_images: &BTreeSet<ImageId>,
) -> Result<BTreeMap<ImageId, BTreeSet<CategoryId>>, CorpusError> {
    type Pair<'a> = (&'a str, &'a str);
    // (image, category) -> annotator -> answer
    let mut ballots: BTreeMap<Pair<'_>, BTreeMap<&str, bool>> = BTreeMap::new();
    let mut overridden: BTreeMap<Pair<'_>, BTreeSet<&str>> = BTreeMap::new();

    for vote in task1_votes.iter().chain(task2_votes) {
        if !known_images.contains(&vote.image_id) {
            return Err(CorpusError::UnknownImage(vote.image_id.clone()));
        }
        if !taxonomy.contains(&vote.category_id) {
            return Err(CorpusError::UnknownCategory(vote.category_id.clone()));
        }
    }
    for vote in task1_votes.iter().chain(task2_votes) {
        let key = (vote.image_id.as_str(), vote.category_id.as_str());
        let annotator = vote.annotator_id.as_str();
        let verified = overridden.entry(key).or_default();
        match vote.task {
            AnnotationTask::Verification => {
                verified.insert(annotator);
            }
            AnnotationTask::Classification if verified.contains(annotator) => continue,
            AnnotationTask::Classification => {}
        }
        ballots.entry(key).or_default().insert(annotator, vote.answer);
    }

    let mut out: BTreeMap<ImageId, BTreeSet<CategoryId>> =
        known_images.iter().map(|id| (id.clone(), BTreeSet::new())).collect();
    for ((image, category), answers) in ballots {
        let yes = answers.values().filter(|&&a| a).count();
        if 2 * yes > answers.len() {
            if let Some(set) = out.get_mut(image) {
                set.insert(category.to_owned());
            }
        }
    }
    Ok(out)
}

/// Binary indicator over the taxonomy's category order.
pub fn category_vector(image: &ImageRecord, taxonomy: &Taxonomy) -> Vec<f64> {
    let mut v = vec![0.0; taxonomy.len()];
    for c in &image.categories {
        if let Some(k) = taxonomy.position(c) {
            v[k] = 1.0;
        }
    }
    v
}
