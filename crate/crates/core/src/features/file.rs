//! Feature files: a `feature=<name><sep>dim=<d>` line, then one
//! `image_id<sep>v1<sep>...<sep>vd` row per image.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::ImageId;
use crate::delimited::delimiter_for;

use super::FeatureError;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub name: String,
    pub dim: usize,
    pub vectors: BTreeMap<ImageId, Vec<f64>>,
}

impl FeatureSet {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        FeatureSet {
            name: name.into(),
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&[f64]> {
        self.vectors.get(image_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, image_id: ImageId, values: Vec<f64>) -> Result<(), FeatureError> {
        if values.len() != self.dim {
            return Err(FeatureError::DimensionMismatch {
                line: 0,
                image_id,
                expected: self.dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { line: 0, image_id });
        }
        self.vectors.insert(image_id, values);
        Ok(())
    }
}

fn parse_header(line: &str, sep: char) -> Result<(String, usize), FeatureError> {
    let mut name = None;
    let mut dim = None;
    for field in line.split(sep).map(str::trim) {
        match field.split_once('=') {
            Some(("feature", v)) if !v.is_empty() => name = Some(v.to_string()),
            Some(("dim", v)) => {
                dim = Some(
                    v.parse::<usize>()
                        .map_err(|_| FeatureError::Format(format!("bad dim `{v}` in header")))?,
                )
            }
            _ => {}
        }
    }
    match (name, dim) {
        (Some(n), Some(d)) if d > 0 => Ok((n, d)),
        _ => Err(FeatureError::Format(
            "first line must be `feature=<name>` and `dim=<d>`".into(),
        )),
    }
}

/// Reads a feature file. With `expected_dim` set, the header must agree. Rows
/// naming images outside `known` are rejected.
pub fn load_external_vectors(
    path: &Path,
    expected_dim: Option<usize>,
    known: Option<&BTreeSet<ImageId>>,
) -> Result<FeatureSet, FeatureError> {
    let text = std::fs::read_to_string(path)?;
    let sep = delimiter_for(path) as char;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines
        .next()
        .ok_or_else(|| FeatureError::Format("empty file".into()))?;
    let (name, dim) = parse_header(header, sep)?;
    if let Some(e) = expected_dim {
        if e != dim {
            return Err(FeatureError::Format(format!(
                "header declares dim {dim}, expected {e}"
            )));
        }
    }
    let mut set = FeatureSet::new(name, dim);
    for (line, row) in lines {
        let mut fields = row.split(sep).map(str::trim);
        let image_id = fields.next().unwrap_or_default().to_string();
        let raw: Vec<&str> = fields.collect();
        if raw.len() != dim {
            return Err(FeatureError::DimensionMismatch {
                line,
                image_id,
                expected: dim,
                found: raw.len(),
            });
        }
        if known.is_some_and(|k| !k.contains(&image_id)) {
            return Err(FeatureError::UnknownImage { line, image_id });
        }
        let mut values = Vec::with_capacity(dim);
        for r in raw {
            let v: f64 = r.parse().map_err(|_| {
                FeatureError::Format(format!("line {line}: `{r}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(FeatureError::NonFinite { line, image_id });
            }
            values.push(v);
        }
        if set.vectors.contains_key(&image_id) {
            return Err(FeatureError::DuplicateImage { line, image_id });
        }
        set.vectors.insert(image_id, values);
    }
    Ok(set)
}

pub fn write_feature_file(path: &Path, set: &FeatureSet) -> Result<(), FeatureError> {
    let sep = delimiter_for(path) as char;
    let mut out = format!("feature={}{sep}dim={}\n", set.name, set.dim);
    for (id, values) in &set.vectors {
        out.push_str(id);
        for v in values {
            let _ = write!(out, "{sep}{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
