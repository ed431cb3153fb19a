use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::RegressorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    HistogramIntersection,
    Rbf { gamma: f64 },
    Sum { members: Vec<SumMember> },
}

/// One term of a sum kernel, optionally restricted to the half-open column
/// range `start..end` of the concatenated feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumMember {
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<(usize, usize)>,
}

impl KernelSpec {
    pub fn validate(&self, dim: usize) -> Result<(), RegressorError> {
        match self {
            KernelSpec::HistogramIntersection => Ok(()),
            KernelSpec::Rbf { gamma } => {
                if gamma.is_finite() && *gamma > 0.0 {
                    Ok(())
                } else {
                    Err(RegressorError::InvalidGamma(*gamma))
                }
            }
            KernelSpec::Sum { members } => {
                if members.is_empty() {
                    return Err(RegressorError::EmptySum);
                }
                for m in members {
                    let inner = match m.columns {
                        Some((s, e)) if s >= e || e > dim => {
                            return Err(RegressorError::ColumnRange { start: s, end: e, dim })
                        }
                        Some((s, e)) => e - s,
                        None => dim,
                    };
                    m.kernel.validate(inner)?;
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::HistogramIntersection => "hik".into(),
            KernelSpec::Rbf { gamma } => format!("rbf(gamma={gamma})"),
            KernelSpec::Sum { members } => {
                let parts: Vec<String> = members
                    .iter()
                    .map(|m| match m.columns {
                        Some((s, e)) => format!("{}[{s}..{e}]", m.kernel.label()),
                        None => m.kernel.label(),
                    })
                    .collect();
                format!("sum({})", parts.join(" + "))
            }
        }
    }

    /// Whether any (nested) member is an RBF kernel, i.e. needs column scales.
    pub fn uses_rbf(&self) -> bool {
        match self {
            KernelSpec::HistogramIntersection => false,
            KernelSpec::Rbf { .. } => true,
            KernelSpec::Sum { members } => members.iter().any(|m| m.kernel.uses_rbf()),
        }
    }

    /// Checks the nonnegativity HIK needs on the columns it reads.
    pub(crate) fn check_input(&self, row: usize, x: &[f64]) -> Result<(), RegressorError> {
        match self {
            KernelSpec::HistogramIntersection => match x.iter().position(|&v| v < 0.0) {
                Some(column) => Err(RegressorError::NegativeFeature { row, column }),
                None => Ok(()),
            },
            KernelSpec::Rbf { .. } => Ok(()),
            KernelSpec::Sum { members } => {
                for m in members {
                    let (s, e) = m.columns.unwrap_or((0, x.len()));
                    m.kernel.check_input(row, &x[s..e]).map_err(|err| match err {
                        RegressorError::NegativeFeature { row, column } => {
                            RegressorError::NegativeFeature { row, column: column + s }
                        }
                        other => other,
                    })?;
                }
                Ok(())
            }
        }
    }

    /// `k(a, b)`. `scale` divides coordinate differences inside RBF terms
    /// (z-scoring; the mean cancels in a difference).
    pub fn eval(&self, a: &[f64], b: &[f64], scale: &[f64]) -> f64 {
        match self {
            KernelSpec::HistogramIntersection => a.iter().zip(b).map(|(x, y)| x.min(*y)).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a
                    .iter()
                    .zip(b)
                    .zip(scale)
                    .map(|((x, y), s)| ((x - y) / s).powi(2))
                    .sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Sum { members } => members
                .iter()
                .map(|m| {
                    let (s, e) = m.columns.unwrap_or((0, a.len()));
                    m.kernel.eval(&a[s..e], &b[s..e], &scale[s..e])
                })
                .sum(),
        }
    }
}

fn check_rows(features: &[Vec<f64>]) -> Result<usize, RegressorError> {
    let dim = features.first().map_or(0, Vec::len);
    for (row, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(RegressorError::DimensionMismatch {
                expected: dim,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(RegressorError::NonFinite(format!("feature row {row}")));
        }
    }
    Ok(dim)
}

pub(crate) fn validated(features: &[Vec<f64>], spec: &KernelSpec) -> Result<usize, RegressorError> {
    let dim = check_rows(features)?;
    spec.validate(dim)?;
    for (row, f) in features.iter().enumerate() {
        spec.check_input(row, f)?;
    }
    Ok(dim)
}

pub(crate) fn gram_scaled(features: &[Vec<f64>], spec: &KernelSpec, scale: &[f64]) -> DMatrix<f64> {
    let n = features.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(&features[i], &features[j], scale);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Gram matrix on raw (unscaled) features.
pub fn gram(features: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>, RegressorError> {
    let dim = validated(features, spec)?;
    Ok(gram_scaled(features, spec, &vec![1.0; dim]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let hik = KernelSpec::HistogramIntersection;
        assert_eq!(hik.eval(&[1.0, 2.0], &[2.0, 1.0], &[1.0, 1.0]), 2.0);
        assert_eq!(hik.eval(&[0.5, 3.0], &[0.5, 3.0], &[1.0, 1.0]), 3.5);
        let rbf = KernelSpec::Rbf { gamma: 7.5 };
        assert_eq!(rbf.eval(&[0.3, -9.0], &[0.3, -9.0], &[1.0, 1.0]), 1.0);
        assert_eq!(rbf.eval(&[0.0], &[1.0], &[2.0]), (-7.5f64 * 0.25).exp());
    }

    #[test]
    fn sum_uses_column_ranges() {
        let spec = KernelSpec::Sum {
            members: vec![
                SumMember {
                    kernel: KernelSpec::HistogramIntersection,
                    columns: Some((0, 2)),
                },
                SumMember {
                    kernel: KernelSpec::Rbf { gamma: 1.0 },
                    columns: Some((2, 3)),
                },
            ],
        };
        let g = gram(&[vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 1.0]], &spec).unwrap();
        assert_eq!(g[(0, 1)], 2.0 + (-1.0f64).exp());
        assert_eq!(g[(0, 0)], 3.0 + 1.0);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
    }

    #[test]
    fn negative_under_hik_names_cell() {
        let spec = KernelSpec::Sum {
            members: vec![
                SumMember {
                    kernel: KernelSpec::Rbf { gamma: 1.0 },
                    columns: Some((0, 1)),
                },
                SumMember {
                    kernel: KernelSpec::HistogramIntersection,
                    columns: Some((1, 3)),
                },
            ],
        };
        // negative values are fine in the RBF columns
        assert!(gram(&[vec![-1.0, 0.0, 1.0]], &spec).is_ok());
        assert_eq!(
            gram(&[vec![0.0, 0.0, 1.0], vec![-1.0, 0.0, -0.5]], &spec).unwrap_err(),
            RegressorError::NegativeFeature { row: 1, column: 2 }
        );
    }

    #[test]
    fn spec_validation() {
        assert_eq!(KernelSpec::Rbf { gamma: 0.0 }.validate(3), Err(RegressorError::InvalidGamma(0.0)));
        assert_eq!(KernelSpec::Sum { members: vec![] }.validate(3), Err(RegressorError::EmptySum));
        let bad = KernelSpec::Sum {
            members: vec![SumMember {
                kernel: KernelSpec::HistogramIntersection,
                columns: Some((2, 5)),
            }],
        };
        assert!(matches!(bad.validate(4), Err(RegressorError::ColumnRange { .. })));
    }

    #[test]
    fn spec_json_shape() {
        let spec = KernelSpec::Rbf { gamma: 0.25 };
        assert_eq!(serde_json::to_string(&spec).unwrap(), r#"{"kind":"rbf","gamma":0.25}"#);
        let back: KernelSpec = serde_json::from_str(r#"{"kind":"histogram_intersection"}"#).unwrap();
        assert_eq!(back, KernelSpec::HistogramIntersection);
    }
}
