//! CSV ingestion, CSV output and JSON model documents.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{predict_cart, predict_gbs, CartModel, GbsModel};
use crate::error::{Result, TsbError};
use crate::model::{Dataset, LabelKind, Lambda, LossKind, TsbModel};

pub const SCHEMA_VERSION: &str = "1";

/// Serde adapter that writes non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Token(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Token(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float token {other:?}"))),
            },
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Reads a headered, comma-separated file.
///
/// Every column except `label_column` must be numeric. With `positive_label`
/// the label column is binary: cells equal to it become +1 and every other
/// value -1. Without it, labels that are all in {0, 1} or all in {-1, +1}
/// (both classes present) are binary, anything else numeric is continuous.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TsbError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let csv_err = |e: csv::Error| TsbError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| TsbError::Csv {
            path: path.to_path_buf(),
            message: format!("label column {label_column:?} not found in header"),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(TsbError::Csv {
            path: path.to_path_buf(),
            message: "no feature columns besides the label".into(),
        });
    }

    let mut features = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(TsbError::Parse {
                path: path.to_path_buf(),
                row,
                column: record.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let parse_err = |message: String| TsbError::Parse {
                path: path.to_path_buf(),
                row,
                column: j + 1,
                message,
            };
            if is_missing(cell) {
                return Err(parse_err("missing value".into()));
            }
            if j == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("non-numeric value {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value {cell:?}")));
            }
            features.push(v);
        }
    }
    if raw_labels.len() < 2 {
        return Err(TsbError::Csv {
            path: path.to_path_buf(),
            message: "fewer than 2 rows".into(),
        });
    }
    let (labels, kind) = map_labels(path, &raw_labels, positive_label, label_idx + 1)?;
    Dataset::from_flat(features, feature_names.len(), labels, Some(feature_names), kind)
}

fn map_labels(
    path: &Path,
    raw: &[String],
    positive: Option<&str>,
    column: usize,
) -> Result<(Vec<f64>, LabelKind)> {
    if let Some(positive) = positive {
        let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
        if !distinct.contains(positive) || distinct.len() != 2 {
            return Err(TsbError::Csv {
                path: path.to_path_buf(),
                message: format!(
                    "binary label column must hold exactly two values including {positive:?}; found {distinct:?}"
                ),
            });
        }
        let labels = raw.iter().map(|v| if v == positive { 1.0 } else { -1.0 }).collect();
        return Ok((labels, LabelKind::Binary));
    }
    let mut values = Vec::with_capacity(raw.len());
    for (r, cell) in raw.iter().enumerate() {
        let v: f64 = cell.parse().map_err(|_| TsbError::Parse {
            path: path.to_path_buf(),
            row: r + 1,
            column,
            message: format!("non-numeric label {cell:?}; pass a positive label for categorical classes"),
        })?;
        if !v.is_finite() {
            return Err(TsbError::Parse {
                path: path.to_path_buf(),
                row: r + 1,
                column,
                message: format!("non-finite label {cell:?}"),
            });
        }
        values.push(v);
    }
    let has = |t: f64| values.contains(&t);
    let only = |a: f64, b: f64| values.iter().all(|&v| v == a || v == b);
    if only(-1.0, 1.0) && has(-1.0) && has(1.0) {
        Ok((values, LabelKind::Binary))
    } else if only(0.0, 1.0) && has(0.0) && has(1.0) {
        let mapped = values.iter().map(|&v| if v == 1.0 { 1.0 } else { -1.0 }).collect();
        Ok((mapped, LabelKind::Binary))
    } else {
        Ok((values, LabelKind::Continuous))
    }
}

/// Reads the named feature columns of a headered CSV, in the given order.
/// Other columns are ignored.
pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TsbError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let csv_err = |e: csv::Error| TsbError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let columns = names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == name).ok_or_else(|| TsbError::Csv {
                path: path.to_path_buf(),
                message: format!("feature column {name:?} not found in header"),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = columns
            .iter()
            .map(|&j| {
                let cell = record.get(j).unwrap_or("");
                let err = |message: String| TsbError::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: j + 1,
                    message,
                };
                if is_missing(cell) {
                    return Err(err("missing value".into()));
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(format!("non-numeric value {cell:?}"))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a comma-separated file with a header row and LF line endings.
pub fn write_csv<I, R>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TsbError::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| TsbError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    writer.write_record(header).map_err(to_err)?;
    for row in rows {
        writer
            .write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(to_err)?;
    }
    writer
        .flush()
        .map_err(|e| TsbError::io(path, e))
}

/// Writes a dataset with its feature columns followed by a `label` column.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push("label");
    write_csv(
        path,
        &header,
        data.rows().zip(data.labels()).map(|(x, y)| {
            x.iter()
                .chain(std::iter::once(y))
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
        }),
    )
}

/// Any persisted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Model {
    Tsb(TsbModel),
    Cart(CartModel),
    Gbs(GbsModel),
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Tsb(m) => &m.feature_names,
            Model::Cart(m) => &m.feature_names,
            Model::Gbs(m) => &m.feature_names,
        }
    }

    /// Raw model output: the margin for boosted models, the leaf mean for CART.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Tsb(m) => m.predict(x),
            Model::Cart(m) => predict_cart(m, x),
            Model::Gbs(m) => predict_gbs(m, x),
        }
    }

    /// Probability of the +1 class for binary tasks.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        let margin = self.margin(x)?;
        Ok(match self {
            Model::Cart(_) => (0.5 * (1.0 + margin)).clamp(0.0, 1.0),
            _ => crate::loss::margin_to_probability(margin),
        })
    }
}

/// The flags a model was trained with, echoed into its document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEcho {
    pub algorithm: String,
    pub loss: LossKind,
    pub depth: usize,
    pub lambda: Option<Lambda>,
    pub shrinkage: f64,
    pub seed: Option<u64>,
    pub data: Option<String>,
    pub label: Option<String>,
    pub positive_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: String,
    pub config: TrainingEcho,
    #[serde(flatten)]
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model, config: TrainingEcho) -> Self {
        ModelDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            config,
            model,
        }
    }
}

pub fn save_model(doc: &ModelDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TsbError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, doc)
        .map_err(|e| TsbError::ModelDocument(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| TsbError::io(path, e))?;
    out.flush().map_err(|e| TsbError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| TsbError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| TsbError::ModelDocument(format!("{}: {e}", path.display())))?;
    match value.get("schema_version").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(TsbError::ModelDocument(format!(
                "unsupported schema_version {other:?} (expected {SCHEMA_VERSION:?})"
            )))
        }
        None => return Err(TsbError::ModelDocument("missing schema_version".into())),
    }
    serde_json::from_value(value)
        .map_err(|e| TsbError::ModelDocument(format!("{}: {e}", path.display())))
}
