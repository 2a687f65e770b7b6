//! Loading, encoding, and splitting tabular fairness datasets.
//!
//! CSV in, numeric matrix out: categorical features are one-hot encoded (one
//! indicator per category, nothing dropped), numeric features standardized to
//! mean 0 / stddev 1 on the full table, and the label and sensitive columns
//! mapped to {0,1} under conventions recorded in the dataset metadata.

use crate::error::{Error, Result};
use crate::netcore::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Column roles for a CSV file. `positive_label` names the raw label value
/// mapped to y=1; when absent the lexicographically greater value is used.
/// `features` defaults to every column that is neither label nor sensitive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    pub sensitive: String,
    #[serde(default)]
    pub positive_label: Option<serde_json::Value>,
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    fn positive_label_text(&self) -> Option<String> {
        self.positive_label.as_ref().map(|v| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

/// A parsed CSV table: header plus string cells, one Vec per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// How the numeric encoding of one output column was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Raw label value mapped to y=1.
    pub positive_label: String,
    /// Raw sensitive value mapped to s=1 (the minority class).
    pub sensitive_positive: String,
    /// Where standardization statistics were fitted ("full" or "train").
    pub standardization_scope: String,
    pub warnings: Vec<String>,
}

/// Encoded dataset: standardized feature matrix with binary label and
/// sensitive vectors. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Mat,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub feature_names: Vec<String>,
    /// Per output column: `Some((mean, stddev))` for standardized numeric
    /// columns, `None` for one-hot indicators.
    pub standardization: Vec<Option<(f64, f64)>>,
    pub meta: DatasetMeta,
    /// Original row indices, preserved across splits so externally supplied
    /// score files stay aligned.
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Check the structural invariants; used by constructors and tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y.len() != n || self.s.len() != n || self.row_ids.len() != n {
            return Err(Error::Shape("dataset vectors disagree on n".into()));
        }
        if self.feature_names.len() != self.x.cols()
            || self.standardization.len() != self.x.cols()
        {
            return Err(Error::Shape("dataset metadata disagrees on d".into()));
        }
        if self.x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset feature matrix".into()));
        }
        for (name, col) in [("y", &self.y), ("s", &self.s)] {
            if col.iter().any(|&v| v > 1) {
                return Err(Error::Degenerate(format!("{name} contains non-binary values")));
            }
            let ones = col.iter().filter(|&&v| v == 1).count();
            if ones == 0 || ones == col.len() {
                return Err(Error::Degenerate(format!("{name} has an empty class")));
            }
        }
        Ok(())
    }
}

/// Train/test split request: deterministic shuffle under `seed`, train gets
/// `round(n * train_fraction)` rows. `refit_standardization` re-fits numeric
/// column statistics on the train half only (leakage-averse mode).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub refit_standardization: bool,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            seed,
            refit_standardization: false,
        }
    }
}

/// Parse a CSV file (UTF-8, comma-delimited, first row header) and validate
/// it against the schema's column names.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let column_names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != column_names.len() {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(Error::RaggedRow {
                line,
                expected: column_names.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    let table = RawTable { column_names, rows };
    // Fail early on schema/table mismatches.
    table.column_index(&schema.label)?;
    table.column_index(&schema.sensitive)?;
    if let Some(features) = &schema.features {
        for f in features {
            table.column_index(f)?;
        }
    }
    Ok(table)
}

fn distinct_values(column: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = column.iter().collect();
    set.into_iter().cloned().collect()
}

/// Map a two-valued column to {0,1}. Returns (encoded, value mapped to 1).
fn encode_binary(
    column: &[String],
    what: &str,
    positive: Option<&str>,
    minority_positive: bool,
) -> Result<(Vec<u8>, String)> {
    let distinct = distinct_values(column);
    if distinct.len() != 2 {
        return Err(Error::NotBinary {
            what: what.to_string(),
            count: distinct.len(),
        });
    }
    let positive_value = match positive {
        Some(p) => {
            if !distinct.iter().any(|v| v == p) {
                return Err(Error::Schema(format!(
                    "positive value '{p}' for {what} not found (column holds {distinct:?})"
                )));
            }
            p.to_string()
        }
        None if minority_positive => {
            let count_a = column.iter().filter(|v| **v == distinct[0]).count();
            let count_b = column.len() - count_a;
            // Minority class maps to 1; ties resolved lexicographically.
            if count_a < count_b {
                distinct[0].clone()
            } else if count_b < count_a {
                distinct[1].clone()
            } else {
                distinct[1].clone()
            }
        }
        None => distinct[1].clone(), // lexicographically greater value
    };
    let encoded = column
        .iter()
        .map(|v| u8::from(*v == positive_value))
        .collect();
    Ok((encoded, positive_value))
}

fn parse_numeric_column(column: &[String]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(column.len());
    for cell in column {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => return None,
        }
    }
    Some(out)
}

/// Encode a raw table into a numeric dataset. Numeric columns are
/// standardized with the population stddev on the full table; categorical
/// columns expand to one indicator per category named `col=value`.
pub fn preprocess(raw: &RawTable, schema: &Schema) -> Result<Dataset> {
    let n = raw.rows.len();
    if n == 0 {
        return Err(Error::Degenerate("empty table".into()));
    }
    let label_idx = raw.column_index(&schema.label)?;
    let sensitive_idx = raw.column_index(&schema.sensitive)?;
    if label_idx == sensitive_idx {
        return Err(Error::Schema(
            "label and sensitive name the same column".into(),
        ));
    }

    let column = |j: usize| -> Vec<String> { raw.rows.iter().map(|r| r[j].clone()).collect() };

    let mut warnings = Vec::new();
    let positive = schema.positive_label_text();
    let (y, positive_label) =
        encode_binary(&column(label_idx), "label", positive.as_deref(), false)?;
    let (s, sensitive_positive) = encode_binary(
        &column(sensitive_idx),
        "sensitive attribute",
        None,
        true,
    )?;

    let feature_columns: Vec<usize> = match &schema.features {
        Some(names) => names
            .iter()
            .map(|f| raw.column_index(f))
            .collect::<Result<Vec<_>>>()?,
        None => (0..raw.column_names.len())
            .filter(|&j| j != label_idx && j != sensitive_idx)
            .collect(),
    };
    if feature_columns.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut feature_names = Vec::new();
    let mut standardization = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &j in &feature_columns {
        let name = &raw.column_names[j];
        let cells = column(j);
        if let Some(values) = parse_numeric_column(&cells) {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            let encoded = if std > 0.0 {
                values.iter().map(|v| (v - mean) / std).collect()
            } else {
                warnings.push(format!(
                    "numeric column '{name}' has zero variance; encoded as constant 0"
                ));
                vec![0.0; n]
            };
            feature_names.push(name.clone());
            standardization.push(Some((mean, std)));
            columns.push(encoded);
        } else {
            for category in distinct_values(&cells) {
                feature_names.push(format!("{name}={category}"));
                standardization.push(None);
                columns.push(cells.iter().map(|c| f64::from(u8::from(*c == category))).collect());
            }
        }
    }

    let d = columns.len();
    let mut x = Mat::zeros(n, d);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x.set(i, j, v);
        }
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    let ds = Dataset {
        x,
        y,
        s,
        feature_names,
        standardization,
        meta: DatasetMeta {
            positive_label,
            sensitive_positive,
            standardization_scope: "full".to_string(),
            warnings,
        },
        row_ids: (0..n).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

fn take_rows(ds: &Dataset, idx: &[usize], scope: &str) -> Dataset {
    Dataset {
        x: ds.x.select_rows(idx),
        y: idx.iter().map(|&i| ds.y[i]).collect(),
        s: idx.iter().map(|&i| ds.s[i]).collect(),
        feature_names: ds.feature_names.clone(),
        standardization: ds.standardization.clone(),
        meta: DatasetMeta {
            standardization_scope: scope.to_string(),
            ..ds.meta.clone()
        },
        row_ids: idx.iter().map(|&i| ds.row_ids[i]).collect(),
    }
}

fn check_classes(half: &Dataset, name: &str) -> Result<()> {
    for (what, col) in [("label", &half.y), ("sensitive", &half.s)] {
        for class in [0u8, 1u8] {
            if !col.iter().any(|&v| v == class) {
                return Err(Error::SplitDegenerate {
                    half: name.to_string(),
                    class: format!("{what} class {class}"),
                });
            }
        }
    }
    Ok(())
}

/// Re-standardize numeric columns of both halves using statistics fitted on
/// the train half only.
fn refit_standardization(train: &mut Dataset, test: &mut Dataset) {
    let n_train = train.n() as f64;
    for j in 0..train.d() {
        let Some((old_mean, old_std)) = train.standardization[j] else {
            continue;
        };
        // Undo the full-table transform to recover raw values.
        let raw_of = |v: f64| {
            if old_std > 0.0 {
                v * old_std + old_mean
            } else {
                old_mean
            }
        };
        let mean = (0..train.n()).map(|i| raw_of(train.x.get(i, j))).sum::<f64>() / n_train;
        let var = (0..train.n())
            .map(|i| {
                let r = raw_of(train.x.get(i, j)) - mean;
                r * r
            })
            .sum::<f64>()
            / n_train;
        let std = var.sqrt();
        for half in [&mut *train, &mut *test] {
            for i in 0..half.n() {
                let raw = raw_of(half.x.get(i, j));
                let v = if std > 0.0 { (raw - mean) / std } else { 0.0 };
                half.x.set(i, j, v);
            }
        }
        train.standardization[j] = Some((mean, std));
        test.standardization[j] = Some((mean, std));
    }
    train.meta.standardization_scope = "train".to_string();
    test.meta.standardization_scope = "train".to_string();
}

/// Deterministic shuffled split. Both halves keep the feature names and
/// standardization parameters of the input; each must retain both label and
/// both sensitive classes.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = ds.n();
    if n < 10 {
        return Err(Error::DatasetTooSmall { n, min: 10 });
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "train_fraction {} leaves an empty half for n={n}",
            spec.train_fraction
        )));
    }
    let mut train = take_rows(ds, &order[..n_train], &ds.meta.standardization_scope);
    let mut test = take_rows(ds, &order[n_train..], &ds.meta.standardization_scope);
    check_classes(&train, "train")?;
    check_classes(&test, "test")?;
    if spec.refit_standardization {
        refit_standardization(&mut train, &mut test);
    }
    Ok((train, test))
}
