//! Tabular datasets with typed columns, missing values and a class target.
//!
//! Columns are typed as numeric or text by scanning their non-missing cells:
//! a column where every non-missing token parses as a number becomes numeric,
//! any unparseable token makes the whole column text. Target labels are
//! indexed lexicographically so runs are reproducible independent of row
//! order.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Default tokens treated as missing after trimming whitespace.
pub const DEFAULT_MISSING_TOKENS: &[&str] = &["", "?", "NA"];

/// One cell of a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Canonical string form, used for category tables. Numbers use the
    /// shortest round-trip representation.
    pub fn canonical(&self) -> Option<String> {
        match self {
            Cell::Number(v) => Some(format!("{v}")),
            Cell::Text(s) => Some(s.clone()),
            Cell::Missing => None,
        }
    }
}

/// A named column of cells. Non-missing cells are either all numeric or all
/// text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub cells: Vec<Cell>,
}

impl Column {
    /// True when at least one non-missing cell is text.
    pub fn is_text(&self) -> bool {
        self.cells.iter().any(|c| matches!(c, Cell::Text(_)))
    }

    pub fn has_missing(&self) -> bool {
        self.cells.iter().any(Cell::is_missing)
    }

    /// Number of distinct non-missing values.
    pub fn distinct_count(&self) -> usize {
        let mut values: Vec<String> = self.cells.iter().filter_map(Cell::canonical).collect();
        values.sort();
        values.dedup();
        values.len()
    }

    fn check_not_mixed(&self) -> Result<(), DataError> {
        let mut saw_num = false;
        let mut saw_text = false;
        for c in &self.cells {
            match c {
                Cell::Number(_) => saw_num = true,
                Cell::Text(_) => saw_text = true,
                Cell::Missing => {}
            }
        }
        if saw_num && saw_text {
            return Err(DataError::MixedColumn(self.name.clone()));
        }
        Ok(())
    }
}

/// A loaded dataset: feature columns plus an indexed class target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<Column>,
    /// Class index per row, in `[0, class_count)`.
    pub target: Vec<usize>,
    pub target_name: String,
    /// Original class strings, in lexicographic order; index = class id.
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Validate structural invariants. Called on every construction path.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.n_rows();
        for col in &self.columns {
            if col.cells.len() != n {
                return Err(DataError::Csv(format!(
                    "column {:?} has {} cells, expected {n}",
                    col.name,
                    col.cells.len()
                )));
            }
            col.check_not_mixed()?;
            if n > 0 && col.cells.iter().all(Cell::is_missing) {
                return Err(DataError::AllMissing(col.name.clone()));
            }
        }
        if self.class_count() < 2 {
            return Err(DataError::TooFewClasses);
        }
        if let Some(&bad) = self.target.iter().find(|&&t| t >= self.class_count()) {
            return Err(DataError::Csv(format!("target index {bad} out of range")));
        }
        Ok(())
    }

    /// Copy of the dataset restricted to the given rows (in the given order).
    /// Label indexing is preserved even when a class drops out of the subset.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    cells: rows.iter().map(|&r| c.cells[r].clone()).collect(),
                })
                .collect(),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            target_name: self.target_name.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Classes that actually appear in this dataset, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.class_count()];
        for &t in &self.target {
            seen[t] = true;
        }
        (0..self.class_count()).filter(|&c| seen[c]).collect()
    }
}

/// Disjoint train/validation index sets over a dataset's rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

fn parse_cell(token: &str, missing_tokens: &[String]) -> Option<f64> {
    let _ = missing_tokens;
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a CSV file with a header row into a [`Dataset`].
///
/// Cells matching `missing_tokens` (after trimming surrounding whitespace)
/// become [`Cell::Missing`]. Columns where every non-missing token parses as
/// a number become numeric; any unparseable token makes the column text.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    missing_tokens: &[String],
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_pos = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::TargetMissing(target_column.to_string()))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row_i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(DataError::RaggedRow(row_i));
        }
        for (col_i, field) in record.iter().enumerate() {
            raw[col_i].push(field.trim().to_string());
        }
    }

    build_dataset(headers, raw, target_pos, missing_tokens)
}

fn build_dataset(
    headers: Vec<String>,
    raw: Vec<Vec<String>>,
    target_pos: usize,
    missing_tokens: &[String],
) -> Result<Dataset, DataError> {
    let is_missing = |tok: &str| missing_tokens.iter().any(|m| m == tok);

    // Target: every row must carry a label; index lexicographically.
    let target_raw = &raw[target_pos];
    if let Some(row) = target_raw.iter().position(|t| is_missing(t)) {
        return Err(DataError::MissingTarget(row));
    }
    let mut label_names: Vec<String> = target_raw.to_vec();
    label_names.sort();
    label_names.dedup();
    if label_names.len() < 2 {
        return Err(DataError::TooFewClasses);
    }
    let index_of: BTreeMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let target: Vec<usize> = target_raw.iter().map(|t| index_of[t.as_str()]).collect();

    let mut columns = Vec::new();
    for (col_i, header) in headers.iter().enumerate() {
        if col_i == target_pos {
            continue;
        }
        let tokens = &raw[col_i];
        let numeric = tokens
            .iter()
            .filter(|t| !is_missing(t))
            .all(|t| parse_cell(t, missing_tokens).is_some());
        let cells: Vec<Cell> = tokens
            .iter()
            .map(|t| {
                if is_missing(t) {
                    Cell::Missing
                } else if numeric {
                    Cell::Number(parse_cell(t, missing_tokens).unwrap())
                } else {
                    Cell::Text(t.clone())
                }
            })
            .collect();
        columns.push(Column {
            name: header.clone(),
            cells,
        });
    }

    let ds = Dataset {
        columns,
        target,
        target_name: headers[target_pos].clone(),
        label_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Write a dataset to CSV. Reloading with the same missing tokens reproduces
/// it cell for cell (missing cells are written as the empty string).
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let mut header: Vec<String> = ds.feature_names();
    header.push(ds.target_name.clone());
    writer
        .write_record(&header)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    for row in 0..ds.n_rows() {
        let mut record: Vec<String> = ds
            .columns
            .iter()
            .map(|c| match &c.cells[row] {
                Cell::Number(v) => format!("{v}"),
                Cell::Text(s) => s.clone(),
                Cell::Missing => String::new(),
            })
            .collect();
        record.push(ds.label_names[ds.target[row]].clone());
        writer
            .write_record(&record)
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    writer.flush().map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(())
}

fn rows_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); ds.class_count()];
    for (row, &cls) in ds.target.iter().enumerate() {
        groups[cls].push(row);
    }
    groups
}

/// Split rows into train/validation, deterministic given the seed.
///
/// When `stratified`, per-class proportions are preserved within one row per
/// class and each class keeps at least one row on both sides.
pub fn split_holdout(
    ds: &Dataset,
    val_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<SplitPair, DataError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DataError::InvalidSplit(format!(
            "val_fraction {val_fraction} outside (0, 1)"
        )));
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(DataError::InvalidSplit("need at least 2 rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut val = Vec::new();
    let mut train = Vec::new();
    if stratified {
        for (cls, mut rows) in rows_by_class(ds).into_iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            if rows.len() < 2 {
                return Err(DataError::InvalidSplit(format!(
                    "class {cls} has fewer than 2 rows; cannot stratify"
                )));
            }
            rows.shuffle(&mut rng);
            let want = (val_fraction * rows.len() as f64).round() as usize;
            let take = want.clamp(1, rows.len() - 1);
            val.extend_from_slice(&rows[..take]);
            train.extend_from_slice(&rows[take..]);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let want = (val_fraction * n as f64).round() as usize;
        let take = want.clamp(1, n - 1);
        val.extend_from_slice(&rows[..take]);
        train.extend_from_slice(&rows[take..]);
    }
    val.sort_unstable();
    train.sort_unstable();
    Ok(SplitPair {
        train_indices: train,
        val_indices: val,
    })
}

/// K-fold split: the validation parts partition the row set. Deterministic
/// given the seed; stratified folds balance every class within one row.
pub fn kfold(
    ds: &Dataset,
    k: usize,
    stratified: bool,
    seed: u64,
) -> Result<Vec<SplitPair>, DataError> {
    if k < 2 {
        return Err(DataError::InvalidSplit(format!("k={k} must be at least 2")));
    }
    let n = ds.n_rows();
    if k > n {
        return Err(DataError::InvalidSplit(format!("k={k} exceeds {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        for (cls, mut rows) in rows_by_class(ds).into_iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            if rows.len() < k {
                return Err(DataError::InvalidSplit(format!(
                    "class {cls} has {} rows, fewer than k={k}",
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            // Rotate the starting fold per class so remainders spread out
            // instead of piling onto fold 0.
            for (i, row) in rows.into_iter().enumerate() {
                folds[(i + cls) % k].push(row);
            }
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        for (i, row) in rows.into_iter().enumerate() {
            folds[i % k].push(row);
        }
    }
    let pairs = folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let mut val: Vec<usize> = test.clone();
            val.sort_unstable();
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            train.sort_unstable();
            SplitPair {
                train_indices: train,
                val_indices: val,
            }
        })
        .collect();
    Ok(pairs)
}

/// Shape of a synthetic dataset. Numeric features are drawn from per-class
/// Gaussian centers separated by `class_sep`; `n_noise_numerical` features
/// carry no class signal at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_numerical: usize,
    pub n_noise_numerical: usize,
    pub n_categorical: usize,
    pub n_binary: usize,
    pub with_identifier: bool,
    pub missing_rate: f64,
    pub n_classes: usize,
    pub class_sep: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_rows: 200,
            n_numerical: 4,
            n_noise_numerical: 0,
            n_categorical: 0,
            n_binary: 0,
            with_identifier: false,
            missing_rate: 0.0,
            n_classes: 2,
            class_sep: 3.0,
        }
    }
}

fn label_name(cls: usize, n_classes: usize) -> String {
    let width = (n_classes.max(2) - 1).to_string().len();
    format!("class_{cls:0width$}")
}

/// Generate a synthetic classification dataset, deterministic given the seed.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Dataset, DataError> {
    if spec.n_classes < 2 {
        return Err(DataError::InvalidSynthSpec(
            "n_classes must be at least 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.missing_rate) {
        return Err(DataError::InvalidSynthSpec(
            "missing_rate must lie in [0, 1)".into(),
        ));
    }
    let n_features = spec.n_numerical
        + spec.n_noise_numerical
        + spec.n_categorical
        + spec.n_binary
        + usize::from(spec.with_identifier);
    if n_features == 0 {
        return Err(DataError::InvalidSynthSpec(
            "zero feature columns requested".into(),
        ));
    }
    if spec.n_rows < 2 * spec.n_classes {
        return Err(DataError::InvalidSynthSpec(
            "need at least two rows per class".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_rows;
    let k = spec.n_classes;

    // Balanced class assignment, then shuffled.
    let mut target: Vec<usize> = (0..n).map(|i| i % k).collect();
    target.shuffle(&mut rng);

    let normal = |rng: &mut ChaCha8Rng| -> f64 {
        // Box-Muller transform.
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };

    let mut columns = Vec::new();

    for j in 0..spec.n_numerical {
        let centers: Vec<f64> = (0..k).map(|_| spec.class_sep * normal(&mut rng)).collect();
        let cells = target
            .iter()
            .map(|&cls| Cell::Number(centers[cls] + normal(&mut rng)))
            .collect();
        columns.push(Column {
            name: format!("num_{j}"),
            cells,
        });
    }
    for j in 0..spec.n_noise_numerical {
        let cells = (0..n).map(|_| Cell::Number(normal(&mut rng))).collect();
        columns.push(Column {
            name: format!("noise_{j}"),
            cells,
        });
    }
    for j in 0..spec.n_categorical {
        let n_levels = k.max(3);
        let cells = target
            .iter()
            .map(|&cls| {
                let level = if rng.random_range(0.0..1.0) < 0.7 {
                    cls % n_levels
                } else {
                    rng.random_range(0..n_levels)
                };
                Cell::Text(format!("lv{level}"))
            })
            .collect();
        columns.push(Column {
            name: format!("cat_{j}"),
            cells,
        });
    }
    for j in 0..spec.n_binary {
        let cells = target
            .iter()
            .map(|&cls| {
                let p_one = if cls % 2 == 0 { 0.7 } else { 0.3 };
                Cell::Number(if rng.random_range(0.0..1.0) < p_one {
                    1.0
                } else {
                    0.0
                })
            })
            .collect();
        columns.push(Column {
            name: format!("bin_{j}"),
            cells,
        });
    }
    if spec.with_identifier {
        let cells = (0..n).map(|i| Cell::Number(i as f64)).collect();
        columns.push(Column {
            name: "id".into(),
            cells,
        });
    }

    if spec.missing_rate > 0.0 {
        for col in columns.iter_mut() {
            if col.name == "id" {
                continue;
            }
            for cell in col.cells.iter_mut() {
                if rng.random_range(0.0..1.0) < spec.missing_rate {
                    *cell = Cell::Missing;
                }
            }
            // Never leave a column fully missing.
            if col.cells.iter().all(Cell::is_missing) {
                let row = rng.random_range(0..n);
                col.cells[row] = Cell::Number(normal(&mut rng));
            }
        }
    }

    let label_names: Vec<String> = (0..k).map(|c| label_name(c, k)).collect();
    let ds = Dataset {
        columns,
        target,
        target_name: "label".into(),
        label_names,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn write_temp_csv(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_csv_types_and_missing_tokens() {
        let f = write_temp_csv("age,city,y\n25,lisbon,a\n?,porto,b\n40,lisbon,a\n");
        let ds = load_csv(f.path(), "y", &tokens(&["?"])).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.class_count(), 2);
        let age = ds.column("age").unwrap();
        assert_eq!(
            age.cells,
            vec![Cell::Number(25.0), Cell::Missing, Cell::Number(40.0)]
        );
        let city = ds.column("city").unwrap();
        assert!(city.is_text());
        assert_eq!(ds.label_names, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(ds.target, vec![0, 1, 0]);
    }

    #[test]
    fn load_csv_unparseable_token_makes_column_text() {
        let f = write_temp_csv("x,y\n1,a\nabc,b\n3,a\n");
        let ds = load_csv(f.path(), "y", &tokens(&[""])).unwrap();
        let x = ds.column("x").unwrap();
        assert!(x.is_text());
        assert_eq!(x.cells[0], Cell::Text("1".into()));
    }

    #[test]
    fn load_csv_single_class_errors() {
        let f = write_temp_csv("x,y\n1,a\n2,a\n");
        match load_csv(f.path(), "y", &tokens(&[""])) {
            Err(DataError::TooFewClasses) => {}
            other => panic!("expected TooFewClasses, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_missing_file_and_missing_target() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", &tokens(&[""])),
            Err(DataError::Io { .. })
        ));
        let f = write_temp_csv("x,y\n1,a\n2,b\n");
        assert!(matches!(
            load_csv(f.path(), "zzz", &tokens(&[""])),
            Err(DataError::TargetMissing(_))
        ));
    }

    #[test]
    fn load_csv_all_missing_column_errors() {
        let f = write_temp_csv("x,y\n?,a\n?,b\n");
        assert!(matches!(
            load_csv(f.path(), "y", &tokens(&["?"])),
            Err(DataError::AllMissing(_))
        ));
    }

    #[test]
    fn mixed_column_rejected_by_validate() {
        let ds = Dataset {
            columns: vec![Column {
                name: "x".into(),
                cells: vec![Cell::Number(1.0), Cell::Text("a".into())],
            }],
            target: vec![0, 1],
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        assert!(matches!(ds.validate(), Err(DataError::MixedColumn(_))));
    }

    #[test]
    fn loads_wide_numeric_csv() {
        // 690 rows, 14 numeric feature columns, binary target.
        let spec = SynthSpec {
            n_rows: 690,
            n_numerical: 14,
            n_classes: 2,
            class_sep: 2.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 5).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let loaded = load_csv(f.path(), "label", &tokens(DEFAULT_MISSING_TOKENS)).unwrap();
        assert_eq!(loaded.n_rows(), 690);
        assert_eq!(loaded.columns.len(), 14);
        assert_eq!(loaded.class_count(), 2);
    }

    #[test]
    fn csv_round_trip_cell_for_cell() {
        let spec = SynthSpec {
            n_rows: 60,
            n_numerical: 3,
            n_categorical: 2,
            n_binary: 1,
            with_identifier: true,
            missing_rate: 0.1,
            n_classes: 3,
            class_sep: 2.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 11).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path()).unwrap();
        let missing = tokens(DEFAULT_MISSING_TOKENS);
        let reloaded = load_csv(f.path(), "label", &missing).unwrap();
        assert_eq!(ds, reloaded);
    }

    #[test]
    fn holdout_sizes_and_determinism() {
        let spec = SynthSpec {
            n_rows: 1000,
            n_numerical: 2,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 3).unwrap();
        let a = split_holdout(&ds, 0.25, true, 7).unwrap();
        assert_eq!(a.val_indices.len(), 250);
        assert_eq!(a.train_indices.len(), 750);
        let b = split_holdout(&ds, 0.25, true, 7).unwrap();
        assert_eq!(a, b);
        let c = split_holdout(&ds, 0.25, true, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn holdout_is_partition() {
        let spec = SynthSpec {
            n_rows: 101,
            n_numerical: 2,
            n_classes: 3,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 3).unwrap();
        let pair = split_holdout(&ds, 0.3, true, 1).unwrap();
        let mut all: Vec<usize> = pair
            .train_indices
            .iter()
            .chain(pair.val_indices.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_tiny_stratified_symmetry() {
        // 4 rows, 2 classes, fraction 0.5: each part holds one row per class.
        let ds = Dataset {
            columns: vec![Column {
                name: "x".into(),
                cells: vec![
                    Cell::Number(1.0),
                    Cell::Number(2.0),
                    Cell::Number(3.0),
                    Cell::Number(4.0),
                ],
            }],
            target: vec![0, 1, 0, 1],
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        let pair = split_holdout(&ds, 0.5, true, 0).unwrap();
        for part in [&pair.train_indices, &pair.val_indices] {
            assert_eq!(part.len(), 2);
            let classes: Vec<usize> = part.iter().map(|&r| ds.target[r]).collect();
            assert!(classes.contains(&0) && classes.contains(&1));
        }
    }

    #[test]
    fn holdout_stratified_within_one_row_per_class() {
        let spec = SynthSpec {
            n_rows: 333,
            n_numerical: 1,
            n_classes: 3,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 9).unwrap();
        let pair = split_holdout(&ds, 0.25, true, 2).unwrap();
        for cls in 0..3 {
            let total = ds.target.iter().filter(|&&t| t == cls).count();
            let in_val = pair
                .val_indices
                .iter()
                .filter(|&&r| ds.target[r] == cls)
                .count();
            assert!((in_val as f64 - 0.25 * total as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn kfold_partition_and_sizes() {
        let spec = SynthSpec {
            n_rows: 2000,
            n_numerical: 2,
            n_classes: 10,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 4).unwrap();
        let pairs = kfold(&ds, 5, true, 3).unwrap();
        assert_eq!(pairs.len(), 5);
        let mut all: Vec<usize> = Vec::new();
        for p in &pairs {
            assert_eq!(p.val_indices.len(), 400);
            all.extend_from_slice(&p.val_indices);
        }
        all.sort_unstable();
        assert_eq!(all, (0..2000).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_hand_derived_stratified_counts() {
        // 10 rows, classes 6/4, k=2: each test fold gets 3 of class a, 2 of b.
        let ds = Dataset {
            columns: vec![Column {
                name: "x".into(),
                cells: (0..10).map(|i| Cell::Number(i as f64)).collect(),
            }],
            target: vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1],
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        for pair in kfold(&ds, 2, true, 17).unwrap() {
            let a = pair
                .val_indices
                .iter()
                .filter(|&&r| ds.target[r] == 0)
                .count();
            let b = pair
                .val_indices
                .iter()
                .filter(|&&r| ds.target[r] == 1)
                .count();
            assert_eq!((a, b), (3, 2));
        }
    }

    #[test]
    fn holdout_stratification_rejects_singleton_class() {
        let ds = Dataset {
            columns: vec![Column {
                name: "x".into(),
                cells: (0..5).map(|i| Cell::Number(i as f64)).collect(),
            }],
            target: vec![0, 0, 0, 0, 1],
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        assert!(split_holdout(&ds, 0.25, true, 0).is_err());
        assert!(split_holdout(&ds, 0.25, false, 0).is_ok());
    }

    #[test]
    fn kfold_class_smaller_than_k_errors() {
        let ds = Dataset {
            columns: vec![Column {
                name: "x".into(),
                cells: (0..5).map(|i| Cell::Number(i as f64)).collect(),
            }],
            target: vec![0, 0, 0, 0, 1],
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        assert!(kfold(&ds, 2, true, 0).is_err());
        assert!(kfold(&ds, 6, false, 0).is_err());
    }

    #[test]
    fn synthetic_shape_and_missing_rate() {
        let spec = SynthSpec {
            n_rows: 600,
            n_numerical: 6,
            n_categorical: 3,
            n_binary: 1,
            with_identifier: true,
            missing_rate: 0.05,
            n_classes: 3,
            class_sep: 3.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 21).unwrap();
        assert_eq!(ds.columns.len(), 11);
        assert_eq!(ds.n_rows(), 600);
        let (mut missing, mut cells) = (0usize, 0usize);
        for col in ds.columns.iter().filter(|c| c.name != "id") {
            missing += col.cells.iter().filter(|c| c.is_missing()).count();
            cells += col.cells.len();
        }
        let rate = missing as f64 / cells as f64;
        assert!((rate - 0.05).abs() < 0.02, "missing rate {rate}");
        let id = ds.column("id").unwrap();
        assert!(!id.has_missing());
        assert_eq!(id.distinct_count(), 600);
    }

    #[test]
    fn synthetic_zero_missing_rate() {
        let spec = SynthSpec {
            n_rows: 100,
            n_numerical: 3,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 2).unwrap();
        assert!(ds.columns.iter().all(|c| !c.has_missing()));
    }

    #[test]
    fn synthetic_errors() {
        let no_features = SynthSpec {
            n_rows: 50,
            n_numerical: 0,
            n_classes: 2,
            class_sep: 1.0,
            ..Default::default()
        };
        assert!(generate_synthetic(&no_features, 0).is_err());
        let one_class = SynthSpec {
            n_classes: 1,
            ..Default::default()
        };
        assert!(generate_synthetic(&one_class, 0).is_err());
        let bad_rate = SynthSpec {
            missing_rate: 1.0,
            ..Default::default()
        };
        assert!(generate_synthetic(&bad_rate, 0).is_err());
    }

    #[test]
    fn synthetic_deterministic() {
        let spec = SynthSpec {
            n_rows: 80,
            n_numerical: 2,
            n_categorical: 1,
            missing_rate: 0.1,
            n_classes: 2,
            ..Default::default()
        };
        assert_eq!(
            generate_synthetic(&spec, 42).unwrap(),
            generate_synthetic(&spec, 42).unwrap()
        );
    }

    #[test]
    fn subset_preserves_labels() {
        let spec = SynthSpec {
            n_rows: 30,
            n_numerical: 2,
            n_classes: 3,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 1).unwrap();
        let sub = ds.subset(&[0, 5, 10]);
        assert_eq!(sub.n_rows(), 3);
        assert_eq!(sub.class_count(), 3);
        assert_eq!(sub.target[1], ds.target[5]);
        assert_eq!(sub.columns[0].cells[2], ds.columns[0].cells[10]);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Stratified k-fold: per fold and class, the class count stays
            /// within one of its share.
            #[test]
            fn stratified_kfold_balances_classes(
                n_rows in 40usize..200,
                k in 2usize..6,
                n_classes in 2usize..4,
                seed in 0u64..500,
            ) {
                prop_assume!(n_rows / n_classes >= k);
                let spec = SynthSpec {
                    n_rows,
                    n_numerical: 2,
                    n_classes,
                    ..Default::default()
                };
                let ds = generate_synthetic(&spec, seed).unwrap();
                for pair in kfold(&ds, k, true, seed).unwrap() {
                    for cls in 0..n_classes {
                        let n_c = ds.target.iter().filter(|&&t| t == cls).count();
                        let in_fold =
                            pair.val_indices.iter().filter(|&&r| ds.target[r] == cls).count();
                        prop_assert!(
                            (in_fold as f64 - n_c as f64 / k as f64).abs() <= 1.0,
                            "class {cls}: {in_fold} in fold vs {n_c}/{k}"
                        );
                    }
                }
            }

            /// Splits are pure functions of (inputs, seed).
            #[test]
            fn splits_are_deterministic(
                n_rows in 20usize..120,
                frac in 0.1f64..0.9,
                seed in 0u64..1000,
            ) {
                let spec = SynthSpec {
                    n_rows,
                    n_numerical: 1,
                    n_classes: 2,
                    ..Default::default()
                };
                let ds = generate_synthetic(&spec, 3).unwrap();
                let a = split_holdout(&ds, frac, true, seed).unwrap();
                let b = split_holdout(&ds, frac, true, seed).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
