use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamp-aligned table of one target series plus named feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    timestamps: Vec<NaiveDate>,
    target_name: String,
    target: Vec<f64>,
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
}

impl FeatureFrame {
    /// Validates lengths, timestamp ordering, and finiteness.
    pub fn new(
        timestamps: Vec<NaiveDate>,
        target_name: String,
        target: Vec<f64>,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = timestamps.len();
        if n == 0 {
            return Err(Error::invalid("frame must contain at least one row"));
        }
        if target.len() != n || features.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("all columns must have equal length".into()));
        }
        if feature_names.len() != features.len() {
            return Err(Error::ShapeMismatch("feature names do not match columns".into()));
        }
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                if w[1] == w[0] {
                    return Err(Error::DuplicateDate(w[0].to_string()));
                }
                return Err(Error::invalid(format!(
                    "timestamps not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for (name, col) in
            std::iter::once((&target_name, &target)).chain(feature_names.iter().zip(&features))
        {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite value in column '{name}' row {i}")));
            }
        }
        Ok(FeatureFrame { timestamps, target_name, target, feature_names, features })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature(&self, name: &str) -> Option<&[f64]> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.features[i].as_slice())
    }

    pub fn feature_columns(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Target first, then features in declared order.
    pub fn named_columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        std::iter::once((self.target_name.as_str(), self.target.as_slice())).chain(
            self.feature_names
                .iter()
                .map(|n| n.as_str())
                .zip(self.features.iter().map(|c| c.as_slice())),
        )
    }

    /// Copy of the rows in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureFrame {
        FeatureFrame {
            timestamps: self.timestamps[range.clone()].to_vec(),
            target_name: self.target_name.clone(),
            target: self.target[range.clone()].to_vec(),
            feature_names: self.feature_names.clone(),
            features: self.features.iter().map(|c| c[range.clone()].to_vec()).collect(),
        }
    }

    /// Same frame with the target series replaced (e.g. by its denoised
    /// version). Length must match.
    pub fn with_target(&self, target: Vec<f64>) -> Result<FeatureFrame> {
        FeatureFrame::new(
            self.timestamps.clone(),
            self.target_name.clone(),
            target,
            self.feature_names.clone(),
            self.features.clone(),
        )
    }
}

/// Which columns of a CSV become features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSelect {
    /// Every numeric column other than the date and target columns.
    Auto,
    /// Exactly the named columns, in the given order.
    Named(Vec<String>),
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub date_column: String,
    pub target_column: String,
    pub features: FeatureSelect,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            date_column: "date".into(),
            target_column: "price".into(),
            features: FeatureSelect::Auto,
        }
    }
}

/// Loads a CSV with a header row, ISO-8601 dates, and numeric columns.
///
/// Rows are sorted by date; duplicate dates are rejected. Missing feature
/// cells are forward-filled from the previous (chronological) row; the first
/// row must be complete. Missing or unparsable target cells are rejected
/// with their row number.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<FeatureFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| Error::Csv(e.to_string()))?.iter().map(String::from).collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("missing column '{name}'")))
    };
    let date_idx = col_index(&schema.date_column)?;
    let target_idx = col_index(&schema.target_column)?;

    let mut rows: Vec<(NaiveDate, f64, Vec<Option<f64>>)> = Vec::new();
    let mut records: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        records.push(record.map_err(|e| Error::Csv(e.to_string()))?);
    }

    // Feature columns: explicit names, or every other column that parses as
    // numeric on the first data row.
    let feature_idx: Vec<usize> = match &schema.features {
        FeatureSelect::Named(names) => {
            names.iter().map(|n| col_index(n)).collect::<Result<Vec<_>>>()?
        }
        FeatureSelect::Auto => {
            if records.is_empty() {
                return Err(Error::Csv("file contains no data rows".into()));
            }
            // A column counts as numeric when it has at least one non-empty
            // cell and every non-empty cell parses as a number.
            (0..headers.len())
                .filter(|&i| i != date_idx && i != target_idx)
                .filter(|&i| {
                    let cells = records.iter().filter_map(|r| r.get(i)).filter(|c| !c.is_empty());
                    let mut any = false;
                    for c in cells {
                        if c.parse::<f64>().is_err() {
                            return false;
                        }
                        any = true;
                    }
                    any
                })
                .collect()
        }
    };
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].clone()).collect();

    for (row_no, record) in records.iter().enumerate() {
        let row_label = row_no + 1;
        let date_cell = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|_| {
            Error::Csv(format!("row {row_label}: unparsable date '{date_cell}'"))
        })?;
        let target_cell = record.get(target_idx).unwrap_or("");
        if target_cell.is_empty() {
            return Err(Error::Csv(format!("row {row_label}: missing target cell")));
        }
        let target: f64 = target_cell.parse().map_err(|_| {
            Error::Csv(format!("row {row_label}: unparsable target '{target_cell}'"))
        })?;
        let mut cells = Vec::with_capacity(feature_idx.len());
        for (&idx, name) in feature_idx.iter().zip(&feature_names) {
            let cell = record.get(idx).unwrap_or("");
            if cell.is_empty() {
                cells.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Csv(format!("row {row_label}: unparsable value '{cell}' in '{name}'"))
                })?;
                cells.push(Some(v));
            }
        }
        rows.push((date, target, cells));
    }
    if rows.is_empty() {
        return Err(Error::Csv("file contains no data rows".into()));
    }

    rows.sort_by_key(|(date, _, _)| *date);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateDate(w[0].0.to_string()));
        }
    }

    // Forward-fill feature gaps after sorting.
    let mut last_seen: Vec<Option<f64>> = vec![None; feature_names.len()];
    let mut features: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); feature_names.len()];
    for (row_no, (_, _, cells)) in rows.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            let value = match (cell, last_seen[c]) {
                (Some(v), _) => *v,
                (None, Some(prev)) => prev,
                (None, None) => {
                    return Err(Error::Csv(format!(
                        "first row (after sorting) is missing feature '{}' (row {})",
                        feature_names[c],
                        row_no + 1
                    )));
                }
            };
            last_seen[c] = Some(value);
            features[c].push(value);
        }
    }

    let timestamps: Vec<NaiveDate> = rows.iter().map(|(d, _, _)| *d).collect();
    let target: Vec<f64> = rows.iter().map(|(_, t, _)| *t).collect();
    FeatureFrame::new(timestamps, schema.target_column.clone(), target, feature_names, features)
}

/// Chronological train/test sizing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the training part, in (0, 1).
    pub train_fraction: f64,
    /// Fraction of the training windows later held out for validation.
    pub validation_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, validation_fraction: 0.1 }
    }
}

/// First `floor(n * train_fraction)` rows vs the remainder; both parts must
/// be non-empty and their concatenation reproduces the frame.
pub fn split_chronological(
    frame: &FeatureFrame,
    spec: &SplitSpec,
) -> Result<(FeatureFrame, FeatureFrame)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in [0, 1), got {}",
            spec.validation_fraction
        )));
    }
    let n = frame.len();
    let n_train = (n as f64 * spec.train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!(
            "split of {n} rows at fraction {} leaves an empty part",
            spec.train_fraction
        )));
    }
    Ok((frame.slice(0..n_train), frame.slice(n_train..n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn loads_complete_rows() {
        let f = write_csv(
            "date,price,coal,gas\n2020-01-01,10.0,30.0,5.0\n2020-01-02,11.0,31.0,5.5\n2020-01-03,12.0,32.0,6.0\n",
        );
        let frame = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(frame.len(), 3);
        assert_eq!(frame.feature_names(), &["coal".to_string(), "gas".to_string()]);
        assert_eq!(frame.target(), &[10.0, 11.0, 12.0]);
        assert!(frame.named_columns().all(|(_, col)| col.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn forward_fills_missing_feature_cell() {
        let f = write_csv(
            "date,price,gas\n2020-01-01,10.0,30.0\n2020-01-02,11.0,\n2020-01-03,12.0,32.0\n",
        );
        let frame = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(frame.feature("gas").unwrap(), &[30.0, 30.0, 32.0]);
    }

    #[test]
    fn duplicate_date_rejected_by_name() {
        let f = write_csv(
            "date,price\n2020-01-01,10.0\n2020-01-02,11.0\n2020-01-01,12.0\n",
        );
        let err = load_csv(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("2020-01-01"), "{err}");
    }

    #[test]
    fn unparsable_date_reports_row() {
        let f = write_csv("date,price\n2020-01-01,10.0\nnot-a-date,11.0\n");
        let err = load_csv(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn missing_target_rejected() {
        let f = write_csv("date,price\n2020-01-01,10.0\n2020-01-02,\n");
        let err = load_csv(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("missing target"), "{err}");
    }

    #[test]
    fn rows_sorted_by_date() {
        let f = write_csv(
            "date,price\n2020-01-03,12.0\n2020-01-01,10.0\n2020-01-02,11.0\n",
        );
        let frame = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(frame.target(), &[10.0, 11.0, 12.0]);
    }

    #[test]
    fn auto_mode_skips_non_numeric_columns() {
        let f = write_csv(
            "date,price,note,gas\n2020-01-01,10.0,hello,5.0\n2020-01-02,11.0,world,5.5\n",
        );
        let frame = load_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(frame.feature_names(), &["gas".to_string()]);
    }

    #[test]
    fn first_row_missing_feature_rejected() {
        let f = write_csv("date,price,gas\n2020-01-01,10.0,\n2020-01-02,11.0,5.0\n");
        assert!(load_csv(f.path(), &CsvSchema::default()).is_err());
    }

    fn toy_frame(n: usize) -> FeatureFrame {
        let base = date("2020-01-01");
        FeatureFrame::new(
            (0..n).map(|i| base + chrono::Days::new(i as u64)).collect(),
            "price".into(),
            (0..n).map(|i| i as f64).collect(),
            vec!["x".into()],
            vec![(0..n).map(|i| 2.0 * i as f64).collect()],
        )
        .unwrap()
    }

    #[test]
    fn split_80_20() {
        let (train, test) = split_chronological(&toy_frame(100), &SplitSpec::default()).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert!(train.timestamps().last().unwrap() < test.timestamps().first().unwrap());
    }

    #[test]
    fn split_floor_rule() {
        let spec = SplitSpec { train_fraction: 0.8, validation_fraction: 0.0 };
        let (train, test) = split_chronological(&toy_frame(5), &spec).unwrap();
        assert_eq!((train.len(), test.len()), (4, 1));
    }

    #[test]
    fn split_rejects_degenerate_fraction() {
        let spec = SplitSpec { train_fraction: 1.0, validation_fraction: 0.0 };
        assert!(split_chronological(&toy_frame(10), &spec).is_err());
    }

    #[test]
    fn concatenation_reproduces_frame() {
        let frame = toy_frame(23);
        let (train, test) = split_chronological(&frame, &SplitSpec::default()).unwrap();
        let mut target = train.target().to_vec();
        target.extend_from_slice(test.target());
        assert_eq!(target, frame.target());
    }
}
