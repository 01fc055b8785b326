//! Named N×m sample matrices with provenance, plus the CSV dialect used by
//! the command line.
//!
//! ```text
//! # intervention: X3=1 [natural]
//! # levels: C=female|male
//! X1,X2,X3
//! 0.12,1.5,1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset needs at least one column")]
    NoColumns,
    #[error("dataset needs at least one row")]
    NoRows,
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("non-finite entry at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("column index {0} out of range")]
    ColumnOutOfRange(usize),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("bad csv: {0}")]
    BadCsv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::NoColumns | DatasetError::NoRows | DatasetError::DuplicateColumn(_) => "BadDataset",
            DatasetError::RaggedRow { .. } | DatasetError::NonFinite { .. } | DatasetError::BadCsv(_) => "BadCsv",
            DatasetError::ColumnOutOfRange(_) | DatasetError::UnknownColumn(_) => "ColumnOutOfRange",
            DatasetError::Io(_) => "Io",
        }
    }
}

/// One clamped variable of an interventional sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub column: String,
    pub value: f64,
    /// Free-form tag such as `natural`; carried verbatim.
    pub tag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub enum Provenance {
    #[default]
    Observational,
    Interventional(Vec<Clamp>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
    provenance: Provenance,
    /// Optional display labels for coded categorical columns (code k ↦ label k).
    levels: BTreeMap<usize, Vec<String>>,
}

impl Dataset {
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let m = columns.len();
        let mut data = Vec::with_capacity(rows.len() * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(DatasetError::RaggedRow { row: r, found: row.len(), expected: m });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(columns, data)
    }

    pub fn from_columns(columns: Vec<String>, cols: &[Vec<f64>]) -> Result<Self, DatasetError> {
        if columns.len() != cols.len() {
            return Err(DatasetError::RaggedRow { row: 0, found: cols.len(), expected: columns.len() });
        }
        let n = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().position(|c| c.len() != n) {
            return Err(DatasetError::RaggedRow { row: cols[bad].len().min(n), found: cols[bad].len(), expected: n });
        }
        let mut data = Vec::with_capacity(n * cols.len());
        for r in 0..n {
            data.extend(cols.iter().map(|c| c[r]));
        }
        Self::from_flat(columns, data)
    }

    /// Row-major data.
    pub fn from_flat(columns: Vec<String>, data: Vec<f64>) -> Result<Self, DatasetError> {
        let m = columns.len();
        if m == 0 {
            return Err(DatasetError::NoColumns);
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.clone()));
            }
        }
        if data.len() % m != 0 {
            return Err(DatasetError::RaggedRow { row: data.len() / m, found: data.len() % m, expected: m });
        }
        let n_rows = data.len() / m;
        if n_rows == 0 {
            return Err(DatasetError::NoRows);
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(DatasetError::NonFinite { row: k / m, column: k % m });
        }
        Ok(Dataset { columns, data, n_rows, provenance: Provenance::Observational, levels: BTreeMap::new() })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_levels(mut self, column: usize, labels: Vec<String>) -> Self {
        self.levels.insert(column, labels);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn levels(&self, column: usize) -> Option<&[String]> {
        self.levels.get(&column).map(Vec::as_slice)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.columns.len();
        &self.data[row * m..(row + 1) * m]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, DatasetError> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    }

    pub fn check_column(&self, col: usize) -> Result<(), DatasetError> {
        if col < self.columns.len() {
            Ok(())
        } else {
            Err(DatasetError::ColumnOutOfRange(col))
        }
    }

    /// Label for a coded value of a categorical column, if one was recorded.
    pub fn level_label(&self, column: usize, value: f64) -> Option<&str> {
        let labels = self.levels.get(&column)?;
        if value.fract() != 0.0 || value < 0.0 {
            return None;
        }
        labels.get(value as usize).map(String::as_str)
    }

    /// Subset of rows, keeping columns, provenance and level labels.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::NoRows);
        }
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Ok(Dataset {
            columns: self.columns.clone(),
            data,
            n_rows: rows.len(),
            provenance: self.provenance.clone(),
            levels: self.levels.clone(),
        })
    }

    /// Stacks datasets with identical columns. Provenance of the result is
    /// that of the first input.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset, DatasetError> {
        let first = parts.first().ok_or(DatasetError::NoRows)?;
        let mut data = Vec::new();
        for p in parts {
            if p.columns != first.columns {
                return Err(DatasetError::BadCsv("cannot stack datasets with different columns".into()));
            }
            data.extend_from_slice(&p.data);
        }
        let mut out = Dataset::from_flat(first.columns.clone(), data)?;
        out.provenance = first.provenance.clone();
        out.levels = first.levels.clone();
        Ok(out)
    }

    /// Clamped column indices and values, when interventional.
    pub fn clamped_columns(&self) -> Result<Vec<(usize, f64)>, DatasetError> {
        match &self.provenance {
            Provenance::Observational => Ok(Vec::new()),
            Provenance::Interventional(cl) => cl.iter().map(|c| Ok((self.column_index(&c.column)?, c.value))).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        match &self.provenance {
            Provenance::Observational => writeln!(out, "# provenance: observational")?,
            Provenance::Interventional(cl) => {
                let parts: Vec<String> = cl
                    .iter()
                    .map(|c| match &c.tag {
                        Some(t) => format!("{}={} [{}]", c.column, c.value, t),
                        None => format!("{}={}", c.column, c.value),
                    })
                    .collect();
                writeln!(out, "# intervention: {}", parts.join("; "))?;
            }
        }
        for (col, labels) in &self.levels {
            writeln!(out, "# levels: {}={}", self.columns[*col], labels.join("|"))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(|e| DatasetError::BadCsv(e.to_string()))?;
        for r in 0..self.n_rows {
            // `{:?}` is the shortest representation that parses back exactly
            let rec: Vec<String> = self.row(r).iter().map(|x| format!("{x:?}")).collect();
            w.write_record(&rec).map_err(|e| DatasetError::BadCsv(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut input: R) -> Result<Dataset, DatasetError> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| DatasetError::BadCsv(e.to_string()))?;
        let mut comments = Vec::new();
        let mut body = String::with_capacity(text.len());
        for line in text.lines() {
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
            } else if !line.trim().is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| DatasetError::BadCsv(e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(DatasetError::BadCsv("missing header row".into()));
        }
        let m = header.len();
        let mut data = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DatasetError::BadCsv(e.to_string()))?;
            if rec.len() != m {
                return Err(DatasetError::RaggedRow { row: r, found: rec.len(), expected: m });
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| DatasetError::BadCsv(format!("row {r}, column {c}: cannot parse {field:?}")))?;
                data.push(v);
            }
        }
        let mut ds = Dataset::from_flat(header, data)?;
        for c in comments {
            if let Some(rest) = c.strip_prefix("intervention:") {
                ds.provenance = Provenance::Interventional(parse_clamps(rest)?);
            } else if let Some(rest) = c.strip_prefix("levels:") {
                let (name, labels) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| DatasetError::BadCsv(format!("bad levels line {rest:?}")))?;
                let col = ds.column_index(name.trim())?;
                ds.levels.insert(col, labels.split('|').map(|s| s.trim().to_string()).collect());
            }
        }
        Ok(ds)
    }
}

fn parse_clamps(s: &str) -> Result<Vec<Clamp>, DatasetError> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, rest) = part
            .split_once('=')
            .ok_or_else(|| DatasetError::BadCsv(format!("bad intervention {part:?}")))?;
        let rest = rest.trim();
        let (value, tag) = match rest.split_once('[') {
            Some((v, t)) => (v.trim(), Some(t.trim_end_matches(']').trim().to_string())),
            None => (rest, None),
        };
        let value: f64 = value
            .parse()
            .map_err(|_| DatasetError::BadCsv(format!("bad intervention value {value:?}")))?;
        out.push(Clamp { column: name.trim().to_string(), value, tag });
    }
    if out.is_empty() {
        return Err(DatasetError::BadCsv("empty intervention header".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(Dataset::from_rows(names(&["a", "a"]), &[vec![1.0, 2.0]]), Err(DatasetError::DuplicateColumn(_))));
        assert!(matches!(Dataset::from_rows(names(&["a"]), &[]), Err(DatasetError::NoRows)));
        assert!(matches!(Dataset::from_rows(names(&["a"]), &[vec![f64::NAN]]), Err(DatasetError::NonFinite { .. })));
        assert!(matches!(Dataset::from_rows(names(&["a", "b"]), &[vec![1.0]]), Err(DatasetError::RaggedRow { .. })));
    }

    #[test]
    fn csv_round_trip_with_headers() {
        let ds = Dataset::from_rows(names(&["C", "X3"]), &[vec![0.0, 1.0], vec![1.0, 0.1 + 0.2]])
            .unwrap()
            .with_levels(0, names(&["female", "male"]))
            .with_provenance(Provenance::Interventional(vec![Clamp {
                column: "X3".into(),
                value: 2f64.sqrt(),
                tag: Some("non-natural".into()),
            }]));
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.level_label(0, 1.0), Some("male"));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(Dataset::read_csv("a,b\n1,x\n".as_bytes()), Err(DatasetError::BadCsv(_))));
        assert!(Dataset::read_csv("a,b\n1,2,3\n".as_bytes()).is_err());
    }
}
