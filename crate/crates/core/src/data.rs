//! Synthetic datasets and CSV ingestion.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DatasetMatrix;
use crate::linalg::{norm, Matrix};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataKind {
    Gaussian,
    Blobs { classes: usize, separation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowNormalization {
    #[default]
    None,
    UnitNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub kind: DataKind,
    pub seed: u64,
    pub normalize: RowNormalization,
}

impl SyntheticSpec {
    pub fn gaussian(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            kind: DataKind::Gaussian,
            seed,
            normalize: RowNormalization::None,
        }
    }

    pub fn blobs(n: usize, d: usize, classes: usize, separation: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            kind: DataKind::Blobs {
                classes,
                separation,
            },
            seed,
            normalize: RowNormalization::None,
        }
    }

    pub fn unit_norm(self) -> Self {
        Self {
            normalize: RowNormalization::UnitNorm,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 1 {
            return Err(Error::InvalidDimensions(format!(
                "synthetic data needs n >= 2 and d >= 1, got n={}, d={}",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

fn standard_normal_rows(n: usize, d: usize, seed: u64, major: u16) -> Matrix {
    let mut rng = rng::keyed_stream(seed, rng::stream_id(Domain::Data, major, 0));
    let mut values = vec![0.0; n * d];
    rng::fill_standard_normal(&mut rng, &mut values);
    Matrix::new(n, d, values).expect("finite normal draws")
}

fn finish(x: Matrix, normalize: RowNormalization) -> Result<DatasetMatrix> {
    let data = DatasetMatrix::new(x)?;
    Ok(match normalize {
        RowNormalization::None => data,
        RowNormalization::UnitNorm => data.unit_normalized(),
    })
}

/// `n × d` i.i.d. standard-normal rows.
pub fn gen_gaussian(spec: &SyntheticSpec) -> Result<DatasetMatrix> {
    spec.validate()?;
    if spec.kind != DataKind::Gaussian {
        return Err(Error::InvalidArgument("gen_gaussian needs a gaussian spec".into()));
    }
    finish(standard_normal_rows(spec.n, spec.d, spec.seed, 1), spec.normalize)
}

/// Mean of class `class`: points on a circle of radius `separation / 2` in the
/// first two coordinates, or evenly spaced on a line when `d = 1`.
/// Two classes sit at `±(separation/2)·e₁`.
pub fn blob_mean(class: usize, classes: usize, separation: f64, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    if d == 1 {
        mean[0] = separation * (class as f64 - (classes as f64 - 1.0) / 2.0);
    } else {
        let angle = 2.0 * PI * class as f64 / classes as f64;
        mean[0] = 0.5 * separation * angle.cos();
        mean[1] = 0.5 * separation * angle.sin();
    }
    mean
}

/// Unit-variance Gaussian clusters with labels `i mod classes`.
pub fn gen_blobs(spec: &SyntheticSpec) -> Result<(DatasetMatrix, Vec<usize>)> {
    spec.validate()?;
    let DataKind::Blobs {
        classes,
        separation,
    } = spec.kind
    else {
        return Err(Error::InvalidArgument("gen_blobs needs a blobs spec".into()));
    };
    if classes < 2 {
        return Err(Error::InvalidArgument(format!("blobs need at least 2 classes, got {classes}")));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidArgument(format!("separation must be >= 0, got {separation}")));
    }
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|c| blob_mean(c, classes, separation, spec.d))
        .collect();
    let mut x = standard_normal_rows(spec.n, spec.d, spec.seed, 2);
    let labels: Vec<usize> = (0..spec.n).map(|i| i % classes).collect();
    for (i, &label) in labels.iter().enumerate() {
        for (v, m) in x.row_mut(i).iter_mut().zip(&means[label]) {
            *v += m;
        }
    }
    Ok((finish(x, spec.normalize)?, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    /// Last column holds a label.
    pub has_labels: bool,
    /// First line is a header and is skipped.
    pub has_header: bool,
}

/// A parsed numeric table with the 1-based file line of each row.
struct NumericTable {
    rows: Vec<Vec<f64>>,
    lines: Vec<u64>,
}

fn csv_error(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

fn read_table<R: Read>(reader: R, has_header: bool) -> Result<NumericTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut lines = Vec::new();
    let mut width = None;
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_error(line, format!("column {}: not a finite number: {cell:?}", col + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(csv_error(line, format!("expected {w} columns, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(csv_error(0, "no data rows"));
    }
    Ok(NumericTable { rows, lines })
}

/// Reads a rectangular numeric CSV as a matrix, with no norm checks.
pub fn read_matrix_csv<R: Read>(reader: R, has_header: bool) -> Result<Matrix> {
    Matrix::from_rows(&read_table(reader, has_header)?.rows)
}

pub fn load_matrix_csv(path: &Path, has_header: bool) -> Result<Matrix> {
    read_matrix_csv(File::open(path)?, has_header)
}

pub fn read_csv<R: Read>(reader: R, options: CsvOptions) -> Result<(DatasetMatrix, Option<Vec<f64>>)> {
    let table = read_table(reader, options.has_header)?;
    let mut rows = table.rows;
    let labels = if options.has_labels {
        if rows[0].len() < 2 {
            return Err(csv_error(table.lines[0], "labelled rows need at least one feature column"));
        }
        Some(rows.iter_mut().map(|r| r.pop().unwrap()).collect())
    } else {
        None
    };
    for (i, row) in rows.iter().enumerate() {
        if norm(row) == 0.0 {
            return Err(csv_error(table.lines[i], format!("row {i} has zero norm")));
        }
    }
    Ok((DatasetMatrix::from_rows(&rows)?, labels))
}

pub fn load_csv(path: &Path, options: CsvOptions) -> Result<(DatasetMatrix, Option<Vec<f64>>)> {
    read_csv(File::open(path)?, options)
}

/// Interprets float labels as class indices `0..k`.
pub fn labels_as_classes(labels: &[f64]) -> Result<Vec<usize>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!("label {v} at row {i} is not a class index")))
            }
        })
        .collect()
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv<W: Write>(writer: W, x: &Matrix, labels: Option<&[f64]>) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for i in 0..x.rows() {
        let mut record: Vec<String> = x.row(i).iter().map(|&v| format_f64(v)).collect();
        if let Some(labels) = labels {
            record.push(format_f64(labels[i]));
        }
        csv.write_record(&record).map_err(|e| csv_error(i as u64 + 1, e.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, data: &DatasetMatrix, labels: Option<&[f64]>) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != data.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                data.n()
            )));
        }
    }
    write_matrix_csv(File::create(path)?, data.x(), labels)
}
