//! Observations, column schemas and CSV ingestion.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One data unit O = (W, A, Y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub w: Vec<f64>,
    pub a: Option<u8>,
    pub y: Vec<f64>,
}

impl Observation {
    pub fn new(w: Vec<f64>, a: Option<u8>, y: Vec<f64>) -> Self {
        Observation { w, a, y }
    }
}

/// Which CSV columns hold covariates, treatment and outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub w: Vec<String>,
    #[serde(default)]
    pub a: Option<String>,
    pub y: Vec<String>,
}

impl Schema {
    /// Columns named `w1..wq`, `a`, `y` (or `y1..yd` when d > 1).
    pub fn generated(q: usize, has_treatment: bool, d: usize) -> Self {
        let w = (1..=q).map(|k| format!("w{k}")).collect();
        let y = if d == 1 {
            vec!["y".to_string()]
        } else {
            (1..=d).map(|k| format!("y{k}")).collect()
        };
        Schema {
            w,
            a: has_treatment.then(|| "a".to_string()),
            y,
        }
    }
}

/// Header plus string cells, as read from a CSV file.
#[derive(Debug, Clone, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(RawTable { header, rows })
    }
}

/// Column-major-by-role storage of n observations.
///
/// Covariates and outcomes are stored row-major so `w_row(i)` and `y_row(i)`
/// are contiguous slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    q: usize,
    d: usize,
    w: Vec<f64>,
    a: Option<Vec<u8>>,
    y: Vec<f64>,
    schema: Schema,
}

impl Dataset {
    /// Builds a dataset from observations, checking that dimensions are
    /// homogeneous, values are finite and treatments are binary.
    pub fn from_observations(observations: &[Observation], schema: Schema) -> Result<Self> {
        let first = observations.first().ok_or(Error::TooFewObservations {
            needed: 1,
            have: 0,
        })?;
        let q = first.w.len();
        let d = first.y.len();
        if d == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let has_a = first.a.is_some();
        if schema.w.len() != q || schema.y.len() != d || schema.a.is_some() != has_a {
            return Err(Error::InvalidConfig(
                "schema does not match observation dimensions".into(),
            ));
        }
        let n = observations.len();
        let mut w = Vec::with_capacity(n * q);
        let mut y = Vec::with_capacity(n * d);
        let mut a = has_a.then(|| Vec::with_capacity(n));
        for (row, obs) in observations.iter().enumerate() {
            if obs.w.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: obs.w.len(),
                });
            }
            if obs.y.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: obs.y.len(),
                });
            }
            for (k, &v) in obs.w.iter().enumerate() {
                check_finite(v, row, &schema.w[k])?;
            }
            for (k, &v) in obs.y.iter().enumerate() {
                check_finite(v, row, &schema.y[k])?;
            }
            match (&mut a, obs.a) {
                (Some(col), Some(t)) if t <= 1 => col.push(t),
                (Some(_), Some(t)) => {
                    return Err(Error::NonBinaryTreatment {
                        row,
                        value: t.to_string(),
                    })
                }
                (None, None) => {}
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "row {row}: treatment present in some rows but not others"
                    )))
                }
            }
            w.extend_from_slice(&obs.w);
            y.extend_from_slice(&obs.y);
        }
        Ok(Dataset {
            n,
            q,
            d,
            w,
            a,
            y,
            schema,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w_dim(&self) -> usize {
        self.q
    }

    pub fn y_dim(&self) -> usize {
        self.d
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.q..(i + 1) * self.q]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    pub fn treatment(&self) -> Option<&[u8]> {
        self.a.as_deref()
    }

    /// Row-major n×q covariate block.
    pub fn covariates(&self) -> &[f64] {
        &self.w
    }

    /// Row-major n×d outcome block.
    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation {
            w: self.w_row(i).to_vec(),
            a: self.a.as_ref().map(|a| a[i]),
            y: self.y_row(i).to_vec(),
        }
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.n).map(|i| self.observation(i))
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut w = Vec::with_capacity(indices.len() * self.q);
        let mut y = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            w.extend_from_slice(self.w_row(i));
            y.extend_from_slice(self.y_row(i));
        }
        Dataset {
            n: indices.len(),
            q: self.q,
            d: self.d,
            w,
            a: self.a.as_ref().map(|a| indices.iter().map(|&i| a[i]).collect()),
            y,
            schema: self.schema.clone(),
        }
    }

    /// Same rows with the treatment column replaced.
    pub fn with_treatment(&self, a: Vec<u8>, column: &str) -> Result<Dataset> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: a.len(),
            });
        }
        if let Some(row) = a.iter().position(|&t| t > 1) {
            return Err(Error::NonBinaryTreatment {
                row,
                value: a[row].to_string(),
            });
        }
        let mut schema = self.schema.clone();
        schema.a = Some(column.to_string());
        Ok(Dataset {
            a: Some(a),
            schema,
            ..self.clone()
        })
    }

    /// Same rows with every outcome coordinate replaced by `y` (row-major n×d').
    pub fn with_outcomes(&self, y: Vec<f64>, d: usize) -> Result<Dataset> {
        if d == 0 || y.len() != self.n * d {
            return Err(Error::DimensionMismatch {
                expected: self.n * d.max(1),
                found: y.len(),
            });
        }
        let mut schema = self.schema.clone();
        if d != self.d {
            schema.y = Schema::generated(0, false, d).y;
        }
        Ok(Dataset {
            d,
            y,
            schema,
            ..self.clone()
        })
    }

    /// Writes a header row followed by one line per observation. Values use
    /// the shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.w.iter().map(String::as_str).collect();
        if let Some(a) = &self.schema.a {
            header.push(a);
        }
        header.extend(self.schema.y.iter().map(String::as_str));
        wtr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n {
            record.clear();
            record.extend(self.w_row(i).iter().map(|v| v.to_string()));
            if let Some(a) = &self.a {
                record.push(a[i].to_string());
            }
            record.extend(self.y_row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
        validate_dataset(&RawTable::from_reader(reader)?, schema)
    }
}

fn check_finite(v: f64, row: usize, column: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteValue {
            row,
            column: column.to_string(),
            value: v.to_string(),
        })
    }
}

fn column_index(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::SchemaMismatch(name.to_string()))
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::NonFiniteValue {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    check_finite(v, row, column).map(|_| v)
}

/// Converts a raw string table into a [`Dataset`] following `schema`.
///
/// Rows are numbered from 0 (excluding the header) in error messages.
pub fn validate_dataset(raw: &RawTable, schema: &Schema) -> Result<Dataset> {
    if schema.y.is_empty() {
        return Err(Error::InvalidConfig("schema names no outcome column".into()));
    }
    let w_idx = schema
        .w
        .iter()
        .map(|c| column_index(&raw.header, c))
        .collect::<Result<Vec<_>>>()?;
    let a_idx = schema
        .a
        .as_deref()
        .map(|c| column_index(&raw.header, c))
        .transpose()?;
    let y_idx = schema
        .y
        .iter()
        .map(|c| column_index(&raw.header, c))
        .collect::<Result<Vec<_>>>()?;

    let mut observations = Vec::with_capacity(raw.rows.len());
    for (row, cells) in raw.rows.iter().enumerate() {
        if cells.len() != raw.header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: raw.header.len(),
                found: cells.len(),
            });
        }
        let w = w_idx
            .iter()
            .zip(&schema.w)
            .map(|(&k, name)| parse_real(&cells[k], row, name))
            .collect::<Result<Vec<_>>>()?;
        let y = y_idx
            .iter()
            .zip(&schema.y)
            .map(|(&k, name)| parse_real(&cells[k], row, name))
            .collect::<Result<Vec<_>>>()?;
        let a = match a_idx {
            None => None,
            Some(k) => {
                let cell = cells[k].trim();
                match cell.parse::<f64>() {
                    Ok(v) if v == 0.0 => Some(0),
                    Ok(v) if v == 1.0 => Some(1),
                    _ => {
                        return Err(Error::NonBinaryTreatment {
                            row,
                            value: cell.to_string(),
                        })
                    }
                }
            }
        };
        observations.push(Observation { w, a, y });
    }
    if observations.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            have: observations.len(),
        });
    }
    Dataset::from_observations(&observations, schema.clone())
}
