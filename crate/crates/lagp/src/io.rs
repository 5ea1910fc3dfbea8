//! Comma-separated files with a header row.
//!
//! Datasets have columns `x1..xp` followed by an optional response column
//! named `y`. Floats are written in the shortest form that parses back to
//! the same value.

use std::fs::File;
use std::path::Path;

use lagp_core::blhs::GlobalScale;
use lagp_core::metrics::{SpeciesMixture, SPECIES};
use lagp_core::{DesignMatrix, PredictionSet};

use crate::{Error, Result};

/// Inputs with optional responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: DesignMatrix, y: Option<Vec<f64>>) -> Result<Self> {
        if let Some(y) = &y {
            if y.len() != x.rows() {
                return Err(Error::invalid(format!("{} responses for {} rows", y.len(), x.rows())));
            }
        }
        Ok(Self { x, y })
    }

    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Responses, or an error naming the file role that lacked them.
    pub fn responses(&self, role: &str) -> Result<&[f64]> {
        self.y.as_deref().ok_or_else(|| Error::invalid(format!("{role} data has no y column")))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self { x: self.x.select(indices), y: self.y.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect()) }
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e.to_string())
}

fn parse_cell(path: &Path, line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(path, format!("line {line}: '{s}' is not a finite number"))),
    }
}

/// Header plus numeric rows of a rectangular file.
pub fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = open_csv(path)?;
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(Error::parse(path, "missing header"));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = k + 2;
        if rec.len() != header.len() {
            return Err(Error::parse(path, format!("line {line}: {} fields, header has {}", rec.len(), header.len())));
        }
        rows.push(rec.iter().map(|s| parse_cell(path, line, s)).collect::<Result<Vec<f64>>>()?);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    Ok((header, rows))
}

/// Read a dataset; a last column named `y` holds the responses.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let (header, rows) = read_numeric(path)?;
    let has_y = header.last().is_some_and(|h| h.eq_ignore_ascii_case("y"));
    let p = header.len() - usize::from(has_y);
    if p == 0 {
        return Err(Error::parse(path, "no input columns"));
    }
    let mut flat = Vec::with_capacity(rows.len() * p);
    let mut y = Vec::with_capacity(rows.len());
    for r in &rows {
        flat.extend_from_slice(&r[..p]);
        if has_y {
            y.push(r[p]);
        }
    }
    let x = DesignMatrix::from_flat(flat, p)?;
    Dataset::new(x, has_y.then_some(y))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    if data.y.is_some() {
        header.push("y".into());
    }
    let mut w = create(path)?;
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..data.rows() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| fmt_f64(*v)).collect();
        if let Some(y) = &data.y {
            rec.push(fmt_f64(y[i]));
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}

fn flush(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Write string records under a header.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    flush(path, w)
}

/// Paths as rows `path,x1..xp`, grouped by id in order of first appearance.
pub fn read_paths(path: &Path) -> Result<Vec<(u64, PredictionSet)>> {
    let (header, rows) = read_numeric(path)?;
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("path") {
        return Err(Error::parse(path, "expected columns path,x1,..,xp"));
    }
    let p = header.len() - 1;
    let mut groups: Vec<(u64, Vec<f64>)> = Vec::new();
    for r in rows {
        let id = r[0];
        if id < 0.0 || id.fract() != 0.0 {
            return Err(Error::parse(path, format!("path id {id} is not a nonnegative integer")));
        }
        let id = id as u64;
        match groups.iter_mut().find(|g| g.0 == id) {
            Some(g) => g.1.extend_from_slice(&r[1..]),
            None => groups.push((id, r[1..].to_vec())),
        }
    }
    groups
        .into_iter()
        .map(|(id, flat)| Ok((id, PredictionSet::new(DesignMatrix::from_flat(flat, p)?))))
        .collect()
}

pub fn write_paths(path: &Path, paths: &[(u64, PredictionSet)]) -> Result<()> {
    let p = paths.first().map_or(2, |(_, s)| s.dim());
    let mut header = vec!["path".to_string()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = paths.iter().flat_map(|(id, set)| {
        set.points().iter_rows().map(move |r| {
            let mut rec = vec![id.to_string()];
            rec.extend(r.iter().map(|v| fmt_f64(*v)));
            rec
        })
    });
    write_table(path, &header, rows)
}

/// One mixture per row; columns in the fixed species order.
pub fn read_mixtures(path: &Path) -> Result<Vec<SpeciesMixture>> {
    let (header, rows) = read_numeric(path)?;
    if header.len() != 6 {
        return Err(Error::parse(path, format!("expected 6 mole-fraction columns ({}), found {}", SPECIES.join(","), header.len())));
    }
    rows.into_iter()
        .map(|r| {
            let chi: [f64; 6] = r.try_into().expect("row width checked");
            SpeciesMixture::new(chi).map_err(Error::from)
        })
        .collect()
}

/// Global lengthscales: a `global` row with the aggregate, then one row per
/// replicate (`NaN` for failed fits).
pub fn write_global_scale(path: &Path, scale: &GlobalScale) -> Result<()> {
    let p = scale.lengthscales.len();
    let mut header = vec!["replicate".to_string()];
    header.extend((1..=p).map(|j| format!("theta{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = vec![std::iter::once("global".to_string()).chain(scale.lengthscales.iter().map(|v| fmt_f64(*v))).collect::<Vec<_>>()];
    for (b, rep) in scale.replicates.iter().enumerate() {
        let vals: Vec<String> = match rep {
            Some(t) => t.iter().map(|v| fmt_f64(*v)).collect(),
            None => vec!["NaN".to_string(); p],
        };
        rows.push(std::iter::once(b.to_string()).chain(vals).collect());
    }
    write_table(path, &header, rows)
}

/// The aggregate row of a file written by [`write_global_scale`].
pub fn read_global_scale(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = open_csv(path)?;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.get(0) == Some("global") {
            let v = rec.iter().skip(1).map(|s| parse_cell(path, k + 2, s)).collect::<Result<Vec<f64>>>()?;
            if v.is_empty() || v.iter().any(|t| *t <= 0.0) {
                return Err(Error::parse(path, "lengthscales must be positive"));
            }
            return Ok(v);
        }
    }
    Err(Error::parse(path, "no 'global' row"))
}
