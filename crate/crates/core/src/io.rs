//! File formats: plain-text matrices, the CSV dialect, and the model JSON.
//!
//! Model and embedding JSON render every matrix entry with 17 significant
//! digits so doubles survive a write/read cycle bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::identify::{EmbeddingInfo, ForcingBasis, StateSpaceModel};
use crate::series::TimeSeries;

pub const SCHEMA_VERSION: u32 = 1;

/// `{:.16e}`: 17 significant digits, always valid JSON.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Shortest round-trip rendering, switching to exponent form for very large
/// or small magnitudes.
pub fn fmt_csv(x: f64) -> String {
    format!("{x:?}")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row per line, whitespace-separated, `#` starts a comment.
pub fn parse_matrix_text(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {tok:?}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: {} entries, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix has no rows".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn format_matrix_text(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Comma-separated, `.` decimal point, optional single header row (detected
/// when any field of the first row is not a number), LF or CRLF line ends.
/// Lines starting with `#` are ignored.
pub fn parse_csv(text: &str, dt: f64) -> Result<TimeSeries> {
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if rows.is_empty() && header.is_none() && parsed.iter().any(Option::is_none) {
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        }
        let row = parsed
            .into_iter()
            .zip(&fields)
            .map(|(v, f)| v.ok_or_else(|| Error::Parse(format!("line {}: bad number {f:?}", lineno + 1))))
            .collect::<Result<Vec<_>>>()?;
        let expected = header.as_ref().map(Vec::len).or_else(|| rows.first().map(Vec::len));
        if let Some(expected) = expected {
            if row.len() != expected {
                return Err(Error::Parse(format!(
                    "line {}: {} fields, expected {expected}",
                    lineno + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("CSV has no data rows".into()));
    }
    let cols = rows[0].len();
    let values = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    TimeSeries::new(values, dt, header.unwrap_or_default())
}

pub fn read_csv(path: &Path, dt: f64) -> Result<TimeSeries> {
    parse_csv(&read_text(path)?, dt)
}

pub fn format_csv(header: &[String], values: &DMatrix<f64>, footer: &[String]) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for row in values.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_csv(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    for line in footer {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn series_to_csv(series: &TimeSeries) -> String {
    format_csv(series.labels(), series.values(), &[])
}

/// Serializes a matrix row-major as nested arrays of 17-digit numbers.
pub struct Matrix17<'a>(pub &'a DMatrix<f64>);

impl Serialize for Matrix17<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Box<RawValue>>> = self
            .0
            .row_iter()
            .map(|r| r.iter().map(|v| raw17(*v)).collect())
            .collect();
        rows.serialize(s)
    }
}

/// Serializes one float with 17 significant digits.
pub struct Float17(pub f64);

impl Serialize for Float17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        raw17(self.0).serialize(s)
    }
}

fn raw17(v: f64) -> Box<RawValue> {
    if v.is_finite() {
        RawValue::from_string(fmt17(v)).expect("formatted float is valid JSON")
    } else {
        RawValue::from_string("null".into()).expect("null is valid JSON")
    }
}

/// `#[serde(with = "mat17")]` for `DMatrix<f64>` fields.
pub mod mat17 {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::Matrix17(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::matrix_from_rows(&rows, 0, "matrix").map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "opt_mat17")]` for `Option<DMatrix<f64>>` fields.
pub mod opt_mat17 {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(super::Matrix17).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)?
            .map(|rows| super::matrix_from_rows(&rows, 0, "matrix").map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// `#[serde(with = "vec17")]` for `DVector<f64>` fields.
pub mod vec17 {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| super::Float17(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], cols_hint: usize, what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(cols_hint, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Serialize)]
struct ModelOut<'a> {
    schema_version: u32,
    kind: &'static str,
    dt: Float17,
    n: usize,
    p: usize,
    q: usize,
    a: Matrix17<'a>,
    b: Matrix17<'a>,
    c: Matrix17<'a>,
    basis: &'a ForcingBasis,
    embedding: Option<&'a EmbeddingInfo>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelIn {
    schema_version: u32,
    kind: String,
    dt: f64,
    n: usize,
    p: usize,
    q: usize,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    basis: ForcingBasis,
    embedding: Option<EmbeddingInfo>,
}

pub fn model_to_json(model: &StateSpaceModel) -> String {
    let out = ModelOut {
        schema_version: SCHEMA_VERSION,
        kind: "state_space_model",
        dt: Float17(model.dt()),
        n: model.n(),
        p: model.p(),
        q: model.q(),
        a: Matrix17(model.a()),
        b: Matrix17(model.b()),
        c: Matrix17(model.c()),
        basis: model.basis(),
        embedding: model.embedding(),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("model serializes");
    text.push('\n');
    text
}

pub fn model_from_json(text: &str) -> Result<StateSpaceModel> {
    let m: ModelIn = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))?;
    if m.kind != "state_space_model" || m.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported model kind {:?} v{}", m.kind, m.schema_version)));
    }
    let a = matrix_from_rows(&m.a, m.n, "a")?;
    let b = if m.p == 0 { DMatrix::zeros(m.b.len(), 0) } else { matrix_from_rows(&m.b, m.p, "b")? };
    let c = matrix_from_rows(&m.c, m.n, "c")?;
    if a.nrows() != m.n || b.ncols() != m.p || c.nrows() != m.q {
        return Err(Error::Parse("model dimensions disagree with n, p, q".into()));
    }
    let model = StateSpaceModel::new(a, b, c, m.basis, m.dt)?;
    Ok(match m.embedding {
        Some(info) => model.with_embedding(info),
        None => model,
    })
}

pub fn read_model(path: &Path) -> Result<StateSpaceModel> {
    model_from_json(&read_text(path)?)
}

/// Stored embedding: the source record plus the delay parameters; the states
/// are rebuilt on load.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub series: TimeSeries,
    pub tau: usize,
    pub m: usize,
    pub channel: usize,
}

#[derive(Serialize)]
struct EmbeddingOut<'a> {
    schema_version: u32,
    kind: &'static str,
    tau: usize,
    m: usize,
    channel: usize,
    dt: Float17,
    labels: &'a [String],
    series: Matrix17<'a>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingIn {
    schema_version: u32,
    kind: String,
    tau: usize,
    m: usize,
    channel: usize,
    dt: f64,
    labels: Vec<String>,
    series: Vec<Vec<f64>>,
}

pub fn embedding_to_json(file: &EmbeddingFile) -> String {
    let out = EmbeddingOut {
        schema_version: SCHEMA_VERSION,
        kind: "delay_embedding",
        tau: file.tau,
        m: file.m,
        channel: file.channel,
        dt: Float17(file.series.dt()),
        labels: file.series.labels(),
        series: Matrix17(file.series.values()),
    };
    let mut text = serde_json::to_string(&out).expect("embedding serializes");
    text.push('\n');
    text
}

pub fn embedding_from_json(text: &str) -> Result<EmbeddingFile> {
    let e: EmbeddingIn = serde_json::from_str(text).map_err(|e| Error::Parse(format!("embedding JSON: {e}")))?;
    if e.kind != "delay_embedding" || e.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!("unsupported embedding kind {:?} v{}", e.kind, e.schema_version)));
    }
    let values = matrix_from_rows(&e.series, e.labels.len(), "series")?;
    let series = TimeSeries::new(values, e.dt, e.labels)?;
    Ok(EmbeddingFile { series, tau: e.tau, m: e.m, channel: e.channel })
}
