//! JSON and CSV formats for tensors, sparse matrices, algorithms and dense
//! matrices.
//!
//! Writers emit one canonical byte form: keys in a fixed order, entries
//! sorted, one entry per line, trailing newline. Readers accept any valid
//! JSON layout and report schema violations as `Error::Schema` with a dotted
//! path and, where the input text locates it, a line number.

use serde::Deserialize;
use serde_json::value::RawValue;

use crate::bilinear::{BilinearAlgorithm, CountedMatrix};
use crate::error::{Error, Result};
use crate::field_arith::{Field, Scalar};
use crate::mm_engine::Matrix;
use crate::sparse_decomp::{BitMatrix, BitMatrixJson};
use crate::tensor_core::{MatMulShape, Tensor};

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialisation")
}

fn line_of(text: &str, fragment: &str) -> usize {
    let offset = (fragment.as_ptr() as usize).saturating_sub(text.as_ptr() as usize).min(text.len());
    text[..offset].matches('\n').count() + 1
}

fn schema(path: impl Into<String>, line: Option<usize>, message: impl std::fmt::Display) -> Error {
    let message = match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.to_string(),
    };
    Error::Schema { path: path.into(), message }
}

fn from_text<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        schema(path, Some(inner.line()), inner)
    })
}

fn parse_field(s: &str) -> Result<Field> {
    Field::parse(s).map_err(|e| schema("field", None, e))
}

fn parse_coeff(field: &Field, s: &str, path: &str, line: usize) -> Result<Scalar> {
    field.parse_scalar(s).map_err(|e| match e {
        Error::DomainMismatch(..) => e,
        other => schema(path, Some(line), other),
    })
}

/// Parses each raw entry as a fixed-length tuple, returning it with its line.
fn raw_entries<'a, T: Deserialize<'a>>(text: &'a str, raw: &[&'a RawValue], prefix: &str) -> Result<Vec<(T, usize, String)>> {
    raw.iter()
        .enumerate()
        .map(|(i, r)| {
            let path = format!("{prefix}[{i}]");
            let line = line_of(text, r.get());
            let v = serde_json::from_str(r.get()).map_err(|e| schema(&path, Some(line), e))?;
            Ok((v, line, path))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// tensors

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTensor<'a> {
    dims: [usize; 3],
    field: String,
    #[serde(borrow)]
    entries: Vec<&'a RawValue>,
}

pub fn tensor_to_json(t: &Tensor) -> String {
    let [a, b, c] = t.dims();
    let entries: Vec<String> = t.entries().map(|(i, v)| format!("    [{}, {}, {}, {}]", i[0], i[1], i[2], quote(&v.to_string()))).collect();
    format!(
        "{{\n  \"dims\": [{a}, {b}, {c}],\n  \"field\": {},\n  \"entries\": {}\n}}\n",
        quote(&t.field().to_string()),
        list_body(&entries, "  ")
    )
}

fn list_body(items: &[String], indent: &str) -> String {
    if items.is_empty() {
        "[]".into()
    } else {
        format!("[\n{}\n{indent}]", items.join(",\n"))
    }
}

pub fn tensor_from_json(text: &str) -> Result<Tensor> {
    let raw: RawTensor = from_text(text)?;
    let field = parse_field(&raw.field)?;
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::with_capacity(raw.entries.len());
    for ((i, j, k, c), line, path) in raw_entries::<(usize, usize, usize, String)>(text, &raw.entries, "entries")? {
        if i >= raw.dims[0] || j >= raw.dims[1] || k >= raw.dims[2] {
            return Err(schema(path, Some(line), format!("index ({i},{j},{k}) outside dims {:?}", raw.dims)));
        }
        if !seen.insert([i, j, k]) {
            return Err(schema(path, Some(line), format!("duplicate index ({i},{j},{k})")));
        }
        entries.push(([i, j, k], parse_coeff(&field, &c, &path, line)?));
    }
    Tensor::from_entries(raw.dims, &field, entries)
}

// ---------------------------------------------------------------------------
// sparse matrices and algorithms

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCounted<'a> {
    rows: usize,
    cols: usize,
    #[serde(borrow)]
    entries: Vec<&'a RawValue>,
}

fn counted_body(m: &CountedMatrix, indent: &str) -> String {
    let inner = format!("{indent}  ");
    let entries: Vec<String> = m.entries().map(|(r, c, v)| format!("{inner}  [{r}, {c}, {}]", quote(&v.to_string()))).collect();
    format!(
        "{{\n{inner}\"rows\": {},\n{inner}\"cols\": {},\n{inner}\"entries\": {}\n{indent}}}",
        m.rows(),
        m.cols(),
        list_body(&entries, &inner)
    )
}

/// Sparse matrix with an explicit field: {"rows","cols","field","entries"}.
pub fn counted_to_json(m: &CountedMatrix) -> String {
    let entries: Vec<String> = m.entries().map(|(r, c, v)| format!("    [{r}, {c}, {}]", quote(&v.to_string()))).collect();
    format!(
        "{{\n  \"rows\": {},\n  \"cols\": {},\n  \"field\": {},\n  \"entries\": {}\n}}\n",
        m.rows(),
        m.cols(),
        quote(&m.field().to_string()),
        list_body(&entries, "  ")
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFieldCounted<'a> {
    rows: usize,
    cols: usize,
    field: String,
    #[serde(borrow)]
    entries: Vec<&'a RawValue>,
}

pub fn counted_from_json(text: &str) -> Result<CountedMatrix> {
    let raw: RawFieldCounted = from_text(text)?;
    let field = parse_field(&raw.field)?;
    build_counted(text, RawCounted { rows: raw.rows, cols: raw.cols, entries: raw.entries }, &field, "")
}

fn build_counted(text: &str, raw: RawCounted, field: &Field, prefix: &str) -> Result<CountedMatrix> {
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::with_capacity(raw.entries.len());
    for ((r, c, v), line, path) in raw_entries::<(usize, usize, String)>(text, &raw.entries, &format!("{prefix}entries"))? {
        if r >= raw.rows || c >= raw.cols {
            return Err(schema(path, Some(line), format!("index ({r},{c}) outside {}x{}", raw.rows, raw.cols)));
        }
        if !seen.insert((r, c)) {
            return Err(schema(path, Some(line), format!("duplicate index ({r},{c})")));
        }
        entries.push((r, c, parse_coeff(field, &v, &path, line)?));
    }
    CountedMatrix::from_entries(raw.rows, raw.cols, field, entries)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm<'a> {
    rank: usize,
    field: String,
    #[serde(default)]
    shape: Option<[usize; 3]>,
    #[serde(borrow)]
    enc_x: RawCounted<'a>,
    #[serde(borrow)]
    enc_y: RawCounted<'a>,
    #[serde(borrow)]
    dec_z: RawCounted<'a>,
}

pub fn algorithm_to_json(alg: &BilinearAlgorithm) -> String {
    let shape = alg.shape.map(|s| format!("  \"shape\": [{}, {}, {}],\n", s.n, s.m, s.d)).unwrap_or_default();
    format!(
        "{{\n  \"rank\": {},\n  \"field\": {},\n{shape}  \"enc_x\": {},\n  \"enc_y\": {},\n  \"dec_z\": {}\n}}\n",
        alg.rank(),
        quote(&alg.field().to_string()),
        counted_body(&alg.enc_x, "  "),
        counted_body(&alg.enc_y, "  "),
        counted_body(&alg.dec_z, "  ")
    )
}

pub fn algorithm_from_json(text: &str) -> Result<BilinearAlgorithm> {
    let raw: RawAlgorithm = from_text(text)?;
    let field = parse_field(&raw.field)?;
    let x = build_counted(text, raw.enc_x, &field, "enc_x.")?;
    let y = build_counted(text, raw.enc_y, &field, "enc_y.")?;
    let z = build_counted(text, raw.dec_z, &field, "dec_z.")?;
    if x.rows() != raw.rank || y.rows() != raw.rank || z.cols() != raw.rank {
        return Err(schema("rank", None, format!("rank {} disagrees with the matrix dimensions", raw.rank)));
    }
    let alg = BilinearAlgorithm::new(x, y, z)?;
    match raw.shape {
        Some([n, m, d]) => alg.with_shape(MatMulShape::new(n, m, d)).map_err(|e| schema("shape", None, e)),
        None => Ok(alg),
    }
}

// ---------------------------------------------------------------------------
// dense matrices

#[derive(Deserialize)]
#[serde(untagged)]
enum Cell {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix<'a> {
    #[serde(default)]
    field: Option<String>,
    #[serde(borrow)]
    data: Vec<&'a RawValue>,
}

/// {"field","data":[["1","2"],["3","4"]]}.
pub fn matrix_to_json(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .to_rows()
        .iter()
        .map(|r| format!("    [{}]", r.iter().map(|v| quote(&v.to_string())).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("{{\n  \"field\": {},\n  \"data\": {}\n}}\n", quote(&m.field().to_string()), list_body(&rows, "  "))
}

/// Reads a dense JSON matrix; an embedded field takes precedence over
/// `default_field`.
pub fn matrix_from_json(text: &str, default_field: &Field) -> Result<Matrix> {
    let raw: RawMatrix = from_text(text)?;
    let field = match &raw.field {
        Some(s) => parse_field(s)?,
        None => default_field.clone(),
    };
    let mut rows = Vec::with_capacity(raw.data.len());
    for (cells, line, path) in raw_entries::<Vec<Cell>>(text, &raw.data, "data")? {
        let row = cells
            .iter()
            .enumerate()
            .map(|(j, c)| match c {
                Cell::Int(v) => Ok(field.from_i64(*v)),
                Cell::Text(s) => parse_coeff(&field, s, &format!("{path}[{j}]"), line),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    check_rectangular(&rows, "data")?;
    Matrix::from_rows(&field, rows)
}

fn check_rectangular(rows: &[Vec<Scalar>], prefix: &str) -> Result<()> {
    if let Some(first) = rows.first() {
        if let Some(i) = rows.iter().position(|r| r.len() != first.len()) {
            return Err(schema(format!("{prefix}[{i}]"), None, format!("row has {} cells, expected {}", rows[i].len(), first.len())));
        }
    }
    Ok(())
}

/// One row per line, cells separated by commas; `#` starts a comment line.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in m.to_rows() {
        w.write_record(row.iter().map(Scalar::to_string)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn matrix_from_csv(text: &str, field: &Field) -> Result<Matrix> {
    let mut rows: Vec<Vec<Scalar>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let i = rows.len();
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(raw.as_bytes());
        let rec = match r.records().next() {
            Some(rec) => rec.map_err(|e| schema(format!("row[{i}]"), Some(line), e))?,
            None => continue,
        };
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| parse_coeff(field, s, &format!("row[{i}][{j}]"), line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(schema(format!("row[{i}]"), Some(line), format!("row has {} cells, expected {first}", row.len())));
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(field, rows)
}

/// Dispatches on content: JSON when the first non-space byte is `{`.
pub fn matrix_from_text(text: &str, field: &Field) -> Result<Matrix> {
    if text.trim_start().starts_with('{') {
        matrix_from_json(text, field)
    } else {
        matrix_from_csv(text, field)
    }
}

// ---------------------------------------------------------------------------
// F₂ matrices

pub fn bit_matrix_to_json(m: &BitMatrix) -> String {
    let j = BitMatrixJson::from(m);
    let rows: Vec<String> = j.data.iter().map(|s| format!("    {}", quote(s))).collect();
    format!("{{\n  \"rows\": {},\n  \"cols\": {},\n  \"data\": {}\n}}\n", j.rows, j.cols, list_body(&rows, "  "))
}

/// JSON `{"rows","cols","data"}` or the dense 0/1 text format.
pub fn bit_matrix_from_text(text: &str) -> Result<BitMatrix> {
    if text.trim_start().starts_with('{') {
        let j: BitMatrixJson = from_text(text)?;
        BitMatrix::try_from(j)
    } else {
        BitMatrix::parse_text(text)
    }
}
