//! File formats: the JSON model, sample CSVs and output tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use smooth_eb_core::{DiscreteMixture, Sample, SmoothModel};

use crate::error::{Error, Result};

#[derive(Serialize)]
struct ModelFile<'a> {
    atoms: &'a [f64],
    weights: &'a [f64],
    c: f64,
}

/// `{"atoms":[...],"weights":[...],"c":...}` with round-trip float precision.
pub fn model_to_json(model: &SmoothModel) -> String {
    let file = ModelFile { atoms: model.base.atoms(), weights: model.base.weights(), c: model.c() };
    serde_json::to_string(&file).expect("plain numbers always serialize")
}

pub fn model_from_json(text: &str) -> Result<SmoothModel> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { offset: byte_offset(text, e.line(), e.column()), message: e.to_string() })?;
    let Value::Object(obj) = value else {
        return Err(Error::Schema { field: "model", problem: "must be a JSON object" });
    };
    let atoms = numbers(&obj, "atoms")?;
    let weights = numbers(&obj, "weights")?;
    let c = match obj.get("c") {
        None => return Err(Error::Schema { field: "c", problem: "is missing" }),
        Some(v) => v.as_f64().ok_or(Error::Schema { field: "c", problem: "must be a number" })?,
    };
    let base = DiscreteMixture::new(atoms, weights).map_err(Error::Model)?;
    SmoothModel::new(base, c).map_err(Error::Model)
}

fn numbers(obj: &Map<String, Value>, field: &'static str) -> Result<Vec<f64>> {
    const PROBLEM: &str = "must be an array of numbers";
    match obj.get(field) {
        None => Err(Error::Schema { field, problem: "is missing" }),
        Some(Value::Array(items)) => {
            items.iter().map(|v| v.as_f64().ok_or(Error::Schema { field, problem: PROBLEM })).collect()
        }
        Some(_) => Err(Error::Schema { field, problem: PROBLEM }),
    }
}

/// Converts serde_json's 1-based line and column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn read_model(path: &Path) -> Result<SmoothModel> {
    model_from_json(&read_text(path)?)
}

pub fn write_model(path: &Path, model: &SmoothModel) -> Result<()> {
    write_text(path, &(model_to_json(model) + "\n"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types always serialize");
    write_text(path, &(text + "\n"))
}

/// Reads a sample with header `x` or `x,sigma`. A missing `sigma` column
/// means unit noise. Row numbers in errors are file line numbers.
pub fn read_sample(path: &Path) -> Result<Sample> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    read_sample_from(file, path)
}

pub fn read_sample_from<R: std::io::Read>(reader: R, path: &Path) -> Result<Sample> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let data_err = |row: u64, message: String| Error::Data { path: path.into(), row: row as usize, message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut x_col = None;
    let mut s_col = None;
    for (i, h) in headers.iter().enumerate() {
        match h {
            "x" if x_col.is_none() => x_col = Some(i),
            "sigma" if s_col.is_none() => s_col = Some(i),
            other => return Err(data_err(1, format!("unexpected column `{other}`; header must be `x` or `x,sigma`"))),
        }
    }
    let x_col = x_col.ok_or_else(|| data_err(1, "header must be `x` or `x,sigma`".into()))?;

    let mut xs = Vec::new();
    let mut sigmas = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| data_err(line, format!("`{name}` value `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(data_err(line, format!("`{name}` value `{raw}` is not finite")));
            }
            Ok(v)
        };
        xs.push(field(x_col, "x")?);
        let s = match s_col {
            Some(c) => field(c, "sigma")?,
            None => 1.0,
        };
        if s <= 0.0 {
            return Err(data_err(line, format!("`sigma` must be positive, got {s}")));
        }
        sigmas.push(s);
    }
    if xs.is_empty() {
        return Err(data_err(1, "no observations".into()));
    }
    Ok(Sample::new(xs, sigmas)?)
}

/// Buffered CSV output to a file.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let mut out = Self { path: path.into(), writer: csv::Writer::from_writer(BufWriter::new(file)) };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|source| Error::Csv { path: self.path.clone(), source })
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|source| Error::Io { path: self.path.clone(), source })
    }
}

/// `a..b;c..d`, empty for the empty set.
pub fn format_set(set: &smooth_eb_core::IntervalUnion) -> String {
    set.intervals().iter().map(|i| format!("{}..{}", i.lo, i.hi)).collect::<Vec<_>>().join(";")
}

pub fn write_stdout_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types always serialize");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_schema_instance() {
        let m = SmoothModel::new(DiscreteMixture::point_mass(0.0), 1.0).unwrap();
        assert_eq!(model_to_json(&m), r#"{"atoms":[0.0],"weights":[1.0],"c":1.0}"#);
    }

    #[test]
    fn parse_errors_carry_byte_offsets() {
        let text = "{\"atoms\": [0.0],\n \"weights\": [1.0,, ], \"c\": 1}";
        match model_from_json(text) {
            Err(Error::Parse { offset, .. }) => assert_eq!(&text[offset..offset + 1], ","),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let e = model_from_json(r#"{"atoms":[0.0],"c":1.0}"#).unwrap_err();
        assert!(matches!(e, Error::Schema { field: "weights", problem: "is missing" }));
        let e = model_from_json(r#"{"atoms":[0.0],"weights":[1.0],"c":"one"}"#).unwrap_err();
        assert!(matches!(e, Error::Schema { field: "c", .. }));
        let e = model_from_json(r#"{"atoms":[0.0,1.0],"weights":[0.5,0.4],"c":1.0}"#).unwrap_err();
        assert!(matches!(e, Error::Model(smooth_eb_core::Error::WeightSum { .. })));
    }

    #[test]
    fn sample_headers() {
        let p = Path::new("mem.csv");
        let s = read_sample_from("x\n1.5\n-2\n".as_bytes(), p).unwrap();
        assert_eq!(s.sigma(), &[1.0, 1.0]);
        let s = read_sample_from("x,sigma\n1.5,2\n".as_bytes(), p).unwrap();
        assert_eq!(s.sigma(), &[2.0]);
        let e = read_sample_from("x,sigma\n1.5,2\n0.3,oops\n".as_bytes(), p).unwrap_err();
        assert!(matches!(e, Error::Data { row: 3, .. }), "{e}");
        assert!(read_sample_from("y\n1\n".as_bytes(), p).is_err());
        assert!(matches!(read_sample_from("x,sigma\n1,0\n".as_bytes(), p), Err(Error::Data { row: 2, .. })));
    }
}
