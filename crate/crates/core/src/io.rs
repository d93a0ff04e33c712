//! CSV point data, label files and JSON documents.
//!
//! JSON reals are written with 17 significant digits so every `f64`
//! survives a save/load cycle unchanged. CSV output uses the shortest
//! representation that parses back to the same value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::metrics::LabelVector;
use crate::mixture::MixtureModel;

/// Rows further than this from unit norm are rejected unless normalizing.
pub const UNIT_TOLERANCE: f64 = 1e-8;
const LISTED_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<SpherePoint>,
    pub source: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sphere dimension p.
    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Scale each row to unit length.
    pub normalize: bool,
    /// Skip the first line.
    pub has_header: bool,
}

fn input_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Input {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads ambient coordinates, one observation per row. Rows are numbered
/// from 1 in error messages, not counting the header.
pub fn load_csv(path: &Path, opts: LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_error(path, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| input_error(path, format!("row {row}: {e}")))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(input_error(
                path,
                format!("row {row}: expected {expected} fields, found {}", rec.len()),
            ));
        }
        let values = rec
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(input_error(
                    path,
                    format!("row {row}: non-numeric field {f:?}"),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::NoObservations);
    }
    let ambient = rows[0].len();
    if ambient < 2 {
        return Err(input_error(
            path,
            format!("need at least 2 columns, found {ambient}"),
        ));
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut off_sphere = Vec::new();
    for (i, v) in rows.into_iter().enumerate() {
        let n = geometry::norm(&v);
        if opts.normalize {
            if n < geometry::MIN_NORM {
                return Err(input_error(path, format!("row {}: zero-norm row", i + 1)));
            }
        } else if (n - 1.0).abs() > UNIT_TOLERANCE {
            off_sphere.push(i + 1);
            continue;
        }
        points.push(SpherePoint::new(v)?);
    }
    if !off_sphere.is_empty() {
        let listed: Vec<String> = off_sphere
            .iter()
            .take(LISTED_ROWS)
            .map(usize::to_string)
            .collect();
        let more = off_sphere.len().saturating_sub(LISTED_ROWS);
        let tail = if more > 0 {
            format!(" and {more} more")
        } else {
            String::new()
        };
        return Err(input_error(
            path,
            format!(
                "rows not on the unit sphere (use --normalize): {}{tail}",
                listed.join(", ")
            ),
        ));
    }
    Ok(Dataset {
        points,
        source: path.display().to_string(),
    })
}

pub fn save_dataset(path: &Path, points: &[SpherePoint]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        let line: Vec<String> = p.coords().iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels.as_slice() {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse::<usize>()
                .map_err(|_| input_error(path, format!("line {}: invalid label {t:?}", i + 1)))?,
        );
    }
    LabelVector::new(labels)
}

/// Pretty JSON with every `f64` printed to 17 significant digits;
/// non-finite values become `null`.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| input_error(path, e.to_string()))
}

pub fn save_model(path: &Path, model: &MixtureModel) -> Result<()> {
    save_json(path, model)
}

pub fn load_model(path: &Path) -> Result<MixtureModel> {
    load_json(path)
}

/// Reports are free-form JSON documents.
pub fn save_report<T: Serialize + ?Sized>(path: &Path, report: &T) -> Result<()> {
    save_json(path, report)
}

/// `dir/name`, creating `dir` if needed.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}
