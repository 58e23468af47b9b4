//! File formats.
//!
//! Matrices are plain CSV, one row per line, numbers written with 17
//! significant digits so a save/load round trip is exact. Blank lines and
//! lines starting with `#` are skipped. An empty file is a `0×0` matrix.
//!
//! Instances are described by a TOML manifest pointing at CSV files:
//!
//! ```toml
//! variant = "affine"      # F(x) = A x + b0; or "phase": F(x) = (A x)² − b
//! a = "A.csv"
//! b0 = "b0.csv"           # "b" for the phase variant
//! c = "C.csv"             # optional; no noise columns when absent
//! delta = 0.1             # optional: C is the hypercube matrix Ĉ with radius δ
//! lipschitz = [2.0, 1.0]  # optional (L, ℓ) overriding the computed bounds
//!
//! [feasible]
//! kind = "box"            # lo/hi: a number or one entry per coordinate
//! lo = -1.0
//! hi = 1.0
//! # kind = "ball" with center (number or list) and radius
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::outer::{OuterReport, TraceEntry};
use crate::problem::{BrlsInstance, FeasibleSet, HrlsInstance, ResidualMap};
use crate::scalar::Scalar;

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_csv_matrix<T: Scalar>(text: &str) -> Result<Matrix<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<T>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(record.len());
        for field in &record {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            row.push(T::lit(v));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows)
}

pub fn load_csv_matrix<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    parse_csv_matrix(&fs::read_to_string(path)?)
}

fn write_records<I, R>(records: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in records {
        // writing into memory cannot fail
        w.write_record(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

pub fn format_csv_matrix<T: Scalar>(m: &Matrix<T>) -> String {
    write_records((0..m.rows()).map(|i| m.row(i).iter().map(|v| fmt_num(v.to_f64_lossy())).collect::<Vec<_>>()))
}

pub fn save_csv_matrix<T: Scalar>(m: &Matrix<T>, path: &Path) -> Result<()> {
    Ok(fs::write(path, format_csv_matrix(m))?)
}

/// Reads a vector stored either as one column or as one row.
pub fn load_csv_vector<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let m: Matrix<T> = load_csv_matrix(path)?;
    if m.cols() == 1 || m.rows() <= 1 {
        Ok(m.as_slice().to_vec())
    } else {
        Err(Error::Invalid(format!(
            "{} holds a {}×{} matrix, expected a vector",
            path.display(),
            m.rows(),
            m.cols()
        )))
    }
}

/// Writes a vector as one row.
pub fn save_csv_vector<T: Scalar>(v: &[T], path: &Path) -> Result<()> {
    Ok(fs::write(path, write_records([v.iter().map(|x| fmt_num(x.to_f64_lossy()))]))?)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumOrList {
    Num(f64),
    List(Vec<f64>),
}

impl NumOrList {
    fn expand(&self, m: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Self::Num(v) => Ok(vec![*v; m]),
            Self::List(v) if v.len() == m => Ok(v.clone()),
            Self::List(v) => Err(Error::Config(format!(
                "{what} has {} entries, expected {m}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum FeasibleSpec {
    Box { lo: NumOrList, hi: NumOrList },
    Ball { center: NumOrList, radius: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Variant {
    Affine,
    Phase,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    variant: Variant,
    a: PathBuf,
    b0: Option<PathBuf>,
    b: Option<PathBuf>,
    c: Option<PathBuf>,
    delta: Option<f64>,
    lipschitz: Option<[f64; 2]>,
    feasible: FeasibleSpec,
}

/// An instance read from a manifest.
#[derive(Clone, Debug)]
pub struct LoadedInstance {
    pub brls: BrlsInstance<f64>,
    /// Set when the manifest describes the hypercube form; `brls` is then
    /// its binary transform.
    pub hrls: Option<HrlsInstance<f64>>,
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &PathBuf| dir.join(p);

    let a: Matrix<f64> = load_csv_matrix(&resolve(&manifest.a))?;
    let residual = match manifest.variant {
        Variant::Affine => {
            if manifest.b.is_some() {
                return Err(Error::Config("affine manifests take `b0`, not `b`".into()));
            }
            let offset = match &manifest.b0 {
                Some(p) => load_csv_vector(&resolve(p))?,
                None => vec![0.0; a.rows()],
            };
            ResidualMap::affine(a, offset)?
        }
        Variant::Phase => {
            if manifest.b0.is_some() {
                return Err(Error::Config("phase manifests take `b`, not `b0`".into()));
            }
            let b = manifest
                .b
                .as_ref()
                .ok_or_else(|| Error::Config("phase manifests need `b`".into()))?;
            ResidualMap::phase_retrieval(a, load_csv_vector(&resolve(b))?)?
        }
    };
    let c = match &manifest.c {
        Some(p) => {
            let c: Matrix<f64> = load_csv_matrix(&resolve(p))?;
            if c.rows() == 0 {
                Matrix::zeros(residual.output_dim(), 0)
            } else {
                c
            }
        }
        None => Matrix::zeros(residual.output_dim(), 0),
    };
    let m = residual.input_dim();
    let feasible = match &manifest.feasible {
        FeasibleSpec::Box { lo, hi } => FeasibleSet::new_box(lo.expand(m, "lo")?, hi.expand(m, "hi")?)?,
        FeasibleSpec::Ball { center, radius } => FeasibleSet::new_ball(center.expand(m, "center")?, *radius)?,
    };
    let with_constants = |inst: BrlsInstance<f64>| match manifest.lipschitz {
        Some([l, ell]) => inst.with_lipschitz(l, ell),
        None => inst,
    };
    match manifest.delta {
        Some(delta) => {
            let h = HrlsInstance::new(residual, c, delta, feasible)?;
            Ok(LoadedInstance {
                brls: with_constants(h.to_brls()?),
                hrls: Some(h),
            })
        }
        None => Ok(LoadedInstance {
            brls: with_constants(BrlsInstance::new(residual, c, feasible)?),
            hrls: None,
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub param: String,
    pub metric: String,
    pub value: Cell,
}

/// Long-format results: one `(model, param, metric, value)` row per number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn push(&mut self, model: &str, param: &str, metric: &str, value: f64) {
        self.rows.push(ResultRow {
            model: model.into(),
            param: param.into(),
            metric: metric.into(),
            value: Cell::Number(value),
        });
    }

    /// Records a failed solve as a row with metric `error`.
    pub fn push_error(&mut self, model: &str, param: &str, message: &str) {
        self.rows.push(ResultRow {
            model: model.into(),
            param: param.into(),
            metric: "error".into(),
            value: Cell::Text(message.into()),
        });
    }

    /// Numeric value of the first matching row.
    pub fn get(&self, model: &str, param: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find_map(|r| match &r.value {
            Cell::Number(v) if r.model == model && r.param == param && r.metric == metric => Some(*v),
            _ => None,
        })
    }

    pub fn errors(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| matches!(r.value, Cell::Text(_)))
    }

    pub fn to_csv(&self) -> String {
        let header = ["model", "param", "metric", "value"].map(String::from);
        write_records(std::iter::once(header).chain(self.rows.iter().map(|r| {
            let value = match &r.value {
                Cell::Number(v) => format!("{v}"),
                Cell::Text(t) => t.clone(),
            };
            [r.model.clone(), r.param.clone(), r.metric.clone(), value]
        })))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }
}

pub fn save_result_table(table: &ResultTable, path: &Path) -> Result<()> {
    table.save(path)
}

/// `k,theta,phi` with an empty `phi` field when unknown.
pub fn format_trace<T: Scalar>(trace: &[TraceEntry<T>]) -> String {
    let header = ["k", "theta", "phi"].map(String::from);
    write_records(std::iter::once(header).chain(trace.iter().map(|e| {
        let phi = e.phi.map(|p| fmt_num(p.to_f64_lossy())).unwrap_or_default();
        [e.k.to_string(), fmt_num(e.theta.to_f64_lossy()), phi]
    })))
}

pub fn save_trace<T: Scalar>(trace: &[TraceEntry<T>], path: &Path) -> Result<()> {
    Ok(fs::write(path, format_trace(trace))?)
}

fn join<T: Scalar>(v: &[T]) -> String {
    v.iter()
        .map(|x| fmt_num(x.to_f64_lossy()))
        .collect::<Vec<_>>()
        .join(",")
}

/// `key = value` lines describing a run.
pub fn format_report<T: Scalar>(r: &OuterReport<T>) -> String {
    let mut out = String::new();
    let y: String = r.y_hat.iter().map(|&b| if b { '1' } else { '0' }).collect();
    let _ = writeln!(out, "x_hat = {}", join(&r.x_hat));
    let _ = writeln!(out, "y_hat = {y}");
    let _ = writeln!(out, "phi_estimate = {}", fmt_num(r.phi_estimate.to_f64_lossy()));
    let _ = writeln!(out, "inner_method = {}", r.inner_method);
    let _ = writeln!(out, "iterations = {}", r.iterations);
    let _ = writeln!(out, "step = {}", fmt_num(r.step.to_f64_lossy()));
    match r.quality {
        Some(crate::outer::Guarantee::Minimax { alpha, eps }) => {
            let _ = writeln!(
                out,
                "quality = approximate minimax point, alpha = {}, eps = {}",
                alpha.to_f64_lossy(),
                eps.to_f64_lossy()
            );
        }
        Some(crate::outer::Guarantee::ExpectedStationarity { eps }) => {
            let _ = writeln!(out, "quality = expected Moreau stationarity, eps = {}", eps.to_f64_lossy());
        }
        None => {
            let _ = writeln!(out, "quality = none (parameters overridden or no guarantee for this inner solver)");
        }
    }
    if let Some(seed) = r.rng_seed {
        let _ = writeln!(out, "rng_seed = {seed}");
    }
    if let Some(k) = r.sampled_index {
        let _ = writeln!(out, "sampled_index = {k}");
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning = {w}");
    }
    out
}

pub fn save_report<T: Scalar>(r: &OuterReport<T>, path: &Path) -> Result<()> {
    Ok(fs::write(path, format_report(r))?)
}
