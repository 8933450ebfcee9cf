//! Flat result tables and their CSV / JSON encodings.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dca::{Method, Termination};

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NormTable,
    PhaseTransition,
    NoiseSweep,
    SingleRecover,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::NormTable => "norm-table",
            ExperimentKind::PhaseTransition => "phase-transition",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::SingleRecover => "recover",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output encodings of a [`ResultTable`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::Input(format!("unknown output format `{other}`"))),
        }
    }
}

/// One result row. Unused fields are `None` and serialize as empty cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub kind: ExperimentKind,
    pub method: Option<Method>,
    pub n: usize,
    pub m: usize,
    pub lambda: Option<f64>,
    /// `lambda / mu` when `lambda` was chosen as a multiple of `mu`.
    pub mu_factor: Option<f64>,
    /// Input SNR; `f64::INFINITY` for noiseless measurements.
    pub snr_in_db: Option<f64>,
    /// `None` marks an aggregate row.
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub rel_mse: Option<f64>,
    pub snr_out_db: Option<f64>,
    pub success: Option<bool>,
    pub outer_iters: Option<usize>,
    pub inner_iters_total: Option<usize>,
    pub wall_time_ms: f64,
    pub rank_ratio: Option<f64>,
    pub termination: Option<Termination>,
    /// `||A||`.
    pub op_norm: Option<f64>,
    /// Realized `||e||_2`.
    pub e_norm: Option<f64>,
    /// `||X_out - x x*||_F`.
    pub lift_error: Option<f64>,
}

impl ResultRow {
    pub fn new(kind: ExperimentKind, n: usize, m: usize) -> Self {
        Self {
            kind,
            method: None,
            n,
            m,
            lambda: None,
            mu_factor: None,
            snr_in_db: None,
            trial: None,
            seed: None,
            rel_mse: None,
            snr_out_db: None,
            success: None,
            outer_iters: None,
            inner_iters_total: None,
            wall_time_ms: 0.0,
            rank_ratio: None,
            termination: None,
            op_norm: None,
            e_norm: None,
            lift_error: None,
        }
    }
}

/// Column names, in serialization order.
pub const COLUMNS: [&str; 20] = [
    "kind",
    "method",
    "n",
    "m",
    "lambda",
    "mu_factor",
    "snr_in_db",
    "trial",
    "seed",
    "rel_mse",
    "snr_out_db",
    "success",
    "outer_iters",
    "inner_iters_total",
    "wall_time_ms",
    "rank_ratio",
    "termination",
    "op_norm",
    "e_norm",
    "lift_error",
];

#[derive(Clone, Debug, PartialEq)]
enum Cell {
    Empty,
    Int(u64),
    Real(f64),
    Bool(bool),
    Text(&'static str),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => (*s).to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Int(v) => Value::from(*v),
            Cell::Real(v) if v.is_finite() => Value::from(*v),
            Cell::Real(v) => Value::from(format_real(*v)),
            Cell::Bool(b) => Value::from(*b),
            Cell::Text(s) => Value::from(*s),
        }
    }
}

/// 17 significant digits in scientific notation; `inf` / `-inf` / `nan` otherwise.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> Cell) -> Cell {
    v.map(f).unwrap_or(Cell::Empty)
}

impl ResultRow {
    fn cells(&self, with_timing: bool) -> Vec<Cell> {
        vec![
            Cell::Text(self.kind.as_str()),
            opt(self.method, |m| Cell::Text(m.as_str())),
            Cell::Int(self.n as u64),
            Cell::Int(self.m as u64),
            opt(self.lambda, Cell::Real),
            opt(self.mu_factor, Cell::Real),
            opt(self.snr_in_db, Cell::Real),
            opt(self.trial, |t| Cell::Int(t as u64)),
            opt(self.seed, Cell::Int),
            opt(self.rel_mse, Cell::Real),
            opt(self.snr_out_db, Cell::Real),
            opt(self.success, Cell::Bool),
            opt(self.outer_iters, |v| Cell::Int(v as u64)),
            opt(self.inner_iters_total, |v| Cell::Int(v as u64)),
            if with_timing { Cell::Real(self.wall_time_ms) } else { Cell::Empty },
            opt(self.rank_ratio, Cell::Real),
            opt(self.termination, |t| Cell::Text(t.as_str())),
            opt(self.op_norm, Cell::Real),
            opt(self.e_norm, Cell::Real),
            opt(self.lift_error, Cell::Real),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        self.write_csv_inner(out, true)
    }

    /// CSV with the `wall_time_ms` column blanked, for byte comparisons.
    pub fn write_csv_without_timing<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        self.write_csv_inner(out, false)
    }

    fn write_csv_inner<W: Write>(&self, out: W, with_timing: bool) -> Result<(), HarnessError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(COLUMNS).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.cells(with_timing).iter().map(Cell::csv)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let map: Map<String, Value> = COLUMNS
                        .iter()
                        .zip(r.cells(true))
                        .map(|(k, c)| ((*k).to_string(), c.json()))
                        .collect();
                    Value::Object(map)
                })
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, mut out: W, format: OutputFormat) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Csv => self.write_csv(out),
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut out, &self.to_json_value())
                    .map_err(|e| HarnessError::Io(e.to_string()))?;
                out.write_all(b"\n")?;
                Ok(())
            }
        }
    }

    /// Success rate per `(method, m)` over trial rows, in first-seen order.
    pub fn success_rates(&self) -> Vec<(Method, usize, f64)> {
        let mut acc: Vec<(Method, usize, usize, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.trial.is_some()) {
            let (Some(method), Some(ok)) = (r.method, r.success) else { continue };
            match acc.iter_mut().find(|(mm, m, _, _)| *mm == method && *m == r.m) {
                Some(slot) => {
                    slot.2 += ok as usize;
                    slot.3 += 1;
                }
                None => acc.push((method, r.m, ok as usize, 1)),
            }
        }
        acc.into_iter().map(|(mm, m, k, t)| (mm, m, k as f64 / t as f64)).collect()
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}
