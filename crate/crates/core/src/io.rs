//! On-disk formats: run logs, loss logs, model and fit configs, fit
//! artifacts.
//!
//! Tabular inputs come as CSV (header row mandatory) or JSON lines (one
//! object per line). Both are normalized to the same column map before any
//! field is interpreted, so the two encodings of one table parse
//! identically. Parsers reject invalid input and name the offending line and
//! column; nothing is silently repaired.
//!
//! Compute is always exaFLOPs. Three ways to supply it per row:
//! `x_exaflops`, raw `x_flops` (divided by 1e18), or `step` plus step-shape
//! columns, in which case a [`ModelConfig`] is required and compute is the
//! running FLOPs total.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

use crate::fit::{FitConfig, FitResult};
use crate::flops::{Algorithm, FlopsError, ModelConfig, StepSpec, FLOPS_PER_EXAFLOP};
use crate::phases::{LossPoint, LossSeries};
use crate::scaling::ConstraintMode;
use crate::series::{CurvePoint, RunSeries};

/// Largest performance value accepted from input files.
pub const PERFORMANCE_INGEST_MAX: f64 = 100.0;

pub const ARTIFACT_FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("line {line}, column '{column}': {message}")]
    Field {
        line: usize,
        column: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required column(s): {0}")]
    MissingColumn(String),
    #[error("key '{key}': {message}")]
    Key { key: String, message: String },
    #[error("no data rows")]
    Empty,
    #[error("unsupported artifact format version '{found}' (expected '{expected}')")]
    Version { found: String, expected: String },
    #[error("malformed JSON document: {0}")]
    Json(String),
    #[error(transparent)]
    Flops(#[from] FlopsError),
}

pub type Result<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// `.jsonl`, `.ndjson` and `.json` read as JSON lines; anything else as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
        {
            Some(e) if e == "jsonl" || e == "ndjson" || e == "json" => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "jsonl" | "ndjson" => Ok(DataFormat::Jsonl),
            other => Err(format!("unknown data format '{other}'")),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// tabular records

#[derive(Debug, Clone)]
struct Record {
    line: usize,
    fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Record>,
}

impl Table {
    fn has(&self, col: &str) -> bool {
        self.columns.iter().any(|c| c == col)
    }
}

fn read_table(text: &str, format: DataFormat) -> Result<Table> {
    match format {
        DataFormat::Csv => read_csv_table(text),
        DataFormat::Jsonl => read_jsonl_table(text),
    }
}

fn read_csv_table(text: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Line {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let columns: Vec<String> = headers.iter().map(str::to_string).collect();
    if columns.iter().all(|c| c.is_empty()) {
        return Err(IoError::Line {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::Line {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields = columns
            .iter()
            .zip(rec.iter())
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect();
        rows.push(Record { line, fields });
    }
    Ok(Table { columns, rows })
}

fn read_jsonl_table(text: &str) -> Result<Table> {
    let mut columns: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(raw).map_err(|e| IoError::Line {
            line,
            message: e.to_string(),
        })?;
        let mut fields = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::String(s) => s,
                serde_json::Value::Bool(b) => b.to_string(),
                _ => {
                    return Err(IoError::Field {
                        line,
                        column: k,
                        message: "nested values are not supported".into(),
                    })
                }
            };
            if !columns.contains(&k) {
                columns.push(k.clone());
            }
            fields.insert(k, s);
        }
        rows.push(Record { line, fields });
    }
    Ok(Table { columns, rows })
}

impl Record {
    fn err(&self, column: &str, message: impl Into<String>) -> IoError {
        IoError::Field {
            line: self.line,
            column: column.into(),
            message: message.into(),
        }
    }

    fn str(&self, col: &str) -> Option<&str> {
        self.fields.get(col).map(String::as_str)
    }

    fn f64(&self, col: &str) -> Result<Option<f64>> {
        let Some(s) = self.str(col) else { return Ok(None) };
        let v: f64 = s.parse().map_err(|_| self.err(col, format!("'{s}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(col, format!("'{s}' is not finite")));
        }
        Ok(Some(v))
    }

    fn req_f64(&self, col: &str) -> Result<f64> {
        self.f64(col)?.ok_or_else(|| self.err(col, "value is missing"))
    }

    fn u64(&self, col: &str) -> Result<Option<u64>> {
        let Some(s) = self.str(col) else { return Ok(None) };
        if let Ok(v) = s.parse::<u64>() {
            return Ok(Some(v));
        }
        // JSON writers may emit integral counts as 512.0
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(64) => Ok(Some(v as u64)),
            _ => Err(self.err(col, format!("'{s}' is not a nonnegative integer"))),
        }
    }

    /// Average lengths may be fractional in logs; they are rounded to the
    /// nearest token.
    fn length(&self, col: &str) -> Result<Option<u64>> {
        let Some(v) = self.f64(col)? else { return Ok(None) };
        if v < 0.0 || v >= 2f64.powi(64) {
            return Err(self.err(col, format!("length {v} out of range")));
        }
        Ok(Some(v.round() as u64))
    }
}

fn require_columns(table: &Table, cols: &[&str]) -> Result<()> {
    let missing: Vec<&str> = cols.iter().copied().filter(|c| !table.has(c)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(IoError::MissingColumn(missing.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// step-level training logs

pub const STEP_COLUMNS: [&str; 10] = [
    "batch",
    "update_batch",
    "sampling_rounds",
    "group_size",
    "expert_per_prompt",
    "on_policy_kept",
    "off_policy_kept",
    "avg_seq_len",
    "avg_on_len",
    "avg_off_len",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: u64,
    /// Shape of every step since the previous record.
    pub spec: StepSpec,
    pub performance: Option<f64>,
    pub val_loss: Option<f64>,
}

/// Step-level log. A record at step `s` stands for the `s - s_prev` steps
/// since the previous record (`s_prev = 0` before the first), all with its
/// shape; consecutive steps therefore contribute one step each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrainLog {
    pub records: Vec<TrainRecord>,
    #[serde(skip)]
    lines: Vec<usize>,
}

impl RawTrainLog {
    pub fn new(records: Vec<TrainRecord>) -> Result<Self> {
        let lines = (1..=records.len()).collect();
        let log = RawTrainLog { records, lines };
        log.check_steps()?;
        Ok(log)
    }

    fn check_steps(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(IoError::Empty);
        }
        for i in 1..self.records.len() {
            if self.records[i].step <= self.records[i - 1].step {
                return Err(IoError::Field {
                    line: self.lines[i],
                    column: "step".into(),
                    message: format!(
                        "step {} does not increase past {}",
                        self.records[i].step,
                        self.records[i - 1].step
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-record FLOPs (covering the step gap) and the running total, both exact.
    pub fn flops_exact(&self, cfg: &ModelConfig) -> Result<Vec<(u128, u128)>> {
        let mut prev = 0u64;
        let mut total = 0u128;
        let mut out = Vec::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let gap = (r.step - prev) as u128;
            let per_step = r.spec.flops_exact(cfg).map_err(|e| IoError::Line {
                line: self.lines.get(i).copied().unwrap_or(i + 1),
                message: e.to_string(),
            })?;
            let chunk = gap.checked_mul(per_step).ok_or(FlopsError::Overflow)?;
            total = total.checked_add(chunk).ok_or(FlopsError::Overflow)?;
            out.push((per_step, total));
            prev = r.step;
        }
        Ok(out)
    }

    /// Cumulative compute in exaFLOPs at each record.
    pub fn cumulative_exaflops(&self, cfg: &ModelConfig) -> Result<Vec<f64>> {
        Ok(self
            .flops_exact(cfg)?
            .into_iter()
            .map(|(_, t)| t as f64 / FLOPS_PER_EXAFLOP)
            .collect())
    }

    /// Records carrying a performance value, at their cumulative compute.
    pub fn to_run_series(&self, cfg: &ModelConfig, run_id: &str) -> Result<RunSeries> {
        let xs = self.cumulative_exaflops(cfg)?;
        let points: Vec<CurvePoint> = self
            .records
            .iter()
            .zip(xs)
            .filter_map(|(r, x)| {
                r.performance.map(|y| CurvePoint {
                    x,
                    y,
                    step: Some(r.step),
                })
            })
            .collect();
        if points.is_empty() {
            return Err(IoError::MissingColumn("performance".into()));
        }
        RunSeries::new(run_id, points).map_err(|e| IoError::Line {
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn to_loss_series(&self, cfg: &ModelConfig) -> Result<LossSeries> {
        let xs = self.cumulative_exaflops(cfg)?;
        let points: Vec<LossPoint> = self
            .records
            .iter()
            .zip(xs)
            .filter_map(|(r, x)| r.val_loss.map(|loss| LossPoint { x, loss }))
            .collect();
        if points.is_empty() {
            return Err(IoError::MissingColumn("val_loss".into()));
        }
        LossSeries::new(points).map_err(|e| IoError::Line {
            line: 0,
            message: e.to_string(),
        })
    }
}

fn check_performance(rec: &Record, y: f64) -> Result<f64> {
    if !(0.0..=PERFORMANCE_INGEST_MAX).contains(&y) {
        return Err(rec.err("performance", format!("{y} outside [0, {PERFORMANCE_INGEST_MAX}]")));
    }
    Ok(y)
}

fn check_loss(rec: &Record, loss: f64) -> Result<f64> {
    if loss < 0.0 {
        return Err(rec.err("val_loss", format!("{loss} is negative")));
    }
    Ok(loss)
}

fn train_log_from_table(table: &Table, default_algorithm: Option<Algorithm>) -> Result<RawTrainLog> {
    require_columns(table, &["step"])?;
    if !table.has("algorithm") && default_algorithm.is_none() {
        return Err(IoError::MissingColumn(
            "algorithm (or supply a default algorithm)".into(),
        ));
    }
    if table.rows.is_empty() {
        return Err(IoError::Empty);
    }
    let mut records = Vec::with_capacity(table.rows.len());
    let mut lines = Vec::with_capacity(table.rows.len());
    for rec in &table.rows {
        let algorithm = match rec.str("algorithm") {
            Some(s) => s
                .parse::<Algorithm>()
                .map_err(|e| rec.err("algorithm", e.to_string()))?,
            None => default_algorithm.ok_or_else(|| rec.err("algorithm", "value is missing"))?,
        };
        let c = |col| rec.u64(col).map(Option::unwrap_or_default);
        let l = |col| rec.length(col).map(Option::unwrap_or_default);
        let spec = StepSpec {
            algorithm,
            batch: c("batch")?,
            update_batch: c("update_batch")?,
            sampling_rounds: c("sampling_rounds")?,
            group_size: c("group_size")?,
            expert_per_prompt: c("expert_per_prompt")?,
            on_policy_kept: c("on_policy_kept")?,
            off_policy_kept: c("off_policy_kept")?,
            avg_seq_len: l("avg_seq_len")?,
            avg_on_len: l("avg_on_len")?,
            avg_off_len: l("avg_off_len")?,
        };
        let step = rec.u64("step")?.ok_or_else(|| rec.err("step", "value is missing"))?;
        let performance = rec.f64("performance")?.map(|y| check_performance(rec, y)).transpose()?;
        let val_loss = rec.f64("val_loss")?.map(|v| check_loss(rec, v)).transpose()?;
        records.push(TrainRecord {
            step,
            spec,
            performance,
            val_loss,
        });
        lines.push(rec.line);
    }
    let log = RawTrainLog { records, lines };
    log.check_steps()?;
    Ok(log)
}

pub fn parse_train_log(text: &str, format: DataFormat, default_algorithm: Option<Algorithm>) -> Result<RawTrainLog> {
    train_log_from_table(&read_table(text, format)?, default_algorithm)
}

// ---------------------------------------------------------------------------
// run series and loss series

/// How to obtain compute when a file only carries steps.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepContext<'a> {
    pub model: Option<&'a ModelConfig>,
    pub default_algorithm: Option<Algorithm>,
}

enum XColumn {
    Exa,
    Flops,
    Steps,
}

fn x_column(table: &Table, ctx: &StepContext<'_>) -> Result<XColumn> {
    if table.has("x_exaflops") {
        Ok(XColumn::Exa)
    } else if table.has("x_flops") {
        Ok(XColumn::Flops)
    } else if table.has("step") {
        if ctx.model.is_none() {
            return Err(IoError::MissingColumn(
                "x_exaflops or x_flops (step-only logs need a model config)".into(),
            ));
        }
        Ok(XColumn::Steps)
    } else {
        Err(IoError::MissingColumn("x_exaflops, x_flops or step".into()))
    }
}

fn row_x(rec: &Record, kind: &XColumn) -> Result<f64> {
    let (col, scale) = match kind {
        XColumn::Exa => ("x_exaflops", 1.0),
        XColumn::Flops => ("x_flops", FLOPS_PER_EXAFLOP),
        XColumn::Steps => unreachable!("step logs go through the train-log path"),
    };
    let x = rec.req_f64(col)? / scale;
    if x < 0.0 {
        return Err(rec.err(col, format!("compute {x} is negative")));
    }
    Ok(x)
}

pub fn parse_run_series(text: &str, format: DataFormat, run_id: &str, ctx: &StepContext<'_>) -> Result<RunSeries> {
    let table = read_table(text, format)?;
    let kind = x_column(&table, ctx)?;
    require_columns(&table, &["performance"])?;
    if let XColumn::Steps = kind {
        let log = train_log_from_table(&table, ctx.default_algorithm)?;
        return log.to_run_series(ctx.model.expect("checked above"), run_id);
    }
    if table.rows.is_empty() {
        return Err(IoError::Empty);
    }
    let col = if let XColumn::Exa = kind {
        "x_exaflops"
    } else {
        "x_flops"
    };
    let mut points: Vec<CurvePoint> = Vec::with_capacity(table.rows.len());
    for rec in &table.rows {
        let x = row_x(rec, &kind)?;
        if let Some(prev) = points.last() {
            if x < prev.x {
                return Err(rec.err(col, format!("compute {x} decreases from {}", prev.x)));
            }
        }
        let y = check_performance(rec, rec.req_f64("performance")?)?;
        points.push(CurvePoint {
            x,
            y,
            step: rec.u64("step")?,
        });
    }
    Ok(RunSeries {
        run_id: run_id.to_string(),
        points,
    })
}

pub fn read_run_series(path: &Path, ctx: &StepContext<'_>) -> Result<RunSeries> {
    let run_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    parse_run_series(&read_text(path)?, DataFormat::from_path(path), run_id, ctx)
}

pub fn parse_loss_series(text: &str, format: DataFormat, ctx: &StepContext<'_>) -> Result<LossSeries> {
    let table = read_table(text, format)?;
    let kind = x_column(&table, ctx)?;
    require_columns(&table, &["val_loss"])?;
    if let XColumn::Steps = kind {
        let log = train_log_from_table(&table, ctx.default_algorithm)?;
        return log.to_loss_series(ctx.model.expect("checked above"));
    }
    if table.rows.is_empty() {
        return Err(IoError::Empty);
    }
    let col = if let XColumn::Exa = kind {
        "x_exaflops"
    } else {
        "x_flops"
    };
    let mut points: Vec<LossPoint> = Vec::with_capacity(table.rows.len());
    for rec in &table.rows {
        let x = row_x(rec, &kind)?;
        if let Some(prev) = points.last() {
            if x <= prev.x {
                return Err(rec.err(col, format!("compute {x} does not increase past {}", prev.x)));
            }
        }
        let loss = check_loss(rec, rec.req_f64("val_loss")?)?;
        points.push(LossPoint { x, loss });
    }
    LossSeries::new(points).map_err(|e| IoError::Line {
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_loss_series(path: &Path, ctx: &StepContext<'_>) -> Result<LossSeries> {
    parse_loss_series(&read_text(path)?, DataFormat::from_path(path), ctx)
}

/// Serialize with shortest round-trip float formatting.
pub fn write_run_series(series: &RunSeries, format: DataFormat) -> String {
    let with_step = series.points.iter().any(|p| p.step.is_some());
    let mut out = String::new();
    match format {
        DataFormat::Csv => {
            out.push_str(if with_step {
                "x_exaflops,performance,step\n"
            } else {
                "x_exaflops,performance\n"
            });
            for p in &series.points {
                let _ = write!(out, "{:?},{:?}", p.x, p.y);
                if with_step {
                    out.push(',');
                    if let Some(s) = p.step {
                        let _ = write!(out, "{s}");
                    }
                }
                out.push('\n');
            }
        }
        DataFormat::Jsonl => {
            for p in &series.points {
                let mut obj = serde_json::Map::new();
                obj.insert("x_exaflops".into(), p.x.into());
                obj.insert("performance".into(), p.y.into());
                if let Some(s) = p.step {
                    obj.insert("step".into(), s.into());
                }
                out.push_str(&serde_json::Value::Object(obj).to_string());
                out.push('\n');
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// key = value files

/// Parsed `key = value` file. Later duplicates win; each override is noted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvFile {
    pub entries: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

pub fn parse_kv(text: &str) -> Result<KvFile> {
    let mut kv = KvFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(IoError::Line {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(IoError::Line {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        if let Some(old) = kv.entries.insert(k.to_string(), v.to_string()) {
            kv.warnings.push(format!(
                "line {}: duplicate key '{k}' overrides earlier value '{old}'",
                i + 1
            ));
        }
    }
    Ok(kv)
}

fn key_err(key: &str, message: impl Into<String>) -> IoError {
    IoError::Key {
        key: key.into(),
        message: message.into(),
    }
}

const MODEL_KEYS: [&str; 5] = [
    "num_layers",
    "hidden_size",
    "ffn_intermediate",
    "vocab_size",
    "kv_total_dim",
];

pub fn model_config_from_kv(kv: &KvFile) -> Result<ModelConfig> {
    if let Some(k) = kv.entries.keys().find(|k| !MODEL_KEYS.contains(&k.as_str())) {
        return Err(key_err(k, "unknown key"));
    }
    let mut vals = [0u64; 5];
    for (slot, key) in vals.iter_mut().zip(MODEL_KEYS) {
        let s = kv.entries.get(key).ok_or_else(|| key_err(key, "missing"))?;
        let v: i128 = s
            .parse()
            .map_err(|_| key_err(key, format!("'{s}' is not an integer")))?;
        if v <= 0 || v > u64::MAX as i128 {
            return Err(key_err(key, format!("must be a positive integer, got {v}")));
        }
        *slot = v as u64;
    }
    Ok(ModelConfig::new(vals[0], vals[1], vals[2], vals[3], vals[4])?)
}

/// Parse a model config; duplicate-key overrides are logged as warnings.
pub fn parse_model_config(text: &str) -> Result<ModelConfig> {
    let kv = parse_kv(text)?;
    for w in &kv.warnings {
        log::warn!("{w}");
    }
    model_config_from_kv(&kv)
}

pub fn read_model_config(path: &Path) -> Result<ModelConfig> {
    parse_model_config(&read_text(path)?)
}

fn kv_parse<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| key_err(key, format!("cannot parse '{s}'")))
}

/// Overlay `key = value` entries (named after [`FitConfig`] fields) on `base`.
pub fn fit_config_from_kv(kv: &KvFile, base: FitConfig) -> Result<FitConfig> {
    let mut cfg = base;
    for (k, v) in &kv.entries {
        match k.as_str() {
            "train_fraction" => cfg.train_fraction = kv_parse(k, v)?,
            "z_threshold" => cfg.z_threshold = kv_parse(k, v)?,
            "use_lts" => cfg.use_lts = kv_parse(k, v)?,
            "lts_alpha" => cfg.lts_alpha = kv_parse(k, v)?,
            "max_outlier_rounds" => cfg.max_outlier_rounds = kv_parse(k, v)?,
            "nls_max_iters" => cfg.nls_max_iters = kv_parse(k, v)?,
            "nls_tolerance" => cfg.nls_tolerance = kv_parse(k, v)?,
            "multistart_count" => cfg.multistart_count = kv_parse(k, v)?,
            "seed" => cfg.seed = kv_parse(k, v)?,
            "mode" => {
                cfg.mode = match v.as_str() {
                    "headroom" => ConstraintMode::Headroom,
                    "unconstrained" => ConstraintMode::Unconstrained,
                    _ => return Err(key_err(k, format!("expected headroom or unconstrained, got '{v}'"))),
                }
            }
            "pin_p_start" => cfg.pin_p_start = if v == "none" { None } else { Some(kv_parse(k, v)?) },
            _ => return Err(key_err(k, "unknown key")),
        }
    }
    cfg.validate().map_err(|e| key_err("fit config", e.to_string()))?;
    Ok(cfg)
}

pub fn read_fit_config(path: &Path, base: FitConfig) -> Result<FitConfig> {
    let kv = parse_kv(&read_text(path)?)?;
    for w in &kv.warnings {
        log::warn!("{w}");
    }
    fit_config_from_kv(&kv, base)
}

// ---------------------------------------------------------------------------
// fit artifacts

/// Labels that place a fit in the report table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactLabels {
    pub config_name: Option<String>,
    pub sft_step: Option<u64>,
    pub x_sft: Option<f64>,
    pub min_val_loss: Option<f64>,
    /// Largest observed performance of the fitted run.
    pub max_performance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub format_version: String,
    pub generator: String,
    /// Random stream used for multistart jitter.
    pub rng: String,
    pub run_id: String,
    pub labels: ArtifactLabels,
    pub config: FitConfig,
    /// Which points the reported R^2 covers.
    pub r2_basis: String,
    pub result: FitResult,
}

impl FitArtifact {
    pub fn new(run_id: impl Into<String>, labels: ArtifactLabels, config: FitConfig, result: FitResult) -> Self {
        FitArtifact {
            format_version: ARTIFACT_FORMAT_VERSION.into(),
            generator: concat!("pcscale ", env!("CARGO_PKG_VERSION")).into(),
            rng: crate::synth::GENERATOR.into(),
            run_id: run_id.into(),
            labels,
            config,
            r2_basis: "inliers".into(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_str()) {
            Some(ARTIFACT_FORMAT_VERSION) => {}
            Some(other) => {
                return Err(IoError::Version {
                    found: other.into(),
                    expected: ARTIFACT_FORMAT_VERSION.into(),
                })
            }
            None => return Err(IoError::Json("missing format_version".into())),
        }
        serde_json::from_value(value).map_err(|e| IoError::Json(e.to_string()))
    }
}

pub fn write_fit_artifact(artifact: &FitArtifact, path: &Path) -> Result<()> {
    write_text(path, &artifact.to_json())
}

pub fn read_fit_artifact(path: &Path) -> Result<FitArtifact> {
    FitArtifact::from_json(&read_text(path)?)
}

/// Read every `*.json` artifact in `dir`, sorted by file name.
pub fn read_artifact_dir(dir: &Path) -> Result<Vec<FitArtifact>> {
    let entries = std::fs::read_dir(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(IoError::Empty);
    }
    paths
        .iter()
        .map(|p| {
            read_fit_artifact(p).map_err(|e| match e {
                IoError::File { .. } => e,
                other => IoError::Json(format!("{}: {other}", p.display())),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// summaries for correlation

/// Rows of `config_name, min_val_loss, max_p_post[, a_post]`.
pub fn parse_summaries(text: &str, format: DataFormat) -> Result<Vec<crate::analysis::ConfigSummary>> {
    let table = read_table(text, format)?;
    require_columns(&table, &["config_name", "min_val_loss"])?;
    if !table.has("max_p_post") && !table.has("a_post") {
        return Err(IoError::MissingColumn("max_p_post or a_post".into()));
    }
    if table.rows.is_empty() {
        return Err(IoError::Empty);
    }
    table
        .rows
        .iter()
        .map(|rec| {
            let name = rec
                .str("config_name")
                .ok_or_else(|| rec.err("config_name", "value is missing"))?;
            let mut s = crate::analysis::ConfigSummary::observed(name, rec.req_f64("min_val_loss")?, 0.0);
            s.max_p_post = rec.f64("max_p_post")?;
            s.a_post = rec.f64("a_post")?;
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> ModelConfig {
        ModelConfig::new(1, 1, 1, 1, 1).unwrap()
    }

    #[test]
    fn two_row_csv() {
        let s = parse_run_series(
            "x_exaflops,performance\n1.0,50\n2.0,60",
            DataFormat::Csv,
            "r",
            &StepContext::default(),
        )
        .unwrap();
        assert_eq!(s.xs(), vec![1.0, 2.0]);
        assert_eq!(s.ys(), vec![50.0, 60.0]);
    }

    #[test]
    fn csv_and_jsonl_agree() {
        let csv = "x_exaflops,performance,step\n0.5,40.25,10\n1.5,55,20\n";
        let jsonl = "{\"x_exaflops\":0.5,\"performance\":40.25,\"step\":10}\n\n{\"step\":20,\"performance\":55,\"x_exaflops\":1.5}\n";
        let ctx = StepContext::default();
        assert_eq!(
            parse_run_series(csv, DataFormat::Csv, "r", &ctx).unwrap(),
            parse_run_series(jsonl, DataFormat::Jsonl, "r", &ctx).unwrap()
        );
    }

    #[test]
    fn rejections_name_row_and_column() {
        let ctx = StepContext::default();
        let err = parse_run_series("x_exaflops,performance\n2.0,50\n1.0,60\n", DataFormat::Csv, "r", &ctx).unwrap_err();
        assert!(
            matches!(&err, IoError::Field { line: 3, column, .. } if column == "x_exaflops"),
            "{err}"
        );
        let err = parse_run_series("x_exaflops,performance\n1.0,101\n", DataFormat::Csv, "r", &ctx).unwrap_err();
        assert!(
            matches!(&err, IoError::Field { line: 2, column, .. } if column == "performance"),
            "{err}"
        );
        let err = parse_run_series("x_exaflops,performance\n1.0,5o\n", DataFormat::Csv, "r", &ctx).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(matches!(
            parse_run_series("x_exaflops\n1.0\n", DataFormat::Csv, "r", &ctx),
            Err(IoError::MissingColumn(_))
        ));
        assert!(matches!(
            parse_run_series("x_exaflops,performance\n", DataFormat::Csv, "r", &ctx),
            Err(IoError::Empty)
        ));
        // thousands separators are not numbers
        assert!(parse_run_series("x_exaflops,performance\n\"1,000\",5\n", DataFormat::Csv, "r", &ctx).is_err());
    }

    #[test]
    fn raw_flops_column_converted() {
        let s = parse_run_series(
            "x_flops,performance\n2.5e18,50\n",
            DataFormat::Csv,
            "r",
            &StepContext::default(),
        )
        .unwrap();
        assert_eq!(s.points[0].x, 2.5);
    }

    #[test]
    fn step_logs_need_model_and_accumulate() {
        let text = "step,algorithm,batch,avg_seq_len,performance\n1,sft,2,1,40\n2,sft,2,1,41\n";
        assert!(matches!(
            parse_run_series(text, DataFormat::Csv, "r", &StepContext::default()),
            Err(IoError::MissingColumn(_))
        ));
        let cfg = tiny();
        let ctx = StepContext {
            model: Some(&cfg),
            default_algorithm: None,
        };
        let s = parse_run_series(text, DataFormat::Csv, "r", &ctx).unwrap();
        assert_eq!(s.xs(), vec![132e-18, 264e-18]);
        assert_eq!(s.points[1].step, Some(2));

        // a record covers the steps since the previous one
        let sparse = "step,batch,avg_seq_len,performance\n2,2,1,40\n5,2,1,41\n";
        let ctx = StepContext {
            model: Some(&cfg),
            default_algorithm: Some(Algorithm::Sft),
        };
        let s = parse_run_series(sparse, DataFormat::Csv, "r", &ctx).unwrap();
        assert_eq!(s.xs(), vec![264e-18, 660e-18]);
    }

    #[test]
    fn train_log_rules() {
        let log = parse_train_log(
            "step,algorithm,group_size,batch,avg_seq_len,val_loss\n1,grpo,2,1,1,0.5\n2,grpo,2,1,1.4,\n",
            DataFormat::Csv,
            None,
        )
        .unwrap();
        assert_eq!(log.records[1].spec.avg_seq_len, 1);
        assert_eq!(log.records[1].val_loss, None);
        let totals: Vec<u128> = log.flops_exact(&tiny()).unwrap().iter().map(|t| t.1).collect();
        assert_eq!(totals, vec![176, 352]);

        let err = parse_train_log("step,batch\n2,1\n2,1\n", DataFormat::Csv, Some(Algorithm::Sft)).unwrap_err();
        assert!(
            matches!(&err, IoError::Field { line: 3, column, .. } if column == "step"),
            "{err}"
        );
        let err = parse_train_log("step,algorithm\n1,ppo\n", DataFormat::Csv, None).unwrap_err();
        assert!(matches!(&err, IoError::Field { column, .. } if column == "algorithm"));
        let err = parse_train_log("step,batch\n1,2.5\n", DataFormat::Csv, Some(Algorithm::Sft)).unwrap_err();
        assert!(matches!(&err, IoError::Field { column, .. } if column == "batch"));
        assert!(matches!(
            parse_train_log("step,batch\n", DataFormat::Csv, Some(Algorithm::Sft)),
            Err(IoError::Empty)
        ));
    }

    #[test]
    fn loss_series_shapes() {
        let ctx = StepContext::default();
        let s = parse_loss_series("x_exaflops,val_loss\n1,0.9\n2,0.8\n", DataFormat::Csv, &ctx).unwrap();
        assert_eq!(s.losses(), vec![0.9, 0.8]);
        assert!(parse_loss_series("x_exaflops,val_loss\n1,0.9\n1,0.8\n", DataFormat::Csv, &ctx).is_err());
        assert!(parse_loss_series("x_exaflops,val_loss\n1,-0.9\n", DataFormat::Csv, &ctx).is_err());
        let cfg = tiny();
        let ctx = StepContext {
            model: Some(&cfg),
            default_algorithm: Some(Algorithm::Sft),
        };
        let s = parse_loss_series(
            "step,batch,avg_seq_len,val_loss\n1,2,1,0.9\n2,2,1,0.8\n",
            DataFormat::Csv,
            &ctx,
        )
        .unwrap();
        assert_eq!(s.points[1].x, 264e-18);
    }

    #[test]
    fn model_config_file() {
        let text = "# reference\nnum_layers = 28\nhidden_size = 3584 # d_model\nffn_intermediate=18944\nvocab_size = 152064\nkv_total_dim = 512\n";
        assert_eq!(
            parse_model_config(text).unwrap(),
            ModelConfig::new(28, 3584, 18944, 152064, 512).unwrap()
        );

        let neg = text.replace("3584", "-3584");
        assert!(matches!(parse_model_config(&neg), Err(IoError::Key { key, .. }) if key == "hidden_size"));
        let missing = text.replace("vocab_size = 152064\n", "");
        assert!(matches!(parse_model_config(&missing), Err(IoError::Key { key, .. }) if key == "vocab_size"));
        assert!(parse_model_config(&format!("{text}heads = 4\n")).is_err());
        assert!(parse_model_config(&format!("{text}garbage\n")).is_err());

        let dup = format!("{text}num_layers = 2\n");
        let kv = parse_kv(&dup).unwrap();
        assert_eq!(kv.warnings.len(), 1);
        assert!(kv.warnings[0].contains("num_layers"));
        assert_eq!(parse_model_config(&dup).unwrap().num_layers, 2);
    }

    #[test]
    fn fit_config_file() {
        let kv =
            parse_kv("use_lts = true\nlts_alpha = 0.9\nmode = unconstrained\npin_p_start = 46.1\nseed=7\n").unwrap();
        let cfg = fit_config_from_kv(&kv, FitConfig::default()).unwrap();
        assert!(cfg.use_lts);
        assert_eq!(cfg.lts_alpha, 0.9);
        assert_eq!(cfg.mode, ConstraintMode::Unconstrained);
        assert_eq!(cfg.pin_p_start, Some(46.1));
        assert_eq!(cfg.seed, 7);
        assert!(fit_config_from_kv(&parse_kv("lts_alpha = 0.2").unwrap(), FitConfig::default()).is_err());
        assert!(fit_config_from_kv(&parse_kv("tau = 3").unwrap(), FitConfig::default()).is_err());
    }

    #[test]
    fn artifact_versioning() {
        let res = FitResult {
            params: crate::scaling::SigmoidParams::new(70.0, 85.7, 13.0, 1.5),
            inlier_indices: vec![0, 1, 2],
            removed_outliers: vec![],
            r2_train: Some(0.99),
            rmse_val: None,
            converged: true,
            rounds_used: 1,
            truncated: false,
            n_train: 3,
            n_val: 0,
            lts: None,
            warnings: vec![],
        };
        let art = FitArtifact::new("r", ArtifactLabels::default(), FitConfig::default(), res);
        let json = art.to_json();
        assert!(json.contains("\"format_version\": \"1\""));
        assert_eq!(FitArtifact::from_json(&json).unwrap(), art);
        assert!(matches!(
            FitArtifact::from_json(&json[..json.len() / 2]),
            Err(IoError::Json(_))
        ));
        let v2 = json.replace("\"format_version\": \"1\"", "\"format_version\": \"2\"");
        assert!(matches!(FitArtifact::from_json(&v2), Err(IoError::Version { .. })));
    }

    #[test]
    fn summaries_table() {
        let rows = parse_summaries(
            "config_name,min_val_loss,max_p_post\nS1K,0.7,24\nE,0.59,52\n",
            DataFormat::Csv,
        )
        .unwrap();
        assert_eq!(rows[1].max_p_post, Some(52.0));
        assert_eq!(rows[1].a_post, None);
        assert!(parse_summaries("config_name,min_val_loss\nS1K,0.7\n", DataFormat::Csv).is_err());
    }

    fn arb_series() -> impl Strategy<Value = RunSeries> {
        prop::collection::vec((0.0..1e4f64, 0.0..=100.0f64, prop::option::of(0u64..1_000_000)), 1..30).prop_map(
            |mut v| {
                v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let with_step = v[0].2.is_some();
                let points = v
                    .into_iter()
                    .map(|(x, y, s)| CurvePoint {
                        x,
                        y,
                        step: if with_step { s.or(Some(0)) } else { None },
                    })
                    .collect();
                RunSeries {
                    run_id: "prop".into(),
                    points,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn run_series_round_trip(s in arb_series()) {
            for format in [DataFormat::Csv, DataFormat::Jsonl] {
                let text = write_run_series(&s, format);
                let back = parse_run_series(&text, format, "prop", &StepContext::default()).unwrap();
                prop_assert_eq!(&back, &s);
            }
        }
    }
}
