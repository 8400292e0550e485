//! Cross-run analytics: loss/ceiling correlation, win rate and the
//! per-configuration fit report.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} pairs, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
    #[error("correlation undefined: zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("report has no rows")]
    EmptyReport,
    #[error("report parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Round to `digits` decimals, ties to even. Ties are judged on the decimal
/// reading of the value (34.95 is a tie even though its binary value is a
/// hair below).
pub fn round_half_even(value: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    let scaled = value * scale;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let tie = 1e-9 * scaled.abs().max(1.0);
    let rounded = if (frac - 0.5).abs() <= tie {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / scale
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(AnalysisError::InsufficientPairs {
            needed: 3,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("non-finite value".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(AnalysisError::ZeroVariance("xs"));
    }
    if syy == 0.0 {
        return Err(AnalysisError::ZeroVariance("ys"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub successes: u64,
    pub attempts: u64,
    pub rate: f64,
}

/// Share of successful attempts.
pub fn win_rate(successes: u64, attempts: u64) -> Result<WinRate> {
    if attempts == 0 {
        return Err(AnalysisError::Domain("attempts must be >= 1".into()));
    }
    if successes > attempts {
        return Err(AnalysisError::Domain(format!(
            "{successes} successes exceed {attempts} attempts"
        )));
    }
    Ok(WinRate {
        successes,
        attempts,
        rate: successes as f64 / attempts as f64,
    })
}

/// One row of the fit report: an SFT checkpoint and the RL curve fitted
/// from it. Fit-derived fields are absent for rows that only carry observed
/// values (loss, best performance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config_name: String,
    #[serde(default)]
    pub sft_step: u64,
    #[serde(default)]
    pub x_sft: f64,
    #[serde(default)]
    pub use_lts: bool,
    #[serde(default)]
    pub pl_rl: Option<f64>,
    #[serde(default)]
    pub c_mid: Option<f64>,
    #[serde(default)]
    pub steepness: Option<f64>,
    #[serde(default)]
    pub p_sft: Option<f64>,
    #[serde(default)]
    pub a_post: Option<f64>,
    #[serde(default)]
    pub min_val_loss: Option<f64>,
    #[serde(default)]
    pub max_p_post: Option<f64>,
}

impl ConfigSummary {
    pub fn observed(config_name: impl Into<String>, min_val_loss: f64, max_p_post: f64) -> Self {
        ConfigSummary {
            config_name: config_name.into(),
            sft_step: 0,
            x_sft: 0.0,
            use_lts: false,
            pl_rl: None,
            c_mid: None,
            steepness: None,
            p_sft: None,
            a_post: None,
            min_val_loss: Some(min_val_loss),
            max_p_post: Some(max_p_post),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "SFT data",
    "SFT Step",
    "SFT Compute (exaFLOPs)",
    "Use-LTS",
    "PL_rl",
    "C_mid",
    "B",
    "P_sft",
    "A_post",
];

pub const REPORT_FORMAT_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct JsonReport {
    format_version: String,
    columns: Vec<String>,
    rows: Vec<ConfigSummary>,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}", round_half_even(v, 1)),
        None => "-".into(),
    }
}

fn sorted_rows(rows: &[ConfigSummary]) -> Vec<ConfigSummary> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.config_name.cmp(&b.config_name).then(a.sft_step.cmp(&b.sft_step)));
    rows
}

fn row_cells(r: &ConfigSummary) -> [String; 9] {
    [
        r.config_name.clone(),
        r.sft_step.to_string(),
        cell(Some(r.x_sft)),
        if r.use_lts { "TRUE".into() } else { "FALSE".into() },
        cell(r.pl_rl),
        cell(r.c_mid),
        cell(r.steepness),
        cell(r.p_sft),
        cell(r.a_post),
    ]
}

/// Render rows sorted by `(config_name, sft_step)`. CSV and markdown round
/// numbers to one decimal (ties to even); JSON keeps full precision.
pub fn build_report(rows: &[ConfigSummary], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(AnalysisError::EmptyReport);
    }
    let rows = sorted_rows(rows);
    match format {
        ReportFormat::Json => {
            let doc = JsonReport {
                format_version: REPORT_FORMAT_VERSION.into(),
                columns: REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
                rows,
            };
            Ok(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(REPORT_COLUMNS).expect("in-memory write");
            for r in &rows {
                w.write_record(row_cells(r)).expect("in-memory write");
            }
            Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"))
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for r in &rows {
                let cells = row_cells(r).map(|c| c.replace('|', "\\|"));
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            Ok(out)
        }
    }
}

/// Parse a CSV report back into summaries. Values carry the report's
/// one-decimal precision; loss and observed-maximum columns are not part of
/// the table and come back absent.
pub fn parse_report_csv(text: &str) -> Result<Vec<ConfigSummary>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| AnalysisError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != REPORT_COLUMNS {
        return Err(AnalysisError::Parse {
            line: 1,
            message: "unexpected report header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| AnalysisError::Parse {
            line,
            message: e.to_string(),
        })?;
        let err = |m: String| AnalysisError::Parse { line, message: m };
        let num = |k: usize| -> Result<Option<f64>> {
            match &rec[k] {
                "-" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| err(format!("{}: {e}", REPORT_COLUMNS[k]))),
            }
        };
        rows.push(ConfigSummary {
            config_name: rec[0].to_string(),
            sft_step: rec[1].parse().map_err(|e| err(format!("SFT Step: {e}")))?,
            x_sft: num(2)?.ok_or_else(|| err("SFT Compute is required".into()))?,
            use_lts: match &rec[3] {
                "TRUE" => true,
                "FALSE" => false,
                other => return Err(err(format!("Use-LTS must be TRUE or FALSE, got '{other}'"))),
            },
            pl_rl: num(4)?,
            c_mid: num(5)?,
            steepness: num(6)?,
            p_sft: num(7)?,
            a_post: num(8)?,
            min_val_loss: None,
            max_p_post: None,
        });
    }
    Ok(rows)
}

pub fn parse_report_json(text: &str) -> Result<Vec<ConfigSummary>> {
    let doc: JsonReport = serde_json::from_str(text).map_err(|e| AnalysisError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if doc.format_version != REPORT_FORMAT_VERSION {
        return Err(AnalysisError::Parse {
            line: 1,
            message: format!("unsupported report version '{}'", doc.format_version),
        });
    }
    Ok(doc.rows)
}

/// Which ceiling value to pair with the minimum validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CeilingSource {
    /// Fitted `a_post`, falling back to the observed maximum when absent.
    #[default]
    Auto,
    Fitted,
    Observed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub config_name: String,
    pub min_val_loss: f64,
    pub ceiling: f64,
    pub source: CeilingSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub pairs: Vec<CorrelationPair>,
}

/// Pearson correlation between minimum validation loss and the ceiling,
/// over every summary that carries both.
pub fn ceiling_loss_correlation(summaries: &[ConfigSummary], source: CeilingSource) -> Result<CorrelationReport> {
    let pairs: Vec<CorrelationPair> = summaries
        .iter()
        .filter_map(|s| {
            let loss = s.min_val_loss?;
            let (ceiling, used) = match source {
                CeilingSource::Fitted => (s.a_post?, CeilingSource::Fitted),
                CeilingSource::Observed => (s.max_p_post?, CeilingSource::Observed),
                CeilingSource::Auto => match (s.a_post, s.max_p_post) {
                    (Some(a), _) => (a, CeilingSource::Fitted),
                    (None, Some(m)) => (m, CeilingSource::Observed),
                    (None, None) => return None,
                },
            };
            Some(CorrelationPair {
                config_name: s.config_name.clone(),
                min_val_loss: loss,
                ceiling,
                source: used,
            })
        })
        .collect();
    if pairs.len() < 3 {
        return Err(AnalysisError::InsufficientPairs {
            needed: 3,
            got: pairs.len(),
        });
    }
    let losses: Vec<f64> = pairs.iter().map(|p| p.min_val_loss).collect();
    let ceilings: Vec<f64> = pairs.iter().map(|p| p.ceiling).collect();
    Ok(CorrelationReport {
        r: pearson(&losses, &ceilings)?,
        pairs,
    })
}
