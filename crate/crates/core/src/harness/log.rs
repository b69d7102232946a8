//! Episode logs, metrics and their CSV form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leading CSV columns shared by every scheme.
pub const BASE_COLUMNS: [&str; 5] = ["k", "r", "u", "y", "e"];

/// Tick `k`: setpoint `r(k)`, the control `u(k-1)` that produced `y(k)`, and
/// `e = r(k) - y(k)`, followed by scheme-specific values.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub k: usize,
    pub r: f64,
    pub u: f64,
    pub y: f64,
    pub e: f64,
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub extra_columns: Vec<String>,
    pub rows: Vec<LogRow>,
}

impl EpisodeLog {
    pub fn new(extra_columns: Vec<String>) -> Self {
        Self {
            extra_columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if row.extra.len() != self.extra_columns.len() {
            return Err(Error::shape("log row extras", self.extra_columns.len(), row.extra.len()));
        }
        let expected = self.rows.last().map_or(1, |r| r.k + 1);
        if row.k != expected {
            return Err(Error::invalid(format!("log rows must be consecutive from 1, got k = {}", row.k)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.extra_columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.extra[idx]).collect())
    }

    pub fn header(&self) -> Vec<String> {
        BASE_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.extra_columns.iter().cloned())
            .collect()
    }

    /// Header plus one line per tick; reals in scientific notation with 17
    /// significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.k.to_string());
            for v in [row.r, row.u, row.y, row.e].iter().chain(&row.extra) {
                out.push(',');
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::invalid("csv is empty"))?
            .split(',')
            .collect();
        if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
            return Err(Error::invalid(format!("csv header must start with {}", BASE_COLUMNS.join(","))));
        }
        let mut log = EpisodeLog::new(header[BASE_COLUMNS.len()..].iter().map(|s| s.to_string()).collect());
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(Error::invalid(format!("csv line {} has {} fields", n + 2, fields.len())));
            }
            let bad = |f: &str| Error::invalid(format!("csv line {}: cannot parse `{f}`", n + 2));
            let k = fields[0].parse().map_err(|_| bad(fields[0]))?;
            let vals = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<_>>>()?;
            log.push(LogRow {
                k,
                r: vals[0],
                u: vals[1],
                y: vals[2],
                e: vals[3],
                extra: vals[4..].to_vec(),
            })?;
        }
        Ok(log)
    }
}

/// Sum of squared tracking errors.
pub fn iae(log: &EpisodeLog) -> f64 {
    log.rows.iter().map(|r| r.e * r.e).sum()
}

/// Mean `|e|` over the last `max(1, n / 10)` rows; 0 for an empty log.
pub fn final_window_mean_abs_e(log: &EpisodeLog) -> f64 {
    let n = log.len();
    if n == 0 {
        return 0.0;
    }
    let w = (n / 10).max(1);
    log.rows[n - w..].iter().map(|r| r.e.abs()).sum::<f64>() / w as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iae: f64,
    pub final_window_mean_abs_e: f64,
    pub max_abs_u: f64,
    pub diverged: bool,
    /// Tick and cause of divergence, if any; the log stops before that tick.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
}

impl MetricsReport {
    pub fn from_log(log: &EpisodeLog, divergence: Option<String>) -> Self {
        Self {
            iae: iae(log),
            final_window_mean_abs_e: final_window_mean_abs_e(log),
            max_abs_u: log.rows.iter().map(|r| r.u.abs()).fold(0.0, f64::max),
            diverged: divergence.is_some(),
            divergence,
        }
    }
}
