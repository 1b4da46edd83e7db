//! Per-experiment result tables: one row per (experiment, method), with the
//! lowest value of each column flagged within its experiment.

use std::fmt::Write as _;

use thiserror::Error;

use super::FrameMetrics;
use crate::Scalar;

pub const CSV_HEADER: &str = "experiment,method,aae_deg,aepe_px,fl_bg_pct,fl_fg_pct,fl_all_pct";

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("duplicate row for experiment `{experiment}`, method `{method}`")]
    Duplicate { experiment: String, method: String },
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Mean errors of one method on one experiment. Outlier percentages are
/// `None` when the region never had any pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub experiment: String,
    pub method: String,
    pub aae: f64,
    pub aepe: f64,
    pub fl_bg: Option<f64>,
    pub fl_fg: Option<f64>,
    pub fl_all: Option<f64>,
}

impl EvalRow {
    fn columns(&self) -> [Option<f64>; 5] {
        [Some(self.aae), Some(self.aepe), self.fl_bg, self.fl_fg, self.fl_all]
    }

    pub fn to_csv_line(&self) -> String {
        let cols: Vec<String> = self
            .columns()
            .iter()
            .map(|c| c.map(|v| v.to_string()).unwrap_or_default())
            .collect();
        format!("{},{},{}", self.experiment, self.method, cols.join(","))
    }
}

/// Averages per-frame metrics (each frame weighted equally). Outlier
/// columns average over the frames where the region was non-empty.
pub fn mean_row<T: Scalar>(experiment: &str, method: &str, frames: &[FrameMetrics<T>]) -> Option<EvalRow> {
    if frames.is_empty() {
        return None;
    }
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let pick = |f: &dyn Fn(&FrameMetrics<T>) -> Option<T>| {
        mean(frames.iter().filter_map(f).map(|x| x.to_f64_lossy()).collect())
    };
    Some(EvalRow {
        experiment: experiment.to_string(),
        method: method.to_string(),
        aae: pick(&|m| Some(m.aae)).expect("non-empty"),
        aepe: pick(&|m| Some(m.aepe)).expect("non-empty"),
        fl_bg: pick(&|m| m.fl.bg),
        fl_fg: pick(&|m| m.fl.fg),
        fl_all: pick(&|m| Some(m.fl.all)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGroup {
    pub experiment: String,
    pub rows: Vec<EvalRow>,
    /// `best[r][c]`: row `r` holds the minimum of column `c`
    /// (AAE, AEPE, Fl-bg, Fl-fg, Fl-all); ties are all flagged.
    pub best: Vec<[bool; 5]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub groups: Vec<ExperimentGroup>,
}

/// Groups rows by experiment (first-appearance order) and flags the best
/// value of every column.
pub fn build_report(rows: Vec<EvalRow>) -> Result<EvalReport, ReportError> {
    let mut groups: Vec<ExperimentGroup> = Vec::new();
    for row in rows {
        let group = match groups.iter().position(|g| g.experiment == row.experiment) {
            Some(i) => &mut groups[i],
            None => {
                groups.push(ExperimentGroup {
                    experiment: row.experiment.clone(),
                    rows: Vec::new(),
                    best: Vec::new(),
                });
                groups.last_mut().expect("just pushed")
            }
        };
        if group.rows.iter().any(|r| r.method == row.method) {
            return Err(ReportError::Duplicate {
                experiment: row.experiment,
                method: row.method,
            });
        }
        group.rows.push(row);
    }
    for group in &mut groups {
        let cols: Vec<[Option<f64>; 5]> = group.rows.iter().map(EvalRow::columns).collect();
        let mut minima = [None::<f64>; 5];
        for row in &cols {
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    minima[c] = Some(minima[c].map_or(v, |m| m.min(v)));
                }
            }
        }
        group.best = cols
            .iter()
            .map(|row| std::array::from_fn(|c| row[c].is_some() && row[c] == minima[c]))
            .collect();
    }
    Ok(EvalReport { groups })
}

impl EvalReport {
    pub fn rows(&self) -> impl Iterator<Item = &EvalRow> {
        self.groups.iter().flat_map(|g| g.rows.iter())
    }

    /// Flags of the row for (`experiment`, `method`).
    pub fn best_flags(&self, experiment: &str, method: &str) -> Option<[bool; 5]> {
        let g = self.groups.iter().find(|g| g.experiment == experiment)?;
        let i = g.rows.iter().position(|r| r.method == method)?;
        Some(g.best[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in self.rows() {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    /// Aligned table with two decimals; `*` marks the best value.
    pub fn to_text(&self) -> String {
        let header = ["Exp.", "Method", "AAE [deg]", "AEPE [px]", "Fl-bg [%]", "Fl-fg [%]", "Fl-all [%]"];
        let mut lines: Vec<[String; 7]> = Vec::new();
        for g in &self.groups {
            for (i, (row, best)) in g.rows.iter().zip(&g.best).enumerate() {
                let cell = |c: usize, v: Option<f64>| match v {
                    Some(v) => format!("{v:.2}{}", if best[c] { "*" } else { " " }),
                    None => "n/a ".to_string(),
                };
                let cols = row.columns();
                lines.push([
                    if i == 0 { g.experiment.clone() } else { String::new() },
                    row.method.clone(),
                    cell(0, cols[0]),
                    cell(1, cols[1]),
                    cell(2, cols[2]),
                    cell(3, cols[3]),
                    cell(4, cols[4]),
                ]);
            }
        }
        let widths: Vec<usize> = (0..7)
            .map(|c| lines.iter().map(|l| l[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let fmt_line = |out: &mut String, cells: &[&str]| {
            let mut line = String::new();
            for (c, cell) in cells.iter().enumerate() {
                if c < 2 {
                    let _ = write!(line, "{cell:<w$}  ", w = widths[c]);
                } else {
                    let _ = write!(line, "{cell:>w$}  ", w = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        };
        fmt_line(&mut out, &header);
        let total: usize = widths.iter().sum::<usize>() + 2 * 6;
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for l in &lines {
            let cells: Vec<&str> = l.iter().map(String::as_str).collect();
            fmt_line(&mut out, &cells);
        }
        out
    }
}

/// Parses rows written by [`EvalReport::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<EvalRow>, ReportError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == CSV_HEADER {
            continue;
        }
        let err = |reason: String| ReportError::Csv { line: i + 1, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", fields.len())));
        }
        let num = |s: &str| -> Result<Option<f64>, ReportError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err(format!("bad number `{s}`")))
            }
        };
        rows.push(EvalRow {
            experiment: fields[0].to_string(),
            method: fields[1].to_string(),
            aae: num(fields[2])?.ok_or_else(|| err("missing AAE".into()))?,
            aepe: num(fields[3])?.ok_or_else(|| err("missing AEPE".into()))?,
            fl_bg: num(fields[4])?,
            fl_fg: num(fields[5])?,
            fl_all: num(fields[6])?,
        });
    }
    Ok(rows)
}
