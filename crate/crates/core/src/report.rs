//! CSV/JSON exporters and plain-text summary tables.
//!
//! Floats are rendered like C's `%g` with six significant digits; undefined
//! or NaN values become empty cells.

use serde::Serialize;

use crate::distribution::ScoreHistogram;
use crate::error::Result;
use crate::eval::{CorrelationMatrix, SuiteComparison};
use crate::forecast::{Frontier, GridRow, PredictorGrid};
use crate::scalar::Scalar;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// `%g`-style rendering with [`SIGNIFICANT_DIGITS`] digits, trailing zeros
/// removed. NaN renders as an empty string.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let p = SIGNIFICANT_DIGITS;
    let sci = format!("{:.*e}", p - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_scalar<T: Scalar>(x: T) -> String {
    format_float(x.to_f64().unwrap_or(f64::NAN))
}

pub fn format_opt<T: Scalar>(x: Option<T>) -> String {
    x.map(format_scalar).unwrap_or_default()
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn matrix_csv<T: Scalar>(m: &CorrelationMatrix<T>) -> Result<String> {
    let mut header = vec![""];
    header.extend(m.labels.iter().map(String::as_str));
    let rows = m.labels.iter().zip(&m.values).map(|(label, vals)| {
        std::iter::once(label.clone())
            .chain(vals.iter().map(|v| format_opt(*v)))
            .collect()
    });
    write_csv(&header, rows)
}

pub const GRID_COLUMNS: [&str; 11] = [
    "target",
    "threshold",
    "model",
    "params",
    "tokens_per_sequence",
    "checkpoint",
    "sequences_seen",
    "precision",
    "recall",
    "cost",
    "cost_fraction",
];

fn grid_cells<T: Scalar>(target: &str, threshold: u8, r: &GridRow<T>) -> Vec<String> {
    vec![
        target.to_string(),
        threshold.to_string(),
        r.model.clone(),
        r.params.to_string(),
        r.tokens_per_sequence.to_string(),
        r.checkpoint.clone(),
        r.sequences_seen.to_string(),
        format_opt(r.precision),
        format_opt(r.recall),
        r.cost.to_string(),
        format_scalar(r.cost_fraction),
    ]
}

pub fn grid_csv<T: Scalar>(g: &PredictorGrid<T>) -> Result<String> {
    write_csv(
        &GRID_COLUMNS,
        g.rows.iter().map(|r| grid_cells(&g.target, g.threshold, r)),
    )
}

pub const FRONTIER_COLUMNS: [&str; 9] = [
    "budget",
    "feasible",
    "model",
    "checkpoint",
    "params",
    "sequences_seen",
    "cost",
    "precision",
    "recall",
];

pub fn frontier_csv<T: Scalar>(f: &Frontier<T>) -> Result<String> {
    let rows = f.entries.iter().map(|e| {
        let mut cells = vec![e.budget.to_string(), e.is_feasible().to_string()];
        match &e.choice {
            Some(r) => cells.extend([
                r.model.clone(),
                r.checkpoint.clone(),
                r.params.to_string(),
                r.sequences_seen.to_string(),
                r.cost.to_string(),
                format_opt(r.precision),
                format_opt(r.recall),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 7)),
        }
        cells
    });
    write_csv(&FRONTIER_COLUMNS, rows)
}

pub fn histogram_csv(h: &ScoreHistogram) -> Result<String> {
    let n = f64::from(h.threshold);
    let total = h.total.max(1) as f64;
    let rows = h.counts.iter().enumerate().map(|(k, &c)| {
        vec![
            k.to_string(),
            format_float(k as f64 / n),
            c.to_string(),
            format_float(c as f64 / total),
        ]
    });
    write_csv(&["matched", "score", "count", "fraction"], rows)
}

pub fn comparison_csv<T: Scalar>(c: &SuiteComparison<T>) -> Result<String> {
    let rows = c.rows.iter().map(|r| {
        vec![
            r.label.clone(),
            format_scalar(r.fraction_a),
            format_scalar(r.fraction_b),
            format_scalar(r.delta),
        ]
    });
    write_csv(&["model", "fraction_a", "fraction_b", "delta"], rows)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:>w$}")
                } else {
                    format!("{c:^w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn fixed3<T: Scalar>(x: Option<T>) -> String {
    match x.and_then(|v| v.to_f64()).filter(|v| !v.is_nan()) {
        Some(v) => format!("{v:.3}"),
        None => "---".to_string(),
    }
}

/// Model / Precision / Recall table with the target listed last.
pub fn grid_summary<T: Scalar>(g: &PredictorGrid<T>) -> String {
    let header = ["Predictor", "Precision", "Recall"].map(String::from);
    let mut rows: Vec<Vec<String>> = g
        .rows
        .iter()
        .map(|r| {
            vec![
                r.reference().to_string(),
                fixed3(r.precision),
                fixed3(r.recall),
            ]
        })
        .collect();
    rows.push(vec![g.target.clone(), "---".into(), "---".into()]);
    format!(
        "Predicting {} (N = {})\n{}",
        g.target,
        g.threshold,
        table(&header, &rows)
    )
}

pub fn matrix_summary<T: Scalar>(m: &CorrelationMatrix<T>) -> String {
    let mut header = vec![String::new()];
    header.extend(m.labels.iter().cloned());
    let rows: Vec<Vec<String>> = m
        .labels
        .iter()
        .zip(&m.values)
        .map(|(l, vals)| {
            std::iter::once(l.clone())
                .chain(vals.iter().map(|v| fixed3(*v)))
                .collect()
        })
        .collect();
    table(&header, &rows)
}

pub fn frontier_summary<T: Scalar>(f: &Frontier<T>) -> String {
    let header = ["Budget (FLOPs)", "Choice", "Precision", "Recall"].map(String::from);
    let rows: Vec<Vec<String>> = f
        .entries
        .iter()
        .map(|e| match &e.choice {
            Some(r) => vec![
                format_float(e.budget.to_scalar::<f64>()),
                r.reference().to_string(),
                fixed3(r.precision),
                fixed3(r.recall),
            ],
            None => vec![
                format_float(e.budget.to_scalar::<f64>()),
                "infeasible".into(),
                "---".into(),
                "---".into(),
            ],
        })
        .collect();
    table(&header, &rows)
}

pub fn histogram_summary(h: &ScoreHistogram) -> String {
    let header = ["Score", "Count", "Fraction"].map(String::from);
    let total = h.total.max(1) as f64;
    let rows: Vec<Vec<String>> = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            vec![
                format!("{k}/{}", h.threshold),
                c.to_string(),
                format!("{:.6}", c as f64 / total),
            ]
        })
        .collect();
    table(&header, &rows)
}
