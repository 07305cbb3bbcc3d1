//! Rendering of ranked signal tables as aligned text, CSV, or Markdown.
//!
//! Ratio columns print with two decimals (half-up) and p-values in
//! scientific notation with three significant digits; integer columns are
//! lossless.

use std::fmt::Write as _;

use crate::detect::SignalRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Csv,
    Markdown,
}

const HEADERS: [&str; 8] = [
    "Rank",
    "Readcodes",
    "Medical events",
    "NB",
    "NA",
    "R1",
    "R2",
    "p",
];

/// Round half-up at two decimals and print with exactly two decimals.
pub fn fmt_2dp(x: f64) -> String {
    debug_assert!(x >= 0.0, "table ratios are non-negative");
    let scaled = (x * 100.0 + 0.5).floor() / 100.0;
    format!("{scaled:.2}")
}

/// Three significant digits, scientific notation.
pub fn fmt_p(p: f64) -> String {
    format!("{p:.2e}")
}

fn cells(row: &SignalRow) -> [String; 8] {
    [
        row.rank.to_string(),
        row.key.clone(),
        row.description.clone(),
        row.nb.to_string(),
        row.na.to_string(),
        fmt_2dp(row.r1),
        fmt_2dp(row.r2_percent),
        fmt_p(row.p_value),
    ]
}

/// Render a ranked table. Rows are assumed already ranked by the caller.
pub fn render(rows: &[SignalRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => render_text(rows),
        OutputFormat::Csv => render_csv(rows),
        OutputFormat::Markdown => render_markdown(rows),
    }
}

fn render_text(rows: &[SignalRow]) -> String {
    let table: Vec<[String; 8]> = rows.iter().map(cells).collect();
    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.len()).collect();
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    // Readcodes and event descriptions are left-aligned, numbers right.
    let left = [false, true, true, false, false, false, false, false];
    let mut out = String::new();
    let mut emit = |cells: &[String]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if left[i] {
                let _ = write!(line, "{:<width$}", cell, width = widths[i]);
            } else {
                let _ = write!(line, "{:>width$}", cell, width = widths[i]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    let headers: Vec<String> = HEADERS.iter().map(|s| s.to_string()).collect();
    emit(&headers);
    for row in &table {
        emit(row);
    }
    out
}

fn render_csv(rows: &[SignalRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "readcode", "description", "nb", "na", "r1", "r2", "p_value"])
        .expect("csv write to memory");
    for row in rows {
        w.write_record(cells(row)).expect("csv write to memory");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv output is UTF-8")
}

fn render_markdown(rows: &[SignalRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", HEADERS.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        HEADERS
            .iter()
            .map(|_| " --- ")
            .collect::<Vec<_>>()
            .join("|")
    );
    for row in rows {
        let escaped: Vec<String> = cells(row)
            .iter()
            .map(|c| c.replace('|', "\\|"))
            .collect();
        let _ = writeln!(out, "| {} |", escaped.join(" | "));
    }
    out
}
