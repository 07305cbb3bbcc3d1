//! Shared helpers for reading delimited tables.

use std::io::{self, BufRead, BufReader, Cursor, Read};

/// Build a CSV reader over `input`, auto-detecting the delimiter (tab or
/// comma) from the header line. Headers are trimmed of surrounding
/// whitespace; rows may be ragged (validated per-record by callers).
pub(crate) fn delimited_reader<R>(input: R) -> io::Result<csv::Reader<Box<dyn Read + Send>>>
where
    R: Read + Send + 'static,
{
    let mut buf = BufReader::new(input);
    let mut header = Vec::new();
    buf.read_until(b'\n', &mut header)?;
    let delimiter = if header.contains(&b'\t') { b'\t' } else { b',' };
    let chained: Box<dyn Read + Send> = Box::new(Cursor::new(header).chain(buf));
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(chained))
}

/// Locate a named column in the header, if present.
pub(crate) fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// 1-based line number of a record, for error reporting.
pub(crate) fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}
