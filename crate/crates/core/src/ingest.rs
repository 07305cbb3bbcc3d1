//! Loading and validation of the three input tables: patients,
//! prescriptions and medical events.
//!
//! All three are UTF-8 comma- or tab-separated files with a header row;
//! columns are located by name and unknown columns are ignored. Dates are
//! strict ISO-8601 (`YYYY-MM-DD`).

use std::io::Read;

use chrono::NaiveDate;
use thiserror::Error;

use crate::readcode::{parse_code, ReadCode};
use crate::tabio;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{table} is missing required column `{column}` in its header")]
    MissingHeader {
        table: &'static str,
        column: &'static str,
    },
    #[error("{table} line {line}: malformed row: {reason}")]
    MalformedRow {
        table: &'static str,
        line: u64,
        reason: String,
    },
    #[error("{table} line {line}: invalid date `{value}` (expected YYYY-MM-DD)")]
    BadDate {
        table: &'static str,
        line: u64,
        value: String,
    },
    #[error("failed to read {table}: {source}")]
    Io {
        table: &'static str,
        source: std::io::Error,
    },
}

/// One row of the patients table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
}

/// One row of the prescriptions table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrescriptionRecord {
    pub patient_id: String,
    pub drug_code: String,
    pub date: NaiveDate,
}

/// One row of the medical-events table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub patient_id: String,
    pub readcode: ReadCode,
    pub date: NaiveDate,
}

/// Patients table after deduplication.
#[derive(Debug)]
pub struct PatientsLoad {
    /// Distinct patients in first-appearance order.
    pub patients: Vec<PatientRecord>,
    /// Rows dropped because their id had already been seen.
    pub duplicate_ids: usize,
    pub data_rows: usize,
}

/// Prescriptions table after drug filtering and sorting.
#[derive(Debug)]
pub struct PrescriptionsLoad {
    /// Rows for the study drug, sorted by `(patient_id, date)`.
    pub prescriptions: Vec<PrescriptionRecord>,
    /// Rows rejected because they were for a different drug.
    pub other_drug_rows: usize,
    pub data_rows: usize,
}

/// Events table, parsed as-is.
#[derive(Debug)]
pub struct EventsLoad {
    pub events: Vec<EventRecord>,
    pub data_rows: usize,
}

fn parse_date(
    table: &'static str,
    line: u64,
    value: &str,
) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|_| IngestError::BadDate {
        table,
        line,
        value: value.to_string(),
    })
}

struct Table {
    name: &'static str,
    reader: csv::Reader<Box<dyn Read + Send>>,
    headers: csv::StringRecord,
}

impl Table {
    fn open<R: Read + Send + 'static>(name: &'static str, input: R) -> Result<Self, IngestError> {
        let mut reader =
            tabio::delimited_reader(input).map_err(|source| IngestError::Io { table: name, source })?;
        let headers = reader
            .headers()
            .map_err(|e| IngestError::MalformedRow {
                table: name,
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        Ok(Table {
            name,
            reader,
            headers,
        })
    }

    fn column(&self, column: &'static str) -> Result<usize, IngestError> {
        tabio::column_index(&self.headers, column).ok_or(IngestError::MissingHeader {
            table: self.name,
            column,
        })
    }

    fn records(&mut self) -> impl Iterator<Item = Result<csv::StringRecord, IngestError>> + '_ {
        let name = self.name;
        self.reader.records().map(move |r| {
            r.map_err(|e| IngestError::MalformedRow {
                table: name,
                line: e.position().map(|p| p.line()).unwrap_or(0),
                reason: e.to_string(),
            })
        })
    }
}

fn field<'r>(
    table: &'static str,
    record: &'r csv::StringRecord,
    idx: usize,
    column: &'static str,
) -> Result<&'r str, IngestError> {
    let line = tabio::record_line(record);
    match record.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        Some(_) => Err(IngestError::MalformedRow {
            table,
            line,
            reason: format!("empty `{column}` field"),
        }),
        None => Err(IngestError::MalformedRow {
            table,
            line,
            reason: format!("missing `{column}` field"),
        }),
    }
}

/// Load the patients table (header `patient_id`). The result preserves
/// first-appearance order; duplicate ids are dropped and counted.
pub fn load_patients<R: Read + Send + 'static>(input: R) -> Result<PatientsLoad, IngestError> {
    let mut table = Table::open("patients", input)?;
    let id_col = table.column("patient_id")?;

    let mut seen = std::collections::HashSet::new();
    let mut patients = Vec::new();
    let mut duplicate_ids = 0usize;
    let mut data_rows = 0usize;
    for record in table.records() {
        let record = record?;
        data_rows += 1;
        let id = field("patients", &record, id_col, "patient_id")?;
        if seen.insert(id.to_string()) {
            patients.push(PatientRecord {
                patient_id: id.to_string(),
            });
        } else {
            duplicate_ids += 1;
        }
    }
    Ok(PatientsLoad {
        patients,
        duplicate_ids,
        data_rows,
    })
}

/// Load the prescriptions table (header `patient_id,drug_code,date`),
/// keeping only rows whose drug code equals `drug_filter` exactly
/// (case-sensitive). Retained rows are sorted by `(patient_id, date)`.
pub fn load_prescriptions<R: Read + Send + 'static>(
    input: R,
    drug_filter: &str,
) -> Result<PrescriptionsLoad, IngestError> {
    let mut table = Table::open("prescriptions", input)?;
    let id_col = table.column("patient_id")?;
    let drug_col = table.column("drug_code")?;
    let date_col = table.column("date")?;

    let mut prescriptions = Vec::new();
    let mut other_drug_rows = 0usize;
    let mut data_rows = 0usize;
    for record in table.records() {
        let record = record?;
        data_rows += 1;
        let line = tabio::record_line(&record);
        let id = field("prescriptions", &record, id_col, "patient_id")?;
        let drug = field("prescriptions", &record, drug_col, "drug_code")?;
        let date = field("prescriptions", &record, date_col, "date")?;
        // Dates are validated even on rows that the drug filter will drop,
        // so a corrupt file cannot pass silently.
        let date = parse_date("prescriptions", line, date)?;
        if drug == drug_filter {
            prescriptions.push(PrescriptionRecord {
                patient_id: id.to_string(),
                drug_code: drug.to_string(),
                date,
            });
        } else {
            other_drug_rows += 1;
        }
    }
    prescriptions.sort_by(|a, b| {
        a.patient_id
            .cmp(&b.patient_id)
            .then_with(|| a.date.cmp(&b.date))
    });
    Ok(PrescriptionsLoad {
        prescriptions,
        other_drug_rows,
        data_rows,
    })
}

/// Load the events table (header `patient_id,readcode,date`). Every row is
/// parsed and retained; events of patients outside the cohort are dropped
/// later, at window assignment.
pub fn load_events<R: Read + Send + 'static>(input: R) -> Result<EventsLoad, IngestError> {
    let mut table = Table::open("events", input)?;
    let id_col = table.column("patient_id")?;
    let code_col = table.column("readcode")?;
    let date_col = table.column("date")?;

    let mut events = Vec::new();
    let mut data_rows = 0usize;
    for record in table.records() {
        let record = record?;
        data_rows += 1;
        let line = tabio::record_line(&record);
        let id = field("events", &record, id_col, "patient_id")?;
        let code = field("events", &record, code_col, "readcode")?;
        let date = field("events", &record, date_col, "date")?;
        let readcode = parse_code(code).map_err(|e| IngestError::MalformedRow {
            table: "events",
            line,
            reason: e.to_string(),
        })?;
        let date = parse_date("events", line, date)?;
        events.push(EventRecord {
            patient_id: id.to_string(),
            readcode,
            date,
        });
    }
    Ok(EventsLoad { events, data_rows })
}
