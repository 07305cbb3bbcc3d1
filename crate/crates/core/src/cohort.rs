//! Index dates and before/after observation windows.
//!
//! A patient's index date is their first prescription of the study drug.
//! The before window is the `window_days` calendar days ending the day
//! before the index date; the after window is the `window_days` days
//! starting the day after. The index date itself belongs to neither window,
//! since same-day events cannot be ordered relative to exposure.

use std::collections::HashMap;

use chrono::{Days, NaiveDate};

use crate::ingest::{EventRecord, PrescriptionRecord};
use crate::readcode::ReadCode;

/// Per-patient observation windows around the index date. Both windows are
/// closed intervals spanning exactly `window_days` calendar days.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortWindows {
    pub patient_id: String,
    pub index_date: NaiveDate,
    pub before_start: NaiveDate,
    pub before_end: NaiveDate,
    pub after_start: NaiveDate,
    pub after_end: NaiveDate,
    pub window_days: u32,
}

impl CohortWindows {
    fn new(patient_id: String, index_date: NaiveDate, window_days: u32) -> Self {
        let days = Days::new(u64::from(window_days));
        CohortWindows {
            before_start: index_date - days,
            before_end: index_date - Days::new(1),
            after_start: index_date + Days::new(1),
            after_end: index_date + days,
            patient_id,
            index_date,
            window_days,
        }
    }

    pub fn in_before(&self, date: NaiveDate) -> bool {
        date >= self.before_start && date <= self.before_end
    }

    pub fn in_after(&self, date: NaiveDate) -> bool {
        date >= self.after_start && date <= self.after_end
    }
}

/// Derive one `CohortWindows` per distinct patient, using the earliest
/// prescription date as the index date. Output order is the order of each
/// patient's first appearance in `prescriptions`.
pub fn build_cohort(prescriptions: &[PrescriptionRecord], window_days: u32) -> Vec<CohortWindows> {
    assert!(window_days >= 1, "window_days must be at least 1");
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut index_dates: Vec<(&str, NaiveDate)> = Vec::new();
    for p in prescriptions {
        match slot.get(p.patient_id.as_str()) {
            Some(&i) => {
                if p.date < index_dates[i].1 {
                    index_dates[i].1 = p.date;
                }
            }
            None => {
                slot.insert(&p.patient_id, index_dates.len());
                index_dates.push((&p.patient_id, p.date));
            }
        }
    }
    index_dates
        .into_iter()
        .map(|(id, date)| CohortWindows::new(id.to_string(), date, window_days))
        .collect()
}

/// An event attributed to one cohort patient's observation window.
#[derive(Debug, Clone)]
pub struct AssignedEvent {
    /// Row index of the patient in the cohort list.
    pub patient: usize,
    pub code: ReadCode,
}

/// Events split into the before and after windows, with counters for
/// everything discarded on the way.
#[derive(Debug, Default)]
pub struct EventAssignments {
    pub before: Vec<AssignedEvent>,
    pub after: Vec<AssignedEvent>,
    /// Events of cohort patients dated outside both windows (including on
    /// the index date itself).
    pub out_of_window: usize,
    /// Events of patients without a cohort entry.
    pub non_cohort: usize,
}

/// Tag each event BEFORE or AFTER according to its patient's windows;
/// everything else is discarded and counted.
pub fn assign_events(cohort: &[CohortWindows], events: Vec<EventRecord>) -> EventAssignments {
    let row: HashMap<&str, usize> = cohort
        .iter()
        .enumerate()
        .map(|(i, c)| (c.patient_id.as_str(), i))
        .collect();
    let mut out = EventAssignments::default();
    for event in events {
        let Some(&patient) = row.get(event.patient_id.as_str()) else {
            out.non_cohort += 1;
            continue;
        };
        let windows = &cohort[patient];
        if windows.in_before(event.date) {
            out.before.push(AssignedEvent {
                patient,
                code: event.readcode,
            });
        } else if windows.in_after(event.date) {
            out.after.push(AssignedEvent {
                patient,
                code: event.readcode,
            });
        } else {
            out.out_of_window += 1;
        }
    }
    out
}
