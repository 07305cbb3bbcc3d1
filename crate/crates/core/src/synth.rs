//! Synthetic patient/prescription/event generator with planted effects.
//!
//! Each patient receives one prescription of the study drug at a random
//! date inside a configured calendar span. For every vocabulary code the
//! patient then has an independent Bernoulli occurrence in the before
//! window (baseline prevalence) and in the after window (baseline times the
//! planted risk multiplier, capped at 1). Occurrences materialize as one
//! event row at a uniform-random day inside the window. A ground-truth
//! ledger records the exact per-code before/after patient counts, so
//! downstream detection can be validated against what was actually planted.
//!
//! Everything is driven by a single seeded RNG stream: the same spec always
//! yields byte-identical tables.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{EventRecord, PatientRecord, PrescriptionRecord};
use crate::readcode::{parse_code, ReadCodeError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("baseline prevalence for `{code}` is {value}, outside [0, 1]")]
    InvalidPrevalence { code: String, value: f64 },
    #[error("risk multiplier for `{code}` is {value}, must be >= 0 and finite")]
    InvalidMultiplier { code: String, value: f64 },
    #[error("planted effect references `{0}`, which is not in the vocabulary")]
    UnknownEffectCode(String),
    #[error("vocabulary code is not a valid code token: {0}")]
    InvalidCode(#[from] ReadCodeError),
    #[error("n_patients must be at least 1")]
    NoPatients,
    #[error("window_days must be at least 1")]
    ZeroWindow,
    #[error("index span end {end} precedes start {start}")]
    BadSpan { start: NaiveDate, end: NaiveDate },
}

/// One vocabulary entry: a code and its per-window baseline prevalence.
#[derive(Debug, Clone)]
pub struct SynthCode {
    pub code: String,
    pub baseline_prevalence: f64,
}

/// A planted ADR effect: the after-window prevalence for `code` becomes
/// `baseline * risk_multiplier` (capped at 1). A multiplier of 1 is a null
/// effect.
#[derive(Debug, Clone)]
pub struct PlantedEffect {
    pub code: String,
    pub risk_multiplier: f64,
}

/// Full description of a synthetic cohort. The seed determines the output
/// completely.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_patients: usize,
    pub vocabulary: Vec<SynthCode>,
    pub planted_effects: Vec<PlantedEffect>,
    pub window_days: u32,
    pub seed: u64,
    pub drug_code: String,
    /// Inclusive calendar span for prescription (index) dates.
    pub index_span: (NaiveDate, NaiveDate),
}

impl SynthSpec {
    /// A spec with the standard window, drug code `DRUG1` and a two-year
    /// index span; callers fill in the vocabulary and effects.
    pub fn new(n_patients: usize, seed: u64) -> Self {
        SynthSpec {
            n_patients,
            vocabulary: Vec::new(),
            planted_effects: Vec::new(),
            window_days: 60,
            seed,
            drug_code: "DRUG1".to_string(),
            index_span: (
                NaiveDate::from_ymd_opt(2009, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2010, 12, 31).unwrap(),
            ),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_patients == 0 {
            return Err(SynthError::NoPatients);
        }
        if self.window_days == 0 {
            return Err(SynthError::ZeroWindow);
        }
        let (start, end) = self.index_span;
        if end < start {
            return Err(SynthError::BadSpan { start, end });
        }
        for entry in &self.vocabulary {
            parse_code(&entry.code)?;
            if !(0.0..=1.0).contains(&entry.baseline_prevalence) {
                return Err(SynthError::InvalidPrevalence {
                    code: entry.code.clone(),
                    value: entry.baseline_prevalence,
                });
            }
        }
        for effect in &self.planted_effects {
            if !effect.risk_multiplier.is_finite() || effect.risk_multiplier < 0.0 {
                return Err(SynthError::InvalidMultiplier {
                    code: effect.code.clone(),
                    value: effect.risk_multiplier,
                });
            }
            if !self.vocabulary.iter().any(|v| v.code == effect.code) {
                return Err(SynthError::UnknownEffectCode(effect.code.clone()));
            }
        }
        Ok(())
    }
}

/// Ground truth for one code: the planted multiplier and the exact number
/// of patients with an event in each window.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub code: String,
    pub multiplier: f64,
    pub true_nb: u64,
    pub true_na: u64,
}

/// The generated tables plus the ground-truth ledger.
#[derive(Debug)]
pub struct SynthDataset {
    pub patients: Vec<PatientRecord>,
    pub prescriptions: Vec<PrescriptionRecord>,
    pub events: Vec<EventRecord>,
    pub ledger: Vec<LedgerRow>,
}

/// Generate a synthetic dataset from `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (span_start, span_end) = spec.index_span;
    let span_days = (span_end - span_start).num_days() as u64;
    let window = u64::from(spec.window_days);

    let multipliers: HashMap<&str, f64> = spec
        .planted_effects
        .iter()
        .map(|e| (e.code.as_str(), e.risk_multiplier))
        .collect();

    // Parse each vocabulary code once; events clone the parsed form.
    let codes: Vec<_> = spec
        .vocabulary
        .iter()
        .map(|v| {
            let parsed = parse_code(&v.code).expect("validated above");
            let mult = multipliers.get(v.code.as_str()).copied().unwrap_or(1.0);
            let p_before = v.baseline_prevalence;
            let p_after = (v.baseline_prevalence * mult).min(1.0);
            (parsed, p_before, p_after)
        })
        .collect();

    let mut patients = Vec::with_capacity(spec.n_patients);
    let mut prescriptions = Vec::with_capacity(spec.n_patients);
    let mut events = Vec::new();
    let mut true_nb = vec![0u64; codes.len()];
    let mut true_na = vec![0u64; codes.len()];

    for p in 0..spec.n_patients {
        let patient_id = format!("p{:06}", p + 1);
        let index_date = span_start + Days::new(rng.random_range(0..=span_days));
        patients.push(PatientRecord {
            patient_id: patient_id.clone(),
        });
        prescriptions.push(PrescriptionRecord {
            patient_id: patient_id.clone(),
            drug_code: spec.drug_code.clone(),
            date: index_date,
        });
        for (ci, (code, p_before, p_after)) in codes.iter().enumerate() {
            if rng.random::<f64>() < *p_before {
                let offset = rng.random_range(1..=window);
                events.push(EventRecord {
                    patient_id: patient_id.clone(),
                    readcode: code.clone(),
                    date: index_date - Days::new(offset),
                });
                true_nb[ci] += 1;
            }
            if rng.random::<f64>() < *p_after {
                let offset = rng.random_range(1..=window);
                events.push(EventRecord {
                    patient_id: patient_id.clone(),
                    readcode: code.clone(),
                    date: index_date + Days::new(offset),
                });
                true_na[ci] += 1;
            }
        }
    }

    let ledger = spec
        .vocabulary
        .iter()
        .enumerate()
        .map(|(ci, v)| LedgerRow {
            code: v.code.clone(),
            multiplier: multipliers.get(v.code.as_str()).copied().unwrap_or(1.0),
            true_nb: true_nb[ci],
            true_na: true_na[ci],
        })
        .collect();

    Ok(SynthDataset {
        patients,
        prescriptions,
        events,
        ledger,
    })
}

impl SynthDataset {
    /// Write `patients.csv`, `prescriptions.csv`, `events.csv` and
    /// `ledger.csv` into `dir` (created if needed).
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_patients(std::fs::File::create(dir.join("patients.csv"))?)?;
        self.write_prescriptions(std::fs::File::create(dir.join("prescriptions.csv"))?)?;
        self.write_events(std::fs::File::create(dir.join("events.csv"))?)?;
        self.write_ledger(std::fs::File::create(dir.join("ledger.csv"))?)?;
        Ok(())
    }

    pub fn write_patients<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["patient_id"])?;
        for p in &self.patients {
            w.write_record([p.patient_id.as_str()])?;
        }
        w.flush()
    }

    pub fn write_prescriptions<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["patient_id", "drug_code", "date"])?;
        for p in &self.prescriptions {
            w.write_record([
                p.patient_id.as_str(),
                p.drug_code.as_str(),
                &p.date.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn write_events<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["patient_id", "readcode", "date"])?;
        for e in &self.events {
            w.write_record([
                e.patient_id.as_str(),
                e.readcode.raw(),
                &e.date.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn write_ledger<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["code", "multiplier", "true_NB", "true_NA"])?;
        for row in &self.ledger {
            w.write_record([
                row.code.as_str(),
                &row.multiplier.to_string(),
                &row.true_nb.to_string(),
                &row.true_na.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// A vocabulary of `n_codes` synthetic codes with a shared baseline
/// prevalence, organized into level-3 families of `siblings_per_family`
/// codes each. Code `i` is family `i / siblings_per_family`, spelled as a
/// three-character family label, a sibling character, a padding dot and a
/// `00` term suffix (`A013.00`-style tokens at level 4), so FULL and
/// LEVEL3 analyses see controllably different vocabulary sizes.
pub fn uniform_vocabulary(
    n_codes: usize,
    siblings_per_family: usize,
    baseline_prevalence: f64,
) -> Vec<SynthCode> {
    assert!(siblings_per_family >= 1);
    const ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    (0..n_codes)
        .map(|i| {
            let family = i / siblings_per_family;
            let sibling = i % siblings_per_family;
            assert!(family < 36 * 36 * 26, "family label space exhausted");
            assert!(sibling < 36, "sibling label space exhausted");
            let f0 = ALPHABET[10 + family / (36 * 36)] as char; // letters only at level 1
            let f1 = ALPHABET[(family / 36) % 36] as char;
            let f2 = ALPHABET[family % 36] as char;
            let s = ALPHABET[sibling] as char;
            SynthCode {
                code: format!("{f0}{f1}{f2}{s}.00"),
                baseline_prevalence,
            }
        })
        .collect()
}
