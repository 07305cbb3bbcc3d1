//! Prescription-event signal detection for candidate adverse drug reactions.
//!
//! The pipeline links a cohort of patients to their first prescription of a
//! study drug, collects coded medical events in fixed windows before and
//! after that index date, builds grouped count matrices over the event
//! vocabulary, and flags events whose post-exposure rate significantly
//! exceeds the pre-exposure rate (Student's t-test plus ratio statistics).
//!
//! Modules follow the pipeline order:
//!
//! * [`readcode`]: hierarchical clinical codes and the code dictionary
//! * [`ingest`]: loading the patients / prescriptions / events tables
//! * [`cohort`]: index dates and before/after window assignment
//! * [`featmat`]: patient-level binary matrices and grouped count matrices
//! * [`stats`]: t-distribution CDF, Student's t-test, ratio statistics
//! * [`detect`]: per-event testing, filtering and ranking
//! * [`synth`]: synthetic cohort generator with planted effects
//! * [`report`]: table rendering (text / CSV / Markdown)
//! * [`cli`]: the `pvsignal` command-line entry points

pub mod cli;
pub mod cohort;
pub mod detect;
pub mod featmat;
pub mod ingest;
pub mod readcode;
pub mod report;
pub mod stats;
pub mod synth;

mod tabio;

pub use cohort::{assign_events, build_cohort, CohortWindows, EventAssignments};
pub use detect::{detect_signals, filter_by_prefix, DetectionConfig, RankMode, SignalRow};
pub use featmat::{
    build_patient_matrix, build_vocabulary, column_totals, group_patients, EventVocabulary,
    GroupedFeatureMatrix, LevelMode, PatientFeatureMatrix,
};
pub use ingest::{
    load_events, load_patients, load_prescriptions, EventRecord, PatientRecord,
    PrescriptionRecord,
};
pub use readcode::{parse_code, CodeDictionary, ReadCode};
pub use report::{render, OutputFormat};
pub use stats::{ratio_stats, student_t_test, t_cdf, RatioStats, TTestResult, TestMode};
pub use synth::{generate, SynthDataset, SynthSpec};
