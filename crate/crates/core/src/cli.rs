//! The `pvsignal` command line: `detect` runs the full pipeline over the
//! three input tables and prints a ranked signal table; `synth` writes a
//! synthetic dataset plus its ground-truth ledger.
//!
//! Exit codes: 0 success, 1 validation error (flags or input data), 2
//! internal error (a broken pipeline invariant, which is a bug).

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cohort::{assign_events, build_cohort};
use crate::detect::{detect_signals, DetectError, DetectionConfig, RankMode};
use crate::featmat::{build_patient_matrix, build_vocabulary, group_patients, LevelMode};
use crate::ingest::{load_events, load_patients, load_prescriptions, IngestError};
use crate::readcode::{CodeDictionary, DictionaryError};
use crate::report::{render, OutputFormat};
use crate::stats::TestMode;
use crate::synth::{generate, PlantedEffect, SynthError, SynthSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or bad input data; the user can fix these.
    Validation(String),
    /// A pipeline invariant broke; this is a bug, not a user error.
    Internal(String),
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DictionaryError> for CliError {
    fn from(e: DictionaryError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<crate::featmat::FeatmatError> for CliError {
    fn from(e: crate::featmat::FeatmatError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pvsignal",
    version,
    about = "Signal detection for candidate adverse drug reactions from prescription and event tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the detection pipeline and print a ranked signal table.
    Detect(DetectArgs),
    /// Generate a synthetic dataset with optional planted effects.
    Synth(SynthArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RankByArg {
    P,
    R1,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TestArg {
    Pooled,
    Paired,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Text,
    Csv,
    Markdown,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must be strictly between 0 and 1".to_string())
    }
}

fn parse_level(s: &str) -> Result<LevelMode, String> {
    match s {
        "5" => Ok(LevelMode::Full),
        "3" => Ok(LevelMode::Level3),
        _ => Err("must be 5 (full codes) or 3 (level-3 prefixes)".to_string()),
    }
}

fn parse_date_flag(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| format!("`{s}` is not a YYYY-MM-DD date"))
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Patients table (CSV/TSV with header `patient_id`)
    #[arg(long, value_name = "FILE")]
    patients: PathBuf,
    /// Prescriptions table (header `patient_id,drug_code,date`)
    #[arg(long, value_name = "FILE")]
    prescriptions: PathBuf,
    /// Medical events table (header `patient_id,readcode,date`)
    #[arg(long, value_name = "FILE")]
    events: PathBuf,
    /// Code dictionary (header `code,description`); omitted codes print as unknown
    #[arg(long, value_name = "FILE")]
    dictionary: Option<PathBuf>,
    /// Study drug code (exact, case-sensitive match)
    #[arg(long)]
    drug: String,
    /// Observation window length in days on each side of the index date
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    window_days: u32,
    /// Patients per group
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    group_size: u64,
    /// Code aggregation: 5 = full codes, 3 = level-3 prefixes
    #[arg(long, default_value = "5", value_parser = parse_level)]
    level: LevelMode,
    /// Significance threshold
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Table ordering
    #[arg(long, value_enum, default_value_t = RankByArg::P)]
    rank_by: RankByArg,
    /// Keep only keys starting with this prefix (applied before ranking)
    #[arg(long)]
    prefix: Option<String>,
    /// Number of rows to print
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    top: u64,
    /// t-test variant
    #[arg(long, value_enum, default_value_t = TestArg::Pooled)]
    test: TestArg,
    /// Minimum after-window patient count for a key to be considered
    #[arg(long, default_value_t = 0)]
    min_na: u64,
    /// Shuffle patients before grouping (sensitivity analysis)
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Keep significant decreases too (exploration; off for ADR output)
    #[arg(long)]
    include_decreases: bool,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory for patients.csv, prescriptions.csv, events.csv, ledger.csv
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Key=value file supplying any of the generator options below
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long)]
    n_patients: Option<usize>,
    #[arg(long)]
    n_codes: Option<usize>,
    /// Per-window baseline event prevalence shared by all codes
    #[arg(long)]
    baseline: Option<f64>,
    /// Number of codes given a planted effect (the first codes of the vocabulary)
    #[arg(long)]
    planted: Option<usize>,
    /// Risk multiplier applied to planted codes
    #[arg(long)]
    multiplier: Option<f64>,
    /// Codes per level-3 family in the generated vocabulary
    #[arg(long)]
    siblings_per_family: Option<usize>,
    #[arg(long)]
    window_days: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drug code written to the prescriptions table
    #[arg(long)]
    drug: Option<String>,
    /// Earliest prescription date (YYYY-MM-DD)
    #[arg(long, value_parser = parse_date_flag)]
    start_date: Option<NaiveDate>,
    /// Latest prescription date (YYYY-MM-DD)
    #[arg(long, value_parser = parse_date_flag)]
    end_date: Option<NaiveDate>,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Detect(args) => run_detect(&args),
        Command::Synth(args) => run_synth(&args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            2
        }
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot open `{}`: {e}", path.display())))
}

/// Ingest → cohort → matrices → detection → rendered table.
pub fn run_detect(args: &DetectArgs) -> Result<(), CliError> {
    let dict = match &args.dictionary {
        Some(path) => {
            let dict = CodeDictionary::load(open(path)?)?;
            eprintln!(
                "dictionary: {} entries loaded ({} duplicate codes ignored)",
                dict.len(),
                dict.duplicate_count()
            );
            dict
        }
        None => CodeDictionary::empty(),
    };

    let patients = load_patients(open(&args.patients)?)?;
    eprintln!(
        "patients: {} loaded ({} duplicate ids ignored)",
        patients.patients.len(),
        patients.duplicate_ids
    );

    let prescriptions = load_prescriptions(open(&args.prescriptions)?, &args.drug)?;
    eprintln!(
        "prescriptions: {} rows for drug `{}` ({} rows for other drugs)",
        prescriptions.prescriptions.len(),
        args.drug,
        prescriptions.other_drug_rows
    );

    let events = load_events(open(&args.events)?)?;
    let known: std::collections::HashSet<&str> = patients
        .patients
        .iter()
        .map(|p| p.patient_id.as_str())
        .collect();
    let unregistered = events
        .events
        .iter()
        .filter(|e| !known.contains(e.patient_id.as_str()))
        .count();
    eprintln!(
        "events: {} rows loaded ({} for patients outside the patients table)",
        events.events.len(),
        unregistered
    );

    let cohort = build_cohort(&prescriptions.prescriptions, args.window_days);
    eprintln!("cohort: {} patients with an index date", cohort.len());

    let assignments = assign_events(&cohort, events.events);
    eprintln!(
        "assigned events: {} before, {} after ({} outside windows, {} non-cohort)",
        assignments.before.len(),
        assignments.after.len(),
        assignments.out_of_window,
        assignments.non_cohort
    );

    let vocab = std::sync::Arc::new(build_vocabulary(
        &assignments.before,
        &assignments.after,
        args.level,
    ));
    eprintln!(
        "vocabulary: {} events ({})",
        vocab.len(),
        match args.level {
            LevelMode::Full => "level 1-5",
            LevelMode::Level3 => "level 1-3",
        }
    );

    let group_size = args.group_size as usize;
    let before =
        build_patient_matrix(&assignments.before, &cohort, std::sync::Arc::clone(&vocab))?;
    let after = build_patient_matrix(&assignments.after, &cohort, vocab)?;
    let x = group_patients(&before, group_size, args.shuffle_seed)?;
    let y = group_patients(&after, group_size, args.shuffle_seed)?;
    eprintln!(
        "grouped matrices: {} groups of {} ({} patients dropped)",
        x.n_groups(),
        group_size,
        x.dropped_patients()
    );

    let cfg = DetectionConfig {
        window_days: args.window_days,
        group_size,
        level_mode: args.level,
        alpha: args.alpha,
        rank_mode: match args.rank_by {
            RankByArg::P => RankMode::ByP,
            RankByArg::R1 => RankMode::ByR1,
        },
        prefix_filter: args.prefix.clone(),
        top_k: args.top as usize,
        test_mode: match args.test {
            TestArg::Pooled => TestMode::TwoSamplePooled,
            TestArg::Paired => TestMode::Paired,
        },
        min_na: args.min_na,
        shuffle_seed: args.shuffle_seed,
        include_decreases: args.include_decreases,
    };
    let rows = detect_signals(&x, &y, &dict, &cfg)?;
    eprintln!("signals: {} rows in the output table", rows.len());

    let table = render(
        &rows,
        match args.format {
            FormatArg::Text => OutputFormat::Text,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Markdown => OutputFormat::Markdown,
        },
    );
    match &args.out {
        Some(path) => std::fs::write(path, table).map_err(|e| {
            CliError::Validation(format!("cannot write `{}`: {e}", path.display()))
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(table.as_bytes())
                .map_err(|e| CliError::Internal(format!("stdout write failed: {e}")))?;
        }
    }
    Ok(())
}

#[derive(Default)]
struct SynthFileSpec {
    n_patients: Option<usize>,
    n_codes: Option<usize>,
    baseline: Option<f64>,
    planted: Option<usize>,
    multiplier: Option<f64>,
    siblings_per_family: Option<usize>,
    window_days: Option<u32>,
    seed: Option<u64>,
    drug: Option<String>,
    start_date: Option<NaiveDate>,
    end_date: Option<NaiveDate>,
}

fn parse_kv<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Validation(format!("spec file: bad value `{value}` for `{key}`")))
}

impl SynthFileSpec {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read spec file `{}`: {e}", path.display()))
        })?;
        let mut spec = SynthFileSpec::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "spec file line {}: expected key=value, got `{line}`",
                    i + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_patients" => spec.n_patients = Some(parse_kv(key, value)?),
                "n_codes" => spec.n_codes = Some(parse_kv(key, value)?),
                "baseline" => spec.baseline = Some(parse_kv(key, value)?),
                "planted" => spec.planted = Some(parse_kv(key, value)?),
                "multiplier" => spec.multiplier = Some(parse_kv(key, value)?),
                "siblings_per_family" => {
                    spec.siblings_per_family = Some(parse_kv(key, value)?)
                }
                "window_days" => spec.window_days = Some(parse_kv(key, value)?),
                "seed" => spec.seed = Some(parse_kv(key, value)?),
                "drug" => spec.drug = Some(value.to_string()),
                "start_date" => {
                    spec.start_date =
                        Some(parse_date_flag(value).map_err(CliError::Validation)?)
                }
                "end_date" => {
                    spec.end_date = Some(parse_date_flag(value).map_err(CliError::Validation)?)
                }
                _ => {
                    return Err(CliError::Validation(format!(
                        "spec file line {}: unknown key `{key}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Build the dataset described by the flags (and/or `--spec` file; explicit
/// flags win) and write the four CSV files.
pub fn run_synth(args: &SynthArgs) -> Result<(), CliError> {
    let file = match &args.spec {
        Some(path) => SynthFileSpec::load(path)?,
        None => SynthFileSpec::default(),
    };
    let n_patients = args.n_patients.or(file.n_patients).unwrap_or(1000);
    let n_codes = args.n_codes.or(file.n_codes).unwrap_or(200);
    let baseline = args.baseline.or(file.baseline).unwrap_or(0.01);
    let planted = args.planted.or(file.planted).unwrap_or(0);
    let multiplier = args.multiplier.or(file.multiplier).unwrap_or(5.0);
    let siblings = args
        .siblings_per_family
        .or(file.siblings_per_family)
        .unwrap_or(2);
    let window_days = args.window_days.or(file.window_days).unwrap_or(60);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let drug = args
        .drug
        .clone()
        .or(file.drug)
        .unwrap_or_else(|| "DRUG1".to_string());
    let start_date = args
        .start_date
        .or(file.start_date)
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(2009, 1, 1).unwrap());
    let end_date = args
        .end_date
        .or(file.end_date)
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(2010, 12, 31).unwrap());

    if n_patients == 0 {
        return Err(CliError::Validation(
            "--n-patients must be at least 1".to_string(),
        ));
    }
    if n_codes == 0 {
        return Err(CliError::Validation(
            "--n-codes must be at least 1".to_string(),
        ));
    }
    if siblings == 0 {
        return Err(CliError::Validation(
            "--siblings-per-family must be at least 1".to_string(),
        ));
    }
    if planted > n_codes {
        return Err(CliError::Validation(
            "--planted cannot exceed --n-codes".to_string(),
        ));
    }
    if window_days == 0 {
        return Err(CliError::Validation(
            "--window-days must be at least 1".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&baseline) {
        return Err(CliError::Validation(
            "--baseline must be within [0, 1]".to_string(),
        ));
    }
    if !multiplier.is_finite() || multiplier < 0.0 {
        return Err(CliError::Validation(
            "--multiplier must be non-negative and finite".to_string(),
        ));
    }
    if end_date < start_date {
        return Err(CliError::Validation(
            "--end-date precedes --start-date".to_string(),
        ));
    }

    let vocabulary = crate::synth::uniform_vocabulary(n_codes, siblings, baseline);
    let planted_effects: Vec<PlantedEffect> = vocabulary
        .iter()
        .take(planted)
        .map(|v| PlantedEffect {
            code: v.code.clone(),
            risk_multiplier: multiplier,
        })
        .collect();
    let spec = SynthSpec {
        n_patients,
        vocabulary,
        planted_effects,
        window_days,
        seed,
        drug_code: drug,
        index_span: (start_date, end_date),
    };
    let dataset = generate(&spec)?;
    dataset.write_to_dir(&args.out_dir).map_err(|e| {
        CliError::Validation(format!(
            "cannot write to `{}`: {e}",
            args.out_dir.display()
        ))
    })?;
    eprintln!(
        "wrote {} patients, {} prescriptions, {} events and {} ledger rows to {}",
        dataset.patients.len(),
        dataset.prescriptions.len(),
        dataset.events.len(),
        dataset.ledger.len(),
        args.out_dir.display()
    );
    Ok(())
}
