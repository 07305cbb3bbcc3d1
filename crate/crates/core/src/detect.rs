//! Per-event testing, filtering and ranking over the grouped matrices.

use thiserror::Error;

use crate::featmat::{GroupedFeatureMatrix, LevelMode};
use crate::readcode::CodeDictionary;
use crate::stats::{ratio_stats, student_t_test, StatsError, TestMode};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("before/after matrices were built over different vocabularies")]
    VocabularyMismatch,
    #[error("before/after matrices have different shapes ({0} vs {1} groups)")]
    GroupCountMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Ordering of the output table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Ascending p-value; ties broken by descending R1, then key text.
    ByP,
    /// Descending R1; ties broken by ascending p, then key text.
    ByR1,
}

/// Everything that parameterizes one detection run. The defaults reproduce
/// the standard setup: 60-day windows, groups of 100, full-depth codes,
/// alpha 0.05, top 30 by p-value, pooled two-sample test.
#[derive(Debug, Clone)]
pub struct DetectionConfig {
    pub window_days: u32,
    pub group_size: usize,
    pub level_mode: LevelMode,
    pub alpha: f64,
    pub rank_mode: RankMode,
    pub prefix_filter: Option<String>,
    pub top_k: usize,
    pub test_mode: TestMode,
    pub min_na: u64,
    pub shuffle_seed: Option<u64>,
    /// Keep events whose rate *decreased* as well (exploration only; ADR
    /// output is increase-only by definition).
    pub include_decreases: bool,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            window_days: 60,
            group_size: 100,
            level_mode: LevelMode::Full,
            alpha: 0.05,
            rank_mode: RankMode::ByP,
            prefix_filter: None,
            top_k: 30,
            test_mode: TestMode::TwoSamplePooled,
            min_na: 0,
            shuffle_seed: None,
            include_decreases: false,
        }
    }
}

/// One detected candidate ADR.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRow {
    /// 1-based, dense within a table.
    pub rank: usize,
    pub key: String,
    pub description: String,
    pub nb: u64,
    pub na: u64,
    pub r1: f64,
    pub r2_percent: f64,
    pub p_value: f64,
}

/// Test every vocabulary column of X (before) against Y (after), retain the
/// significant increases, rank them and keep the top `top_k`.
///
/// Retention requires p < alpha, NA > NB (unless `include_decreases`),
/// NA >= min_na, and, when a prefix filter is configured, a key starting
/// with the prefix. The prefix applies before ranking and truncation, so a
/// filtered table is the full ranked list for that code chapter.
pub fn detect_signals(
    x: &GroupedFeatureMatrix,
    y: &GroupedFeatureMatrix,
    dict: &CodeDictionary,
    cfg: &DetectionConfig,
) -> Result<Vec<SignalRow>, DetectError> {
    if x.vocabulary() != y.vocabulary() {
        return Err(DetectError::VocabularyMismatch);
    }
    if x.n_groups() != y.n_groups() || x.group_size() != y.group_size() {
        return Err(DetectError::GroupCountMismatch(x.n_groups(), y.n_groups()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(DetectError::InvalidConfig("alpha must be in (0, 1)"));
    }
    if cfg.top_k == 0 {
        return Err(DetectError::InvalidConfig("top_k must be at least 1"));
    }

    let vocab = x.vocabulary();
    let n = x.retained_patients() as u64;
    if vocab.is_empty() || x.n_groups() == 0 {
        return Ok(Vec::new());
    }

    let mut rows: Vec<SignalRow> = Vec::new();
    for col in 0..vocab.len() as u32 {
        let key = vocab.key(col);
        if let Some(prefix) = &cfg.prefix_filter {
            if !key.starts_with(prefix.as_str()) {
                continue;
            }
        }
        let nb = x.column_total(col);
        let na = y.column_total(col);
        if na < cfg.min_na {
            continue;
        }
        if !cfg.include_decreases && na <= nb {
            continue;
        }
        let before: Vec<f64> = x.column(col).into_iter().map(f64::from).collect();
        let after: Vec<f64> = y.column(col).into_iter().map(f64::from).collect();
        let test = student_t_test(&before, &after, cfg.test_mode)?;
        if test.p_value >= cfg.alpha {
            continue;
        }
        let ratios = ratio_stats(nb, na, n)?;
        rows.push(SignalRow {
            rank: 0,
            key: key.to_string(),
            description: String::new(),
            nb,
            na,
            r1: ratios.r1,
            r2_percent: ratios.r2_percent,
            p_value: test.p_value,
        });
    }

    sort_rows(&mut rows, cfg.rank_mode);
    rows.truncate(cfg.top_k);
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
        row.description = dict.describe_key(&row.key).to_string();
    }
    Ok(rows)
}

fn sort_rows(rows: &mut [SignalRow], mode: RankMode) {
    match mode {
        RankMode::ByP => rows.sort_by(|a, b| {
            a.p_value
                .total_cmp(&b.p_value)
                .then_with(|| b.r1.total_cmp(&a.r1))
                .then_with(|| a.key.cmp(&b.key))
        }),
        RankMode::ByR1 => rows.sort_by(|a, b| {
            b.r1.total_cmp(&a.r1)
                .then_with(|| a.p_value.total_cmp(&b.p_value))
                .then_with(|| a.key.cmp(&b.key))
        }),
    }
}

/// Keep rows whose key starts with `prefix` and re-rank densely from 1.
pub fn filter_by_prefix(rows: &[SignalRow], prefix: &str) -> Vec<SignalRow> {
    rows.iter()
        .filter(|r| r.key.starts_with(prefix))
        .cloned()
        .enumerate()
        .map(|(i, mut r)| {
            r.rank = i + 1;
            r
        })
        .collect()
}
