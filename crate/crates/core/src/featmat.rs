//! Patient-level binary feature matrices and grouped count matrices.
//!
//! For each observation window a patient × event matrix records whether the
//! patient had at least one event with the given aggregation key in that
//! window (binary, not a count; downstream statistics are defined over
//! patient numbers). Patients are then pooled into fixed-size consecutive
//! groups and the binary entries summed, producing the group × event count
//! matrices the per-event tests run on. The patient matrix is stored
//! sparsely; only the much smaller grouped matrix is dense.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cohort::{AssignedEvent, CohortWindows};
use crate::readcode::ReadCode;

#[derive(Debug, Error)]
pub enum FeatmatError {
    #[error("key `{0}` is not in the event vocabulary (vocabulary contract violation)")]
    UnknownKey(String),
    #[error("patient row {0} is outside the cohort (assignment contract violation)")]
    UnknownPatient(usize),
    #[error("group size must be at least 1")]
    GroupSizeZero,
    #[error("matrices were built over different vocabularies")]
    VocabularyMismatch,
}

/// Code-aggregation granularity for the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelMode {
    /// Key on the full raw code (levels 1-5, term suffix included).
    Full,
    /// Key on the level-3 prefix (levels 1-3).
    Level3,
}

impl LevelMode {
    pub fn key_of<'c>(&self, code: &'c ReadCode) -> &'c str {
        match self {
            LevelMode::Full => code.raw(),
            LevelMode::Level3 => code.key_at_level(3),
        }
    }
}

/// The ordered set of distinct aggregation keys seen in either window.
#[derive(Debug, PartialEq)]
pub struct EventVocabulary {
    mode: LevelMode,
    keys: Vec<String>,
    index: HashMap<String, u32>,
}

impl EventVocabulary {
    pub fn mode(&self) -> LevelMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys in lexicographic order; column `i` of every matrix built over
    /// this vocabulary corresponds to `keys()[i]`.
    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn key(&self, column: u32) -> &str {
        &self.keys[column as usize]
    }

    pub fn column_of(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }
}

/// Collect the sorted union of keys appearing in the before and after
/// assignments under the chosen aggregation mode.
pub fn build_vocabulary(
    before: &[AssignedEvent],
    after: &[AssignedEvent],
    mode: LevelMode,
) -> EventVocabulary {
    let mut keys: Vec<String> = before
        .iter()
        .chain(after)
        .map(|e| mode.key_of(&e.code).to_string())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let index = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i as u32))
        .collect();
    EventVocabulary { mode, keys, index }
}

/// Sparse binary patient × event matrix for one observation window.
/// Entry (p, e) is 1 iff patient p has at least one assigned event with
/// key e in this window.
#[derive(Debug)]
pub struct PatientFeatureMatrix {
    vocabulary: Arc<EventVocabulary>,
    /// CSR layout: row `p` owns `cols[row_offsets[p]..row_offsets[p+1]]`,
    /// sorted and deduplicated.
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
}

impl PatientFeatureMatrix {
    pub fn vocabulary(&self) -> &Arc<EventVocabulary> {
        &self.vocabulary
    }

    pub fn n_patients(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn n_events(&self) -> usize {
        self.vocabulary.len()
    }

    /// Distinct event columns set for a patient, sorted.
    pub fn row(&self, patient: usize) -> &[u32] {
        &self.cols[self.row_offsets[patient]..self.row_offsets[patient + 1]]
    }

    pub fn entry(&self, patient: usize, column: u32) -> u8 {
        u8::from(self.row(patient).binary_search(&column).is_ok())
    }
}

/// Build the binary matrix for one window over `vocabulary`. Every
/// assignment key must already be in the vocabulary.
pub fn build_patient_matrix(
    assignments: &[AssignedEvent],
    cohort: &[CohortWindows],
    vocabulary: Arc<EventVocabulary>,
) -> Result<PatientFeatureMatrix, FeatmatError> {
    let n = cohort.len();
    let mode = vocabulary.mode();
    let mut per_patient: Vec<Vec<u32>> = vec![Vec::new(); n];
    for a in assignments {
        if a.patient >= n {
            return Err(FeatmatError::UnknownPatient(a.patient));
        }
        let key = mode.key_of(&a.code);
        let col = vocabulary
            .column_of(key)
            .ok_or_else(|| FeatmatError::UnknownKey(key.to_string()))?;
        per_patient[a.patient].push(col);
    }
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    row_offsets.push(0);
    for row in &mut per_patient {
        row.sort_unstable();
        row.dedup();
        cols.extend_from_slice(row);
        row_offsets.push(cols.len());
    }
    Ok(PatientFeatureMatrix {
        vocabulary,
        row_offsets,
        cols,
    })
}

/// Dense group × event count matrix: entry (g, e) is the number of patients
/// in group g whose binary entry for e is 1.
#[derive(Debug)]
pub struct GroupedFeatureMatrix {
    vocabulary: Arc<EventVocabulary>,
    group_size: usize,
    n_groups: usize,
    /// Row-major, `n_groups * vocabulary.len()` entries.
    counts: Vec<u32>,
    dropped_patients: usize,
}

impl GroupedFeatureMatrix {
    pub fn vocabulary(&self) -> &Arc<EventVocabulary> {
        &self.vocabulary
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Patients beyond the last full group, excluded from the matrix.
    pub fn dropped_patients(&self) -> usize {
        self.dropped_patients
    }

    /// Number of patients represented in the matrix.
    pub fn retained_patients(&self) -> usize {
        self.n_groups * self.group_size
    }

    pub fn entry(&self, group: usize, column: u32) -> u32 {
        self.counts[group * self.vocabulary.len() + column as usize]
    }

    /// Per-group counts for one event column.
    pub fn column(&self, column: u32) -> Vec<u32> {
        (0..self.n_groups).map(|g| self.entry(g, column)).collect()
    }

    /// Total patients with the event across all groups.
    pub fn column_total(&self, column: u32) -> u64 {
        (0..self.n_groups)
            .map(|g| u64::from(self.entry(g, column)))
            .sum()
    }

    /// Debug dump of the nonzero cells as `group,key,count` triplets.
    pub fn write_triplet_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "key", "count"])?;
        for g in 0..self.n_groups {
            for c in 0..self.vocabulary.len() as u32 {
                let count = self.entry(g, c);
                if count > 0 {
                    w.write_record([
                        g.to_string().as_str(),
                        self.vocabulary.key(c),
                        count.to_string().as_str(),
                    ])?;
                }
            }
        }
        w.flush()
    }

    #[cfg(test)]
    pub(crate) fn from_raw(
        vocabulary: Arc<EventVocabulary>,
        group_size: usize,
        counts_by_group: Vec<Vec<u32>>,
    ) -> Self {
        let n_groups = counts_by_group.len();
        let counts: Vec<u32> = counts_by_group.into_iter().flatten().collect();
        assert_eq!(counts.len(), n_groups * vocabulary.len());
        GroupedFeatureMatrix {
            vocabulary,
            group_size,
            n_groups,
            counts,
            dropped_patients: 0,
        }
    }
}

/// Sum binary rows over consecutive blocks of `group_size` patients.
/// Patients beyond the last full group are dropped and counted. When
/// `shuffle_seed` is set, patients are deterministically permuted before
/// grouping (for sensitivity analysis).
pub fn group_patients(
    matrix: &PatientFeatureMatrix,
    group_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<GroupedFeatureMatrix, FeatmatError> {
    if group_size == 0 {
        return Err(FeatmatError::GroupSizeZero);
    }
    let n = matrix.n_patients();
    let n_groups = n / group_size;
    let dropped_patients = n - n_groups * group_size;

    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let width = matrix.vocabulary.len();
    let mut counts = vec![0u32; n_groups * width];
    for (pos, &patient) in order.iter().take(n_groups * group_size).enumerate() {
        let group = pos / group_size;
        let base = group * width;
        for &col in matrix.row(patient) {
            counts[base + col as usize] += 1;
        }
    }
    Ok(GroupedFeatureMatrix {
        vocabulary: Arc::clone(&matrix.vocabulary),
        group_size,
        n_groups,
        counts,
        dropped_patients,
    })
}

/// Total patients with event `key` before and after exposure, summed over
/// the grouped matrices: `(NB, NA)`.
pub fn column_totals(
    before: &GroupedFeatureMatrix,
    after: &GroupedFeatureMatrix,
    key: &str,
) -> Result<(u64, u64), FeatmatError> {
    if before.vocabulary != after.vocabulary {
        return Err(FeatmatError::VocabularyMismatch);
    }
    let col = before
        .vocabulary
        .column_of(key)
        .ok_or_else(|| FeatmatError::UnknownKey(key.to_string()))?;
    Ok((before.column_total(col), after.column_total(col)))
}
