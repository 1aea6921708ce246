//! One-at-a-time annotator substitution.
//!
//! A candidate only overwrites cells the replaced annotator actually
//! labelled; blanks stay blank, so the missingness pattern never changes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::SubstitutionError;
use crate::matrix::{read_long_rows, AnnotationMatrix, Label};

/// Labels produced by a candidate annotator, keyed by item identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAnnotations {
    pub source_tag: String,
    pub labels: BTreeMap<String, String>,
}

impl CandidateAnnotations {
    pub fn new(source_tag: impl Into<String>, labels: BTreeMap<String, String>) -> Self {
        Self {
            source_tag: source_tag.into(),
            labels,
        }
    }

    /// The present labels of one annotator of `matrix`, as a candidate.
    pub fn from_annotator(matrix: &AnnotationMatrix, annotator: &str) -> Result<Self, SubstitutionError> {
        let a = matrix
            .annotator_index(annotator)
            .ok_or_else(|| SubstitutionError::UnknownAnnotator(annotator.to_string()))?;
        let labels = (0..matrix.n_items())
            .filter_map(|k| {
                matrix
                    .get(k, a)
                    .map(|l| (matrix.items()[k].clone(), matrix.alphabet().text(l).to_string()))
            })
            .collect();
        Ok(Self::new(annotator, labels))
    }

    /// Reads a long-format file holding a single annotator (the candidate).
    pub fn from_long_format<R: Read>(source: R) -> Result<Self, SubstitutionError> {
        let rows = read_long_rows(source)?;
        let tags: BTreeSet<&str> = rows.iter().map(|r| r.annotator.as_str()).collect();
        if tags.len() != 1 {
            return Err(SubstitutionError::CandidateAnnotators(tags.len()));
        }
        let source_tag = tags.into_iter().next().unwrap().to_string();
        let mut labels = BTreeMap::new();
        for r in rows {
            if labels.insert(r.item.clone(), r.label.clone()).is_some() {
                return Err(crate::error::MatrixError::DuplicateCell {
                    item: r.item,
                    annotator: source_tag,
                }
                .into());
            }
        }
        Ok(Self { source_tag, labels })
    }

    pub fn write_long_format<W: std::io::Write>(&self, out: W) -> Result<(), SubstitutionError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SubstitutionError::Matrix(e.into());
        w.write_record(["annotator_id", "item_id", "label"]).map_err(io)?;
        for (item, label) in &self.labels {
            w.write_record([self.source_tag.as_str(), item, label]).map_err(io)?;
        }
        w.flush()
            .map_err(|e| SubstitutionError::Matrix(crate::error::MatrixError::Io(e.to_string())))?;
        Ok(())
    }
}

/// A base matrix with one annotator's present cells replaced.
#[derive(Debug, Clone)]
pub struct SubstitutionGroup {
    pub replaced_annotator: String,
    /// Column position of the replaced annotator.
    pub annotator_index: usize,
    pub result: AnnotationMatrix,
    /// Cells whose label actually changed.
    pub changed_cells: usize,
}

/// Replaces the present cells of `annotator` with the candidate's labels.
pub fn substitute(
    base: &AnnotationMatrix,
    annotator: &str,
    candidate: &CandidateAnnotations,
) -> Result<SubstitutionGroup, SubstitutionError> {
    let a = base
        .annotator_index(annotator)
        .ok_or_else(|| SubstitutionError::UnknownAnnotator(annotator.to_string()))?;
    let mut column = Vec::with_capacity(base.n_items());
    let mut changed = 0;
    for k in 0..base.n_items() {
        let Some(original) = base.get(k, a) else {
            column.push(None);
            continue;
        };
        let item = &base.items()[k];
        let text = candidate.labels.get(item).ok_or_else(|| SubstitutionError::MissingLabel {
            annotator: annotator.to_string(),
            item: item.clone(),
        })?;
        let label = base.alphabet().lookup(text).ok_or_else(|| SubstitutionError::OutOfAlphabet {
            item: item.clone(),
            label: text.clone(),
        })?;
        if label != original {
            changed += 1;
        }
        column.push(Some(label));
    }
    Ok(SubstitutionGroup {
        replaced_annotator: annotator.to_string(),
        annotator_index: a,
        result: base.with_column(a, &column),
        changed_cells: changed,
    })
}

/// One substitution per group member, sorted by annotator identifier.
pub fn substitution_sweep(
    base: &AnnotationMatrix,
    group: &BTreeSet<String>,
    candidate: &CandidateAnnotations,
) -> Result<Vec<SubstitutionGroup>, SubstitutionError> {
    sweep_with(base, group, |_| Ok(candidate.clone()))
}

/// Sweep where each annotator is replaced by an exact copy of itself.
pub fn self_substitution_sweep(
    base: &AnnotationMatrix,
    group: &BTreeSet<String>,
) -> Result<Vec<SubstitutionGroup>, SubstitutionError> {
    sweep_with(base, group, |a| CandidateAnnotations::from_annotator(base, a))
}

fn sweep_with<F>(
    base: &AnnotationMatrix,
    group: &BTreeSet<String>,
    candidate_for: F,
) -> Result<Vec<SubstitutionGroup>, SubstitutionError>
where
    F: Fn(&str) -> Result<CandidateAnnotations, SubstitutionError>,
{
    if group.is_empty() {
        return Err(SubstitutionError::EmptyGroup);
    }
    // BTreeSet iteration is already identifier-sorted.
    group
        .iter()
        .map(|a| substitute(base, a, &candidate_for(a)?))
        .collect()
}

/// How random control labels are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomLabels {
    /// Uniform over the alphabet.
    #[default]
    Uniform,
    /// Proportional to the matrix's observed label frequencies.
    Marginal,
}

/// Random control candidate: one label per item, i.i.d., seeded (ChaCha20).
pub fn random_candidate(base: &AnnotationMatrix, seed: u64) -> CandidateAnnotations {
    random_candidate_with(base, seed, RandomLabels::Uniform)
}

pub fn random_candidate_with(base: &AnnotationMatrix, seed: u64, mode: RandomLabels) -> CandidateAnnotations {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let k = base.alphabet().len();
    let cumulative: Vec<u64> = match mode {
        RandomLabels::Uniform => (1..=k as u64).collect(),
        RandomLabels::Marginal => {
            let mut counts = vec![0u64; k];
            for (_, _, l) in base.present_cells() {
                counts[l.index()] += 1;
            }
            counts
                .iter()
                .scan(0u64, |acc, c| {
                    *acc += c;
                    Some(*acc)
                })
                .collect()
        }
    };
    let total = *cumulative.last().unwrap();
    let labels = base
        .items()
        .iter()
        .map(|item| {
            let draw = rng.random_range(0..total);
            let idx = cumulative.partition_point(|&c| c <= draw);
            (item.clone(), base.alphabet().text(Label(idx as u32)).to_string())
        })
        .collect();
    CandidateAnnotations::new(format!("random-{seed}"), labels)
}
