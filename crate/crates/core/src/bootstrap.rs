//! Paired bootstrap over items.
//!
//! One [`ResamplingSchedule`] is drawn per trial and applied to every group,
//! so iteration `f` of every distribution is computed from the same item
//! multiset.
//!
//! Schedules are generated with ChaCha20 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`. Each index is drawn from one `next_u64`
//! output by rejection: values at or above `floor(2^64 / n) * n` are
//! discarded, the rest are reduced modulo `n`. Indices are drawn
//! iteration-major, sample-minor.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::TalliedMatrix;
use crate::error::BootstrapError;
use crate::matrix::AnnotationMatrix;
use crate::substitution::SubstitutionGroup;

pub const SCHEDULE_RNG: &str = "chacha20";

/// Default per-iteration sample size: 40% of the items, rounded up.
pub fn default_sample_size(n_items: usize) -> usize {
    ((n_items as f64) * 0.4).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplingSchedule {
    seed: u64,
    n_items: usize,
    sample_size: usize,
    indices: Vec<Vec<usize>>,
}

/// Serialized form: the indices are regenerated from these fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub seed: u64,
    #[serde(rename = "B")]
    pub iterations: usize,
    #[serde(rename = "N")]
    pub sample_size: usize,
    pub n: usize,
    pub rng: String,
}

fn uniform_index(rng: &mut ChaCha20Rng, n: u64) -> usize {
    let zone = (u64::MAX / n) * n;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return (x % n) as usize;
        }
    }
}

/// Draws `iterations` samples of `sample_size` item indices from `0..n_items`
/// with replacement.
pub fn make_schedule(
    n_items: usize,
    iterations: usize,
    sample_size: usize,
    seed: u64,
) -> Result<ResamplingSchedule, BootstrapError> {
    if n_items == 0 || iterations == 0 || sample_size == 0 {
        return Err(BootstrapError::InvalidSchedule(format!(
            "n, B and N must be positive (n={n_items}, B={iterations}, N={sample_size})"
        )));
    }
    if sample_size > n_items {
        return Err(BootstrapError::InvalidSchedule(format!(
            "N={sample_size} exceeds n={n_items}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let indices = (0..iterations)
        .map(|_| (0..sample_size).map(|_| uniform_index(&mut rng, n_items as u64)).collect())
        .collect();
    Ok(ResamplingSchedule {
        seed,
        n_items,
        sample_size,
        indices,
    })
}

impl ResamplingSchedule {
    /// Schedule with explicit indices. Its [`ScheduleSpec`] does not regenerate it.
    pub fn from_indices(n_items: usize, indices: Vec<Vec<usize>>) -> Result<Self, BootstrapError> {
        let sample_size = indices.first().map_or(0, Vec::len);
        if indices.is_empty() || sample_size == 0 || indices.iter().any(|s| s.len() != sample_size) {
            return Err(BootstrapError::InvalidSchedule("ragged or empty indices".into()));
        }
        if indices.iter().flatten().any(|&i| i >= n_items) {
            return Err(BootstrapError::InvalidSchedule("index out of range".into()));
        }
        Ok(Self {
            seed: 0,
            n_items,
            sample_size,
            indices,
        })
    }

    pub fn from_spec(spec: &ScheduleSpec) -> Result<Self, BootstrapError> {
        if spec.rng != SCHEDULE_RNG {
            return Err(BootstrapError::InvalidSchedule(format!("unsupported rng {:?}", spec.rng)));
        }
        make_schedule(spec.n, spec.iterations, spec.sample_size, spec.seed)
    }

    pub fn spec(&self) -> ScheduleSpec {
        ScheduleSpec {
            seed: self.seed,
            iterations: self.indices.len(),
            sample_size: self.sample_size,
            n: self.n_items,
            rng: SCHEDULE_RNG.to_string(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iterations(&self) -> usize {
        self.indices.len()
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }
}

/// Bootstrap alpha values of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDistribution {
    pub group_label: String,
    /// Alpha per defined iteration, in iteration order.
    pub values: Vec<f64>,
    /// Number of iterations where alpha was undefined.
    pub skipped: usize,
    /// Which iterations were skipped.
    pub skipped_at: Vec<usize>,
}

impl AlphaDistribution {
    pub fn iterations(&self) -> usize {
        self.values.len() + self.skipped
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// The distribution over the first `iterations` iterations only. Because
    /// schedules are drawn iteration by iteration, this equals the result of
    /// a run with a schedule of that many iterations and the same seed.
    pub fn truncated(&self, iterations: usize) -> AlphaDistribution {
        let skipped_at: Vec<usize> = self.skipped_at.iter().copied().filter(|&f| f < iterations).collect();
        let kept = iterations.min(self.iterations()) - skipped_at.len();
        AlphaDistribution {
            group_label: self.group_label.clone(),
            values: self.values[..kept].to_vec(),
            skipped: skipped_at.len(),
            skipped_at,
        }
    }
}

/// Alpha of `matrix` restricted to each resample of the schedule.
pub fn bootstrap_alphas(
    matrix: &AnnotationMatrix,
    schedule: &ResamplingSchedule,
) -> Result<AlphaDistribution, BootstrapError> {
    bootstrap_labelled(matrix, schedule, "matrix")
}

fn bootstrap_labelled(
    matrix: &AnnotationMatrix,
    schedule: &ResamplingSchedule,
    label: &str,
) -> Result<AlphaDistribution, BootstrapError> {
    if schedule.n_items != matrix.n_items() {
        return Err(BootstrapError::SizeMismatch {
            schedule: schedule.n_items,
            matrix: matrix.n_items(),
        });
    }
    let tallied = TalliedMatrix::new(matrix);
    let per_iteration: Vec<Option<f64>> = schedule
        .indices
        .par_iter()
        .map(|sample| tallied.alpha_over(sample.iter().copied()).ok().map(|r| r.alpha))
        .collect();
    let mut values = Vec::with_capacity(per_iteration.len());
    let mut skipped_at = Vec::new();
    for (f, v) in per_iteration.into_iter().enumerate() {
        match v {
            Some(a) => values.push(a),
            None => skipped_at.push(f),
        }
    }
    if values.is_empty() {
        return Err(BootstrapError::AllUndefined(schedule.iterations()));
    }
    Ok(AlphaDistribution {
        group_label: label.to_string(),
        values,
        skipped: skipped_at.len(),
        skipped_at,
    })
}

/// Distributions for the base matrix followed by each substitution group,
/// all from one schedule.
pub fn paired_run(
    base: &AnnotationMatrix,
    groups: &[SubstitutionGroup],
    schedule: &ResamplingSchedule,
) -> Result<Vec<AlphaDistribution>, BootstrapError> {
    if groups.iter().any(|g| g.result.items() != base.items()) {
        return Err(BootstrapError::ItemMismatch);
    }
    let wrap = |group: &str| {
        let group = group.to_string();
        move |e| BootstrapError::Group {
            group,
            source: Box::new(e),
        }
    };
    let mut out = vec![bootstrap_labelled(base, schedule, "human").map_err(wrap("human"))?];
    let rest: Result<Vec<_>, _> = groups
        .par_iter()
        .map(|g| {
            bootstrap_labelled(&g.result, schedule, &g.replaced_annotator)
                .map_err(wrap(&g.replaced_annotator))
        })
        .collect();
    out.extend(rest?);
    Ok(out)
}
