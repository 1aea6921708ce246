//! Synthetic annotator populations from linear cue-integration models.
//!
//! Every item carries a vector of cues. An annotator scores an item as a
//! weighted sum of its cues plus Gaussian noise and maps the score to a label
//! through the task's thresholds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::MatrixError;
use crate::matrix::{Alphabet, AnnotationMatrix, Label, Scale};
use crate::substitution::CandidateAnnotations;

const STREAM_NOISE: u64 = 0;
const STREAM_MISSING: u64 = 1;
const STREAM_RETEST: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub n_items: usize,
    pub cue_dim: usize,
    /// `n_items × cue_dim`, item-major.
    pub cues: Vec<f64>,
    pub alphabet: Vec<String>,
    /// Sorted cut points; `thresholds.len() == alphabet.len() - 1`.
    pub thresholds: Vec<f64>,
}

impl SyntheticTask {
    pub fn item_id(k: usize) -> String {
        format!("item{k:05}")
    }

    pub fn item_ids(&self) -> Vec<String> {
        (0..self.n_items).map(Self::item_id).collect()
    }

    pub fn cues_of(&self, item: usize) -> &[f64] {
        &self.cues[item * self.cue_dim..(item + 1) * self.cue_dim]
    }

    /// Label index of a score.
    pub fn label_of(&self, score: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= score)
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.alphabet.clone()).expect("synthetic alphabet is distinct")
    }
}

/// Cues are i.i.d. standard normal. Thresholds sit at the equally spaced
/// quantiles of the unit-weight score `Σ cues ~ N(0, cue_dim)`, so a
/// noiseless unit-weight annotator uses every label about equally often.
/// Labels are `"1"..="K"`.
pub fn generate_task(n_items: usize, cue_dim: usize, alphabet_size: usize, seed: u64) -> SyntheticTask {
    assert!(n_items >= 1 && cue_dim >= 1 && alphabet_size >= 2, "invalid task shape");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cues = (0..n_items * cue_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let score = NormalDist::new(0.0, (cue_dim as f64).sqrt()).expect("valid normal");
    let thresholds = (1..alphabet_size)
        .map(|j| score.inverse_cdf(j as f64 / alphabet_size as f64))
        .collect();
    SyntheticTask {
        n_items,
        cue_dim,
        cues,
        alphabet: (1..=alphabet_size).map(|l| l.to_string()).collect(),
        thresholds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueModelAnnotator {
    pub weights: Vec<f64>,
    pub noise_sd: f64,
    /// Per-item probability that a repeated annotation pass re-draws the noise.
    pub inconsistency: f64,
    pub seed: u64,
}

impl CueModelAnnotator {
    pub fn new(weights: Vec<f64>, noise_sd: f64, seed: u64) -> Self {
        Self {
            weights,
            noise_sd,
            inconsistency: 0.0,
            seed,
        }
    }

    /// An annotator whose weights are orthogonal to `reference` with the same norm.
    pub fn orthogonal_to(reference: &[f64], noise_sd: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_0f0f);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r2: f64 = reference.iter().map(|x| x * x).sum();
        let weights = loop {
            let v: Vec<f64> = reference.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
            let proj = v.iter().zip(reference).map(|(a, b)| a * b).sum::<f64>() / r2;
            let w: Vec<f64> = v.iter().zip(reference).map(|(a, b)| a - proj * b).collect();
            let n = norm(&w);
            if n > 1e-9 {
                let scale = norm(reference) / n;
                break w.into_iter().map(|x| x * scale).collect();
            }
        };
        Self::new(weights, noise_sd, seed)
    }
}

/// Labels every item of `task`; each item is independently left blank with
/// probability `missing_rate`.
pub fn annotate(task: &SyntheticTask, annotator: &CueModelAnnotator, missing_rate: f64) -> CandidateAnnotations {
    annotate_pass(task, annotator, missing_rate, 0)
}

/// One annotation pass. Passes of the same annotator share their noise
/// except on items where the noise is re-drawn (probability
/// `annotator.inconsistency`), which use a pass-specific stream.
pub fn annotate_pass(
    task: &SyntheticTask,
    annotator: &CueModelAnnotator,
    missing_rate: f64,
    pass: u64,
) -> CandidateAnnotations {
    assert_eq!(annotator.weights.len(), task.cue_dim, "weights must match the cue dimension");
    assert!((0.0..1.0).contains(&missing_rate), "missing_rate must be in [0, 1)");
    let stream = |s: u64| {
        let mut r = ChaCha20Rng::seed_from_u64(annotator.seed);
        r.set_stream(s);
        r
    };
    let mut noise_rng = stream(STREAM_NOISE);
    let mut missing_rng = stream(STREAM_MISSING);
    let mut retest_rng = stream(STREAM_RETEST + pass);
    let noise = Normal::new(0.0, annotator.noise_sd.max(0.0)).expect("finite noise");

    let mut labels = std::collections::BTreeMap::new();
    for k in 0..task.n_items {
        let mut e = noise.sample(&mut noise_rng);
        let reroll: f64 = retest_rng.random();
        let fresh = noise.sample(&mut retest_rng);
        if pass > 0 && reroll < annotator.inconsistency {
            e = fresh;
        }
        let blank: f64 = missing_rng.random();
        if blank < missing_rate {
            continue;
        }
        let score: f64 = task
            .cues_of(k)
            .iter()
            .zip(&annotator.weights)
            .map(|(c, w)| c * w)
            .sum::<f64>()
            + e;
        labels.insert(SyntheticTask::item_id(k), task.alphabet[task.label_of(score)].clone());
    }
    CandidateAnnotations::new(format!("synthetic-{}", annotator.seed), labels)
}

/// Distribution of annotators around a shared weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub common_weights: Vec<f64>,
    /// Standard deviation of per-cue weight perturbations.
    pub weight_sd: f64,
    /// Median noise level.
    pub noise_sd: f64,
    /// Log-scale spread of noise levels across annotators.
    pub noise_spread: f64,
    pub inconsistency: f64,
}

impl PopulationSpec {
    pub fn new(cue_dim: usize, weight_sd: f64, noise_sd: f64) -> Self {
        Self {
            common_weights: vec![1.0; cue_dim],
            weight_sd,
            noise_sd,
            noise_spread: 0.0,
            inconsistency: 0.0,
        }
    }

    pub fn draw(&self, seed: u64) -> CueModelAnnotator {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let weights = self
            .common_weights
            .iter()
            .map(|w| {
                let z: f64 = StandardNormal.sample(&mut rng);
                w + self.weight_sd * z
            })
            .collect();
        let z: f64 = StandardNormal.sample(&mut rng);
        CueModelAnnotator {
            weights,
            noise_sd: self.noise_sd * (self.noise_spread * z).exp(),
            inconsistency: self.inconsistency,
            seed,
        }
    }

    /// Seeds of the annotators in a population drawn with `seed`.
    pub fn annotator_seed(seed: u64, index: usize) -> u64 {
        seed.wrapping_mul(1_000_003).wrapping_add(index as u64 + 1)
    }

    /// Draws `n_annotators` annotators (ids `h001`, `h002`, ...) and collects
    /// their labels into a matrix.
    pub fn population_matrix(
        &self,
        task: &SyntheticTask,
        n_annotators: usize,
        missing_rate: f64,
        scale: Scale,
        seed: u64,
    ) -> Result<AnnotationMatrix, MatrixError> {
        let annotators: Vec<CueModelAnnotator> = (0..n_annotators)
            .map(|a| self.draw(Self::annotator_seed(seed, a)))
            .collect();
        matrix_from_annotations(task, &annotators.iter().map(|a| annotate(task, a, missing_rate)).collect::<Vec<_>>(), scale)
    }
}

/// Collects per-annotator annotations into a matrix; annotator ids are
/// `h001`, `h002`, ... in the given order.
pub fn matrix_from_annotations(
    task: &SyntheticTask,
    annotations: &[CandidateAnnotations],
    scale: Scale,
) -> Result<AnnotationMatrix, MatrixError> {
    let alphabet = task.alphabet();
    let items = task.item_ids();
    let width = annotations.len();
    let mut cells = vec![None; items.len() * width];
    for (a, ann) in annotations.iter().enumerate() {
        for (k, item) in items.iter().enumerate() {
            if let Some(text) = ann.labels.get(item) {
                let l = alphabet
                    .lookup(text)
                    .ok_or_else(|| MatrixError::LabelOutOfAlphabet(text.clone()))?;
                cells[k * width + a] = Some(Label(l.0));
            }
        }
    }
    AnnotationMatrix::new(
        scale,
        alphabet,
        items,
        (1..=width).map(|a| format!("h{a:03}")).collect(),
        cells,
    )
}
