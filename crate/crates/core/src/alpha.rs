//! Krippendorff's alpha over the coincidence matrix.
//!
//! Each item with `m >= 2` present labels contributes every ordered pair of
//! distinct annotator slots with weight `1 / (m - 1)`. Items with fewer than
//! two labels contribute nothing, which is how missing data is tolerated.

use serde::{Deserialize, Serialize};

use crate::error::AlphaError;
use crate::matrix::{Alphabet, AnnotationMatrix, Scale};

/// `D_e` at or below this fraction of the mean off-diagonal difference is
/// treated as zero.
const NO_VARIATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub d_observed: f64,
    pub d_expected: f64,
    /// Total coincidence mass `n..`.
    pub pairable_values: f64,
}

/// Symmetric label-pair table with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMatrix {
    size: usize,
    counts: Vec<f64>,
    marginals: Vec<f64>,
    total: f64,
}

impl CoincidenceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, c: usize, c_prime: usize) -> f64 {
        self.counts[c * self.size + c_prime]
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Builds the coincidence matrix of a whole matrix.
pub fn coincidences(matrix: &AnnotationMatrix) -> Result<CoincidenceMatrix, AlphaError> {
    TalliedMatrix::new(matrix).coincidences_over(0..matrix.n_items())
}

/// Pairwise difference `δ(c, c')` for one scale.
///
/// `marginals` are the coincidence marginals `n_g`; only the ordinal metric
/// reads them. Interval uses the numeric magnitudes of the labels.
pub fn delta(scale: Scale, c: usize, c_prime: usize, alphabet: &Alphabet, marginals: &[f64]) -> f64 {
    if c == c_prime {
        return 0.0;
    }
    match scale {
        Scale::Nominal => 1.0,
        Scale::Interval => {
            let v = alphabet.values().expect("interval alphabet is numeric");
            let d = v[c] - v[c_prime];
            d * d
        }
        Scale::Ordinal => {
            let (lo, hi) = if c < c_prime { (c, c_prime) } else { (c_prime, c) };
            let span: f64 = marginals[lo..=hi].iter().sum();
            let d = span - (marginals[c] + marginals[c_prime]) / 2.0;
            d * d
        }
    }
}

/// Full `|alphabet| × |alphabet|` difference table, row-major.
pub fn delta_table(scale: Scale, alphabet: &Alphabet, marginals: &[f64]) -> Vec<f64> {
    let k = alphabet.len();
    let mut t = vec![0.0; k * k];
    for c in 0..k {
        for c2 in 0..k {
            t[c * k + c2] = delta(scale, c, c2, alphabet, marginals);
        }
    }
    t
}

/// Alpha from a coincidence matrix.
pub fn alpha_from_coincidences(
    coinc: &CoincidenceMatrix,
    scale: Scale,
    alphabet: &Alphabet,
) -> Result<AlphaResult, AlphaError> {
    let k = coinc.size;
    let table = delta_table(scale, alphabet, &coinc.marginals);
    let n = coinc.total;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for c2 in 0..k {
            let d = table[c * k + c2];
            if d != 0.0 {
                observed += coinc.counts[c * k + c2] * d;
                expected += coinc.marginals[c] * coinc.marginals[c2] * d;
            }
        }
    }
    let d_observed = observed / n;
    let d_expected = expected / (n * (n - 1.0));

    let off_diagonal = (k * k).saturating_sub(k);
    let mean_delta = if off_diagonal == 0 {
        0.0
    } else {
        table.iter().sum::<f64>() / off_diagonal as f64
    };
    if mean_delta <= 0.0 || d_expected <= NO_VARIATION_TOLERANCE * mean_delta {
        return Err(AlphaError::NoVariation);
    }
    Ok(AlphaResult {
        alpha: 1.0 - d_observed / d_expected,
        d_observed,
        d_expected,
        pairable_values: n,
    })
}

/// Krippendorff's alpha of a matrix.
pub fn krippendorff_alpha(matrix: &AnnotationMatrix) -> Result<AlphaResult, AlphaError> {
    TalliedMatrix::new(matrix).alpha_over(0..matrix.n_items())
}

/// Per-item label counts of a matrix, for evaluating alpha over arbitrary
/// item multisets (bootstrap resamples) without rebuilding matrices.
#[derive(Debug, Clone)]
pub struct TalliedMatrix {
    scale: Scale,
    alphabet: Alphabet,
    n_items: usize,
    tallies: Vec<u32>,
    /// Fixed difference table for scales that do not depend on marginals.
    fixed_delta: Option<Vec<f64>>,
}

impl TalliedMatrix {
    pub fn new(matrix: &AnnotationMatrix) -> Self {
        let scale = matrix.scale();
        let alphabet = matrix.alphabet().clone();
        let fixed_delta = match scale {
            Scale::Ordinal => None,
            _ => Some(delta_table(scale, &alphabet, &[])),
        };
        Self {
            scale,
            n_items: matrix.n_items(),
            tallies: matrix.label_tallies(),
            alphabet,
            fixed_delta,
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Coincidences over an item multiset; repeated items count once per occurrence.
    pub fn coincidences_over<I>(&self, items: I) -> Result<CoincidenceMatrix, AlphaError>
    where
        I: IntoIterator<Item = usize>,
    {
        let k = self.alphabet.len();
        let mut counts = vec![0.0; k * k];
        for item in items {
            let row = &self.tallies[item * k..(item + 1) * k];
            let m: u32 = row.iter().sum();
            if m < 2 {
                continue;
            }
            let w = 1.0 / (m - 1) as f64;
            for c in 0..k {
                let nc = row[c];
                if nc == 0 {
                    continue;
                }
                for c2 in 0..k {
                    let pairs = if c == c2 { nc * (nc - 1) } else { nc * row[c2] };
                    if pairs > 0 {
                        counts[c * k + c2] += pairs as f64 * w;
                    }
                }
            }
        }
        let marginals: Vec<f64> = (0..k).map(|c| counts[c * k..(c + 1) * k].iter().sum()).collect();
        let total: f64 = marginals.iter().sum();
        if total <= 0.0 {
            return Err(AlphaError::NoPairableValues);
        }
        Ok(CoincidenceMatrix {
            size: k,
            counts,
            marginals,
            total,
        })
    }

    pub fn alpha_over<I>(&self, items: I) -> Result<AlphaResult, AlphaError>
    where
        I: IntoIterator<Item = usize>,
    {
        let coinc = self.coincidences_over(items)?;
        match &self.fixed_delta {
            Some(table) => alpha_with_table(&coinc, table),
            None => alpha_from_coincidences(&coinc, self.scale, &self.alphabet),
        }
    }
}

fn alpha_with_table(coinc: &CoincidenceMatrix, table: &[f64]) -> Result<AlphaResult, AlphaError> {
    let k = coinc.size;
    let n = coinc.total;
    let (mut observed, mut expected, mut sum_delta) = (0.0, 0.0, 0.0);
    for c in 0..k {
        for c2 in 0..k {
            let d = table[c * k + c2];
            if d != 0.0 {
                observed += coinc.counts[c * k + c2] * d;
                expected += coinc.marginals[c] * coinc.marginals[c2] * d;
                sum_delta += d;
            }
        }
    }
    let d_observed = observed / n;
    let d_expected = expected / (n * (n - 1.0));
    let off_diagonal = (k * k).saturating_sub(k);
    let mean_delta = if off_diagonal == 0 { 0.0 } else { sum_delta / off_diagonal as f64 };
    if mean_delta <= 0.0 || d_expected <= NO_VARIATION_TOLERANCE * mean_delta {
        return Err(AlphaError::NoVariation);
    }
    Ok(AlphaResult {
        alpha: 1.0 - d_observed / d_expected,
        d_observed,
        d_expected,
        pairable_values: n,
    })
}
