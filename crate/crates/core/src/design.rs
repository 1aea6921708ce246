//! Study planning: bootstrap and corpus sizes, first-order prediction of the
//! alpha change caused by one substitution, and annotator group-size
//! selection with the L-method.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{coincidences, delta_table, krippendorff_alpha};
use crate::error::{AlphaError, DesignError};
use crate::matrix::AnnotationMatrix;
use crate::substitution::{substitute, CandidateAnnotations, SubstitutionGroup};

/// Slack applied before taking ceilings, so values like `3.0000000000000004`
/// do not round up to the next integer.
const CEIL_SLACK: f64 = 1e-9;

/// Minimum sizes for a substitution study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub z: f64,
    pub alpha_min: f64,
    pub p_c: f64,
    /// Items per bootstrap sample.
    #[serde(rename = "N_min")]
    pub sample_min: usize,
    /// Items in the corpus, `ceil(2.5 * N_min)`.
    #[serde(rename = "n_min")]
    pub corpus_min: usize,
}

fn ceil_with_slack(x: f64) -> usize {
    (x - CEIL_SLACK * x.abs().max(1.0)).ceil() as usize
}

/// Bloch–Kraemer bootstrap sample size, and the corpus size for which that
/// sample is 40% of the items.
///
/// `z` enters the formula as given (squared); it is not converted from a
/// confidence level.
pub fn sample_size(z: f64, alpha_min: f64, p_c: f64) -> Result<StudyPlan, DesignError> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(DesignError::Parameter(format!("z must be positive, got {z}")));
    }
    if !(0.0..1.0).contains(&alpha_min) {
        return Err(DesignError::Parameter(format!("alpha_min must be in [0, 1), got {alpha_min}")));
    }
    if !(p_c > 0.0 && p_c < 1.0) {
        return Err(DesignError::Parameter(format!("p_c must be in (0, 1), got {p_c}")));
    }
    let raw = z * z * ((1.0 + alpha_min) * (3.0 - alpha_min))
        / (4.0 * (1.0 - alpha_min) * p_c * (1.0 - p_c));
    let sample_min = ceil_with_slack(raw).max(1);
    let corpus_min = ceil_with_slack(2.5 * sample_min as f64);
    Ok(StudyPlan {
        z,
        alpha_min,
        p_c,
        sample_min,
        corpus_min,
    })
}

/// First-order estimate of the alpha change from one substitution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaChangeEstimate {
    pub delta_d_o: f64,
    pub delta_d_e: f64,
    pub delta_alpha: f64,
    /// `alpha(result) - alpha(base)`, when both are defined.
    pub exact_delta_alpha: Option<f64>,
}

/// Predicts `Δα ≈ -ΔD_o / D_e + (D_o / D_e²) ΔD_e` for a substitution.
///
/// `ΔD_o = (2 / n..) Σ_k (d̄_new,k - d̄_old,k)`, where `d̄` is the mean
/// difference between the replaced annotator's label and the other present
/// labels on item `k`; for a dense matrix `n.. = n · i`. Items where the
/// annotator is absent or alone contribute nothing. `ΔD_e` is the first-order
/// change of the expected disagreement under the exact marginal shift `Δp`,
/// `2 n../(n.. - 1) Σ_{c,c'} p_c Δp_c' δ(c, c')`, which for the nominal
/// metric is `-2 Σ_c p_c Δp_c` up to the finite-sample factor. Differences
/// use the base matrix's metric throughout.
pub fn predict_alpha_change(
    base: &AnnotationMatrix,
    group: &SubstitutionGroup,
) -> Result<AlphaChangeEstimate, DesignError> {
    let base_alpha = krippendorff_alpha(base)?;
    let coinc = coincidences(base)?;
    let k = base.alphabet().len();
    let table = delta_table(base.scale(), base.alphabet(), coinc.marginals());
    let delta = |c: usize, c2: usize| table[c * k + c2];
    let total = coinc.total();
    let r = group.annotator_index;

    let mut disagreement_shift = 0.0;
    let mut marginal_shift = vec![0.0; k];
    for item in 0..base.n_items() {
        let (Some(old), Some(new)) = (base.get(item, r), group.result.get(item, r)) else {
            continue;
        };
        let others: Vec<usize> = base
            .row(item)
            .iter()
            .enumerate()
            .filter(|&(a, c)| a != r && c.is_some())
            .map(|(_, c)| c.unwrap().index())
            .collect();
        if others.is_empty() {
            continue;
        }
        let m = others.len() as f64;
        let d_old: f64 = others.iter().map(|&o| delta(old.index(), o)).sum::<f64>() / m;
        let d_new: f64 = others.iter().map(|&o| delta(new.index(), o)).sum::<f64>() / m;
        disagreement_shift += d_new - d_old;
        marginal_shift[old.index()] -= 1.0;
        marginal_shift[new.index()] += 1.0;
    }

    let delta_d_o = 2.0 * disagreement_shift / total;
    let p: Vec<f64> = coinc.marginals().iter().map(|n| n / total).collect();
    let dp: Vec<f64> = marginal_shift.iter().map(|n| n / total).collect();
    let mut first_order = 0.0;
    for c in 0..k {
        for c2 in 0..k {
            first_order += p[c] * dp[c2] * delta(c, c2);
        }
    }
    let delta_d_e = 2.0 * total / (total - 1.0) * first_order;

    let (d_o, d_e) = (base_alpha.d_observed, base_alpha.d_expected);
    let delta_alpha = -delta_d_o / d_e + d_o / (d_e * d_e) * delta_d_e;
    let exact_delta_alpha = krippendorff_alpha(&group.result).ok().map(|a| a.alpha - base_alpha.alpha);
    Ok(AlphaChangeEstimate {
        delta_d_o,
        delta_d_e,
        delta_alpha,
        exact_delta_alpha,
    })
}

/// Mean absolute alpha change over a full substitution sweep, for a seeded
/// random annotator subset of each requested size.
pub fn group_size_curve(
    population: &AnnotationMatrix,
    sizes: &[usize],
    candidate: &CandidateAnnotations,
    seed: u64,
) -> Result<Vec<(usize, f64)>, DesignError> {
    for &size in sizes {
        if size < 2 || size > population.n_annotators() {
            return Err(DesignError::SizeTooLarge {
                size,
                available: population.n_annotators(),
            });
        }
    }
    sizes
        .par_iter()
        .map(|&size| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(size as u64);
            let members = sample_annotators(population, size, &mut rng);
            let base = population.restrict_annotators(&members)?;
            let base_alpha = defined_or_none(krippendorff_alpha(&base))?;
            let mut total = 0.0;
            for a in &members {
                let g = substitute(&base, a, candidate)?;
                let after = defined_or_none(krippendorff_alpha(&g.result))?;
                total += match (base_alpha, after) {
                    (Some(x), Some(y)) => (y - x).abs(),
                    (None, None) => 0.0,
                    _ => return Err(AlphaError::NoVariation.into()),
                };
            }
            Ok((size, total / size as f64))
        })
        .collect()
}

fn defined_or_none(r: Result<crate::alpha::AlphaResult, AlphaError>) -> Result<Option<f64>, DesignError> {
    match r {
        Ok(a) => Ok(Some(a.alpha)),
        Err(AlphaError::NoVariation) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn sample_annotators(m: &AnnotationMatrix, size: usize, rng: &mut ChaCha20Rng) -> BTreeSet<String> {
    let mut pool: Vec<usize> = (0..m.n_annotators()).collect();
    for i in 0..size {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool[..size].iter().map(|&a| m.annotators()[a].clone()).collect()
}

/// Result of the L-method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub curve: Vec<(f64, f64)>,
    /// Number of points in the left segment of the best split; equivalently
    /// the zero-based position of the first point of the right segment.
    pub elbow_index: usize,
    /// `x` at `curve[elbow_index]`.
    pub elbow_x: f64,
    /// `(split, weighted RMSE)` for every admissible split.
    pub split_errors: Vec<(usize, f64)>,
    /// Every split scored the same; no elbow exists.
    pub degenerate: bool,
}

/// Root-mean-square residual of the least-squares line through `points`.
pub fn line_fit_rmse(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() <= 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (my + slope * (p.0 - mx));
            r * r
        })
        .sum();
    (sse / n).sqrt()
}

/// Picks the split minimising `(s/n)·RMSE_left + ((n-s)/n)·RMSE_right`, with
/// each segment holding at least two points. Ties go to the smaller split.
pub fn l_method_elbow(curve: &[(f64, f64)]) -> Result<ElbowResult, DesignError> {
    let n = curve.len();
    if n < 4 {
        return Err(DesignError::CurveTooShort(n));
    }
    if curve.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(DesignError::CurveOrder);
    }
    let split_errors: Vec<(usize, f64)> = (2..=n - 2)
        .map(|s| {
            let left = line_fit_rmse(&curve[..s]);
            let right = line_fit_rmse(&curve[s..]);
            (s, (s as f64 * left + (n - s) as f64 * right) / n as f64)
        })
        .collect();

    let (ymin, ymax) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let tol = 1e-9 * (ymax - ymin).max(f64::MIN_POSITIVE);
    let mut best = split_errors[0];
    for &(s, e) in &split_errors[1..] {
        if e < best.1 - tol {
            best = (s, e);
        }
    }
    let worst = split_errors.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let lowest = split_errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok(ElbowResult {
        curve: curve.to_vec(),
        elbow_index: best.0,
        elbow_x: curve[best.0].0,
        split_errors,
        degenerate: worst - lowest <= tol,
    })
}
