//! Equivalence margin and the two one-sided t-tests (TOST).

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_alphas, ResamplingSchedule};
use crate::error::{EquivalenceError, Error};
use crate::matrix::{AnnotationMatrix, GroupAssignment};
use crate::tdist::{t_cdf, t_sf};

/// Margins below this are flagged as degenerate in reports.
pub const DEGENERATE_MARGIN: f64 = 1e-4;

/// Standard errors at or below this (relative to the means) count as zero spread.
const ZERO_SPREAD: f64 = 1e-14;

pub const DEFAULT_SIG_LEVEL: f64 = 0.05;
pub const DEFAULT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceMargin {
    pub delta: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub fraction: f64,
}

impl EquivalenceMargin {
    /// `|alpha_a - alpha_b| * fraction`.
    pub fn new(alpha_a: f64, alpha_b: f64, fraction: f64) -> Result<Self, EquivalenceError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(EquivalenceError::Fraction(fraction));
        }
        Ok(Self {
            delta: (alpha_a - alpha_b).abs() * fraction,
            alpha_a,
            alpha_b,
            fraction,
        })
    }

    /// A margin given directly, with no group provenance.
    pub fn fixed(delta: f64) -> Result<Self, EquivalenceError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(EquivalenceError::Margin);
        }
        Ok(Self {
            delta,
            alpha_a: f64::NAN,
            alpha_b: f64::NAN,
            fraction: 1.0,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta < DEGENERATE_MARGIN
    }
}

/// Margin from the mean bootstrap alpha of the two human groups under a
/// shared schedule.
pub fn estimate_margin(
    matrix: &AnnotationMatrix,
    groups: &GroupAssignment,
    fraction: f64,
    schedule: &ResamplingSchedule,
) -> Result<EquivalenceMargin, EquivalenceError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EquivalenceError::Fraction(fraction));
    }
    let group_mean = |members, name: char| -> Result<f64, EquivalenceError> {
        let wrap = |e: Error| EquivalenceError::Group {
            group: name,
            source: Box::new(e),
        };
        let sub = matrix.restrict_annotators(members).map_err(|e| wrap(e.into()))?;
        let dist = bootstrap_alphas(&sub, schedule).map_err(|e| wrap(e.into()))?;
        Ok(dist.mean())
    };
    let alpha_a = group_mean(groups.group_a(), 'A')?;
    let alpha_b = group_mean(groups.group_b(), 'B')?;
    EquivalenceMargin::new(alpha_a, alpha_b, fraction)
}

/// Result of the two one-sided tests.
///
/// `t1 = (x1 - x2 - Δ) / se` tests the upper bound and `t2 = (x1 - x2 + Δ) / se`
/// the lower bound. `p1` is the p-value of the lower-bound test
/// (`H0: x1 - x2 <= -Δ`, `p1 = P(T >= t2)`) and `p2` that of the upper-bound
/// test (`H0: x1 - x2 >= Δ`, `p2 = P(T <= t1)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostOutcome {
    /// Mean alpha of the pooled substituted sample.
    pub x1: f64,
    /// Mean alpha of the human sample.
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
    pub p1: f64,
    pub p2: f64,
    pub df: usize,
    pub n1: usize,
    pub n2: usize,
    pub s_pooled: f64,
    pub margin: EquivalenceMargin,
    pub equivalent: bool,
    pub sig_level: f64,
}

impl TostOutcome {
    /// Headline p-value, `max(p1, p2)`.
    pub fn p_value(&self) -> f64 {
        self.p1.max(self.p2)
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Pooled-variance TOST of `substituted` (all substitution groups pooled)
/// against `human`.
pub fn tost(
    substituted: &[f64],
    human: &[f64],
    margin: &EquivalenceMargin,
    sig_level: f64,
) -> Result<TostOutcome, EquivalenceError> {
    if !(sig_level > 0.0 && sig_level < 1.0) {
        return Err(EquivalenceError::SigLevel(sig_level));
    }
    if !(margin.delta >= 0.0 && margin.delta.is_finite()) {
        return Err(EquivalenceError::Margin);
    }
    let (n1, n2) = (substituted.len(), human.len());
    if n1 < 2 || n2 < 2 {
        return Err(EquivalenceError::TooFewValues {
            substituted: n1,
            human: n2,
        });
    }
    let (x1, v1) = mean_var(substituted);
    let (x2, v2) = mean_var(human);
    let df = n1 + n2 - 2;
    let s_pooled = (((n1 - 1) as f64 * v1 + (n2 - 1) as f64 * v2) / df as f64).sqrt();
    let se = s_pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();
    let diff = x1 - x2;
    let delta = margin.delta;
    let t1 = (diff - delta) / se;
    let t2 = (diff + delta) / se;

    let spread_floor = ZERO_SPREAD * x1.abs().max(x2.abs()).max(1.0);
    let (p1, p2) = if se > spread_floor {
        (t_sf(t2, df as f64), t_cdf(t1, df as f64))
    } else if diff == 0.0 && delta > 0.0 {
        (0.0, 0.0)
    } else {
        // No spread: decide the bounds exactly.
        let lower = if diff > -delta { 0.0 } else { 1.0 };
        let upper = if diff < delta { 0.0 } else { 1.0 };
        (lower, upper)
    };
    Ok(TostOutcome {
        x1,
        x2,
        t1,
        t2,
        p1,
        p2,
        df,
        n1,
        n2,
        s_pooled,
        margin: *margin,
        equivalent: p1 < sig_level && p2 < sig_level,
        sig_level,
    })
}
