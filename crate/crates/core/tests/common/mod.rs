//! Independent reference implementations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the code under test except
//! to build inputs.

#![allow(dead_code)]

use annoteq::matrix::{Alphabet, AnnotationMatrix, Label, Scale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Alpha from explicit pair enumeration, or `None` when no variation exists.
///
/// `D_o` averages `δ` over the ordered pairs of distinct slots within each
/// item (weighted by `1/(m_k - 1)`); `D_e` averages it over all ordered
/// pairs of distinct pairable values, regardless of item.
pub fn alpha_oracle(rows: &[Vec<Option<usize>>], scale: Scale, values: &[f64]) -> Option<f64> {
    let pairable: Vec<&Vec<Option<usize>>> = rows
        .iter()
        .filter(|r| r.iter().flatten().count() >= 2)
        .collect();
    let pool: Vec<usize> = pairable.iter().flat_map(|r| r.iter().flatten().copied()).collect();
    let n = pool.len() as f64;
    if n == 0.0 {
        return None;
    }
    let mut counts = vec![0.0; values.len()];
    for &c in &pool {
        counts[c] += 1.0;
    }
    let diff = |a: usize, b: usize| -> f64 {
        if a == b {
            return 0.0;
        }
        match scale {
            Scale::Nominal => 1.0,
            Scale::Interval => (values[a] - values[b]).powi(2),
            Scale::Ordinal => {
                let (lo, hi) = (a.min(b), a.max(b));
                let between: f64 = counts[lo..=hi].iter().sum();
                (between - (counts[a] + counts[b]) / 2.0).powi(2)
            }
        }
    };

    let mut observed = 0.0;
    for r in &pairable {
        let present: Vec<usize> = r.iter().flatten().copied().collect();
        let m = present.len() as f64;
        for (u, &a) in present.iter().enumerate() {
            for (v, &b) in present.iter().enumerate() {
                if u != v {
                    observed += diff(a, b) / (m - 1.0);
                }
            }
        }
    }
    let mut expected = 0.0;
    for (u, &a) in pool.iter().enumerate() {
        for (v, &b) in pool.iter().enumerate() {
            if u != v {
                expected += diff(a, b);
            }
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if pool.iter().all(|&c| c == pool[0]) {
        return None;
    }
    Some(1.0 - d_o / d_e)
}

/// A small random matrix with its raw rows and label magnitudes.
pub struct RandomMatrix {
    pub rows: Vec<Vec<Option<usize>>>,
    pub values: Vec<f64>,
    pub matrix: AnnotationMatrix,
}

/// Up to 5 annotators, 10 items and 4 labels, about 20% of cells missing.
/// Interval labels get random distinct magnitudes.
pub fn random_matrix(seed: u64, scale: Scale) -> RandomMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let i = rng.random_range(2..=5);
        let n = rng.random_range(1..=10);
        let k = rng.random_range(2..=4);
        let mut values: Vec<f64> = Vec::new();
        while values.len() < k {
            let v = (rng.random_range(-40..=40) as f64) / 4.0;
            if !values.contains(&v) {
                values.push(v);
            }
        }
        values.sort_by(f64::total_cmp);
        let rows: Vec<Vec<Option<usize>>> = (0..n)
            .map(|_| {
                (0..i)
                    .map(|_| (!rng.random_bool(0.2)).then(|| rng.random_range(0..k)))
                    .collect()
            })
            .collect();
        if !rows.iter().any(|r| r.iter().flatten().count() >= 2) {
            continue;
        }
        let alphabet = Alphabet::new(values.iter().map(|v| v.to_string()).collect()).unwrap();
        let cells = rows
            .iter()
            .flat_map(|r| r.iter().map(|c| c.map(|x| Label(x as u32))))
            .collect();
        let matrix = AnnotationMatrix::new(
            scale,
            alphabet,
            (0..n).map(|x| format!("m{x}")).collect(),
            (0..i).map(|x| format!("a{x}")).collect(),
            cells,
        )
        .unwrap();
        return RandomMatrix { rows, values, matrix };
    }
}

/// Student t density, normalised through `Γ((ν+1)/2)/Γ(ν/2)` obtained by
/// the recursion `r(ν+2) = r(ν)·(ν+1)/ν` from `r(1) = 1/√π`, `r(2) = √π/2`.
pub fn t_density(x: f64, df: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let mut r = if df % 2 == 1 { 1.0 / pi.sqrt() } else { pi.sqrt() / 2.0 };
    let mut nu = if df % 2 == 1 { 1 } else { 2 };
    while nu < df {
        r *= (nu as f64 + 1.0) / nu as f64;
        nu += 2;
    }
    let v = df as f64;
    r / (v * pi).sqrt() * (-(v + 1.0) / 2.0 * (x * x / v).ln_1p()).exp()
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(T <= t)` by integrating the density from 0.
pub fn t_cdf_oracle(t: f64, df: u32) -> f64 {
    let half = integrate(|x| t_density(x, df), 0.0, t.abs(), 1e-14);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Two-line fit score of every admissible split, computed from the normal
/// equations with no shared code.
pub fn elbow_oracle(curve: &[(f64, f64)]) -> (usize, Vec<f64>) {
    fn rmse(p: &[(f64, f64)]) -> f64 {
        let n = p.len() as f64;
        let (sx, sy) = p.iter().fold((0.0, 0.0), |(a, b), q| (a + q.0, b + q.1));
        let (sxx, sxy) = p.iter().fold((0.0, 0.0), |(a, b), q| (a + q.0 * q.0, b + q.0 * q.1));
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let icept = (sy - slope * sx) / n;
        (p.iter().map(|q| (q.1 - icept - slope * q.0).powi(2)).sum::<f64>() / n).sqrt()
    }
    let n = curve.len();
    let scores: Vec<f64> = (2..=n - 2)
        .map(|s| (s as f64 * rmse(&curve[..s]) + (n - s) as f64 * rmse(&curve[s..])) / n as f64)
        .collect();
    let mut best = 0;
    for (j, &e) in scores.iter().enumerate() {
        if e < scores[best] {
            best = j;
        }
    }
    (best + 2, scores)
}

/// `y = c / x` at `x = 2..=40` plus seeded Gaussian-ish noise.
pub fn noisy_reciprocal(seed: u64, noise: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (2..=40)
        .map(|x| {
            let e: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
            (x as f64, 1.0 / x as f64 + noise * e)
        })
        .collect()
}
