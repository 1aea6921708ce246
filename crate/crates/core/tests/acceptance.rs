//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p annoteq --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use annoteq::alpha::krippendorff_alpha;
use annoteq::bootstrap::{bootstrap_alphas, make_schedule};
use annoteq::design::{l_method_elbow, predict_alpha_change, sample_size};
use annoteq::equivalence::{tost, EquivalenceMargin};
use annoteq::error::AlphaError;
use annoteq::matrix::{filter_dataset, load_long_format, AnnotationMatrix, GroupAssignment, Scale};
use annoteq::pipeline::{run_evaluate, CandidateSource, EvaluateSettings, SampleSize};
use annoteq::substitution::{substitute, CandidateAnnotations};
use annoteq::synth::{annotate, generate_task, CueModelAnnotator, PopulationSpec};
use annoteq::tdist::t_cdf;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// First and second halves of the annotator list as groups A and B.
fn split_halves(m: &AnnotationMatrix, size: usize) -> GroupAssignment {
    let ids = m.annotators();
    GroupAssignment::new(
        ids[..size].iter().cloned().collect::<BTreeSet<_>>(),
        ids[size..2 * size].iter().cloned().collect::<BTreeSet<_>>(),
    )
    .unwrap()
}

fn c1_sample_size() -> Outcome {
    let p = sample_size(0.95, 0.8, 0.17).unwrap();
    check(
        p.sample_min == 32 && p.corpus_min == 80,
        format!("N = {}, n = {} (expected 32, 80)", p.sample_min, p.corpus_min),
    )
}

fn c2_alpha_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mismatched_definedness = 0;
    let mut count = 0;
    for (s, scale) in [Scale::Nominal, Scale::Ordinal, Scale::Interval].into_iter().enumerate() {
        for seed in 0..1000u64 {
            let r = common::random_matrix(seed * 3 + s as u64, scale);
            let got = krippendorff_alpha(&r.matrix).ok().map(|a| a.alpha);
            let want = common::alpha_oracle(&r.rows, scale, &r.values);
            count += 1;
            match (got, want) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => mismatched_definedness += 1,
            }
        }
    }
    check(
        worst <= 1e-12 && mismatched_definedness == 0,
        format!("{count} matrices, max |Δ| = {worst:.2e}, definedness mismatches = {mismatched_definedness}"),
    )
}

fn c3_trivial_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut unanimous_ok = 0;
    let mut single_ok = 0;
    for seed in 0..50u64 {
        for scale in [Scale::Nominal, Scale::Ordinal, Scale::Interval] {
            // Unanimous per item, at least two labels across items.
            let r = common::random_matrix(10_000 + seed, scale);
            let k = r.values.len();
            let rows: Vec<Vec<Option<usize>>> = r
                .rows
                .iter()
                .enumerate()
                .map(|(j, row)| row.iter().map(|c| c.map(|_| j % k)).collect())
                .collect();
            let n = rows.len().max(2);
            let mut rows = rows;
            while rows.len() < n {
                rows.push(vec![Some(1); rows[0].len()]);
            }
            rows[0] = vec![Some(0); rows[0].len()];
            rows[1] = vec![Some(1); rows[1].len()];
            let m = build(&rows, &r.values, scale);
            if krippendorff_alpha(&m).map(|a| a.alpha) == Ok(1.0) {
                unanimous_ok += 1;
            }
            let label = rng.random_range(0..k);
            let single: Vec<Vec<Option<usize>>> = r
                .rows
                .iter()
                .map(|row| row.iter().map(|c| c.map(|_| label)).collect())
                .collect();
            let m = build(&single, &r.values, scale);
            if krippendorff_alpha(&m) == Err(AlphaError::NoVariation) {
                single_ok += 1;
            }
        }
    }

    let task = generate_task(60, 4, 5, 9);
    let base = PopulationSpec::new(4, 0.4, 1.0)
        .population_matrix(&task, 7, 0.25, Scale::Ordinal, 9)
        .unwrap();
    let mut worst: f64 = 0.0;
    for scale in [Scale::Nominal, Scale::Ordinal, Scale::Interval] {
        let m = base.with_scale(scale).unwrap();
        let a0 = krippendorff_alpha(&m).unwrap().alpha;
        for _ in 0..100 {
            let mut items: Vec<usize> = (0..m.n_items()).collect();
            let mut annots: Vec<usize> = (0..m.n_annotators()).collect();
            items.shuffle(&mut rng);
            annots.shuffle(&mut rng);
            let a = krippendorff_alpha(&m.select(&items, &annots).unwrap()).unwrap().alpha;
            worst = worst.max((a - a0).abs());
        }
    }
    check(
        unanimous_ok == 150 && single_ok == 150 && worst <= 1e-12,
        format!(
            "unanimous α=1: {unanimous_ok}/150, single-label no-variation: {single_ok}/150, \
             300 shuffles max |Δα| = {worst:.1e}"
        ),
    )
}

fn build(rows: &[Vec<Option<usize>>], values: &[f64], scale: Scale) -> AnnotationMatrix {
    use annoteq::matrix::{Alphabet, Label};
    AnnotationMatrix::new(
        scale,
        Alphabet::new(values.iter().map(|v| v.to_string()).collect()).unwrap(),
        (0..rows.len()).map(|k| format!("m{k}")).collect(),
        (0..rows[0].len()).map(|a| format!("a{a}")).collect(),
        rows.iter()
            .flat_map(|r| r.iter().map(|c| c.map(|x| Label(x as u32))))
            .collect(),
    )
    .unwrap()
}

fn c4_self_substitution() -> Outcome {
    let task = generate_task(100, 4, 5, 0);
    let m = PopulationSpec::new(4, 0.2, 0.3)
        .population_matrix(&task, 20, 0.0, Scale::Ordinal, 0)
        .unwrap();
    let groups = split_halves(&m, 10);
    let mut lines = Vec::new();
    let mut ok = true;
    for delta in [0.005, 0.01, 0.05] {
        let settings = EvaluateSettings {
            iterations: 300,
            sample_size: SampleSize::Fixed(40),
            trials: 10,
            seed: 0,
            margin: Some(delta),
            ..EvaluateSettings::default()
        };
        let r = run_evaluate(&m, &groups, &CandidateSource::SelfCopy, &settings).unwrap();
        let equivalent = r.trials.iter().filter(|t| t.candidate.equivalent).count();
        let max_p = r.trials.iter().map(|t| t.candidate.p_value).fold(0.0, f64::max);
        ok &= equivalent == 10 && max_p < 0.01;
        lines.push(format!("Δ={delta}: {equivalent}/10 equivalent, max p = {max_p:.1e}"));
    }
    check(ok, format!("human α ≈ {:.3}; {}", krippendorff_alpha(&m).unwrap().alpha, lines.join("; ")))
}

fn c5_random_control() -> Outcome {
    let task = generate_task(100, 4, 5, 0);
    let m = PopulationSpec::new(4, 0.3, 2.5)
        .population_matrix(&task, 20, 0.0, Scale::Ordinal, 0)
        .unwrap();
    let groups = split_halves(&m, 10);
    let settings = EvaluateSettings {
        iterations: 300,
        trials: 10,
        seed: 0,
        control: true,
        ..EvaluateSettings::default()
    };
    let r = run_evaluate(&m, &groups, &CandidateSource::SelfCopy, &settings).unwrap();
    let human = r.aggregate.human_alpha.mean;
    let separated = r
        .trials
        .iter()
        .filter(|t| {
            let rnd = t.random.as_ref().unwrap();
            rnd.substituted_alpha < t.human_alpha && rnd.p1 > 0.05
        })
        .count();
    let agg = r.aggregate.random.as_ref().unwrap();
    check(
        (0.15..=0.4).contains(&human) && separated >= 9 && agg.p1.mean > 0.05 && !agg.equivalent,
        format!(
            "human α = {}, random α = {}, trials below human with p1 > 0.05: {separated}/10, random p1 = {}",
            r.aggregate.human_alpha, agg.substituted_alpha, agg.p1
        ),
    )
}

fn c6_same_distribution() -> Outcome {
    let (cue_dim, size) = (6, 30);
    let mut same_pass = 0;
    let mut orthogonal_fail = 0;
    for seed in 0..10u64 {
        let task = generate_task(200, cue_dim, 5, seed);
        let mut spec = PopulationSpec::new(cue_dim, 0.1, 0.6);
        spec.noise_spread = 0.7;
        let m = spec.population_matrix(&task, 2 * size, 0.0, Scale::Ordinal, seed).unwrap();
        let groups = split_halves(&m, size);
        let same = annotate(&task, &spec.draw(9_999_000 + seed), 0.0);
        let orthogonal = annotate(
            &task,
            &CueModelAnnotator::orthogonal_to(&spec.common_weights, spec.noise_sd, 7_000 + seed),
            0.0,
        );
        let settings = EvaluateSettings {
            iterations: 300,
            trials: 3,
            seed,
            fraction: 0.5,
            ..EvaluateSettings::default()
        };
        let r = run_evaluate(&m, &groups, &CandidateSource::Annotations(same), &settings).unwrap();
        let o = run_evaluate(&m, &groups, &CandidateSource::Annotations(orthogonal), &settings).unwrap();
        same_pass += r.equivalent() as usize;
        orthogonal_fail += !o.equivalent() as usize;
    }
    check(
        same_pass >= 8 && orthogonal_fail >= 8,
        format!("same-distribution equivalent {same_pass}/10, orthogonal not equivalent {orthogonal_fail}/10"),
    )
}

fn c7_first_order() -> Outcome {
    let (n, k) = (200usize, 4usize);
    let changed = n / 20;
    let mut bound_violations = 0;
    let mut err_full = 0.0;
    let mut err_half = 0.0;
    for seed in 0..20u64 {
        let task = generate_task(n, 4, k, seed);
        let m = PopulationSpec::new(4, 0.3, 1.0)
            .population_matrix(&task, 20, 0.0, Scale::Nominal, seed)
            .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = rng.random_range(0..m.n_annotators());
        let id = m.annotators()[a].clone();
        let mut items: Vec<usize> = (0..n).collect();
        items.shuffle(&mut rng);
        let original = CandidateAnnotations::from_annotator(&m, &id).unwrap();
        let mut full = original.clone();
        let mut half = original;
        for (j, &item) in items[..changed].iter().enumerate() {
            let current = m.get(item, a).unwrap().index();
            let label = m.alphabet().labels()[(current + rng.random_range(1..k)) % k].clone();
            if j < changed / 2 {
                half.labels.insert(m.items()[item].clone(), label.clone());
            }
            full.labels.insert(m.items()[item].clone(), label);
        }
        for (candidate, total) in [(&full, &mut err_full), (&half, &mut err_half)] {
            let g = substitute(&m, &id, candidate).unwrap();
            let est = predict_alpha_change(&m, &g).unwrap();
            let exact = est.exact_delta_alpha.unwrap();
            let err = (est.delta_alpha - exact).abs();
            if err > f64::max(1e-3, 0.25 * exact.abs()) {
                bound_violations += 1;
            }
            *total += err;
        }
    }
    let ratio = err_half / err_full;
    check(
        bound_violations == 0 && ratio <= 0.5,
        format!(
            "bound violations {bound_violations}/40, mean error {:.2e} (5%) vs {:.2e} (2.5%), ratio {ratio:.3}",
            err_full / 20.0,
            err_half / 20.0
        ),
    )
}

fn c8_elbow() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut exact_ok = 0;
    let mut exact_total = 0;
    for _ in 0..200 {
        let n = rng.random_range(6..40);
        let v = rng.random_range(2..=n - 2);
        let (s1, s2) = (rng.random_range(-5.0..-1.0), rng.random_range(-0.5..0.5));
        let jump = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(1.0..3.0) };
        let curve: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = i as f64;
                let vx = v as f64;
                let y = if i < v {
                    10.0 + s1 * (x - vx)
                } else {
                    10.0 - jump + s2 * (x - vx)
                };
                (x, y)
            })
            .collect();
        exact_total += 1;
        if l_method_elbow(&curve).unwrap().elbow_index == v {
            exact_ok += 1;
        }
    }
    let mut near = 0;
    for seed in 0..20u64 {
        let curve = common::noisy_reciprocal(seed, 0.01);
        let (oracle, _) = common::elbow_oracle(&curve);
        let got = l_method_elbow(&curve).unwrap().elbow_index;
        if got.abs_diff(oracle) <= 1 {
            near += 1;
        }
    }
    check(
        exact_ok == exact_total && near == 20,
        format!("piecewise-linear breakpoints recovered {exact_ok}/{exact_total}; noisy 1/x within ±1 of oracle {near}/20"),
    )
}

fn c9_bootstrap_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut identical = true;
    for seed in 0..10u64 {
        let task = generate_task(100, 4, 5, seed);
        let noise = [0.3, 0.8, 1.5, 2.5][seed as usize % 4];
        let m = PopulationSpec::new(4, 0.3, noise)
            .population_matrix(&task, 12, 0.1, Scale::Ordinal, seed)
            .unwrap();
        let full = krippendorff_alpha(&m).unwrap().alpha;
        let schedule = make_schedule(100, 300, 40, seed).unwrap();
        let again = make_schedule(100, 300, 40, seed).unwrap();
        let bytes = |s: &annoteq::ResamplingSchedule| serde_json::to_vec(s.indices()).unwrap();
        identical &= bytes(&schedule) == bytes(&again);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bootstrap_alphas(&m, &schedule).unwrap())
        };
        let (one, many) = (run(1), run(4));
        identical &= one.values.iter().map(|v| v.to_bits()).eq(many.values.iter().map(|v| v.to_bits()));
        worst = worst.max((one.mean() - full).abs());
    }
    check(
        worst <= 0.02 && identical,
        format!("max |mean bootstrap α - full α| = {worst:.4}; schedules and values identical across reruns and 1/4 threads: {identical}"),
    )
}

fn c10_tost_numerics() -> Outcome {
    let mut worst: f64 = 0.0;
    for df in [1u32, 2, 5, 30, 1000] {
        for j in 0..=200 {
            let t = -10.0 + j as f64 * 0.1;
            worst = worst.max((t_cdf(t, df as f64) - common::t_cdf_oracle(t, df)).abs());
        }
    }
    let cauchy = (t_cdf(1.0, 1.0) - 0.75).abs();

    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut symmetry_bad = 0;
    let mut monotone_bad = 0;
    for _ in 0..1000 {
        let n1 = rng.random_range(2..40);
        let n2 = rng.random_range(2..40);
        let shift = rng.random_range(-0.1..0.1);
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0.2..0.4) + shift).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0.2..0.4)).collect();
        let d1 = rng.random_range(0.0..0.2);
        let d2 = d1 + rng.random_range(0.0..0.2);
        let m1 = EquivalenceMargin::fixed(d1).unwrap();
        let m2 = EquivalenceMargin::fixed(d2).unwrap();
        let ab = tost(&a, &b, &m1, 0.05).unwrap();
        let ba = tost(&b, &a, &m1, 0.05).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
        if !(close(ab.p1, ba.p2) && close(ab.p2, ba.p1) && ab.equivalent == ba.equivalent) {
            symmetry_bad += 1;
        }
        let wider = tost(&a, &b, &m2, 0.05).unwrap();
        if wider.p1 > ab.p1 + 1e-15 || wider.p2 > ab.p2 + 1e-15 || (ab.equivalent && !wider.equivalent) {
            monotone_bad += 1;
        }
    }
    check(
        worst <= 1e-8 && cauchy <= 1e-12 && symmetry_bad == 0 && monotone_bad == 0,
        format!(
            "grid max |Δ| = {worst:.1e}; |t_cdf(1,1) - 0.75| = {cauchy:.1e}; \
             symmetry violations {symmetry_bad}/1000; monotonicity violations {monotone_bad}/1000"
        ),
    )
}

/// Runs only when the released data are provided through environment
/// variables (long-format files).
fn c11_dataset_reproduction() -> Outcome {
    let vars = [
        "ANNOTEQ_MOVIELENS_HUMAN",
        "ANNOTEQ_MOVIELENS_CANDIDATE",
        "ANNOTEQ_POLITIFACT_HUMAN",
        "ANNOTEQ_POLITIFACT_CANDIDATE",
    ];
    let paths: Vec<Option<String>> = vars.iter().map(|v| std::env::var(v).ok()).collect();
    if paths.iter().any(Option::is_none) {
        return Outcome::Skip(format!("dataset files not provided (set {})", vars.join(", ")));
    }
    let run = |human: &str, candidate: &str, scale: Scale, group_size: usize| {
        let raw = load_long_format(std::fs::File::open(human).unwrap(), scale).unwrap();
        let (m, groups) = filter_dataset(&raw, group_size, 80, 2).unwrap();
        let cand = CandidateAnnotations::from_long_format(std::fs::File::open(candidate).unwrap()).unwrap();
        let settings = EvaluateSettings {
            iterations: 300,
            trials: 10,
            control: true,
            ..EvaluateSettings::default()
        };
        run_evaluate(&m, &groups, &CandidateSource::Annotations(cand), &settings).unwrap()
    };
    let p = |i: usize| paths[i].as_deref().unwrap();
    let movielens = run(p(0), p(1), Scale::Interval, 19);
    let politifact = run(p(2), p(3), Scale::Ordinal, 43);
    let human = movielens.aggregate.human_alpha.mean;
    let headline = movielens.aggregate.candidate.headline_p;
    check(
        (human - 0.199).abs() <= 0.01
            && movielens.equivalent()
            && (0.0005..=0.05).contains(&headline)
            && !politifact.equivalent(),
        format!(
            "MovieLens human α = {human:.3}, equivalent = {}, p = {headline:.4}; PolitiFact equivalent = {}, p = {:.4}",
            movielens.equivalent(),
            politifact.equivalent(),
            politifact.aggregate.candidate.headline_p
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("sample-size reproduction", c1_sample_size),
        ("alpha oracle equivalence", c2_alpha_oracle),
        ("alpha trivial suite", c3_trivial_suite),
        ("self-substitution calibration", c4_self_substitution),
        ("random-control separation", c5_random_control),
        ("same-distribution candidate", c6_same_distribution),
        ("first-order alpha change", c7_first_order),
        ("elbow correctness", c8_elbow),
        ("paired-bootstrap fidelity", c9_bootstrap_fidelity),
        ("TOST numerics", c10_tost_numerics),
        ("dataset reproduction", c11_dataset_reproduction),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{:>2}] {name} ({secs:.1}s): {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
