use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use annoteq::design::{group_size_curve, l_method_elbow, sample_size, ElbowResult};
use annoteq::matrix::{filter_dataset, load_long_format, read_long_rows, AnnotationMatrix, GroupAssignment, Scale};
use annoteq::pipeline::{
    control_seed, write_annotator_shift_csv, write_label_distribution_csv, write_p_vs_b_csv, write_trials_csv,
};
use annoteq::substitution::random_candidate_with;
use annoteq::synth::{annotate, generate_task, CueModelAnnotator, PopulationSpec};
use annoteq::{krippendorff_alpha, random_candidate, run_evaluate, CandidateAnnotations, CandidateSource, EvaluateSettings};
use serde::Serialize;

use crate::config::{pick, require, FileConfig};
use crate::fetch::{fetch_candidate, read_items, FetchSettings, PromptTemplate, TOKEN_ENV};
use crate::{
    AlphaArgs, DataArgs, ElbowArgs, EvaluateArgs, FetchArgs, PlanArgs, SynthArgs, UsageError, EQUIVALENT,
    NOT_EQUIVALENT,
};

const DEFAULT_MIN_ITEMS: usize = 40;
const DEFAULT_MIN_CODERS: usize = 2;

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Loads human annotations. Without an explicit scale, numeric labels are
/// read as interval data and anything else as nominal.
fn load_human(path: &Path, scale: Option<Scale>) -> Result<AnnotationMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scale = match scale {
        Some(s) => s,
        None => {
            let rows = read_long_rows(text.as_bytes()).with_context(|| format!("reading {}", path.display()))?;
            let numeric = rows.iter().all(|r| r.label.parse::<f64>().is_ok_and(f64::is_finite));
            let s = if numeric { Scale::Interval } else { Scale::Nominal };
            eprintln!("note: no scale given, using {s}");
            s
        }
    };
    load_long_format(text.as_bytes(), scale).with_context(|| format!("loading {}", path.display()))
}

fn human_input(data: &DataArgs, cfg: &FileConfig) -> Result<(PathBuf, AnnotationMatrix)> {
    let path = require(pick(data.human.clone(), cfg.data.human.clone()), "--human")?;
    let matrix = load_human(&path, pick(data.scale, cfg.data.scale))?;
    Ok((path, matrix))
}

fn read_candidate(path: &str) -> Result<CandidateAnnotations> {
    CandidateAnnotations::from_long_format(open(Path::new(path))?).with_context(|| format!("loading {path}"))
}

pub fn evaluate(args: EvaluateArgs) -> Result<u8> {
    let cfg = FileConfig::load_opt(args.data.config.as_deref())?;
    let (human_path, raw) = human_input(&args.data, &cfg)?;
    let candidate_arg = require(pick(args.candidate.clone(), cfg.data.candidate.clone()), "--candidate")?;
    let out = require(pick(args.out.clone(), cfg.evaluate.out.clone()), "--out")?;

    let e = &cfg.evaluate;
    let defaults = EvaluateSettings::default();
    let settings = EvaluateSettings {
        iterations: pick(args.iterations, e.iterations).unwrap_or(defaults.iterations),
        sample_size: pick(args.sample_size, e.sample_size).unwrap_or(defaults.sample_size),
        fraction: pick(args.fraction, e.fraction).unwrap_or(defaults.fraction),
        sig_level: pick(args.sig_level, e.sig_level).unwrap_or(defaults.sig_level),
        trials: pick(args.trials, e.trials).unwrap_or(defaults.trials),
        seed: pick(args.seed, e.seed).unwrap_or(defaults.seed),
        control: args.control || e.control.unwrap_or(false),
        random_labels: pick(args.random_labels, e.random_labels).unwrap_or(defaults.random_labels),
        b_sweep: pick(args.b_sweep.clone(), e.b_sweep.clone()).unwrap_or_default(),
        margin: pick(args.margin, e.margin),
    };
    settings.validate()?;

    let g = &cfg.groups;
    let explicit = (pick(args.group_a.clone(), g.a.clone()), pick(args.group_b.clone(), g.b.clone()));
    let group_size = pick(args.group_size, g.group_size);
    let (matrix, groups) = match (explicit, group_size) {
        ((Some(_), Some(_)), Some(_)) => {
            bail!(UsageError("give either explicit groups or a filter group size, not both".into()))
        }
        ((Some(a), Some(b)), None) => (raw, GroupAssignment::new(a, b).map_err(|e| UsageError(e.to_string()))?),
        ((None, None), Some(size)) => {
            let min_items = pick(args.min_items, g.min_items).unwrap_or(DEFAULT_MIN_ITEMS);
            let min_coders = pick(args.min_coders, g.min_coders).unwrap_or(DEFAULT_MIN_CODERS);
            let (m, groups) = filter_dataset(&raw, size, min_items, min_coders).context("filtering the dataset")?;
            eprintln!(
                "filter kept {} items and {} annotators per group",
                m.n_items(),
                groups.group_size()
            );
            (m, groups)
        }
        ((None, None), None) => {
            let groups = GroupAssignment::halves(&raw)?;
            (raw, groups)
        }
        _ => bail!(UsageError("group A and group B must be given together".into())),
    };

    let candidate = match candidate_arg.as_str() {
        "self" => CandidateSource::SelfCopy,
        path => CandidateSource::Annotations(read_candidate(path)?),
    };

    let mut report = run_evaluate(&matrix, &groups, &candidate, &settings)?;
    report.provenance.inputs = BTreeMap::from([
        ("human".to_string(), human_path.display().to_string()),
        ("candidate".to_string(), candidate_arg.clone()),
    ]);
    if let Some(c) = &args.data.config {
        report.provenance.inputs.insert("config".into(), c.display().to_string());
    }
    report.generated_at = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("report.json"), report.to_json() + "\n")?;
    write_trials_csv(&report, create(&out.join("trials.csv"))?)?;
    write_annotator_shift_csv(&report, create(&out.join("delta_alpha.csv"))?)?;
    if !settings.b_sweep.is_empty() {
        write_p_vs_b_csv(&report, create(&out.join("p_vs_B.csv"))?)?;
    }
    let group_a = matrix.restrict_annotators(groups.group_a())?;
    let control = settings
        .control
        .then(|| random_candidate_with(&group_a, control_seed(settings.seed), settings.random_labels));
    let mut sources: Vec<&CandidateAnnotations> = Vec::new();
    if let CandidateSource::Annotations(c) = &candidate {
        sources.push(c);
    }
    if let Some(c) = &control {
        sources.push(c);
    }
    write_label_distribution_csv(&matrix, &sources, create(&out.join("labels.csv"))?)?;

    print_summary(&report);
    Ok(if report.equivalent() { EQUIVALENT } else { NOT_EQUIVALENT })
}

fn print_summary(report: &annoteq::EvaluationReport) {
    let a = &report.aggregate;
    let p = &report.provenance;
    println!(
        "{} items, groups of {}, B = {}, N = {}, {} trials",
        p.n_items,
        p.group_a.len(),
        p.settings.iterations,
        p.sample_size,
        a.trials
    );
    println!("margin            {}", a.margin);
    println!("human alpha       {}", a.human_alpha);
    for (name, t) in [("candidate", Some(&a.candidate)), ("random", a.random.as_ref())] {
        let Some(t) = t else { continue };
        println!("{name:<10} alpha  {}", t.substituted_alpha);
        println!("{name:<10} p1     {}", t.p1);
        println!("{name:<10} p2     {}", t.p2);
        println!(
            "{name:<10} p = {:.4}, {} ({}/{} trials equivalent)",
            t.headline_p,
            if t.equivalent { "equivalent" } else { "not equivalent" },
            t.equivalent_trials,
            a.trials
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

pub fn plan(args: PlanArgs) -> Result<u8> {
    let cfg = FileConfig::load_opt(args.config.as_deref())?;
    let plan = sample_size(
        pick(args.z, cfg.plan.z).unwrap_or(0.95),
        pick(args.alpha_min, cfg.plan.alpha_min).unwrap_or(0.8),
        pick(args.p_c, cfg.plan.p_c).unwrap_or(0.17),
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&plan)?);
    } else {
        println!("N_min = {}", plan.sample_min);
        println!("n_min = {}", plan.corpus_min);
    }
    Ok(EQUIVALENT)
}

#[derive(Serialize)]
struct ElbowReport {
    elbow_size: f64,
    #[serde(flatten)]
    result: ElbowResult,
    candidate: Option<String>,
    seed: Option<u64>,
}

fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut curve = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let r = record?;
        if r.len() < 2 {
            bail!("{}: line {} needs x and y", path.display(), n + 2);
        }
        let x: f64 = r[0].parse().with_context(|| format!("{}: line {}", path.display(), n + 2))?;
        let y: f64 = r[1].parse().with_context(|| format!("{}: line {}", path.display(), n + 2))?;
        curve.push((x, y));
    }
    Ok(curve)
}

pub fn elbow(args: ElbowArgs) -> Result<u8> {
    let cfg = FileConfig::load_opt(args.data.config.as_deref())?;
    let out = pick(args.out.clone(), cfg.elbow.out.clone());
    let curve_file = pick(args.curve.clone(), cfg.elbow.curve.clone());
    let seed = pick(args.seed, cfg.elbow.seed).unwrap_or(0);

    let (curve, candidate_tag, seed_used) = match curve_file {
        Some(path) => (read_curve(&path)?, None, None),
        None => {
            let (_, population) = human_input(&args.data, &cfg)?;
            let candidate = match pick(args.candidate.clone(), cfg.data.candidate.clone()).as_deref() {
                None | Some("random") => random_candidate(&population, seed),
                Some("self") => bail!(UsageError("a self-copy candidate gives a flat curve".into())),
                Some(path) => read_candidate(path)?,
            };
            let sizes = pick(args.sizes.clone(), cfg.elbow.sizes.clone())
                .unwrap_or_else(|| (2..=population.n_annotators()).collect());
            let points = group_size_curve(&population, &sizes, &candidate, seed)?;
            let curve = points.into_iter().map(|(s, d)| (s as f64, d)).collect();
            (curve, Some(candidate.source_tag), Some(seed))
        }
    };
    let result = l_method_elbow(&curve)?;

    if let Some(out) = out {
        fs::create_dir_all(&out)?;
        let mut w = csv::Writer::from_writer(create(&out.join("curve.csv"))?);
        w.write_record(["x", "y", "split_error"])?;
        for (j, (x, y)) in result.curve.iter().enumerate() {
            let err = result.split_errors.iter().find(|s| s.0 == j).map(|s| format!("{:?}", s.1));
            w.write_record([format!("{x:?}"), format!("{y:?}"), err.unwrap_or_default()])?;
        }
        w.flush()?;
        let report = ElbowReport {
            elbow_size: result.elbow_x,
            result: result.clone(),
            candidate: candidate_tag,
            seed: seed_used,
        };
        fs::write(out.join("elbow.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    println!("{:>10}  {:>12}", "split", "error");
    for (s, e) in &result.split_errors {
        let mark = if *s == result.elbow_index { "  <" } else { "" };
        println!("{s:>10}  {e:>12.6}{mark}");
    }
    if result.degenerate {
        println!("no elbow: every split fits equally well");
    } else {
        println!("elbow at index {} (x = {})", result.elbow_index, result.elbow_x);
    }
    Ok(EQUIVALENT)
}

pub fn alpha(args: AlphaArgs) -> Result<u8> {
    let cfg = FileConfig::load_opt(args.data.config.as_deref())?;
    let (_, matrix) = human_input(&args.data, &cfg)?;
    let a = krippendorff_alpha(&matrix).map_err(annoteq::Error::from)?;
    if args.json {
        #[derive(Serialize)]
        struct Out {
            scale: Scale,
            items: usize,
            annotators: usize,
            #[serde(flatten)]
            alpha: annoteq::AlphaResult,
        }
        let out = Out {
            scale: matrix.scale(),
            items: matrix.n_items(),
            annotators: matrix.n_annotators(),
            alpha: a,
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "alpha = {:.6} ({} scale, {} items, {} annotators, D_o = {:.6}, D_e = {:.6})",
            a.alpha,
            matrix.scale(),
            matrix.n_items(),
            matrix.n_annotators(),
            a.d_observed,
            a.d_expected
        );
    }
    Ok(EQUIVALENT)
}

pub fn synth(args: SynthArgs) -> Result<u8> {
    if args.items == 0 || args.annotators < 2 || args.cue_dim == 0 || args.labels < 2 {
        bail!(UsageError("need items >= 1, annotators >= 2, cue-dim >= 1, labels >= 2".into()));
    }
    if !(0.0..1.0).contains(&args.missing) || args.weight_sd < 0.0 || args.noise_sd < 0.0 {
        bail!(UsageError("missing must be in [0, 1) and spreads non-negative".into()));
    }
    let task = generate_task(args.items, args.cue_dim, args.labels, args.seed);
    let mut spec = PopulationSpec::new(args.cue_dim, args.weight_sd, args.noise_sd);
    spec.noise_spread = args.noise_spread;
    let human = spec.population_matrix(&task, args.annotators, args.missing, Scale::Ordinal, args.seed)?;

    let mut same = annotate(&task, &spec.draw(PopulationSpec::annotator_seed(args.seed, args.annotators)), 0.0);
    same.source_tag = "candidate".into();
    let ortho = CueModelAnnotator::orthogonal_to(&spec.common_weights, args.noise_sd, args.seed);
    let mut ortho = annotate(&task, &ortho, 0.0);
    ortho.source_tag = "orthogonal".into();

    fs::create_dir_all(&args.out)?;
    human.write_long_format(create(&args.out.join("human.csv"))?)?;
    same.write_long_format(create(&args.out.join("candidate.csv"))?)?;
    ortho.write_long_format(create(&args.out.join("orthogonal.csv"))?)?;
    println!(
        "wrote {} items x {} annotators to {}",
        args.items,
        args.annotators,
        args.out.display()
    );
    Ok(EQUIVALENT)
}

pub fn fetch(args: FetchArgs) -> Result<u8> {
    let cfg = FileConfig::load_opt(args.config.as_deref())?;
    let f = &cfg.fetch;
    let endpoint = require(pick(args.endpoint.clone(), f.endpoint.clone()), "--endpoint")?;
    let template_path = require(pick(args.template.clone(), f.template.clone()), "--template")?;
    let items_path = require(pick(args.items.clone(), f.items.clone()), "--items")?;
    let out = require(pick(args.out.clone(), f.out.clone()), "--out")?;

    let template_text =
        fs::read_to_string(&template_path).with_context(|| format!("reading {}", template_path.display()))?;
    let template = PromptTemplate::parse(&template_text)?;
    let items = read_items(&items_path)?;
    let settings = FetchSettings {
        endpoint,
        batch_size: pick(args.batch_size, f.batch_size).unwrap_or(100),
        annotator: pick(args.annotator.clone(), f.annotator.clone()).unwrap_or_else(|| "candidate".into()),
        alphabet: pick(args.labels.clone(), f.labels.clone()),
        backoff: Duration::from_millis(pick(args.backoff_ms, f.backoff_ms).unwrap_or(1000)),
        out: out.clone(),
        token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
    };
    let (candidate, log) = fetch_candidate(&settings, &template, &items)?;
    candidate.write_long_format(create(&out.join("candidate.csv"))?)?;
    fs::write(out.join("fetch.json"), serde_json::to_string_pretty(&log)? + "\n")?;
    println!(
        "{} labels in {} batches written to {}",
        candidate.labels.len(),
        log.batches.len(),
        out.join("candidate.csv").display()
    );
    Ok(EQUIVALENT)
}
