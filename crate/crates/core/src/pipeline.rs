//! End-to-end evaluation: margin, substitution sweep, paired bootstrap and
//! TOST, repeated over seeded trials.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bootstrap::{
    bootstrap_alphas, default_sample_size, make_schedule, paired_run, AlphaDistribution, ScheduleSpec,
};
use crate::equivalence::{tost, EquivalenceMargin, TostOutcome, DEFAULT_FRACTION, DEFAULT_SIG_LEVEL};
use crate::error::{EquivalenceError, Error};
use crate::matrix::{label_histogram, AnnotationMatrix, GroupAssignment, Scale};
use crate::substitution::{
    random_candidate_with, self_substitution_sweep, substitution_sweep, CandidateAnnotations, RandomLabels,
    SubstitutionGroup,
};

/// Per-iteration bootstrap sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleSize {
    /// 40% of the items, rounded up.
    #[default]
    Auto,
    Fixed(usize),
}

impl SampleSize {
    pub fn resolve(self, n_items: usize) -> usize {
        match self {
            SampleSize::Auto => default_sample_size(n_items),
            SampleSize::Fixed(n) => n,
        }
    }
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Auto => f.write_str("auto"),
            SampleSize::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for SampleSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SampleSize::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(SampleSize::Fixed(n)),
            _ => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl Serialize for SampleSize {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SampleSize::Auto => s.serialize_str("auto"),
            SampleSize::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("N must be positive")),
            Raw::Count(n) => Ok(SampleSize::Fixed(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Numeric settings of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSettings {
    #[serde(rename = "B")]
    pub iterations: usize,
    #[serde(rename = "N")]
    pub sample_size: SampleSize,
    pub fraction: f64,
    pub sig_level: f64,
    pub trials: usize,
    pub seed: u64,
    /// Also run the random-label control.
    pub control: bool,
    pub random_labels: RandomLabels,
    /// Extra values of B to evaluate (prefixes of the same schedules).
    #[serde(rename = "B_sweep")]
    pub b_sweep: Vec<usize>,
    /// Use this margin instead of estimating one from the two human groups.
    pub margin: Option<f64>,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self {
            iterations: 300,
            sample_size: SampleSize::Auto,
            fraction: DEFAULT_FRACTION,
            sig_level: DEFAULT_SIG_LEVEL,
            trials: 10,
            seed: 0,
            control: false,
            random_labels: RandomLabels::Uniform,
            b_sweep: Vec::new(),
            margin: None,
        }
    }
}

impl EvaluateSettings {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return bad("B must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.b_sweep.contains(&0) {
            return bad("B_sweep entries must be positive".into());
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad(format!("fraction must be in (0, 1], got {}", self.fraction));
        }
        if !(self.sig_level > 0.0 && self.sig_level < 1.0) {
            return bad(format!("sig_level must be in (0, 1), got {}", self.sig_level));
        }
        if let Some(m) = self.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("margin must be a non-negative number, got {m}"));
            }
        }
        Ok(())
    }

    fn max_iterations(&self) -> usize {
        self.b_sweep.iter().copied().chain([self.iterations]).max().unwrap_or(self.iterations)
    }
}

/// What replaces each group-A annotator.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSource {
    Annotations(CandidateAnnotations),
    /// Each annotator is replaced by a copy of itself (calibration).
    SelfCopy,
}

impl CandidateSource {
    fn tag(&self) -> String {
        match self {
            CandidateSource::Annotations(c) => c.source_tag.clone(),
            CandidateSource::SelfCopy => "self".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub delta: f64,
    /// Mean bootstrap alpha of each human group; absent for a fixed margin.
    pub alpha_a: Option<f64>,
    pub alpha_b: Option<f64>,
    pub fraction: f64,
    pub degenerate: bool,
}

impl From<&EquivalenceMargin> for MarginRecord {
    fn from(m: &EquivalenceMargin) -> Self {
        Self {
            delta: m.delta,
            alpha_a: m.alpha_a.is_finite().then_some(m.alpha_a),
            alpha_b: m.alpha_b.is_finite().then_some(m.alpha_b),
            fraction: m.fraction,
            degenerate: m.is_degenerate(),
        }
    }
}

/// TOST of one pooled substitution sample against the human sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    /// Mean alpha over all substitution groups and iterations.
    pub substituted_alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_value: f64,
    pub df: usize,
    pub equivalent: bool,
    /// Undefined iterations across the substitution groups.
    pub skipped: usize,
}

impl TestRecord {
    fn new(outcome: &TostOutcome, skipped: usize) -> Self {
        Self {
            substituted_alpha: outcome.x1,
            t1: outcome.t1,
            t2: outcome.t2,
            p1: outcome.p1,
            p2: outcome.p2,
            p_value: outcome.p_value(),
            df: outcome.df,
            equivalent: outcome.equivalent,
            skipped,
        }
    }
}

/// Mean alpha of one substitution group and its shift from the human mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorShift {
    pub annotator: String,
    /// Absent when every iteration of the group was undefined.
    pub mean_alpha: Option<f64>,
    pub delta_alpha: Option<f64>,
    pub changed_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub schedule: ScheduleSpec,
    pub margin: MarginRecord,
    pub human_alpha: f64,
    pub human_skipped: usize,
    pub candidate: TestRecord,
    pub random: Option<TestRecord>,
    pub per_annotator: Vec<AnnotatorShift>,
}

/// One row of the B sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "B")]
    pub iterations: usize,
    pub trial: usize,
    pub margin: f64,
    pub human_alpha: f64,
    pub candidate: TestRecord,
    pub random: Option<TestRecord>,
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Summary {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary { mean, sd }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestAggregate {
    pub substituted_alpha: Summary,
    pub p1: Summary,
    pub p2: Summary,
    pub p_value: Summary,
    /// `max(mean p1, mean p2)`.
    pub headline_p: f64,
    /// Both mean p-values below the significance level.
    pub equivalent: bool,
    pub equivalent_trials: usize,
}

impl TestAggregate {
    fn of<'a, I>(records: I, sig_level: f64) -> Option<TestAggregate>
    where
        I: IntoIterator<Item = &'a TestRecord>,
    {
        let r: Vec<&TestRecord> = records.into_iter().collect();
        if r.is_empty() {
            return None;
        }
        let p1 = Summary::of(r.iter().map(|t| t.p1));
        let p2 = Summary::of(r.iter().map(|t| t.p2));
        Some(TestAggregate {
            substituted_alpha: Summary::of(r.iter().map(|t| t.substituted_alpha)),
            p_value: Summary::of(r.iter().map(|t| t.p_value)),
            headline_p: p1.mean.max(p2.mean),
            equivalent: p1.mean < sig_level && p2.mean < sig_level,
            equivalent_trials: r.iter().filter(|t| t.equivalent).count(),
            p1,
            p2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub margin: Summary,
    pub human_alpha: Summary,
    pub candidate: TestAggregate,
    pub random: Option<TestAggregate>,
}

impl Aggregate {
    /// Recomputes the aggregate from per-trial records.
    pub fn from_trials(trials: &[TrialRecord], sig_level: f64) -> Option<Aggregate> {
        Some(Aggregate {
            trials: trials.len(),
            margin: Summary::of(trials.iter().map(|t| t.margin.delta)),
            human_alpha: Summary::of(trials.iter().map(|t| t.human_alpha)),
            candidate: TestAggregate::of(trials.iter().map(|t| &t.candidate), sig_level)?,
            random: if trials.iter().all(|t| t.random.is_some()) {
                TestAggregate::of(trials.iter().filter_map(|t| t.random.as_ref()), sig_level)
            } else {
                None
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub settings: EvaluateSettings,
    /// Resolved per-iteration sample size.
    #[serde(rename = "N_resolved")]
    pub sample_size: usize,
    pub scale: Scale,
    pub n_items: usize,
    pub group_a: BTreeSet<String>,
    pub group_b: BTreeSet<String>,
    pub candidate: String,
    /// Free-form input descriptions (file paths and the like).
    pub inputs: BTreeMap<String, String>,
    pub schedule_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub provenance: Provenance,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub sweep: Vec<SweepRecord>,
    pub warnings: Vec<String>,
    /// Set by the caller; the only field that varies between identical runs.
    pub generated_at: Option<String>,
}

impl EvaluationReport {
    pub fn equivalent(&self) -> bool {
        self.aggregate.candidate.equivalent
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Seed of the random control labels in the trial whose schedule uses `trial_seed`.
pub fn control_seed(trial_seed: u64) -> u64 {
    trial_seed ^ 0x5DEE_CE66_D1CE_5EED
}

/// Runs every trial of an evaluation. `matrix` holds both human groups.
pub fn run_evaluate(
    matrix: &AnnotationMatrix,
    groups: &GroupAssignment,
    candidate: &CandidateSource,
    settings: &EvaluateSettings,
) -> Result<EvaluationReport, Error> {
    settings.validate()?;
    let sample_size = settings.sample_size.resolve(matrix.n_items());
    let group_a = matrix
        .restrict_annotators(groups.group_a())
        .map_err(|e| Error::at("group A")(e.into()))?;
    let group_b = matrix
        .restrict_annotators(groups.group_b())
        .map_err(|e| Error::at("group B")(e.into()))?;
    let sweep = match candidate {
        CandidateSource::Annotations(c) => substitution_sweep(&group_a, groups.group_a(), c),
        CandidateSource::SelfCopy => self_substitution_sweep(&group_a, groups.group_a()),
    }
    .map_err(|e| Error::at("substitution")(e.into()))?;

    let trials: Vec<(TrialRecord, Vec<SweepRecord>)> = (0..settings.trials)
        .into_par_iter()
        .map(|t| run_trial(t, &group_a, &group_b, &sweep, sample_size, settings))
        .collect::<Result<_, _>>()?;

    let mut warnings = Vec::new();
    for (record, _) in &trials {
        if record.margin.degenerate {
            warnings.push(format!(
                "trial {}: margin {:.2e} is degenerate; the two human groups barely differ",
                record.trial, record.margin.delta
            ));
        }
        let skipped = record.human_skipped + record.candidate.skipped;
        if skipped > 0 {
            warnings.push(format!("trial {}: {skipped} bootstrap iterations had undefined alpha", record.trial));
        }
    }
    let (records, sweeps): (Vec<TrialRecord>, Vec<Vec<SweepRecord>>) = trials.into_iter().unzip();
    let aggregate = Aggregate::from_trials(&records, settings.sig_level).expect("at least one trial");
    Ok(EvaluationReport {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            settings: settings.clone(),
            sample_size,
            scale: matrix.scale(),
            n_items: matrix.n_items(),
            group_a: groups.group_a().clone(),
            group_b: groups.group_b().clone(),
            candidate: candidate.tag(),
            inputs: BTreeMap::new(),
            schedule_seeds: records.iter().map(|r| r.seed).collect(),
        },
        trials: records,
        aggregate,
        sweep: sweeps.into_iter().flatten().collect(),
        warnings,
        generated_at: None,
    })
}

fn pooled(dists: &[AlphaDistribution]) -> (Vec<f64>, usize) {
    let values = dists.iter().flat_map(|d| d.values.iter().copied()).collect();
    (values, dists.iter().map(|d| d.skipped).sum())
}

struct TrialData {
    human: AlphaDistribution,
    other_group: AlphaDistribution,
    substituted: Vec<AlphaDistribution>,
    random: Option<Vec<AlphaDistribution>>,
}

impl TrialData {
    fn truncated(&self, b: usize) -> TrialData {
        let cut = |ds: &[AlphaDistribution]| ds.iter().map(|d| d.truncated(b)).collect::<Vec<_>>();
        TrialData {
            human: self.human.truncated(b),
            other_group: self.other_group.truncated(b),
            substituted: cut(&self.substituted),
            random: self.random.as_deref().map(cut),
        }
    }

    fn margin(&self, settings: &EvaluateSettings) -> Result<EquivalenceMargin, Error> {
        for (d, name) in [(&self.human, 'A'), (&self.other_group, 'B')] {
            if d.values.is_empty() {
                return Err(EquivalenceError::Group {
                    group: name,
                    source: Box::new(crate::error::BootstrapError::AllUndefined(d.iterations()).into()),
                }
                .into());
            }
        }
        Ok(match settings.margin {
            Some(m) => EquivalenceMargin::fixed(m)?,
            None => EquivalenceMargin::new(self.human.mean(), self.other_group.mean(), settings.fraction)?,
        })
    }

    fn test(&self, groups: &[AlphaDistribution], margin: &EquivalenceMargin, sig: f64) -> Result<TestRecord, Error> {
        let (values, skipped) = pooled(groups);
        let outcome = tost(&values, &self.human.values, margin, sig)?;
        Ok(TestRecord::new(&outcome, skipped))
    }
}

fn run_trial(
    t: usize,
    group_a: &AnnotationMatrix,
    group_b: &AnnotationMatrix,
    sweep: &[SubstitutionGroup],
    sample_size: usize,
    settings: &EvaluateSettings,
) -> Result<(TrialRecord, Vec<SweepRecord>), Error> {
    let seed = settings.seed.wrapping_add(t as u64);
    let schedule = make_schedule(group_a.n_items(), settings.max_iterations(), sample_size, seed)
        .map_err(|e| Error::at("schedule")(e.into()))?;

    let mut groups: Vec<SubstitutionGroup> = sweep.to_vec();
    if settings.control {
        let random = random_candidate_with(group_a, control_seed(seed), settings.random_labels);
        let random_sweep = substitution_sweep(group_a, &group_a.annotators().iter().cloned().collect(), &random)
            .map_err(|e| Error::at("random control")(e.into()))?;
        groups.extend(random_sweep);
    }
    let mut dists = paired_run(group_a, &groups, &schedule).map_err(|e| Error::at("bootstrap")(e.into()))?;
    let other_group = bootstrap_alphas(group_b, &schedule).map_err(|e| Error::at("bootstrap group B")(e.into()))?;
    let random = settings.control.then(|| dists.split_off(1 + sweep.len()));
    let human = dists.remove(0);
    let full = TrialData {
        human,
        other_group,
        substituted: dists,
        random,
    };

    let evaluate = |data: &TrialData| -> Result<(EquivalenceMargin, TestRecord, Option<TestRecord>), Error> {
        let margin = data.margin(settings).map_err(Error::at("margin"))?;
        let candidate = data
            .test(&data.substituted, &margin, settings.sig_level)
            .map_err(Error::at("tost"))?;
        let random = match &data.random {
            Some(r) => Some(data.test(r, &margin, settings.sig_level).map_err(Error::at("random control tost"))?),
            None => None,
        };
        Ok((margin, candidate, random))
    };

    let main = full.truncated(settings.iterations);
    let (margin, candidate, random) = evaluate(&main)?;
    let human_alpha = main.human.mean();
    let per_annotator = main
        .substituted
        .iter()
        .zip(sweep)
        .map(|(d, g)| {
            let mean_alpha = (!d.values.is_empty()).then(|| d.mean());
            AnnotatorShift {
                annotator: g.replaced_annotator.clone(),
                mean_alpha,
                delta_alpha: mean_alpha.map(|a| a - human_alpha),
                changed_cells: g.changed_cells,
            }
        })
        .collect();

    let mut sweep_rows = Vec::with_capacity(settings.b_sweep.len());
    for &b in &settings.b_sweep {
        let data = full.truncated(b);
        let (m, c, r) = evaluate(&data)?;
        sweep_rows.push(SweepRecord {
            iterations: b,
            trial: t,
            margin: m.delta,
            human_alpha: data.human.mean(),
            candidate: c,
            random: r,
        });
    }

    let mut spec = schedule.spec();
    spec.iterations = settings.iterations;
    Ok((
        TrialRecord {
            trial: t,
            seed,
            schedule: spec,
            margin: MarginRecord::from(&margin),
            human_alpha,
            human_skipped: main.human.skipped,
            candidate,
            random,
            per_annotator,
        },
        sweep_rows,
    ))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

/// Shortest round-trip form; switches to exponent notation for tiny p-values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One row per trial.
pub fn write_trials_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<(), Error> {
    let mut w = csv_writer(out);
    w.write_record([
        "trial",
        "seed",
        "margin",
        "alpha_a",
        "alpha_b",
        "human_alpha",
        "substituted_alpha",
        "p1",
        "p2",
        "p_value",
        "equivalent",
        "random_alpha",
        "random_p1",
        "random_p2",
        "random_equivalent",
    ])
    .map_err(csv_error)?;
    for t in &report.trials {
        let r = t.random.as_ref();
        w.write_record([
            t.trial.to_string(),
            t.seed.to_string(),
            num(t.margin.delta),
            opt(t.margin.alpha_a),
            opt(t.margin.alpha_b),
            num(t.human_alpha),
            num(t.candidate.substituted_alpha),
            num(t.candidate.p1),
            num(t.candidate.p2),
            num(t.candidate.p_value),
            t.candidate.equivalent.to_string(),
            opt(r.map(|r| r.substituted_alpha)),
            opt(r.map(|r| r.p1)),
            opt(r.map(|r| r.p2)),
            r.map(|r| r.equivalent.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Matrix(crate::error::MatrixError::Io(e.to_string())))?;
    Ok(())
}

/// p-values against B: mean and standard deviation over trials per B.
pub fn write_p_vs_b_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<(), Error> {
    let mut w = csv_writer(out);
    w.write_record([
        "B",
        "trials",
        "p1_mean",
        "p1_sd",
        "p2_mean",
        "p2_sd",
        "p_mean",
        "p_sd",
        "random_p1_mean",
        "random_p1_sd",
        "random_p2_mean",
        "random_p2_sd",
    ])
    .map_err(csv_error)?;
    let mut by_b: BTreeMap<usize, Vec<&SweepRecord>> = BTreeMap::new();
    for r in &report.sweep {
        by_b.entry(r.iterations).or_default().push(r);
    }
    let sig = report.provenance.settings.sig_level;
    for (b, rows) in by_b {
        let c = TestAggregate::of(rows.iter().map(|r| &r.candidate), sig).expect("non-empty");
        let r = if rows.iter().all(|r| r.random.is_some()) {
            TestAggregate::of(rows.iter().filter_map(|r| r.random.as_ref()), sig)
        } else {
            None
        };
        w.write_record([
            b.to_string(),
            rows.len().to_string(),
            num(c.p1.mean),
            num(c.p1.sd),
            num(c.p2.mean),
            num(c.p2.sd),
            num(c.p_value.mean),
            num(c.p_value.sd),
            opt(r.as_ref().map(|r| r.p1.mean)),
            opt(r.as_ref().map(|r| r.p1.sd)),
            opt(r.as_ref().map(|r| r.p2.mean)),
            opt(r.as_ref().map(|r| r.p2.sd)),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Matrix(crate::error::MatrixError::Io(e.to_string())))?;
    Ok(())
}

/// Per-annotator alpha shift, one row per trial and replaced annotator.
pub fn write_annotator_shift_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<(), Error> {
    let mut w = csv_writer(out);
    w.write_record(["trial", "annotator", "mean_alpha", "delta_alpha", "changed_cells"])
        .map_err(csv_error)?;
    for t in &report.trials {
        for a in &t.per_annotator {
            w.write_record([
                t.trial.to_string(),
                a.annotator.clone(),
                opt(a.mean_alpha),
                opt(a.delta_alpha),
                a.changed_cells.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Matrix(crate::error::MatrixError::Io(e.to_string())))?;
    Ok(())
}

/// Label counts of the human matrix and of each candidate label source.
pub fn write_label_distribution_csv<W: Write>(
    human: &AnnotationMatrix,
    candidates: &[&CandidateAnnotations],
    out: W,
) -> Result<(), Error> {
    let mut w = csv_writer(out);
    w.write_record(["source", "label", "count", "proportion"]).map_err(csv_error)?;
    let mut emit = |source: &str, counts: BTreeMap<String, usize>| -> Result<(), Error> {
        let total: usize = counts.values().sum();
        for label in human.alphabet().labels() {
            let c = counts.get(label).copied().unwrap_or(0);
            let share = if total > 0 { c as f64 / total as f64 } else { 0.0 };
            w.write_record([source, label.as_str(), &c.to_string(), &num(share)])
                .map_err(csv_error)?;
        }
        Ok(())
    };
    emit("human", label_histogram(human))?;
    for c in candidates {
        let mut counts = BTreeMap::new();
        for item in human.items() {
            if let Some(l) = c.labels.get(item) {
                let key = human.alphabet().lookup(l).map_or_else(|| l.clone(), |x| human.alphabet().text(x).to_string());
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        emit(&c.source_tag, counts)?;
    }
    w.flush().map_err(|e| Error::Matrix(crate::error::MatrixError::Io(e.to_string())))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Matrix(e.into())
}
