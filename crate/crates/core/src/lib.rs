//! Tests whether a candidate annotator can stand in for individual human
//! annotators without changing inter-annotator agreement.
//!
//! The pipeline replaces one annotator of a human group at a time, measures
//! Krippendorff's alpha of every resulting group under a shared item
//! bootstrap, and runs a two one-sided t-test (TOST) of the pooled
//! substituted alphas against the human alphas, with an equivalence margin
//! taken from the spread between two disjoint human groups.

pub mod alpha;
pub mod bootstrap;
pub mod design;
pub mod equivalence;
pub mod error;
pub mod matrix;
pub mod pipeline;
pub mod substitution;
pub mod synth;
pub mod tdist;

pub use alpha::{coincidences, delta, krippendorff_alpha, AlphaResult, CoincidenceMatrix};
pub use bootstrap::{bootstrap_alphas, make_schedule, paired_run, AlphaDistribution, ResamplingSchedule};
pub use design::{group_size_curve, l_method_elbow, predict_alpha_change, sample_size, ElbowResult, StudyPlan};
pub use equivalence::{estimate_margin, tost, EquivalenceMargin, TostOutcome};
pub use error::Error;
pub use matrix::{filter_dataset, load_long_format, AnnotationMatrix, GroupAssignment, Label, Scale};
pub use pipeline::{run_evaluate, CandidateSource, EvaluateSettings, EvaluationReport, SampleSize};
pub use substitution::{random_candidate, substitute, substitution_sweep, CandidateAnnotations, SubstitutionGroup};
pub use tdist::t_cdf;
