//! Pipeline orchestration: nonsingularity, conservativeness, classification
//! and Monte Carlo corroboration in dependency order, with verdicts flowing
//! downstream and budget overruns flagged on a partial report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use btl_core::classify::{self, ClassifyOptions, StableTag, TypeTag, TypeVerdict};
use btl_core::cocycle;
use btl_core::conserve::{self, ConservativenessVerdict};
use btl_core::group::GroupError;
use btl_core::mc::{self, LatticeFit, RatioLatticeReport, RnSample};
use btl_core::verdict::{AtomicityVerdict, SingularityVerdict};

use crate::scenario::{BuiltScenario, Stage};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("stage failed: {0}")]
    Stage(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct KakutaniRow {
    pub g: String,
    pub partial: f64,
    pub norm_sq_partial: f64,
    pub norm_sq_exact: Option<f64>,
    pub verdict: SingularityVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct NonsingularityStage {
    pub per_generator: Vec<KakutaniRow>,
    pub nonatomicity_partial: f64,
    pub nonatomicity: AtomicityVerdict,
    pub verdict: SingularityVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct McStage {
    pub report: RatioLatticeReport,
    /// True when the fitted spacing divides the classifier's lattice (or the
    /// samples are all zero for a finite-invariant-measure verdict).
    pub lattice_agreement: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupSummary {
    pub family: String,
    pub ends: String,
    pub generators: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub radius: u32,
    pub group: GroupSummary,
    pub profile: String,
    pub nonsingularity: Option<NonsingularityStage>,
    pub conservativeness: Option<ConservativenessVerdict>,
    pub classification: Option<TypeVerdict>,
    pub mc: Option<McStage>,
    pub incomplete: bool,
    pub timing_ms: BTreeMap<String, u64>,
}

impl RunReport {
    /// Canonical JSON with the wall-clock fields stripped; two runs of the
    /// same scenario and seed produce identical strings.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("timing_ms");
        }
        serde_json::to_string_pretty(&value).expect("json prints")
    }

    pub fn full_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("json prints")
    }
}

pub fn scenario_hash(scenario: &crate::scenario::Scenario) -> String {
    let canonical = serde_json::to_string(scenario).expect("scenario serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)
}

/// Samples kept for CSV export alongside the report.
pub struct RunArtifacts {
    pub report: RunReport,
    pub samples: Vec<RnSample>,
    pub cocycle_rows: Vec<KakutaniRow>,
}

pub fn run(built: &BuiltScenario) -> Result<RunArtifacts, PipelineError> {
    let group = &built.group;
    let profile = &built.profile;
    let mut timing: BTreeMap<String, u64> = BTreeMap::new();
    let mut incomplete = false;

    let generators = group.generators();
    let gen_labels: Vec<String> = generators.iter().map(|g| group.element_label(g)).collect();

    // Nonsingularity stage.
    let mut nonsingularity = None;
    let mut cocycle_rows = Vec::new();
    if built.stages.contains(&Stage::Nonsingularity) {
        let start = Instant::now();
        match build_nonsingularity(built, &generators) {
            Ok(stage) => {
                cocycle_rows = stage.per_generator.clone();
                nonsingularity = Some(stage);
            }
            Err(PipelineError::Group(GroupError::BudgetExceeded { .. })) => incomplete = true,
            Err(e) => return Err(e),
        }
        timing.insert("nonsingularity".into(), start.elapsed().as_millis() as u64);
    }

    // Conservativeness stage.
    let mut conservativeness = None;
    if built.stages.contains(&Stage::Conservativeness) {
        let start = Instant::now();
        match conserve::decide_conservativeness(
            group,
            profile,
            built.kappa,
            built.radius,
            built.assume_conservative,
        ) {
            Ok(verdict) => conservativeness = Some(verdict),
            Err(conserve::ConserveError::Group(GroupError::BudgetExceeded { .. })) => {
                incomplete = true
            }
            Err(conserve::ConserveError::DeltaBoundRequired) => {
                conservativeness = Some(ConservativenessVerdict::unknown(
                    "no delta bound; growth-series criterion inapplicable",
                ));
            }
            Err(e) => return Err(PipelineError::Stage(e.to_string())),
        }
        timing.insert("conservativeness".into(), start.elapsed().as_millis() as u64);
    }

    // Classification stage consumes the conservativeness verdict.
    let mut classification = None;
    if built.stages.contains(&Stage::Classification) {
        let start = Instant::now();
        let cons = conservativeness
            .clone()
            .unwrap_or_else(|| ConservativenessVerdict::unknown("stage not requested"));
        let options = ClassifyOptions { radius: built.radius, generators: None };
        match classify::classify(group, profile, &cons, &options) {
            Ok(verdict) => classification = Some(verdict),
            Err(e) => return Err(PipelineError::Stage(e.to_string())),
        }
        timing.insert("classification".into(), start.elapsed().as_millis() as u64);
    }

    // Monte Carlo corroboration.
    let mut mc_stage = None;
    let mut samples = Vec::new();
    if built.stages.contains(&Stage::Mc) {
        let start = Instant::now();
        // The window radius is the smallest one certifying every generator's
        // support, so samples come back untruncated whenever the profile has
        // a finite-support certificate.
        let radius = generators
            .iter()
            .filter_map(|g| profile.cg_support_radius(group, g))
            .max()
            .unwrap_or(built.radius)
            .min(built.radius.max(3));
        match mc::empirical_ratio_lattice(
            group,
            profile,
            &generators,
            radius,
            built.mc_samples,
            built.seed,
            true,
        ) {
            Ok((report, kept)) => {
                let agreement = classification.as_ref().and_then(|v| fit_agreement(v, &report));
                samples = kept;
                mc_stage = Some(McStage { report, lattice_agreement: agreement });
            }
            Err(mc::McError::Group(GroupError::BudgetExceeded { .. })) => incomplete = true,
            Err(mc::McError::NoCertifiedSamples) => {
                incomplete = true;
            }
            Err(e) => return Err(PipelineError::Stage(e.to_string())),
        }
        timing.insert("mc".into(), start.elapsed().as_millis() as u64);
    }

    let report = RunReport {
        tool: "btl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario_hash: scenario_hash(&built.scenario),
        seed: built.seed,
        radius: built.radius,
        group: GroupSummary {
            family: group.family_name().into(),
            ends: format!("{:?}", group.ends()),
            generators: gen_labels,
        },
        profile: profile.kind_name().into(),
        nonsingularity,
        conservativeness,
        classification,
        mc: mc_stage,
        incomplete,
        timing_ms: timing,
    };
    Ok(RunArtifacts { report, samples, cocycle_rows })
}

fn build_nonsingularity(
    built: &BuiltScenario,
    generators: &[btl_core::group::Element],
) -> Result<NonsingularityStage, PipelineError> {
    let group = &built.group;
    let profile = &built.profile;
    let mut rows = Vec::with_capacity(generators.len());
    let mut overall = SingularityVerdict::Nonsingular;
    for g in generators {
        let report = cocycle::cocycle_report(group, profile, g, built.radius)
            .map_err(|e| match e {
                cocycle::CocycleError::Group(ge) => PipelineError::Group(ge),
                other => PipelineError::Stage(other.to_string()),
            })?;
        match report.kakutani_verdict {
            SingularityVerdict::Nonsingular => {}
            SingularityVerdict::Singular => overall = SingularityVerdict::Singular,
            SingularityVerdict::Unknown => {
                if overall == SingularityVerdict::Nonsingular {
                    overall = SingularityVerdict::Unknown;
                }
            }
        }
        rows.push(KakutaniRow {
            g: group.element_label(g),
            partial: report.kakutani_partial,
            norm_sq_partial: report.norm_sq_partial,
            norm_sq_exact: report.norm_sq_exact,
            verdict: report.kakutani_verdict,
        });
    }
    let (nonatomicity_partial, nonatomicity) = cocycle::nonatomicity_sum(group, profile, built.radius)
        .map_err(|e| match e {
            cocycle::CocycleError::Group(ge) => PipelineError::Group(ge),
            other => PipelineError::Stage(other.to_string()),
        })?;
    Ok(NonsingularityStage { per_generator: rows, nonatomicity_partial, nonatomicity, verdict: overall })
}

/// Does the empirical spacing corroborate the classifier's verdict? The
/// sample lattice may refine the verdict lattice (single-site ratios), so
/// agreement means the verdict spacing is an integer multiple of the fit.
fn fit_agreement(verdict: &TypeVerdict, report: &RatioLatticeReport) -> Option<bool> {
    match (&verdict.tag, &report.fit) {
        (TypeTag::TypeII1, LatticeFit::AllZero) => Some(true),
        (TypeTag::TypeII1, _) => Some(false),
        (TypeTag::TypeIIILambda(lambda), LatticeFit::Lattice { spacing, .. }) => {
            let a = -lambda.ln();
            let ratio = a / spacing;
            Some((ratio - ratio.round()).abs() <= 1e-6 && ratio.round() >= 1.0)
        }
        (TypeTag::TypeIII1, LatticeFit::Dense { .. }) => Some(true),
        (TypeTag::TypeIIILambda(_), _) | (TypeTag::TypeIII1, _) => Some(false),
        _ => None,
    }
}

/// The stable tag rendered for human output.
pub fn stable_label(tag: &StableTag) -> String {
    match tag {
        StableTag::Tag(t) => format!("{t:?}"),
        StableTag::NotComputed => "NotComputed".into(),
    }
}
