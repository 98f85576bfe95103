//! Scenario files: a TOML description of the group, the marginal profile and
//! the run parameters. Validation resolves the description into live model
//! objects and reports every offending field at once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use btl_core::aiset::AlmostInvariantSet;
use btl_core::group::{
    AfpGroup, ChainGroup, Element, Embedding, Family, FiniteGroupTable, GroupModel, HnnGroup,
    LatticeGroup,
};
use btl_core::profile::{ExplicitCertificate, MarginalProfile};

#[derive(Debug, Error)]
#[error("invalid scenario:\n{}", issues.join("\n"))]
pub struct ValidationError {
    pub issues: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub group: GroupSpec,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroupSpec {
    /// Free abelian group of the given rank.
    Lattice { dim: usize },
    /// Direct sum of copies of Z/2; `coords` optionally fixes how many
    /// coordinates each chain level holds.
    Chain {
        #[serde(default)]
        coords: Option<Vec<u64>>,
    },
    /// Amalgamated free product over a common finite subgroup; omitting `c`
    /// amalgamates over the trivial group.
    Afp {
        a: FiniteSpec,
        b: FiniteSpec,
        #[serde(default)]
        c: Option<FiniteSpec>,
        #[serde(default)]
        c_in_a: Option<Vec<u16>>,
        #[serde(default)]
        c_in_b: Option<Vec<u16>>,
    },
    /// HNN extension of a finite base along an embedding of a subgroup.
    Hnn { a: FiniteSpec, c: FiniteSpec, c_in_a: Vec<u16>, alpha: Vec<u16> },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FiniteSpec {
    Cyclic {
        order: usize,
        #[serde(default = "default_letter")]
        letter: char,
    },
    Table { names: Vec<String>, mul: Vec<Vec<u16>> },
}

fn default_letter() -> char {
    'a'
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "construction", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WsetSpec {
    HalfLine,
    AfpEnds,
    HnnEnds,
    LfUnion {
        #[serde(default = "default_modulus")]
        modulus: u32,
        #[serde(default = "default_residues")]
        residues: Vec<u32>,
        /// Declared threshold under which the boundary-weighted series over
        /// the union diverges; an assertion about the chain's growth, checked
        /// level by level but never provable from finitely many levels.
        #[serde(default)]
        declared_growth_kappa: Option<f64>,
    },
}

fn default_modulus() -> u32 {
    2
}

fn default_residues() -> Vec<u32> {
    vec![0]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "builtin", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { lambda: f64 },
    /// Two-value candidate attached to an almost-invariant set; the set
    /// defaults to the family's canonical construction.
    Type3Candidate {
        lambda: f64,
        #[serde(default)]
        wset: Option<WsetSpec>,
    },
    TwoValue { on: f64, off: f64, wset: WsetSpec },
    HalfLineTwoValue { neg: f64, pos: f64 },
    ShellValues {
        values: Vec<f64>,
        #[serde(default)]
        repeat: bool,
    },
    IiInfinity { lambda: f64, gamma0: f64, gamma_ratio: f64 },
    Oscillating { amplitude: f64 },
    PowerLaw { lambda: f64, coeff: f64, exponent: f64 },
    Geometric { base: f64, scale: f64 },
    Explicit {
        default: f64,
        #[serde(default)]
        entries: Vec<ExplicitEntry>,
        #[serde(default)]
        delta: Option<f64>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitEntry {
    /// Lattice coordinates of the site (explicit tables are supported over
    /// lattices).
    pub coords: Vec<i64>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Nonsingularity,
    Conservativeness,
    Classification,
    Mc,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub assume_conservative: bool,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_mc_samples() -> u64 {
    10_000
}

fn default_stages() -> Vec<Stage> {
    vec![Stage::Nonsingularity, Stage::Conservativeness, Stage::Classification, Stage::Mc]
}

fn default_budget() -> usize {
    btl_core::group::DEFAULT_ENUMERATION_BUDGET
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            kappa: None,
            radius: None,
            mc_samples: default_mc_samples(),
            seed: None,
            stages: default_stages(),
            assume_conservative: false,
            budget: default_budget(),
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub radius: Option<u32>,
    pub mc_samples: Option<u64>,
}

/// A scenario resolved into live objects.
#[derive(Debug)]
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub group: GroupModel,
    pub profile: MarginalProfile,
    pub kappa: Option<f64>,
    pub radius: u32,
    pub mc_samples: u64,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub assume_conservative: bool,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ValidationError> {
        toml::from_str(text).map_err(|e| ValidationError { issues: vec![e.to_string()] })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }
}

fn build_finite(spec: &FiniteSpec, issues: &mut Vec<String>, field: &str) -> Option<FiniteGroupTable> {
    match spec {
        FiniteSpec::Cyclic { order, letter } => match FiniteGroupTable::cyclic(*order, *letter) {
            Ok(t) => Some(t),
            Err(e) => {
                issues.push(format!("{field}: {e}"));
                None
            }
        },
        FiniteSpec::Table { names, mul } => {
            match FiniteGroupTable::from_table(names.clone(), mul.clone()) {
                Ok(t) => Some(t),
                Err(e) => {
                    issues.push(format!("{field}: {e}"));
                    None
                }
            }
        }
    }
}

fn build_group(spec: &GroupSpec, budget: usize, issues: &mut Vec<String>) -> Option<GroupModel> {
    let family = match spec {
        GroupSpec::Lattice { dim } => match LatticeGroup::new(*dim) {
            Ok(l) => Some(Family::Lattice(l)),
            Err(e) => {
                issues.push(format!("group.dim: {e}"));
                None
            }
        },
        GroupSpec::Chain { coords } => match coords {
            None => Some(Family::Chain(ChainGroup::z2_sum())),
            Some(c) => match ChainGroup::z2_prefix(c.clone()) {
                Ok(ch) => Some(Family::Chain(ch)),
                Err(e) => {
                    issues.push(format!("group.coords: {e}"));
                    None
                }
            },
        },
        GroupSpec::Afp { a, b, c, c_in_a, c_in_b } => {
            let ta = build_finite(a, issues, "group.a")?;
            let tb = build_finite(b, issues, "group.b")?;
            match c {
                None => match AfpGroup::free_product(ta, tb) {
                    Ok(g) => Some(Family::Afp(g)),
                    Err(e) => {
                        issues.push(format!("group: {e}"));
                        None
                    }
                },
                Some(cspec) => {
                    let tc = build_finite(cspec, issues, "group.c")?;
                    let (Some(ia), Some(ib)) = (c_in_a, c_in_b) else {
                        issues.push("group.c_in_a and group.c_in_b are required with a nontrivial amalgam".into());
                        return None;
                    };
                    let ea = match Embedding::new(&tc, &ta, ia.clone()) {
                        Ok(e) => e,
                        Err(e) => {
                            issues.push(format!("group.c_in_a: {e}"));
                            return None;
                        }
                    };
                    let eb = match Embedding::new(&tc, &tb, ib.clone()) {
                        Ok(e) => e,
                        Err(e) => {
                            issues.push(format!("group.c_in_b: {e}"));
                            return None;
                        }
                    };
                    match AfpGroup::new(ta, tb, tc, ea, eb) {
                        Ok(g) => Some(Family::Afp(g)),
                        Err(e) => {
                            issues.push(format!("group: {e}"));
                            None
                        }
                    }
                }
            }
        }
        GroupSpec::Hnn { a, c, c_in_a, alpha } => {
            let ta = build_finite(a, issues, "group.a")?;
            let tc = build_finite(c, issues, "group.c")?;
            let inc = match Embedding::new(&tc, &ta, c_in_a.clone()) {
                Ok(e) => e,
                Err(e) => {
                    issues.push(format!("group.c_in_a: {e}"));
                    return None;
                }
            };
            let al = match Embedding::new(&tc, &ta, alpha.clone()) {
                Ok(e) => e,
                Err(e) => {
                    issues.push(format!("group.alpha: {e}"));
                    return None;
                }
            };
            match HnnGroup::new(ta, tc, inc, al) {
                Ok(g) => Some(Family::Hnn(g)),
                Err(e) => {
                    issues.push(format!("group: {e}"));
                    None
                }
            }
        }
    };
    family.map(|f| GroupModel::with_budget(f, budget))
}

fn default_wset(group: &GroupModel) -> WsetSpec {
    match group.family_name() {
        "lattice" => WsetSpec::HalfLine,
        "chain" => WsetSpec::LfUnion { modulus: 2, residues: vec![0], declared_growth_kappa: None },
        "afp" => WsetSpec::AfpEnds,
        _ => WsetSpec::HnnEnds,
    }
}

fn build_wset(spec: &WsetSpec) -> AlmostInvariantSet {
    match spec {
        WsetSpec::HalfLine => AlmostInvariantSet::half_line(),
        WsetSpec::AfpEnds => AlmostInvariantSet::afp_ends(),
        WsetSpec::HnnEnds => AlmostInvariantSet::hnn_ends(),
        WsetSpec::LfUnion { modulus, residues, declared_growth_kappa } => match declared_growth_kappa {
            Some(kappa) => AlmostInvariantSet::lf_union_declared(*modulus, residues.clone(), *kappa),
            None => AlmostInvariantSet::lf_union(*modulus, residues.clone()),
        },
    }
}

fn build_profile(
    spec: &ProfileSpec,
    group: &GroupModel,
    issues: &mut Vec<String>,
) -> Option<MarginalProfile> {
    let result = match spec {
        ProfileSpec::Constant { lambda } => MarginalProfile::constant(*lambda),
        ProfileSpec::Type3Candidate { lambda, wset } => {
            let wspec = wset.clone().unwrap_or_else(|| default_wset(group));
            MarginalProfile::type_iii_candidate(build_wset(&wspec), *lambda)
        }
        ProfileSpec::TwoValue { on, off, wset } => {
            MarginalProfile::two_value(build_wset(wset), *on, *off)
        }
        ProfileSpec::HalfLineTwoValue { neg, pos } => MarginalProfile::half_line_two_value(*neg, *pos),
        ProfileSpec::ShellValues { values, repeat } => {
            MarginalProfile::shell_values(values.clone(), *repeat)
        }
        ProfileSpec::IiInfinity { lambda, gamma0, gamma_ratio } => {
            MarginalProfile::ii_infinity(*lambda, *gamma0, *gamma_ratio)
        }
        ProfileSpec::Oscillating { amplitude } => MarginalProfile::oscillating(*amplitude),
        ProfileSpec::PowerLaw { lambda, coeff, exponent } => {
            MarginalProfile::power_law(*lambda, *coeff, *exponent)
        }
        ProfileSpec::Geometric { base, scale } => MarginalProfile::geometric_word_length(*base, *scale),
        ProfileSpec::Explicit { default, entries, delta } => {
            let table = entries
                .iter()
                .map(|e| (Element::Lattice(e.coords.clone()), e.value))
                .collect();
            MarginalProfile::explicit(
                table,
                *default,
                ExplicitCertificate { delta: *delta, ..Default::default() },
            )
        }
    };
    match result {
        Ok(p) => {
            if let Err(e) = p.validate_for(group) {
                issues.push(format!("profile: {e}"));
                return None;
            }
            Some(p)
        }
        Err(e) => {
            issues.push(format!("profile: {e}"));
            None
        }
    }
}

/// Enumeration radius defaults per family, chosen so exhaustive cross-checks
/// stay fast: l1 radius 64 on lattices, 4 syllables on amalgams and HNN
/// extensions, level 6 on chains.
pub fn default_radius(group: &GroupModel) -> u32 {
    match group.family_name() {
        "lattice" => 64,
        "chain" => 6,
        _ => 4,
    }
}

/// Environment variable scaling enumeration budgets (useful to shrink CI
/// runs or enlarge local ones).
pub const BUDGET_ENV: &str = "BTL_BUDGET_MULTIPLIER";

pub fn build(scenario: Scenario, overrides: &Overrides) -> Result<BuiltScenario, ValidationError> {
    let mut issues = Vec::new();
    let mut budget = scenario.run.budget;
    if let Ok(raw) = std::env::var(BUDGET_ENV) {
        match raw.parse::<f64>() {
            Ok(mult) if mult > 0.0 => budget = (budget as f64 * mult) as usize,
            _ => issues.push(format!("{BUDGET_ENV} must be a positive number, got {raw:?}")),
        }
    }
    let group = build_group(&scenario.group, budget, &mut issues);
    let profile = group.as_ref().and_then(|g| build_profile(&scenario.profile, g, &mut issues));

    let stages = scenario.run.stages.clone();
    let mc_requested = stages.contains(&Stage::Mc);
    let seed = overrides.seed.or(scenario.run.seed);
    if mc_requested && seed.is_none() {
        issues.push("run.seed is required when the mc stage is requested".into());
    }
    if let Some(kappa) = scenario.run.kappa {
        if kappa <= 0.0 {
            issues.push(format!("run.kappa must be positive, got {kappa}"));
        }
    }
    if scenario.run.mc_samples == 0 && mc_requested {
        issues.push("run.mc_samples must be positive when the mc stage is requested".into());
    }
    let (Some(group), Some(profile)) = (group, profile) else {
        return Err(ValidationError { issues });
    };
    if !issues.is_empty() {
        return Err(ValidationError { issues });
    }
    let radius = overrides.radius.or(scenario.run.radius).unwrap_or_else(|| default_radius(&group));
    let mc_samples = overrides.mc_samples.unwrap_or(scenario.run.mc_samples);
    Ok(BuiltScenario {
        kappa: scenario.run.kappa,
        radius,
        mc_samples,
        seed: seed.unwrap_or(0),
        stages,
        assume_conservative: scenario.run.assume_conservative,
        scenario,
        group,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_lattice_scenario() {
        let text = r#"
            [group]
            family = "lattice"
            dim = 1

            [profile]
            builtin = "constant"
            lambda = 0.5

            [run]
            seed = 7
        "#;
        let scenario = Scenario::from_toml(text).unwrap();
        let built = build(scenario, &Overrides::default()).unwrap();
        assert_eq!(built.group.family_name(), "lattice");
        assert_eq!(built.radius, 64);
    }

    #[test]
    fn missing_seed_with_mc_is_reported() {
        let text = r#"
            [group]
            family = "lattice"
            dim = 1

            [profile]
            builtin = "constant"
            lambda = 0.5
        "#;
        let scenario = Scenario::from_toml(text).unwrap();
        let err = build(scenario, &Overrides::default()).unwrap_err();
        assert!(err.issues.iter().any(|i| i.contains("run.seed")));
    }

    #[test]
    fn invalid_profile_value_is_reported_with_field() {
        let text = r#"
            [group]
            family = "lattice"
            dim = 1

            [profile]
            builtin = "constant"
            lambda = 1.5

            [run]
            seed = 1
        "#;
        let scenario = Scenario::from_toml(text).unwrap();
        let err = build(scenario, &Overrides::default()).unwrap_err();
        assert!(err.issues.iter().any(|i| i.starts_with("profile:")));
    }

    #[test]
    fn family_profile_mismatch_is_rejected() {
        let text = r#"
            [group]
            family = "afp"
            a = { kind = "cyclic", order = 3 }
            b = { kind = "cyclic", order = 3 }

            [profile]
            builtin = "oscillating"
            amplitude = 0.25

            [run]
            seed = 1
        "#;
        let scenario = Scenario::from_toml(text).unwrap();
        assert!(build(scenario, &Overrides::default()).is_err());
    }
}
