//! Krieger-type classification. The classifier walks the decision tree that
//! matches the group family and the profile's certificates: abelian
//! non-locally-finite groups branch on the limit-value set, locally finite
//! chains on the split summability certificate, and delta-bounded profiles on
//! general groups on the log-odds lattice of an almost-invariant partition
//! combined with the signed boundary-flow homomorphism.

use serde::Serialize;
use thiserror::Error;

use crate::aiset::{self, AiError, AlmostInvariantSet};
use crate::conserve::{ConservativenessTag, ConservativenessVerdict};
use crate::group::{Element, Family, GroupError, GroupModel};
use crate::profile::{LimitSetDecl, MarginalProfile};
use crate::verdict::{AtomicityVerdict, Evidence, SeriesVerdict, SingularityVerdict, PROB_TOL};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("log-odds lattice needs at least two distinct values, got {0}")]
    TooFewValues(usize),
    #[error("boundary of the almost-invariant set is not certified: {0}")]
    BoundaryNotCertified(String),
    #[error(transparent)]
    Ai(#[from] AiError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Krieger type tags. `IiiLambda` carries the multiplicative parameter in
/// (0,1); `IiiUnresolved` is the honest output where only "type III" is
/// certified.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TypeTag {
    Dissipative,
    TypeI,
    TypeII1,
    TypeIIInfinity,
    TypeIIILambda(f64),
    TypeIII1,
    TypeIII0,
    TypeIIIUnresolved,
    Unknown,
}

impl TypeTag {
    /// The ratio-set shape each tag corresponds to, as data.
    pub fn ratio_set_description(&self) -> &'static str {
        match self {
            TypeTag::TypeI | TypeTag::TypeII1 | TypeTag::TypeIIInfinity => "{1}",
            TypeTag::TypeIII0 => "{0, 1}",
            TypeTag::TypeIIILambda(_) => "{0} plus the powers of lambda",
            TypeTag::TypeIII1 => "[0, infinity)",
            TypeTag::TypeIIIUnresolved => "{0,1} at least; subtype open",
            TypeTag::Dissipative | TypeTag::Unknown => "not applicable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum StableTag {
    Tag(TypeTag),
    NotComputed,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeVerdict {
    pub tag: TypeTag,
    pub stable: StableTag,
    pub evidence: Vec<Evidence>,
}

impl TypeVerdict {
    fn unknown(reason: &str, mut evidence: Vec<Evidence>) -> Self {
        evidence.push(Evidence::new("unresolved", "", reason));
        TypeVerdict { tag: TypeTag::Unknown, stable: StableTag::NotComputed, evidence }
    }
}

/// Subgroup of the reals generated by finitely many log-odds differences:
/// either dense or a lattice `a Z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LatticeOrDense {
    Lattice { spacing: f64 },
    /// `undecided` marks generators that fell below the resolution floor of
    /// the rational-dependence test rather than being certified dense.
    Dense { undecided: bool },
}

const GCD_TOL: f64 = 1e-9;
const DENOMINATOR_CAP: f64 = 1e6;

fn float_gcd(mut a: f64, mut b: f64) -> f64 {
    while b > GCD_TOL {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Subgroup of the reals generated by a list of values (up to sign), decided
/// by floating-point reduction with a resolution floor.
pub fn real_subgroup(values: &[f64]) -> LatticeOrDense {
    let mut gens: Vec<f64> = values.iter().map(|v| v.abs()).filter(|v| *v > GCD_TOL).collect();
    if gens.is_empty() {
        // the trivial subgroup is a degenerate lattice; callers treat spacing
        // 0 as "everything is congruent"
        return LatticeOrDense::Lattice { spacing: 0.0 };
    }
    gens.sort_by(f64::total_cmp);
    let max = *gens.last().expect("nonempty");
    let mut g = gens[0];
    for &v in &gens[1..] {
        g = float_gcd(v.max(g), v.min(g));
    }
    // a credible common spacing must keep denominators modest
    if g < max / DENOMINATOR_CAP {
        return LatticeOrDense::Dense { undecided: true };
    }
    for &v in &gens {
        let ratio = v / g;
        if (ratio - ratio.round()).abs() * g > GCD_TOL * ratio.max(1.0) {
            return LatticeOrDense::Dense { undecided: true };
        }
    }
    LatticeOrDense::Lattice { spacing: g }
}

/// The subgroup of the reals generated by the pairwise log-odds differences
/// `log(l_i/(1-l_i)) - log(l_j/(1-l_j))` of the given marginal values.
pub fn lambda_lattice(lambdas: &[f64]) -> Result<LatticeOrDense, ClassifyError> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in lambdas {
        if !distinct.iter().any(|&d| (d - l).abs() <= PROB_TOL) {
            distinct.push(l);
        }
    }
    if distinct.len() < 2 {
        return Err(ClassifyError::TooFewValues(distinct.len()));
    }
    let odds: Vec<f64> = distinct.iter().map(|&l| (l / (1.0 - l)).ln()).collect();
    let mut gens = Vec::new();
    for i in 0..odds.len() {
        for j in (i + 1)..odds.len() {
            gens.push(odds[i] - odds[j]);
        }
    }
    Ok(real_subgroup(&gens))
}

/// Signed boundary flow `|W \ gW| - |gW \ W|`, an exact integer, with the
/// boundary containment certified by the construction margin.
pub fn omega_w(
    group: &GroupModel,
    wset: &AlmostInvariantSet,
    g: &Element,
) -> Result<i64, ClassifyError> {
    let radius = group.word_length(g) + wset.boundary_margin;
    let report = aiset::boundary(group, wset, g, radius)?;
    if !report.certified {
        return Err(ClassifyError::BoundaryNotCertified(format!(
            "scan radius {radius} does not certify containment for {}",
            group.element_label(g)
        )));
    }
    Ok(report.signed_flow())
}

/// Resolution of the two-invariant table: the log-odds lattice together with
/// the boundary-flow values on generators decides the subtype and its
/// stability.
pub fn partition_type_table(
    lattice: &LatticeOrDense,
    omega_on_generators: &[f64],
) -> (TypeTag, StableTag, Evidence) {
    match lattice {
        LatticeOrDense::Dense { undecided } => {
            let note = if *undecided {
                "log-odds differences below rational-dependence resolution; treated as dense"
            } else {
                "log-odds differences generate a dense subgroup"
            };
            (
                TypeTag::TypeIII1,
                StableTag::Tag(TypeTag::TypeIII1),
                Evidence::new("log-odds-lattice", "dense", note),
            )
        }
        LatticeOrDense::Lattice { spacing } => {
            let a = *spacing;
            if a <= GCD_TOL {
                // all values equal: handled upstream as a coboundary
                return (
                    TypeTag::TypeII1,
                    StableTag::Tag(TypeTag::TypeII1),
                    Evidence::new("log-odds-lattice", "trivial", "single marginal value"),
                );
            }
            let in_lattice = omega_on_generators
                .iter()
                .all(|&w| (w / a - (w / a).round()).abs() * a <= 1e-9);
            if in_lattice {
                let lambda = (-a).exp();
                return (
                    TypeTag::TypeIIILambda(lambda),
                    StableTag::Tag(TypeTag::TypeIIILambda(lambda)),
                    Evidence::new(
                        "log-odds-lattice",
                        format!("spacing {a:.12}; boundary flow inside the lattice"),
                        format!("subtype parameter exp(-{a:.12}) = {lambda:.12}"),
                    ),
                );
            }
            let mut extended = vec![a];
            extended.extend_from_slice(omega_on_generators);
            match real_subgroup(&extended) {
                LatticeOrDense::Dense { .. } => (
                    TypeTag::TypeIII1,
                    StableTag::NotComputed,
                    Evidence::new(
                        "log-odds-lattice",
                        format!("spacing {a:.12}; boundary flow escapes to a dense extension"),
                        "plain type resolves upward; products with finite-measure systems range over deeper subtypes",
                    ),
                ),
                LatticeOrDense::Lattice { spacing: b } => {
                    let lambda = (-b).exp();
                    (
                        TypeTag::TypeIIILambda(lambda),
                        StableTag::NotComputed,
                        Evidence::new(
                            "log-odds-lattice",
                            format!("spacing {a:.12}; flow extension refines it to {b:.12}"),
                            format!(
                                "subtype parameter exp(-{b:.12}) = {lambda:.12}; stability varies with the product system"
                            ),
                        ),
                    )
                }
            }
        }
    }
}

/// Options steering the classifier's finite checks.
#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    /// Radius for Kakutani and nonatomicity partial sums.
    pub radius: u32,
    /// Generators to evaluate the boundary flow on; defaults to the model's
    /// declared generating set.
    pub generators: Option<Vec<Element>>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { radius: 8, generators: None }
    }
}

/// Walks the applicable decision tree and returns the type with its full
/// evidence trail. Nonatomic nonsingular product actions are essentially
/// free, so the type is a well-defined invariant of the data handed in.
pub fn classify(
    group: &GroupModel,
    profile: &MarginalProfile,
    conservativeness: &ConservativenessVerdict,
    options: &ClassifyOptions,
) -> Result<TypeVerdict, ClassifyError> {
    let mut evidence: Vec<Evidence> = Vec::new();
    let generators = options.generators.clone().unwrap_or_else(|| group.generators());

    // Nonsingularity on the declared generators.
    match profile.nonsingular_verdict() {
        SingularityVerdict::Nonsingular => {
            evidence.push(Evidence::new(
                "kakutani-nonsingularity",
                format!("{} generators", generators.len()),
                "certified nonsingular",
            ));
        }
        SingularityVerdict::Singular => {
            return Ok(TypeVerdict::unknown("the shift action is not nonsingular", evidence))
        }
        SingularityVerdict::Unknown => {
            return Ok(TypeVerdict::unknown("nonsingularity undecided", evidence))
        }
    }

    // Atomicity.
    match profile.nonatomic_verdict() {
        AtomicityVerdict::Nonatomic => {
            evidence.push(Evidence::new("nonatomicity", "", "certified nonatomic"));
        }
        AtomicityVerdict::Atomic => {
            evidence.push(Evidence::new(
                "nonatomicity",
                "",
                "product measure is atomic; the action lives on a countable set",
            ));
            return Ok(TypeVerdict { tag: TypeTag::TypeI, stable: StableTag::NotComputed, evidence });
        }
        AtomicityVerdict::Unknown => {
            return Ok(TypeVerdict::unknown("atomicity undecided", evidence))
        }
    }

    // Conservativeness gate.
    match conservativeness.tag {
        ConservativenessTag::Dissipative => {
            evidence.extend(conservativeness.evidence.iter().cloned());
            evidence.push(Evidence::new("dissipative-input", "", "Hopf sums certified finite"));
            return Ok(TypeVerdict {
                tag: TypeTag::Dissipative,
                stable: StableTag::NotComputed,
                evidence,
            });
        }
        ConservativenessTag::StronglyConservative | ConservativenessTag::ConservativeAmenable => {
            evidence.extend(conservativeness.evidence.iter().cloned());
        }
        ConservativenessTag::Unknown => {
            return Ok(TypeVerdict::unknown("conservativeness unresolved", evidence));
        }
    }

    match &group.family {
        Family::Lattice(_) => classify_abelian(group, profile, evidence),
        Family::Chain(_) => classify_locally_finite(group, profile, generators, evidence),
        Family::Afp(_) | Family::Hnn(_) => {
            classify_delta_bounded(group, profile, generators, evidence)
        }
    }
}

/// Abelian, not locally finite: branch on the declared limit-value set.
fn classify_abelian(
    _group: &GroupModel,
    profile: &MarginalProfile,
    mut evidence: Vec<Evidence>,
) -> Result<TypeVerdict, ClassifyError> {
    match profile.limit_set() {
        LimitSetDecl::Points(points) => {
            let interior: Vec<f64> =
                points.iter().copied().filter(|&p| p > PROB_TOL && p < 1.0 - PROB_TOL).collect();
            if points.len() == 1 {
                let lambda = points[0];
                if interior.is_empty() {
                    evidence.push(Evidence::new(
                        "limit-boundary",
                        format!("limit value {lambda}"),
                        "marginals degenerate at infinity; subtype stays open",
                    ));
                    return Ok(TypeVerdict {
                        tag: TypeTag::TypeIIIUnresolved,
                        stable: StableTag::Tag(TypeTag::TypeIIIUnresolved),
                        evidence,
                    });
                }
                return match profile.l2_verdict(lambda) {
                    SeriesVerdict::Converges => {
                        evidence.push(Evidence::new(
                            "limit-singleton-l2",
                            format!("lambda = {lambda}"),
                            "square deviations summable: equivalent invariant product measure",
                        ));
                        Ok(TypeVerdict {
                            tag: TypeTag::TypeII1,
                            stable: StableTag::Tag(TypeTag::TypeII1),
                            evidence,
                        })
                    }
                    SeriesVerdict::Diverges => {
                        evidence.push(Evidence::new(
                            "limit-singleton-l2",
                            format!("lambda = {lambda}"),
                            "square deviations diverge",
                        ));
                        Ok(TypeVerdict {
                            tag: TypeTag::TypeIII1,
                            stable: StableTag::Tag(TypeTag::TypeIII1),
                            evidence,
                        })
                    }
                    SeriesVerdict::Unknown => {
                        Ok(TypeVerdict::unknown("square-deviation series undecided", evidence))
                    }
                };
            }
            evidence.push(Evidence::new(
                "limit-set-multipoint",
                format!("{} limit values", points.len()),
                "at least two limit values force the richest subtype",
            ));
            Ok(TypeVerdict { tag: TypeTag::TypeIII1, stable: StableTag::Tag(TypeTag::TypeIII1), evidence })
        }
        LimitSetDecl::Interval { lo, hi } => {
            evidence.push(Evidence::new(
                "limit-set-perfect",
                format!("limit values fill [{lo}, {hi}]"),
                "a perfect limit set forces the richest subtype",
            ));
            Ok(TypeVerdict { tag: TypeTag::TypeIII1, stable: StableTag::Tag(TypeTag::TypeIII1), evidence })
        }
        LimitSetDecl::Undeclared => Ok(TypeVerdict::unknown("no limit-set certificate", evidence)),
    }
}

/// Locally finite chains: split summability decides between finite and
/// infinite invariant measures; otherwise the log-odds machinery on the
/// shell partition decides the subtype (boundary flow vanishes identically
/// on locally finite groups).
fn classify_locally_finite(
    group: &GroupModel,
    profile: &MarginalProfile,
    generators: Vec<Element>,
    mut evidence: Vec<Evidence>,
) -> Result<TypeVerdict, ClassifyError> {
    if let Some(lambda) = profile.coboundary_lambda() {
        evidence.push(Evidence::new(
            "coboundary-certificate",
            format!("lambda = {lambda}"),
            "square deviations summable: equivalent invariant product measure",
        ));
        return Ok(TypeVerdict { tag: TypeTag::TypeII1, stable: StableTag::Tag(TypeTag::TypeII1), evidence });
    }
    if let MarginalProfile::IiInfinity { lambda, gamma0, gamma_ratio } = profile {
        // The declared split: square deviations summable on the odd shells
        // (they vanish), atom masses summable on the even shells.
        if let Family::Chain(chain) = &group.family {
            let mut tail_ok = true;
            let mut partial = 0.0;
            for m in 1..=6u32 {
                let term = gamma0 * gamma_ratio.powi(m as i32 - 1) * chain.shell_size_f64(2 * m);
                partial += term;
                if m >= 2 {
                    let prev =
                        gamma0 * gamma_ratio.powi(m as i32 - 2) * chain.shell_size_f64(2 * m - 2);
                    if term >= prev {
                        tail_ok = false;
                    }
                }
            }
            if tail_ok {
                evidence.push(Evidence::new(
                    "split-summability",
                    format!("lambda = {lambda}; vanishing-shell mass partial sum {partial:.6}"),
                    "deviations summable on the constant part, atom masses summable on the vanishing part, both parts infinite: infinite invariant measure",
                ));
                return Ok(TypeVerdict {
                    tag: TypeTag::TypeIIInfinity,
                    stable: StableTag::NotComputed,
                    evidence,
                });
            }
            return Ok(TypeVerdict::unknown(
                "vanishing-shell masses are not certified summable on this chain",
                evidence,
            ));
        }
    }
    if let MarginalProfile::ShellValues { lambdas, repeat: true } = profile {
        // Piecewise constant on the almost-invariant shell partition; on a
        // locally finite group every element has finite order, so the signed
        // boundary flow vanishes.
        let lattice = lambda_lattice(lambdas)?;
        let omegas = vec![0.0; generators.len()];
        evidence.push(Evidence::new(
            "boundary-flow",
            "all generators",
            "zero on a locally finite group (finite-order elements)",
        ));
        let (tag, stable, ev) = partition_type_table(&lattice, &omegas);
        evidence.push(ev);
        return Ok(TypeVerdict { tag, stable, evidence });
    }
    if let Some((wset, _, on, off)) = profile.two_value_data() {
        // Two values split along a shell union: same table route, with the
        // boundary flows evaluated exactly on the generators (they vanish,
        // every element having finite order).
        let lattice = lambda_lattice(&[on, off])?;
        let log_ratio = on.ln() - off.ln();
        let mut omegas = Vec::with_capacity(generators.len());
        for g in &generators {
            let flow = omega_w(group, wset, g)?;
            omegas.push(if flow == 0 { 0.0 } else { flow as f64 * log_ratio });
        }
        evidence.push(Evidence::new(
            "boundary-flow",
            format!("{} generators", generators.len()),
            format!("signed flows {omegas:?}"),
        ));
        let (tag, stable, ev) = partition_type_table(&lattice, &omegas);
        evidence.push(ev);
        return Ok(TypeVerdict { tag, stable, evidence });
    }
    evidence.push(Evidence::new(
        "split-summability",
        "",
        "no finite or infinite invariant-measure certificate applies",
    ));
    Ok(TypeVerdict {
        tag: TypeTag::TypeIIIUnresolved,
        stable: StableTag::NotComputed,
        evidence,
    })
}

/// Delta-bounded profiles on groups with more than one end: coboundary,
/// almost-invariant partition, or certified non-convergence.
fn classify_delta_bounded(
    group: &GroupModel,
    profile: &MarginalProfile,
    generators: Vec<Element>,
    mut evidence: Vec<Evidence>,
) -> Result<TypeVerdict, ClassifyError> {
    if profile.delta().is_none() {
        return Ok(TypeVerdict::unknown(
            "profile has no delta bound; no decision tree applies on this family",
            evidence,
        ));
    }
    if let Some(lambda) = profile.coboundary_lambda() {
        evidence.push(Evidence::new(
            "coboundary-certificate",
            format!("lambda = {lambda}"),
            "square deviations summable: equivalent invariant product measure",
        ));
        return Ok(TypeVerdict { tag: TypeTag::TypeII1, stable: StableTag::Tag(TypeTag::TypeII1), evidence });
    }
    if let Some((wset, _, on, off)) = profile.two_value_data() {
        let lattice = lambda_lattice(&[on, off])?;
        let log_ratio = on.ln() - off.ln();
        let mut omegas = Vec::with_capacity(generators.len());
        for g in &generators {
            let flow = omega_w(group, wset, g)?;
            // the complement contributes the negated flow weighted by its log value
            omegas.push(if flow == 0 { 0.0 } else { flow as f64 * log_ratio });
        }
        evidence.push(Evidence::new(
            "boundary-flow",
            format!("{} generators", generators.len()),
            format!(
                "signed flows {:?} weighted by log({on:.6}/{off:.6})",
                omegas.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>()
            ),
        ));
        let (tag, stable, ev) = partition_type_table(&lattice, &omegas);
        evidence.push(ev);
        return Ok(TypeVerdict { tag, stable, evidence });
    }
    match profile.limit_set() {
        LimitSetDecl::Interval { .. } => {
            evidence.push(Evidence::new(
                "limit-set-perfect",
                "",
                "no almost-invariant rearrangement matches a perfect limit set",
            ));
            Ok(TypeVerdict { tag: TypeTag::TypeIII1, stable: StableTag::Tag(TypeTag::TypeIII1), evidence })
        }
        _ => Ok(TypeVerdict::unknown("no applicable certificate for this profile", evidence)),
    }
}


#[cfg(test)]
mod error_path_tests {
    use super::*;
    use crate::conserve::{ConservativenessTag, ConservativenessVerdict};
    use crate::profile::ExplicitCertificate;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn uncertified_boundary_is_an_error() {
        let z = GroupModel::integers();
        // membership table only known inside radius 2; translating by a
        // length-4 element cannot be certified
        let members: BTreeSet<Element> =
            [0i64, 1].into_iter().map(|v| Element::Lattice(vec![v])).collect();
        let wset = AlmostInvariantSet::explicit(members, 2);
        let g = Element::Lattice(vec![4]);
        // the translate g + W = {4, 5} reaches within the margin of the scan
        // edge at radius |g| + 2, so containment cannot be certified
        let report = crate::aiset::boundary(&z, &wset, &g, 2).unwrap();
        assert!(!report.certified);
        assert!(matches!(
            crate::aiset::boundary_size(&z, &wset, &g),
            Err(crate::aiset::AiError::BoundaryNotCertified(_))
        ));
        assert!(omega_w(&z, &wset, &g).is_err());
    }

    #[test]
    fn lattice_of_single_value_is_structural_error() {
        assert!(matches!(lambda_lattice(&[0.4]), Err(ClassifyError::TooFewValues(1))));
        assert!(matches!(
            lambda_lattice(&[0.4, 0.4 + 1e-15]),
            Err(ClassifyError::TooFewValues(1))
        ));
    }

    #[test]
    fn degenerate_limit_set_keeps_subtype_open() {
        let z = GroupModel::integers();
        // declared certificate: limit value 0, nonsingular, nonatomic
        let profile = MarginalProfile::explicit(
            BTreeMap::new(),
            0.5,
            ExplicitCertificate {
                delta: None,
                limit_set: Some(vec![0.0]),
                l2_lambda: None,
                nonsingular: Some(crate::verdict::SingularityVerdict::Nonsingular),
                nonatomic: Some(crate::verdict::AtomicityVerdict::Nonatomic),
            },
        )
        .unwrap();
        let cons = ConservativenessVerdict {
            tag: ConservativenessTag::ConservativeAmenable,
            evidence: vec![Evidence::new("declared-conservative", "test fixture", "")],
        };
        let verdict = classify(&z, &profile, &cons, &ClassifyOptions::default()).unwrap();
        assert_eq!(verdict.tag, TypeTag::TypeIIIUnresolved);
    }
}

#[cfg(test)]
mod degenerate_profile_tests {
    use super::*;
    use crate::conserve::decide_conservativeness;

    #[test]
    fn equal_two_values_resolve_as_coboundary() {
        let afp = GroupModel::new(Family::Afp(
            crate::group::AfpGroup::free_product(
                crate::group::FiniteGroupTable::cyclic(3, 'a').unwrap(),
                crate::group::FiniteGroupTable::cyclic(3, 'b').unwrap(),
            )
            .unwrap(),
        ));
        let p = MarginalProfile::two_value(AlmostInvariantSet::afp_ends(), 0.4, 0.4).unwrap();
        let cons = decide_conservativeness(&afp, &p, None, 2, false).unwrap();
        let verdict = classify(&afp, &p, &cons, &ClassifyOptions { radius: 2, generators: None }).unwrap();
        assert_eq!(verdict.tag, TypeTag::TypeII1);

        let chain = GroupModel::new(Family::Chain(crate::group::ChainGroup::z2_sum()));
        let p = MarginalProfile::shell_values(vec![0.4, 0.4], true).unwrap();
        let cons = decide_conservativeness(&chain, &p, None, 4, false).unwrap();
        let verdict = classify(&chain, &p, &cons, &ClassifyOptions { radius: 4, generators: None }).unwrap();
        assert_eq!(verdict.tag, TypeTag::TypeII1);
    }
}
