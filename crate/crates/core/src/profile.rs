//! Marginal data `g -> mu_g(0)` together with enough declared asymptotic
//! structure to make the convergence questions decidable. Every verdict a
//! profile hands out is read from its declared structure; empirical sums on
//! finite balls only corroborate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::aiset::AlmostInvariantSet;
use crate::group::{Element, Family, GroupModel};
use crate::verdict::{AtomicityVerdict, SeriesVerdict, SingularityVerdict, PROB_TOL};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("marginal value {value} at {site} exits (0,1); profiles are rejected at construction, not clamped")]
    OutOfRange { value: f64, site: String },
    #[error("invalid profile parameter: {0}")]
    InvalidParameter(String),
    #[error("profile does not apply to a {family} group: {reason}")]
    FamilyMismatch { family: String, reason: String },
}

/// Declared set of limit values of `mu_g(0)` as `g` escapes to infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum LimitSetDecl {
    /// Finitely many accumulation points, listed exactly.
    Points(Vec<f64>),
    /// A full interval (a perfect set), produced by slow oscillation.
    Interval { lo: f64, hi: f64 },
    Undeclared,
}

/// Linear-in-syllable bound on the squared cocycle norms, used by the growth
/// series comparison. `exact` means equality rather than an upper bound.
#[derive(Clone, Copy, Debug)]
pub struct LinearNormBound {
    pub coeff: f64,
    pub exact: bool,
}

/// Declared certificate block for explicit table profiles.
#[derive(Clone, Debug, Default)]
pub struct ExplicitCertificate {
    pub delta: Option<f64>,
    pub limit_set: Option<Vec<f64>>,
    pub l2_lambda: Option<(f64, SeriesVerdict)>,
    pub nonsingular: Option<SingularityVerdict>,
    pub nonatomic: Option<AtomicityVerdict>,
}

/// The marginal map `g -> mu_g(0)`.
#[derive(Clone, Debug)]
pub enum MarginalProfile {
    /// The invariant product measure.
    Constant { lambda: f64 },
    /// Two values split along an almost-invariant set.
    AiTwoValue { wset: AlmostInvariantSet, on_value: f64, off_value: f64 },
    /// One value per chain shell; with `repeat` the list cycles, otherwise the
    /// last value continues forever.
    ShellValues { lambdas: Vec<f64>, repeat: bool },
    /// Chain profile with vanishing even-shell values `gamma_n = gamma0 *
    /// ratio^(n-1)` and constant odd-shell value `1 - lambda`; the recipe that
    /// produces an infinite invariant measure once `sum gamma_n |shell|`
    /// converges.
    IiInfinity { lambda: f64, gamma0: f64, gamma_ratio: f64 },
    /// Integers: `1/2 + amplitude * sin(log(1+|n|))`, slowly oscillating.
    Oscillating { amplitude: f64 },
    /// Integers: `lambda + coeff * (1+|n|)^(-exponent)`.
    PowerLaw { lambda: f64, coeff: f64, exponent: f64 },
    /// `scale * base^(word length)`; marginals vanish at infinity fast enough
    /// to make the product measure atomic.
    GeometricWordLength { base: f64, scale: f64 },
    /// Explicit table inside a ball, a default value outside, and a declared
    /// certificate block.
    Explicit { entries: BTreeMap<Element, f64>, default: f64, certificate: ExplicitCertificate },
}

fn check_prob(value: f64, site: &str) -> Result<f64, ProfileError> {
    if value > 0.0 && value < 1.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ProfileError::OutOfRange { value, site: site.to_string() })
    }
}

impl MarginalProfile {
    pub fn constant(lambda: f64) -> Result<Self, ProfileError> {
        check_prob(lambda, "constant value")?;
        Ok(MarginalProfile::Constant { lambda })
    }

    /// `mu_g(0) = lambda/(1+lambda)` on `W` and `1/(1+lambda)` off `W`; the
    /// canonical two-value candidate attached to an almost-invariant set.
    pub fn type_iii_candidate(wset: AlmostInvariantSet, lambda: f64) -> Result<Self, ProfileError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(ProfileError::InvalidParameter(format!(
                "candidate parameter lambda = {lambda} must lie in (0,1)"
            )));
        }
        Ok(MarginalProfile::AiTwoValue {
            wset,
            on_value: lambda / (1.0 + lambda),
            off_value: 1.0 / (1.0 + lambda),
        })
    }

    pub fn two_value(wset: AlmostInvariantSet, on_value: f64, off_value: f64) -> Result<Self, ProfileError> {
        check_prob(on_value, "on-set value")?;
        check_prob(off_value, "off-set value")?;
        Ok(MarginalProfile::AiTwoValue { wset, on_value, off_value })
    }

    /// Integers split at zero: `neg` on the negative half line, `pos` on the
    /// nonnegative one.
    pub fn half_line_two_value(neg: f64, pos: f64) -> Result<Self, ProfileError> {
        Self::two_value(AlmostInvariantSet::half_line(), pos, neg)
    }

    pub fn shell_values(lambdas: Vec<f64>, repeat: bool) -> Result<Self, ProfileError> {
        if lambdas.is_empty() {
            return Err(ProfileError::InvalidParameter("empty shell value list".into()));
        }
        for (i, &v) in lambdas.iter().enumerate() {
            check_prob(v, &format!("shell {}", i + 1))?;
        }
        Ok(MarginalProfile::ShellValues { lambdas, repeat })
    }

    pub fn ii_infinity(lambda: f64, gamma0: f64, gamma_ratio: f64) -> Result<Self, ProfileError> {
        check_prob(lambda, "lambda")?;
        check_prob(gamma0, "gamma0")?;
        if !(gamma_ratio > 0.0 && gamma_ratio < 1.0) {
            return Err(ProfileError::InvalidParameter(
                "gamma ratio must lie in (0,1) so the even-shell values vanish".into(),
            ));
        }
        Ok(MarginalProfile::IiInfinity { lambda, gamma0, gamma_ratio })
    }

    pub fn oscillating(amplitude: f64) -> Result<Self, ProfileError> {
        if !(amplitude > 0.0 && amplitude < 0.5) {
            return Err(ProfileError::InvalidParameter(
                "oscillation amplitude must lie in (0, 1/2)".into(),
            ));
        }
        Ok(MarginalProfile::Oscillating { amplitude })
    }

    pub fn power_law(lambda: f64, coeff: f64, exponent: f64) -> Result<Self, ProfileError> {
        check_prob(lambda, "limit value")?;
        check_prob(lambda + coeff, "value at zero")?;
        if exponent <= 0.0 {
            return Err(ProfileError::InvalidParameter("exponent must be positive".into()));
        }
        Ok(MarginalProfile::PowerLaw { lambda, coeff, exponent })
    }

    pub fn geometric_word_length(base: f64, scale: f64) -> Result<Self, ProfileError> {
        check_prob(base, "base")?;
        check_prob(scale, "scale")?;
        Ok(MarginalProfile::GeometricWordLength { base, scale })
    }

    pub fn explicit(
        entries: BTreeMap<Element, f64>,
        default: f64,
        certificate: ExplicitCertificate,
    ) -> Result<Self, ProfileError> {
        check_prob(default, "default")?;
        for (k, &v) in &entries {
            check_prob(v, &format!("{k:?}"))?;
        }
        Ok(MarginalProfile::Explicit { entries, default, certificate })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MarginalProfile::Constant { .. } => "constant",
            MarginalProfile::AiTwoValue { .. } => "ai-two-value",
            MarginalProfile::ShellValues { .. } => "shell-values",
            MarginalProfile::IiInfinity { .. } => "ii-infinity",
            MarginalProfile::Oscillating { .. } => "oscillating",
            MarginalProfile::PowerLaw { .. } => "power-law",
            MarginalProfile::GeometricWordLength { .. } => "geometric-word-length",
            MarginalProfile::Explicit { .. } => "explicit",
        }
    }

    /// Checks that the profile's structure matches the group family.
    pub fn validate_for(&self, group: &GroupModel) -> Result<(), ProfileError> {
        let mismatch = |reason: &str| {
            Err(ProfileError::FamilyMismatch {
                family: group.family_name().to_string(),
                reason: reason.to_string(),
            })
        };
        match self {
            MarginalProfile::AiTwoValue { wset, .. } => {
                if wset.contains(group, &group.identity()).is_err() {
                    return mismatch("the almost-invariant set does not live on this group");
                }
            }
            MarginalProfile::ShellValues { .. } | MarginalProfile::IiInfinity { .. } => {
                if !matches!(group.family, Family::Chain(_)) {
                    return mismatch("shell-indexed profiles need a chain group");
                }
            }
            MarginalProfile::Oscillating { .. } | MarginalProfile::PowerLaw { .. }
                if !matches!(&group.family, Family::Lattice(m) if m.dim == 1) => {
                    return mismatch("this profile is defined over the integers");
                }
            _ => {}
        }
        Ok(())
    }

    /// Shell value of a shell-indexed profile (1-based shell index; the
    /// identity shell takes the first value).
    fn shell_lambda(&self, shell: u32) -> f64 {
        match self {
            MarginalProfile::ShellValues { lambdas, repeat } => {
                let idx = shell.max(1) as usize - 1;
                if *repeat {
                    lambdas[idx % lambdas.len()]
                } else {
                    lambdas[idx.min(lambdas.len() - 1)]
                }
            }
            MarginalProfile::IiInfinity { lambda, gamma0, gamma_ratio } => {
                let n = shell.max(1);
                if n.is_multiple_of(2) {
                    gamma0 * gamma_ratio.powi((n / 2) as i32 - 1)
                } else {
                    1.0 - lambda
                }
            }
            _ => unreachable!("shell_lambda on non-shell profile"),
        }
    }

    /// `mu_g(0)`. Panics if the (profile, group) pair fails `validate_for`.
    pub fn value(&self, group: &GroupModel, g: &Element) -> f64 {
        match self {
            MarginalProfile::Constant { lambda } => *lambda,
            MarginalProfile::AiTwoValue { wset, on_value, off_value } => {
                if wset.contains(group, g).expect("profile validated against group") {
                    *on_value
                } else {
                    *off_value
                }
            }
            MarginalProfile::ShellValues { .. } | MarginalProfile::IiInfinity { .. } => {
                let Family::Chain(chain) = &group.family else {
                    panic!("shell profile on non-chain group")
                };
                let Element::Chain(mask) = g else { panic!("element family mismatch") };
                self.shell_lambda(chain.shell_index(mask))
            }
            MarginalProfile::Oscillating { amplitude } => {
                let Element::Lattice(v) = g else { panic!("element family mismatch") };
                0.5 + amplitude * ((1.0 + v[0].abs() as f64).ln()).sin()
            }
            MarginalProfile::PowerLaw { lambda, coeff, exponent } => {
                let Element::Lattice(v) = g else { panic!("element family mismatch") };
                lambda + coeff * (1.0 + v[0].abs() as f64).powf(-exponent)
            }
            MarginalProfile::GeometricWordLength { base, scale } => {
                scale * base.powi(group.word_length(g) as i32)
            }
            MarginalProfile::Explicit { entries, default, .. } => {
                entries.get(g).copied().unwrap_or(*default)
            }
        }
    }

    /// Uniform bound `delta <= mu_g(0) <= 1 - delta`, when one exists.
    pub fn delta(&self) -> Option<f64> {
        fn of_values(values: &[f64]) -> f64 {
            values.iter().fold(0.5, |acc, &v| acc.min(v).min(1.0 - v))
        }
        match self {
            MarginalProfile::Constant { lambda } => Some(of_values(&[*lambda])),
            MarginalProfile::AiTwoValue { on_value, off_value, .. } => {
                Some(of_values(&[*on_value, *off_value]))
            }
            MarginalProfile::ShellValues { lambdas, .. } => Some(of_values(lambdas)),
            MarginalProfile::IiInfinity { .. } => None,
            MarginalProfile::Oscillating { amplitude } => Some(0.5 - amplitude),
            MarginalProfile::PowerLaw { lambda, coeff, .. } => {
                Some(of_values(&[*lambda, *lambda + *coeff]))
            }
            MarginalProfile::GeometricWordLength { .. } => None,
            MarginalProfile::Explicit { certificate, .. } => certificate.delta,
        }
    }

    /// Declared set of limit values.
    pub fn limit_set(&self) -> LimitSetDecl {
        match self {
            MarginalProfile::Constant { lambda } => LimitSetDecl::Points(vec![*lambda]),
            MarginalProfile::AiTwoValue { on_value, off_value, .. } => {
                let mut points = vec![*on_value, *off_value];
                points.sort_by(f64::total_cmp);
                points.dedup_by(|a, b| (*a - *b).abs() <= PROB_TOL);
                LimitSetDecl::Points(points)
            }
            MarginalProfile::ShellValues { lambdas, repeat } => {
                if *repeat {
                    let mut points = lambdas.clone();
                    points.sort_by(f64::total_cmp);
                    points.dedup_by(|a, b| (*a - *b).abs() <= PROB_TOL);
                    LimitSetDecl::Points(points)
                } else {
                    LimitSetDecl::Points(vec![*lambdas.last().expect("nonempty")])
                }
            }
            MarginalProfile::IiInfinity { lambda, .. } => {
                LimitSetDecl::Points(vec![0.0, 1.0 - lambda])
            }
            MarginalProfile::Oscillating { amplitude } => {
                LimitSetDecl::Interval { lo: 0.5 - amplitude, hi: 0.5 + amplitude }
            }
            MarginalProfile::PowerLaw { lambda, .. } => LimitSetDecl::Points(vec![*lambda]),
            MarginalProfile::GeometricWordLength { .. } => LimitSetDecl::Points(vec![0.0]),
            MarginalProfile::Explicit { certificate, .. } => match &certificate.limit_set {
                Some(points) => LimitSetDecl::Points(points.clone()),
                None => LimitSetDecl::Undeclared,
            },
        }
    }

    /// Certified fate of `sum_g (mu_g(0) - lambda)^2`.
    pub fn l2_verdict(&self, lambda: f64) -> SeriesVerdict {
        let near = |v: f64| (v - lambda).abs() <= PROB_TOL;
        match self {
            MarginalProfile::Constant { lambda: v } => {
                if near(*v) {
                    SeriesVerdict::Converges
                } else {
                    SeriesVerdict::Diverges
                }
            }
            MarginalProfile::AiTwoValue { on_value, off_value, .. } => {
                // Both parts are infinite.
                if near(*on_value) && near(*off_value) {
                    SeriesVerdict::Converges
                } else {
                    SeriesVerdict::Diverges
                }
            }
            MarginalProfile::ShellValues { lambdas, repeat } => {
                if *repeat {
                    if lambdas.iter().all(|&v| near(v)) {
                        SeriesVerdict::Converges
                    } else {
                        SeriesVerdict::Diverges
                    }
                } else if near(*lambdas.last().expect("nonempty")) {
                    // Finitely many shells disagree; their contribution is finite.
                    SeriesVerdict::Converges
                } else {
                    SeriesVerdict::Diverges
                }
            }
            MarginalProfile::IiInfinity { .. } => SeriesVerdict::Diverges,
            MarginalProfile::Oscillating { .. } => SeriesVerdict::Diverges,
            MarginalProfile::PowerLaw { lambda: v, coeff: _, exponent } => {
                if near(*v) {
                    if 2.0 * exponent > 1.0 {
                        SeriesVerdict::Converges
                    } else {
                        SeriesVerdict::Diverges
                    }
                } else {
                    SeriesVerdict::Diverges
                }
            }
            MarginalProfile::GeometricWordLength { .. } => SeriesVerdict::Diverges,
            MarginalProfile::Explicit { certificate, .. } => match certificate.l2_lambda {
                Some((l, verdict)) if (l - lambda).abs() <= PROB_TOL => verdict,
                _ => SeriesVerdict::Unknown,
            },
        }
    }

    /// The single value `lambda` with a certified convergent `l2` distance,
    /// when the certificate provides one (the coboundary case).
    pub fn coboundary_lambda(&self) -> Option<f64> {
        let candidate = match self {
            MarginalProfile::Constant { lambda } => Some(*lambda),
            MarginalProfile::ShellValues { lambdas, repeat: false } => Some(*lambdas.last()?),
            // degenerate piecewise profiles collapse to a constant
            MarginalProfile::ShellValues { lambdas, repeat: true }
                if lambdas.iter().all(|&v| (v - lambdas[0]).abs() <= PROB_TOL) =>
            {
                Some(lambdas[0])
            }
            MarginalProfile::AiTwoValue { on_value, off_value, .. }
                if (on_value - off_value).abs() <= PROB_TOL =>
            {
                Some(*on_value)
            }
            MarginalProfile::PowerLaw { lambda, .. } => Some(*lambda),
            MarginalProfile::Explicit { certificate, .. } => {
                certificate.l2_lambda.and_then(|(l, v)| (v == SeriesVerdict::Converges).then_some(l))
            }
            _ => None,
        }?;
        (self.l2_verdict(candidate) == SeriesVerdict::Converges).then_some(candidate)
    }

    /// Certified Kakutani verdict (same for every group element).
    pub fn nonsingular_verdict(&self) -> SingularityVerdict {
        match self {
            MarginalProfile::Explicit { certificate, .. } => {
                certificate.nonsingular.unwrap_or(SingularityVerdict::Unknown)
            }
            // Every built-in either moves finitely many marginals per shift or
            // has square-summable increments.
            _ => SingularityVerdict::Nonsingular,
        }
    }

    pub fn nonatomic_verdict(&self) -> AtomicityVerdict {
        match self {
            MarginalProfile::GeometricWordLength { .. } => AtomicityVerdict::Atomic,
            MarginalProfile::IiInfinity { .. } => AtomicityVerdict::Nonatomic,
            MarginalProfile::Explicit { certificate, .. } => {
                certificate.nonatomic.unwrap_or(AtomicityVerdict::Unknown)
            }
            // A positive delta bound forces the nonatomicity sum to diverge.
            _ => AtomicityVerdict::Nonatomic,
        }
    }

    /// Two-value structure `(W, on - off)` when the profile is exactly
    /// piecewise constant on an almost-invariant set and its complement.
    pub fn two_value_data(&self) -> Option<(&AlmostInvariantSet, f64, f64, f64)> {
        match self {
            MarginalProfile::AiTwoValue { wset, on_value, off_value } => {
                Some((wset, on_value - off_value, *on_value, *off_value))
            }
            _ => None,
        }
    }

    /// Radius within which every site with `mu_(gh) != mu_h` (and the support
    /// of the difference cocycle at `g`) is certified to lie. `None` when the
    /// support is not finite.
    pub fn cg_support_radius(&self, group: &GroupModel, g: &Element) -> Option<u32> {
        let len = group.word_length(g);
        match self {
            MarginalProfile::Constant { .. } => Some(0),
            MarginalProfile::AiTwoValue { wset, .. } => Some(len + wset.boundary_margin),
            MarginalProfile::ShellValues { .. } | MarginalProfile::IiInfinity { .. } => Some(len),
            MarginalProfile::Explicit { .. } => {
                // entries live inside some ball; translating by g moves it by |g|
                let table_radius = match self {
                    MarginalProfile::Explicit { entries, .. } => entries
                        .keys()
                        .map(|e| group.word_length(e))
                        .max()
                        .unwrap_or(0),
                    _ => unreachable!(),
                };
                Some(table_radius + len)
            }
            _ => None,
        }
    }

    /// Per-syllable linear bound on the exact squared cocycle norms of the
    /// two-value profiles over amalgams and HNN extensions.
    pub fn linear_syllable_norm(&self, group: &GroupModel) -> Option<LinearNormBound> {
        let (wset, diff, _, _) = self.two_value_data()?;
        let csize = match &group.family {
            Family::Afp(m) => m.c.order() as f64,
            Family::Hnn(m) => m.c.order() as f64,
            _ => return None,
        };
        match wset.construction {
            crate::aiset::AiConstruction::AfpEndsAtIdentity => {
                Some(LinearNormBound { coeff: diff * diff * 2.0 * csize, exact: true })
            }
            crate::aiset::AiConstruction::HnnEndsAtIdentity => {
                Some(LinearNormBound { coeff: diff * diff * 2.0 * csize, exact: false })
            }
            _ => None,
        }
    }

    /// Uniform bound on the squared cocycle norms, when certified. A profile
    /// within square-summable distance `S` of a constant has
    /// `|c_g|^2 <= 4 S` for every `g`.
    pub fn uniform_norm_bound(&self, group: &GroupModel) -> Option<f64> {
        match self {
            MarginalProfile::Constant { .. } => Some(0.0),
            MarginalProfile::AiTwoValue { on_value, off_value, .. }
                if (on_value - off_value).abs() <= PROB_TOL =>
            {
                Some(0.0)
            }
            MarginalProfile::ShellValues { lambdas, repeat } => {
                let last = *lambdas.last().expect("nonempty");
                if lambdas.iter().all(|&v| (v - last).abs() <= PROB_TOL) {
                    return Some(0.0);
                }
                if *repeat {
                    return None;
                }
                // eventually constant: finitely many shells deviate
                let Family::Chain(chain) = &group.family else { return None };
                let total: f64 = lambdas
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let m = i as u32 + 1;
                        let size = if m == 1 {
                            chain.level_order_f64(1)
                        } else {
                            chain.shell_size_f64(m)
                        };
                        (v - last) * (v - last) * size
                    })
                    .sum();
                Some(4.0 * total)
            }
            MarginalProfile::PowerLaw { coeff, exponent, .. } => {
                if 2.0 * exponent <= 1.0 {
                    return None;
                }
                // sum of squared deviations over the integers, with an
                // integral bound on the tail
                let cutoff = 100_000i64;
                let head: f64 = (-cutoff..=cutoff)
                    .map(|n| (coeff * (1.0 + n.abs() as f64).powf(-exponent)).powi(2))
                    .sum();
                let tail = 2.0 * coeff * coeff * (cutoff as f64).powf(1.0 - 2.0 * exponent)
                    / (2.0 * exponent - 1.0);
                Some(4.0 * (head + tail))
            }
            // explicit tables are finite windows onto a declared infinite
            // profile, so the table alone cannot bound the norms
            _ => None,
        }
    }
}

/// Report of `limit_value_set`: the declared set plus the empirical cluster
/// data observed on the largest enumerated ball.
#[derive(Clone, Debug)]
pub struct LimitValueReport {
    pub declared: LimitSetDecl,
    /// (cluster center, population) on the scanned ball.
    pub empirical_clusters: Vec<(f64, usize)>,
    /// True when `declared` comes from a certificate rather than the scan.
    pub certified: bool,
}

/// Declared limit set plus an empirical histogram from the ball of the given
/// radius. Without a certificate the result is flagged empirical.
pub fn limit_value_set(
    group: &GroupModel,
    profile: &MarginalProfile,
    radius: u32,
) -> Result<LimitValueReport, crate::group::GroupError> {
    let ball = group.enumerate_ball(radius)?;
    let mut values: Vec<f64> = ball.iter().map(|g| profile.value(group, g)).collect();
    values.sort_by(f64::total_cmp);
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let gap = 1e-6;
    for v in values {
        match clusters.last_mut() {
            Some((center, count)) if (v - *center).abs() <= gap => {
                *center = (*center * *count as f64 + v) / (*count as f64 + 1.0);
                *count += 1;
            }
            _ => clusters.push((v, 1)),
        }
    }
    let declared = profile.limit_set();
    let certified = !matches!(declared, LimitSetDecl::Undeclared);
    Ok(LimitValueReport { declared, empirical_clusters: clusters, certified })
}

/// Partial sum of `sum (mu_g(0) - lambda)^2` over the ball, with the
/// certified verdict for the full series.
pub fn l2_distance_sq_to(
    group: &GroupModel,
    profile: &MarginalProfile,
    lambda: f64,
    radius: u32,
) -> Result<(f64, SeriesVerdict), crate::group::GroupError> {
    let ball = group.enumerate_ball(radius)?;
    let partial = ball
        .iter()
        .map(|g| {
            let d = profile.value(group, g) - lambda;
            d * d
        })
        .sum();
    Ok((partial, profile.l2_verdict(lambda)))
}
