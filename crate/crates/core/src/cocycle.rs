//! The l2 difference cocycle of a marginal profile, its truncated and exact
//! squared norms, the Hellinger sums deciding nonsingularity, and the
//! nonatomicity sum. These are the raw quantities every later criterion
//! consumes; all series travel as (partial sum, certificate verdict) pairs.

use thiserror::Error;

use crate::aiset::{self, AiError};
use crate::group::{Element, GroupError, GroupModel};
use crate::profile::MarginalProfile;
use crate::verdict::{AtomicityVerdict, SingularityVerdict};

#[derive(Debug, Error)]
pub enum CocycleError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Ai(#[from] AiError),
}

/// Truncated and, when certified, exact cocycle data at one group element.
#[derive(Clone, Debug)]
pub struct CocycleReport {
    pub g: Element,
    /// `sum_(h in ball) c_g(h)^2`.
    pub norm_sq_partial: f64,
    /// Exact value when the profile makes `c_g` finitely supported.
    pub norm_sq_exact: Option<f64>,
    /// Truncated Hellinger sum of the Kakutani criterion.
    pub kakutani_partial: f64,
    pub kakutani_verdict: SingularityVerdict,
    /// Truncated `sum min(mu_h(0), mu_h(1))`.
    pub nonatomicity_partial: f64,
    pub nonatomicity_verdict: AtomicityVerdict,
    pub radius: u32,
}

/// `c_g(h) = mu_h(0) - mu_(g^(-1) h)(0)`.
pub fn cocycle_value(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    h: &Element,
) -> f64 {
    let ginv_h = group.mul(&group.inv(g), h);
    profile.value(group, h) - profile.value(group, &ginv_h)
}

/// Truncated squared norm plus the exact value when the profile is piecewise
/// constant with zero perturbation (then the norm collapses to
/// `(on - off)^2 |W (symm diff) gW|`).
pub fn cocycle_norm_sq(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    radius: u32,
) -> Result<(f64, Option<f64>), CocycleError> {
    let ginv = group.inv(g);
    let ball = group.enumerate_ball(radius)?;
    let mut partial = 0.0;
    for h in &ball {
        let d = profile.value(group, h) - profile.value(group, &group.mul(&ginv, h));
        partial += d * d;
    }
    let exact = norm_sq_exact(group, profile, g)?;
    Ok((partial, exact))
}

/// Exact squared norm when certified; `None` otherwise. For the half-line
/// and the amalgam construction the boundary size has a closed form (|g| and
/// 2n|C|), validated elsewhere by exhaustive set difference; the remaining
/// constructions enumerate.
pub fn norm_sq_exact(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
) -> Result<Option<f64>, CocycleError> {
    use crate::aiset::AiConstruction;
    use crate::group::Family;
    if profile.uniform_norm_bound(group) == Some(0.0) {
        return Ok(Some(0.0));
    }
    if let Some((wset, diff, _, _)) = profile.two_value_data() {
        let size = match (&wset.construction, &group.family) {
            (AiConstruction::HalfLine, Family::Lattice(m)) if m.dim == 1 => {
                group.word_length(g) as usize
            }
            (AiConstruction::AfpEndsAtIdentity, Family::Afp(m)) => {
                2 * group.word_length(g) as usize * m.c.order()
            }
            _ => aiset::boundary_size(group, wset, g)?,
        };
        return Ok(Some(diff * diff * size as f64));
    }
    Ok(None)
}

/// Truncated Kakutani sum
/// `sum_h (sqrt(mu_(gh)(0)) - sqrt(mu_h(0)))^2 + (sqrt(mu_(gh)(1)) - sqrt(mu_h(1)))^2`
/// with the certified verdict (finite iff the shift by `g` is nonsingular).
pub fn kakutani_sum(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    radius: u32,
) -> Result<(f64, SingularityVerdict), CocycleError> {
    let ball = group.enumerate_ball(radius)?;
    let mut partial = 0.0;
    for h in &ball {
        let gh = group.mul(g, h);
        let a = profile.value(group, &gh);
        let b = profile.value(group, h);
        partial += (a.sqrt() - b.sqrt()).powi(2) + ((1.0 - a).sqrt() - (1.0 - b).sqrt()).powi(2);
    }
    Ok((partial, profile.nonsingular_verdict()))
}

/// Truncated `sum_h min(mu_h(0), mu_h(1))` with the certified atomicity
/// verdict for the full product measure.
pub fn nonatomicity_sum(
    group: &GroupModel,
    profile: &MarginalProfile,
    radius: u32,
) -> Result<(f64, AtomicityVerdict), CocycleError> {
    let ball = group.enumerate_ball(radius)?;
    let partial = ball
        .iter()
        .map(|h| {
            let v = profile.value(group, h);
            v.min(1.0 - v)
        })
        .sum();
    Ok((partial, profile.nonatomic_verdict()))
}

/// Full per-element report used for CSV export.
pub fn cocycle_report(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    radius: u32,
) -> Result<CocycleReport, CocycleError> {
    let (norm_sq_partial, norm_sq_exact) = cocycle_norm_sq(group, profile, g, radius)?;
    let (kakutani_partial, kakutani_verdict) = kakutani_sum(group, profile, g, radius)?;
    let (nonatomicity_partial, nonatomicity_verdict) = nonatomicity_sum(group, profile, radius)?;
    Ok(CocycleReport {
        g: g.clone(),
        norm_sq_partial,
        norm_sq_exact,
        kakutani_partial,
        kakutani_verdict,
        nonatomicity_partial,
        nonatomicity_verdict,
        radius,
    })
}

/// Squared-norm value preferred by downstream series: the exact one when the
/// certificate provides it, else the ball truncation.
pub fn norm_sq_best(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    radius: u32,
) -> Result<f64, CocycleError> {
    match norm_sq_exact(group, profile, g)? {
        Some(v) => Ok(v),
        None => Ok(cocycle_norm_sq(group, profile, g, radius)?.0),
    }
}
