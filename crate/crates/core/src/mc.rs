//! Monte Carlo and exact-window evaluation of Radon-Nikodym statistics: log
//! density ratios of shifts on configuration windows, the skew-product step
//! they drive, permutation and configuration-flip cocycles, and the empirical
//! histogram of certified log ratios with a lattice fit. The exhaustive
//! mean-one identity on small windows is the oracle all sampling code is
//! checked against.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::group::{Element, GroupError, GroupModel};
use crate::profile::MarginalProfile;

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("window of {size} sites exceeds the exhaustive cap of {max}")]
    WindowTooLarge { size: usize, max: usize },
    #[error("site {0} is not in the window")]
    SiteMissing(String),
    #[error("all samples were truncated; enlarge the window radius")]
    NoCertifiedSamples,
}

/// Largest window enumerated exhaustively by the oracle helpers.
pub const MAX_EXHAUSTIVE_SITES: usize = 16;

/// A finite list of sites holding one bit each, with `P(x_h = 0) = mu_h(0)`
/// under the sampling model.
#[derive(Clone, Debug)]
pub struct ConfigWindow {
    sites: Vec<Element>,
    index: HashMap<Element, usize>,
    /// Set when the window is a full ball of this radius; used to certify
    /// that a shift's support is covered.
    radius: Option<u32>,
}

impl ConfigWindow {
    pub fn from_ball(group: &GroupModel, radius: u32) -> Result<Self, McError> {
        let sites = group.enumerate_ball(radius)?;
        let index = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(ConfigWindow { sites, index, radius: Some(radius) })
    }

    pub fn from_sites(sites: Vec<Element>) -> Self {
        let index = sites.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        ConfigWindow { sites, index, radius: None }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Element] {
        &self.sites
    }

    pub fn position(&self, site: &Element) -> Option<usize> {
        self.index.get(site).copied()
    }

    pub fn radius(&self) -> Option<u32> {
        self.radius
    }
}

/// One Monte Carlo draw.
#[derive(Clone, Debug, Serialize)]
pub struct RnSample {
    pub g_label: String,
    pub log_rn: f64,
    pub window_radius: u32,
    pub truncated: bool,
    pub seed: u64,
}

/// Log density ratio of the shift by `g` restricted to the window:
/// `sum_(h in window) log( mu_(gh)(x_h) / mu_h(x_h) )`. The flag is set when
/// the profile cannot certify that every moved site lies inside the window.
pub fn log_rn(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
    bits: &[u8],
) -> (f64, bool) {
    let evaluator = LogRnEvaluator::new(group, profile, g, window);
    (evaluator.eval(bits), evaluator.truncated)
}

/// Precomputed nontrivial factors of one shift's window log density ratio.
pub struct LogRnEvaluator {
    /// (site position, log ratio when the bit is 0, log ratio when it is 1)
    entries: Vec<(usize, f64, f64)>,
    pub truncated: bool,
}

impl LogRnEvaluator {
    pub fn new(group: &GroupModel, profile: &MarginalProfile, g: &Element, window: &ConfigWindow) -> Self {
        let truncated = match (profile.cg_support_radius(group, g), window.radius) {
            (Some(need), Some(have)) => have < need,
            _ => true,
        };
        let mut entries = Vec::new();
        for (i, h) in window.sites.iter().enumerate() {
            let gh = group.mul(g, h);
            let moved = profile.value(group, &gh);
            let fixed = profile.value(group, h);
            if moved != fixed {
                entries.push((i, (moved / fixed).ln(), ((1.0 - moved) / (1.0 - fixed)).ln()));
            }
        }
        LogRnEvaluator { entries, truncated }
    }

    pub fn eval(&self, bits: &[u8]) -> f64 {
        let mut total = 0.0;
        for &(i, l0, l1) in &self.entries {
            total += if bits[i] == 0 { l0 } else { l1 };
        }
        total
    }
}

/// One step of the measure-preserving skew product on `window x reals`:
/// the configuration is relabeled by `g` and the height moves by the log
/// density ratio. Sites whose preimage under the relabeling leaves the window
/// set the truncation flag (their bit is filled with 0).
pub fn maharam_step(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
    bits: &[u8],
    t: f64,
) -> (Vec<u8>, f64, bool) {
    let (increment, mut truncated) = log_rn(group, profile, g, window, bits);
    let ginv = group.inv(g);
    let mut new_bits = vec![0u8; bits.len()];
    for (i, h) in window.sites.iter().enumerate() {
        let source = group.mul(&ginv, h);
        match window.position(&source) {
            Some(j) => new_bits[i] = bits[j],
            None => truncated = true,
        }
    }
    (new_bits, t + increment, truncated)
}

/// Reference density on the height coordinate: `alpha/2 exp(-alpha |t|)`,
/// the finite substitute for the invariant `exp(-t) dt`.
pub fn maharam_reference_density(alpha: f64, t: f64) -> f64 {
    0.5 * alpha * (-alpha * t.abs()).exp()
}

/// Log density ratio of transposing the coordinates at `a` and `b`:
/// `log( mu_a(x_b) mu_b(x_a) / (mu_a(x_a) mu_b(x_b)) )`.
pub fn permutation_log_rn(
    group: &GroupModel,
    profile: &MarginalProfile,
    a: &Element,
    b: &Element,
    xa: u8,
    xb: u8,
) -> f64 {
    let pick = |v: f64, bit: u8| if bit == 0 { v } else { 1.0 - v };
    let va = profile.value(group, a);
    let vb = profile.value(group, b);
    (pick(va, xb) * pick(vb, xa)).ln() - (pick(va, xa) * pick(vb, xb)).ln()
}

/// Composes transpositions left to right, mutating the window configuration
/// and accumulating the permutation cocycle.
pub fn swap_sequence_log_rn(
    group: &GroupModel,
    profile: &MarginalProfile,
    window: &ConfigWindow,
    bits: &mut [u8],
    swaps: &[(Element, Element)],
) -> Result<f64, McError> {
    let mut total = 0.0;
    for (a, b) in swaps {
        let ia = window.position(a).ok_or_else(|| McError::SiteMissing(group.element_label(a)))?;
        let ib = window.position(b).ok_or_else(|| McError::SiteMissing(group.element_label(b)))?;
        total += permutation_log_rn(group, profile, a, b, bits[ia], bits[ib]);
        bits.swap(ia, ib);
    }
    Ok(total)
}

/// The configuration-flip cocycle between two windows that differ on finitely
/// many sites: `sum_i (log mu_i(y_i) - log mu_i(x_i)) - rho (y_i - x_i)`.
pub fn gamma_rho(
    group: &GroupModel,
    profile: &MarginalProfile,
    window: &ConfigWindow,
    x: &[u8],
    y: &[u8],
    rho: f64,
) -> f64 {
    let mut total = 0.0;
    for (i, h) in window.sites.iter().enumerate() {
        if x[i] == y[i] {
            continue;
        }
        let v = profile.value(group, h);
        let pick = |bit: u8| if bit == 0 { v } else { 1.0 - v };
        total += pick(y[i]).ln() - pick(x[i]).ln() - rho * (y[i] as f64 - x[i] as f64);
    }
    total
}

fn mu_weight(mu0: &[f64], mask: u32) -> f64 {
    let mut w = 1.0;
    for (i, &p) in mu0.iter().enumerate() {
        w *= if mask & (1 << i) == 0 { p } else { 1.0 - p };
    }
    w
}

fn exhaustive_guard(window: &ConfigWindow) -> Result<Vec<f64>, McError> {
    if window.len() > MAX_EXHAUSTIVE_SITES {
        return Err(McError::WindowTooLarge { size: window.len(), max: MAX_EXHAUSTIVE_SITES });
    }
    Ok(Vec::new())
}

/// Exhaustive `sum_x mu(x) exp(log_rn(g, x))`; equals 1 for every window
/// because the moved marginals still sum to one site by site.
pub fn rn_mean_exhaustive(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
) -> Result<f64, McError> {
    exhaustive_guard(window)?;
    let mu0: Vec<f64> = window.sites.iter().map(|h| profile.value(group, h)).collect();
    let evaluator = LogRnEvaluator::new(group, profile, g, window);
    let mut total = 0.0;
    let mut bits = vec![0u8; window.len()];
    for mask in 0..(1u64 << window.len()) {
        let m = mask as u32;
        for (i, b) in bits.iter_mut().enumerate() {
            *b = ((m >> i) & 1) as u8;
        }
        total += mu_weight(&mu0, m) * evaluator.eval(&bits).exp();
    }
    Ok(total)
}

/// Exhaustive `sum_x mu(x) exp(-log_rn(g, x))`.
pub fn inverse_rn_mean_exhaustive(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
) -> Result<f64, McError> {
    exhaustive_guard(window)?;
    let mu0: Vec<f64> = window.sites.iter().map(|h| profile.value(group, h)).collect();
    let evaluator = LogRnEvaluator::new(group, profile, g, window);
    let mut total = 0.0;
    let mut bits = vec![0u8; window.len()];
    for mask in 0..(1u64 << window.len()) {
        let m = mask as u32;
        for (i, b) in bits.iter_mut().enumerate() {
            *b = ((m >> i) & 1) as u8;
        }
        total += mu_weight(&mu0, m) * (-evaluator.eval(&bits)).exp();
    }
    Ok(total)
}

/// Closed product form of the inverse mean:
/// `prod_(h in window) ( mu_h(0)^2/mu_(gh)(0) + mu_h(1)^2/mu_(gh)(1) )`.
pub fn inverse_rn_product_formula(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
) -> f64 {
    let mut product = 1.0;
    for h in &window.sites {
        let gh = group.mul(g, h);
        let moved = profile.value(group, &gh);
        let fixed = profile.value(group, h);
        product *= fixed * fixed / moved + (1.0 - fixed) * (1.0 - fixed) / (1.0 - moved);
    }
    product
}

/// Window-matched squared cocycle norm `sum_(h in window) (mu_(gh) - mu_h)^2`,
/// the truncation the inverse-mean exponential bound pairs with.
pub fn window_norm_sq(
    group: &GroupModel,
    profile: &MarginalProfile,
    g: &Element,
    window: &ConfigWindow,
) -> f64 {
    window
        .sites
        .iter()
        .map(|h| {
            let d = profile.value(group, &group.mul(g, h)) - profile.value(group, h);
            d * d
        })
        .sum()
}

/// Documented seed-splitting rule for parallel chains.
pub fn derive_stream_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 step keyed by the stream index
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LatticeFit {
    /// Every certified sample is exactly zero.
    AllZero,
    Lattice { spacing: f64, coverage: f64 },
    /// No spacing above the noise floor fits at least 99 percent of samples.
    Dense { noise_floor: f64 },
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioLatticeReport {
    pub histogram: Vec<HistogramBin>,
    pub fit: LatticeFit,
    pub certified_samples: u64,
    pub truncated_samples: u64,
    pub seed: u64,
    pub window_radius: u32,
}

const FIT_NOISE_FLOOR: f64 = 1e-9;
/// Below this spacing the residual test is vacuous, so the fit reads dense.
const FIT_MIN_SPACING: f64 = 1e-6;
const FIT_COVERAGE: f64 = 0.99;

fn fit_lattice(values: &[f64]) -> LatticeFit {
    if values.is_empty() {
        return LatticeFit::Inconclusive;
    }
    if values.iter().all(|&v| v == 0.0) {
        return LatticeFit::AllZero;
    }
    // gcd estimator over the nonzero magnitudes
    let mut spacing = 0.0f64;
    for &v in values {
        let v = v.abs();
        if v <= FIT_NOISE_FLOOR {
            continue;
        }
        if spacing == 0.0 {
            spacing = v;
        } else {
            let (mut a, mut b) = (spacing.max(v), spacing.min(v));
            while b > FIT_NOISE_FLOOR {
                let r = a % b;
                a = b;
                b = r;
            }
            spacing = a;
        }
    }
    if spacing <= FIT_MIN_SPACING {
        return LatticeFit::Dense { noise_floor: FIT_MIN_SPACING };
    }
    let fitting = values
        .iter()
        .filter(|&&v| {
            let r = v / spacing;
            (r - r.round()).abs() * spacing <= 1e-7
        })
        .count();
    let coverage = fitting as f64 / values.len() as f64;
    if coverage >= FIT_COVERAGE {
        LatticeFit::Lattice { spacing, coverage }
    } else {
        LatticeFit::Dense { noise_floor: FIT_NOISE_FLOOR }
    }
}

/// Samples window configurations, evaluates the log density ratio over the
/// given shifts, and fits a lattice to the certified values. Sampling is
/// deterministic in the master seed; chains derive their streams by the
/// splitmix rule.
pub fn empirical_ratio_lattice(
    group: &GroupModel,
    profile: &MarginalProfile,
    shifts: &[Element],
    radius: u32,
    samples: u64,
    seed: u64,
    keep_samples: bool,
) -> Result<(RatioLatticeReport, Vec<RnSample>), McError> {
    let window = ConfigWindow::from_ball(group, radius)?;
    let mu0: Vec<f64> = window.sites.iter().map(|h| profile.value(group, h)).collect();
    let evaluators: Vec<(LogRnEvaluator, String)> = shifts
        .iter()
        .map(|g| (LogRnEvaluator::new(group, profile, g, &window), group.element_label(g)))
        .collect();
    let stream_seed = derive_stream_seed(seed, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut bits = vec![0u8; window.len()];
    let mut values: Vec<f64> = Vec::new();
    let mut kept: Vec<RnSample> = Vec::new();
    let mut truncated_count = 0u64;
    for s in 0..samples {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = if rng.gen::<f64>() < mu0[i] { 0 } else { 1 };
        }
        let (evaluator, label) = &evaluators[(s % evaluators.len() as u64) as usize];
        let v = evaluator.eval(&bits);
        if evaluator.truncated {
            truncated_count += 1;
        } else {
            values.push(v);
        }
        if keep_samples {
            kept.push(RnSample {
                g_label: label.clone(),
                log_rn: v,
                window_radius: radius,
                truncated: evaluator.truncated,
                seed: stream_seed,
            });
        }
    }
    if values.is_empty() {
        return Err(McError::NoCertifiedSamples);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let histogram = if (hi - lo).abs() <= 1e-15 {
        vec![HistogramBin { lo, hi, count: values.len() as u64 }]
    } else {
        let nbins = 64usize;
        let width = (hi - lo) / nbins as f64;
        let mut bins: Vec<u64> = vec![0; nbins];
        for &v in &values {
            let idx = (((v - lo) / width) as usize).min(nbins - 1);
            bins[idx] += 1;
        }
        bins.into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                lo: lo + i as f64 * width,
                hi: lo + (i + 1) as f64 * width,
                count,
            })
            .collect()
    };
    let fit = fit_lattice(&values);
    Ok((
        RatioLatticeReport {
            histogram,
            fit,
            certified_samples: values.len() as u64,
            truncated_samples: truncated_count,
            seed,
            window_radius: radius,
        },
        kept,
    ))
}
