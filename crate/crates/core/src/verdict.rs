//! Small verdict vocabularies shared across the analysis stages. A bare
//! float is never a convergence claim: every series quantity travels as a
//! (partial sum, verdict) pair, and verdicts come from declared certificates.

use serde::Serialize;

/// Fate of an infinite series truncated to a finite ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SeriesVerdict {
    Converges,
    Diverges,
    Unknown,
}

/// Kakutani-criterion verdict for a single group element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SingularityVerdict {
    Nonsingular,
    Singular,
    Unknown,
}

/// Whether the product measure is nonatomic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AtomicityVerdict {
    Nonatomic,
    Atomic,
    Unknown,
}

/// Absolute tolerance under which two probabilities are considered equal.
/// All built-in profiles are exact rationals evaluated in double precision.
pub const PROB_TOL: f64 = 1e-12;

/// One step of an evidence trail: which criterion fired, on what inputs,
/// with what outcome. Every non-Unknown verdict carries at least one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub criterion: String,
    pub inputs: String,
    pub outcome: String,
}

impl Evidence {
    pub fn new(criterion: &str, inputs: impl Into<String>, outcome: impl Into<String>) -> Self {
        Evidence { criterion: criterion.to_string(), inputs: inputs.into(), outcome: outcome.into() }
    }
}
