//! Desk-scale models of nonsingular Bernoulli shifts of countable groups:
//! exact group arithmetic, marginal profiles with machine-checkable tail
//! certificates, cocycle series, conservativeness criteria, Krieger-type
//! classification and Monte Carlo corroboration of Radon-Nikodym statistics.

pub mod aiset;
pub mod classify;
pub mod cocycle;
pub mod conserve;
pub mod group;
pub mod mc;
pub mod profile;
pub mod verdict;

pub use group::{Element, GroupError, GroupModel};
