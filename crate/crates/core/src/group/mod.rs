//! Exact arithmetic, canonical normal forms and ball/sphere enumeration for
//! the four group families the analysis runs over: integer lattices, locally
//! finite chains, amalgamated free products and HNN extensions.

pub mod afp;
pub mod chain;
pub mod finite;
pub mod hnn;
pub mod lattice;

use serde::Serialize;
use thiserror::Error;

pub use afp::{AfpGroup, AfpWord};
pub use chain::{ChainGroup, ChainMask, ChainRule};
pub use finite::{CosetTable, Embedding, FiniteGroupTable};
pub use hnn::{HnnGroup, HnnWord};
pub use lattice::LatticeGroup;

/// Default cap on the number of elements materialized per ball.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 200_000;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("mismatched group models: {0}")]
    MismatchedModels(String),
    #[error("enumeration budget exceeded: radius {requested} requested, radius {attainable} attainable under budget {budget}")]
    BudgetExceeded { requested: u32, attainable: u32, budget: usize },
    #[error("sphere counting requires n >= 1")]
    InvalidSphereIndex(u32),
    #[error("sphere count overflows u64 at n = {0}")]
    CountOverflow(u32),
    #[error("invalid group data: {0}")]
    InvalidTable(String),
    #[error("operation not supported for this family: {0}")]
    Unsupported(String),
    #[error("chain level {level} exceeds the representable coordinate range ({max})")]
    ChainTooDeep { level: u32, max: u64 },
}

/// Group element in canonical normal form. Two elements are equal in the
/// group iff their encodings are identical.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Lattice(Vec<i64>),
    Chain(ChainMask),
    Afp(AfpWord),
    Hnn(HnnWord),
}

#[derive(Clone, Debug)]
pub enum Family {
    Lattice(LatticeGroup),
    Chain(ChainGroup),
    Afp(AfpGroup),
    Hnn(HnnGroup),
}

/// Number of ends, read from the structure of the family. This is shipped as
/// a lookup (virtually cyclic groups have two ends; locally finite groups and
/// proper finite-edge splittings have infinitely many; higher-rank lattices
/// have one), not computed from first principles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Ends {
    One,
    Two,
    InfinitelyMany,
}

#[derive(Clone, Debug)]
pub struct GroupModel {
    pub family: Family,
    pub budget: usize,
}

impl GroupModel {
    pub fn new(family: Family) -> Self {
        GroupModel { family, budget: DEFAULT_ENUMERATION_BUDGET }
    }

    pub fn with_budget(family: Family, budget: usize) -> Self {
        GroupModel { family, budget }
    }

    pub fn integers() -> Self {
        Self::new(Family::Lattice(LatticeGroup::integers()))
    }

    pub fn lattice(dim: usize) -> Result<Self, GroupError> {
        Ok(Self::new(Family::Lattice(LatticeGroup::new(dim)?)))
    }

    pub fn family_name(&self) -> &'static str {
        match &self.family {
            Family::Lattice(_) => "lattice",
            Family::Chain(_) => "chain",
            Family::Afp(_) => "afp",
            Family::Hnn(_) => "hnn",
        }
    }

    pub fn identity(&self) -> Element {
        match &self.family {
            Family::Lattice(g) => Element::Lattice(g.identity()),
            Family::Chain(g) => Element::Chain(g.identity()),
            Family::Afp(g) => Element::Afp(g.identity()),
            Family::Hnn(g) => Element::Hnn(g.identity()),
        }
    }

    /// Group law on validated elements.
    pub fn multiply(&self, g: &Element, h: &Element) -> Result<Element, GroupError> {
        self.validate(g)?;
        self.validate(h)?;
        Ok(self.mul(g, h))
    }

    /// Group law without validation; used on elements this model produced.
    pub fn mul(&self, g: &Element, h: &Element) -> Element {
        match (&self.family, g, h) {
            (Family::Lattice(m), Element::Lattice(a), Element::Lattice(b)) => {
                Element::Lattice(m.mul(a, b))
            }
            (Family::Chain(m), Element::Chain(a), Element::Chain(b)) => Element::Chain(m.mul(a, b)),
            (Family::Afp(m), Element::Afp(a), Element::Afp(b)) => Element::Afp(m.mul(a, b)),
            (Family::Hnn(m), Element::Hnn(a), Element::Hnn(b)) => Element::Hnn(m.mul(a, b)),
            _ => panic!("element does not belong to this group model"),
        }
    }

    pub fn inverse(&self, g: &Element) -> Result<Element, GroupError> {
        self.validate(g)?;
        Ok(self.inv(g))
    }

    pub fn inv(&self, g: &Element) -> Element {
        match (&self.family, g) {
            (Family::Lattice(m), Element::Lattice(a)) => Element::Lattice(m.inv(a)),
            (Family::Chain(m), Element::Chain(a)) => Element::Chain(m.inv(a)),
            (Family::Afp(m), Element::Afp(a)) => Element::Afp(m.inv(a)),
            (Family::Hnn(m), Element::Hnn(a)) => Element::Hnn(m.inv(a)),
            _ => panic!("element does not belong to this group model"),
        }
    }

    /// Word length: l1 norm on lattices, syllable count on amalgams and HNN
    /// extensions, smallest containing level on chains.
    pub fn word_length(&self, g: &Element) -> u32 {
        match (&self.family, g) {
            (Family::Lattice(m), Element::Lattice(a)) => m.word_length(a),
            (Family::Chain(m), Element::Chain(a)) => m.shell_index(a),
            (Family::Afp(_), Element::Afp(a)) => a.syllables(),
            (Family::Hnn(_), Element::Hnn(a)) => a.syllables(),
            _ => panic!("element does not belong to this group model"),
        }
    }

    pub fn is_identity(&self, g: &Element) -> bool {
        *g == self.identity()
    }

    fn validate(&self, g: &Element) -> Result<(), GroupError> {
        let ok = match (&self.family, g) {
            (Family::Lattice(m), Element::Lattice(a)) => a.len() == m.dim,
            (Family::Chain(_), Element::Chain(_)) => true,
            (Family::Afp(m), Element::Afp(a)) => {
                (a.tail as usize) < m.a.order()
                    && a.head.iter().all(|&(x, y)| (x as usize) < m.a.order() && (y as usize) < m.b.order())
            }
            (Family::Hnn(m), Element::Hnn(a)) => {
                (a.lead as usize) < m.a.order()
                    && a.letters.iter().all(|&(e, x)| (e == 1 || e == -1) && (x as usize) < m.a.order())
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(GroupError::MismatchedModels(format!(
                "element {g:?} is not a valid normal form for a {} model",
                self.family_name()
            )))
        }
    }

    /// All elements of word length exactly `n` (n >= 1 for amalgams and HNN
    /// extensions; lattice spheres are l1 spheres; chain spheres are level
    /// differences).
    pub fn sphere(&self, n: u32) -> Result<Vec<Element>, GroupError> {
        match &self.family {
            Family::Afp(m) => {
                self.check_sphere_budget(n)?;
                Ok(m.sphere(n).into_iter().map(Element::Afp).collect())
            }
            Family::Hnn(m) => {
                self.check_sphere_budget(n)?;
                Ok(m.sphere(n).into_iter().map(Element::Hnn).collect())
            }
            _ => {
                let mut ball = self.enumerate_ball(n)?;
                ball.retain(|g| self.word_length(g) == n);
                Ok(ball)
            }
        }
    }

    fn check_sphere_budget(&self, n: u32) -> Result<(), GroupError> {
        if n == 0 {
            return Ok(());
        }
        let count = self.sphere_count(n)?;
        if count > self.budget as u64 {
            return Err(GroupError::BudgetExceeded {
                requested: n,
                attainable: n.saturating_sub(1),
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Exact sphere sizes from the closed counting formulas:
    /// `[A:C]([A:C]-1)^{n-1}([B:C]-1)^n |A|` for amalgams and
    /// `2|A| rho1 (rho1+rho2)^{n-1}` for HNN extensions.
    pub fn sphere_count(&self, n: u32) -> Result<u64, GroupError> {
        match &self.family {
            Family::Afp(m) => m.sphere_count(n),
            Family::Hnn(m) => m.sphere_count(n),
            _ => Err(GroupError::Unsupported(
                "closed sphere-count formulas apply to amalgams and HNN extensions".into(),
            )),
        }
    }

    /// All elements of word length at most `r`, ordered by length and then by
    /// the lexicographic order of the normal form. Duplicate-free and closed
    /// under inverses.
    pub fn enumerate_ball(&self, r: u32) -> Result<Vec<Element>, GroupError> {
        match &self.family {
            Family::Lattice(m) => {
                let size = m.ball_size(r);
                if size > self.budget as u64 {
                    let attainable = (0..r).rev().find(|&x| m.ball_size(x) <= self.budget as u64);
                    return Err(GroupError::BudgetExceeded {
                        requested: r,
                        attainable: attainable.unwrap_or(0),
                        budget: self.budget,
                    });
                }
                Ok(m.ball(r).into_iter().map(Element::Lattice).collect())
            }
            Family::Chain(m) => Ok(m.ball(r, self.budget)?.into_iter().map(Element::Chain).collect()),
            Family::Afp(m) => {
                let mut total = m.a.order() as u64;
                let mut attainable = 0;
                for n in 1..=r {
                    total = total.saturating_add(m.sphere_count(n)?);
                    if total > self.budget as u64 {
                        return Err(GroupError::BudgetExceeded { requested: r, attainable, budget: self.budget });
                    }
                    attainable = n;
                }
                let mut out = Vec::with_capacity(total as usize);
                for n in 0..=r {
                    out.extend(m.sphere(n).into_iter().map(Element::Afp));
                }
                Ok(out)
            }
            Family::Hnn(m) => {
                let mut total = m.a.order() as u64;
                let mut attainable = 0;
                for n in 1..=r {
                    total = total.saturating_add(m.sphere_count(n)?);
                    if total > self.budget as u64 {
                        return Err(GroupError::BudgetExceeded { requested: r, attainable, budget: self.budget });
                    }
                    attainable = n;
                }
                let mut out = Vec::with_capacity(total as usize);
                for n in 0..=r {
                    out.extend(m.sphere(n).into_iter().map(Element::Hnn));
                }
                Ok(out)
            }
        }
    }

    /// Declared generating set: lattice unit vectors and their inverses, the
    /// first coordinate flips of a chain, all non-identity factor elements of
    /// an amalgam, the base group plus both stable letters of an HNN
    /// extension.
    pub fn generators(&self) -> Vec<Element> {
        match &self.family {
            Family::Lattice(m) => {
                let mut gens = Vec::with_capacity(2 * m.dim);
                for i in 0..m.dim {
                    for sign in [1i64, -1] {
                        let mut v = vec![0i64; m.dim];
                        v[i] = sign;
                        gens.push(Element::Lattice(v));
                    }
                }
                gens
            }
            Family::Chain(_) => (0..3u64).map(|i| Element::Chain(vec![1u64 << i])).collect(),
            Family::Afp(m) => {
                let mut gens = Vec::new();
                for x in 1..m.a.order() as u16 {
                    gens.push(Element::Afp(AfpWord { head: vec![], tail: x }));
                }
                for y in 1..m.b.order() as u16 {
                    let word = m.b_element(y);
                    if word != AfpWord::identity() && !gens.contains(&Element::Afp(word.clone())) {
                        gens.push(Element::Afp(word));
                    }
                }
                gens
            }
            Family::Hnn(m) => {
                let mut gens = Vec::new();
                for x in 1..m.a.order() as u16 {
                    gens.push(Element::Hnn(HnnWord { lead: x, letters: vec![] }));
                }
                gens.push(Element::Hnn(HnnWord { lead: 0, letters: vec![(1, 0)] }));
                gens.push(Element::Hnn(HnnWord { lead: 0, letters: vec![(-1, 0)] }));
                gens
            }
        }
    }

    pub fn ends(&self) -> Ends {
        match &self.family {
            Family::Lattice(m) => {
                if m.dim == 1 {
                    Ends::Two
                } else {
                    Ends::One
                }
            }
            Family::Chain(_) => Ends::InfinitelyMany,
            Family::Afp(m) => {
                if m.index_a() == 2 && m.index_b() == 2 {
                    Ends::Two
                } else {
                    Ends::InfinitelyMany
                }
            }
            Family::Hnn(m) => {
                if m.index() == 1 {
                    Ends::Two
                } else {
                    Ends::InfinitelyMany
                }
            }
        }
    }

    pub fn element_label(&self, g: &Element) -> String {
        match (&self.family, g) {
            (Family::Lattice(m), Element::Lattice(a)) => m.label(a),
            (Family::Chain(m), Element::Chain(a)) => m.label(a),
            (Family::Afp(m), Element::Afp(a)) => m.label(a),
            (Family::Hnn(m), Element::Hnn(a)) => m.label(a),
            _ => panic!("element does not belong to this group model"),
        }
    }

    /// Comparison key implementing the deterministic ball order.
    pub fn sort_key(&self, g: &Element) -> (u32, Element) {
        (self.word_length(g), g.clone())
    }
}
