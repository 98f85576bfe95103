//! Finite groups as explicit multiplication tables, with the coset machinery
//! needed for canonical normal forms in amalgams and HNN extensions.

use super::GroupError;

/// A finite group given by its full multiplication table.
///
/// Element `0` is always the identity. Names are used only for labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroupTable {
    order: usize,
    mul: Vec<u16>,
    inv: Vec<u16>,
    names: Vec<String>,
}

impl FiniteGroupTable {
    /// Validates closure, identity at index 0, associativity and inverses.
    pub fn from_table(names: Vec<String>, mul_rows: Vec<Vec<u16>>) -> Result<Self, GroupError> {
        let order = names.len();
        if order == 0 {
            return Err(GroupError::InvalidTable("empty group table".into()));
        }
        if mul_rows.len() != order {
            return Err(GroupError::InvalidTable(format!(
                "expected {order} multiplication rows, got {}",
                mul_rows.len()
            )));
        }
        let mut mul = Vec::with_capacity(order * order);
        for row in &mul_rows {
            if row.len() != order {
                return Err(GroupError::InvalidTable("ragged multiplication table".into()));
            }
            for &v in row {
                if (v as usize) >= order {
                    return Err(GroupError::InvalidTable(format!(
                        "table entry {v} out of range for order {order}"
                    )));
                }
                mul.push(v);
            }
        }
        let table = FiniteGroupTable { order, mul, inv: vec![0; order], names };
        for x in 0..order as u16 {
            if table.raw_mul(0, x) != x || table.raw_mul(x, 0) != x {
                return Err(GroupError::InvalidTable("index 0 is not an identity".into()));
            }
        }
        for a in 0..order as u16 {
            for b in 0..order as u16 {
                for c in 0..order as u16 {
                    if table.raw_mul(table.raw_mul(a, b), c) != table.raw_mul(a, table.raw_mul(b, c)) {
                        return Err(GroupError::InvalidTable(format!(
                            "associativity fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let mut inv = vec![u16::MAX; order];
        for a in 0..order as u16 {
            for b in 0..order as u16 {
                if table.raw_mul(a, b) == 0 {
                    inv[a as usize] = b;
                }
            }
        }
        if inv.contains(&u16::MAX) {
            return Err(GroupError::InvalidTable("missing inverse".into()));
        }
        Ok(FiniteGroupTable { inv, ..table })
    }

    /// Cyclic group of the given order; `letter` names the generator.
    pub fn cyclic(order: usize, letter: char) -> Result<Self, GroupError> {
        if order == 0 {
            return Err(GroupError::InvalidTable("cyclic group of order 0".into()));
        }
        let names = (0..order)
            .map(|k| match k {
                0 => "e".to_string(),
                1 => letter.to_string(),
                _ => format!("{letter}^{k}"),
            })
            .collect();
        let mul_rows = (0..order)
            .map(|a| (0..order).map(|b| ((a + b) % order) as u16).collect())
            .collect();
        Self::from_table(names, mul_rows)
    }

    pub fn trivial() -> Self {
        Self::from_table(vec!["e".into()], vec![vec![0]]).expect("trivial table is valid")
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn raw_mul(&self, a: u16, b: u16) -> u16 {
        self.mul[a as usize * self.order + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        debug_assert!((a as usize) < self.order && (b as usize) < self.order);
        self.raw_mul(a, b)
    }

    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        self.inv[a as usize]
    }

    pub fn name(&self, a: u16) -> &str {
        &self.names[a as usize]
    }
}

/// An injective homomorphism from a finite group `C` into a finite group `A`,
/// stored as the image of each element of `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    image: Vec<u16>,
    preimage: Vec<Option<u16>>,
}

impl Embedding {
    pub fn new(c: &FiniteGroupTable, a: &FiniteGroupTable, image: Vec<u16>) -> Result<Self, GroupError> {
        if image.len() != c.order() {
            return Err(GroupError::InvalidTable(format!(
                "embedding image has {} entries, subgroup has order {}",
                image.len(),
                c.order()
            )));
        }
        if image.first() != Some(&0) {
            return Err(GroupError::InvalidTable("embedding must send identity to identity".into()));
        }
        let mut preimage = vec![None; a.order()];
        for (cid, &aid) in image.iter().enumerate() {
            if (aid as usize) >= a.order() {
                return Err(GroupError::InvalidTable("embedding image out of range".into()));
            }
            if preimage[aid as usize].is_some() {
                return Err(GroupError::InvalidTable("embedding is not injective".into()));
            }
            preimage[aid as usize] = Some(cid as u16);
        }
        for x in 0..c.order() as u16 {
            for y in 0..c.order() as u16 {
                let lhs = image[c.mul(x, y) as usize];
                let rhs = a.mul(image[x as usize], image[y as usize]);
                if lhs != rhs {
                    return Err(GroupError::InvalidTable(format!(
                        "embedding is not a homomorphism at ({x},{y})"
                    )));
                }
            }
        }
        Ok(Embedding { image, preimage })
    }

    pub fn identity_into(c: &FiniteGroupTable, a: &FiniteGroupTable, image: Vec<u16>) -> Result<Self, GroupError> {
        Self::new(c, a, image)
    }

    #[inline]
    pub fn apply(&self, c: u16) -> u16 {
        self.image[c as usize]
    }

    #[inline]
    pub fn preimage(&self, a: u16) -> Option<u16> {
        self.preimage[a as usize]
    }

    #[inline]
    pub fn contains(&self, a: u16) -> bool {
        self.preimage[a as usize].is_some()
    }

    pub fn image_size(&self) -> usize {
        self.image.len()
    }
}

/// Left-coset decomposition of a finite group by an embedded subgroup.
///
/// Every `a` factors uniquely as `rep(a) * h` with `h` in the subgroup image.
/// The representative of each coset is its smallest element index, so the
/// coset of the subgroup itself is represented by the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CosetTable {
    rep_of: Vec<u16>,
    sub_part: Vec<u16>,
    reps: Vec<u16>,
}

impl CosetTable {
    pub fn new(group: &FiniteGroupTable, sub: &Embedding) -> Self {
        let order = group.order();
        let mut rep_of = vec![u16::MAX; order];
        let mut sub_part = vec![0u16; order];
        let mut reps = Vec::new();
        for a in 0..order as u16 {
            if rep_of[a as usize] != u16::MAX {
                continue;
            }
            // `a` is the smallest unassigned index, hence the minimum of its coset.
            reps.push(a);
            for c in 0..sub.image_size() as u16 {
                let member = group.mul(a, sub.apply(c));
                rep_of[member as usize] = a;
                sub_part[member as usize] = c;
            }
        }
        CosetTable { rep_of, sub_part, reps }
    }

    /// Representative of the coset of `a`.
    #[inline]
    pub fn rep(&self, a: u16) -> u16 {
        self.rep_of[a as usize]
    }

    /// The subgroup element `c` with `a = rep(a) * image(c)`.
    #[inline]
    pub fn sub_part(&self, a: u16) -> u16 {
        self.sub_part[a as usize]
    }

    pub fn reps(&self) -> &[u16] {
        &self.reps
    }

    pub fn index(&self) -> usize {
        self.reps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_tables_are_groups() {
        for n in 1..8 {
            let g = FiniteGroupTable::cyclic(n, 'a').unwrap();
            for a in 0..n as u16 {
                assert_eq!(g.mul(a, g.inv(a)), 0);
            }
        }
    }

    #[test]
    fn rejects_broken_identity() {
        let err = FiniteGroupTable::from_table(
            vec!["e".into(), "x".into()],
            vec![vec![1, 0], vec![0, 1]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn coset_decomposition_is_exact() {
        // Z/4 with subgroup {0, 2}.
        let a = FiniteGroupTable::cyclic(4, 'a').unwrap();
        let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
        let emb = Embedding::new(&c, &a, vec![0, 2]).unwrap();
        let cosets = CosetTable::new(&a, &emb);
        assert_eq!(cosets.index(), 2);
        assert_eq!(cosets.reps(), &[0, 1]);
        for x in 0..4u16 {
            let r = cosets.rep(x);
            let h = emb.apply(cosets.sub_part(x));
            assert_eq!(a.mul(r, h), x);
        }
    }

    #[test]
    fn embedding_must_be_homomorphism() {
        let a = FiniteGroupTable::cyclic(4, 'a').unwrap();
        let c = FiniteGroupTable::cyclic(2, 'c').unwrap();
        assert!(Embedding::new(&c, &a, vec![0, 1]).is_err());
        assert!(Embedding::new(&c, &a, vec![0, 2]).is_ok());
    }
}
