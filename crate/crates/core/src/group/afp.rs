//! Amalgamated free products `A *_C B` over finite factors, with canonical
//! normal forms built from fixed coset-representative tables.

use super::finite::{CosetTable, Embedding, FiniteGroupTable};
use super::GroupError;

/// Canonical normal form of an element of `A *_C B`.
///
/// An element with `n` B-syllables is stored as the alternating word
/// `a_0 b_1 a_1 ... b_n a_n` where `a_0` is a coset representative of `C` in
/// `A` (identity allowed), each interior `a_i` is a non-identity
/// representative, each `b_i` is a non-identity representative of `C` in `B`,
/// and the trailing `a_n` is an arbitrary element of `A`. An element of `A`
/// itself has an empty head. Two elements are equal in the group iff these
/// encodings are identical.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AfpWord {
    /// Pairs `(a_{i-1}, b_i)` for `i = 1..=n`.
    pub head: Vec<(u16, u16)>,
    /// The trailing factor-A element `a_n`.
    pub tail: u16,
}

impl AfpWord {
    pub fn identity() -> Self {
        AfpWord { head: Vec::new(), tail: 0 }
    }

    /// Number of B-syllables of the reduced word.
    #[inline]
    pub fn syllables(&self) -> u32 {
        self.head.len() as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Factor {
    A,
    B,
}

/// An amalgamated free product of two finite groups over a common finite
/// subgroup, together with the fixed transversals used for normal forms.
#[derive(Clone, Debug)]
pub struct AfpGroup {
    pub a: FiniteGroupTable,
    pub b: FiniteGroupTable,
    pub c: FiniteGroupTable,
    pub c_in_a: Embedding,
    pub c_in_b: Embedding,
    cosets_a: CosetTable,
    cosets_b: CosetTable,
}

impl AfpGroup {
    pub fn new(
        a: FiniteGroupTable,
        b: FiniteGroupTable,
        c: FiniteGroupTable,
        c_in_a: Embedding,
        c_in_b: Embedding,
    ) -> Result<Self, GroupError> {
        if c_in_a.image_size() != c.order() || c_in_b.image_size() != c.order() {
            return Err(GroupError::InvalidTable("embedding domain must be C".into()));
        }
        if c.order() == a.order() || c.order() == b.order() {
            return Err(GroupError::InvalidTable(
                "amalgamated subgroup must be proper in both factors".into(),
            ));
        }
        let cosets_a = CosetTable::new(&a, &c_in_a);
        let cosets_b = CosetTable::new(&b, &c_in_b);
        Ok(AfpGroup { a, b, c, c_in_a, c_in_b, cosets_a, cosets_b })
    }

    /// Free product over the trivial subgroup.
    pub fn free_product(a: FiniteGroupTable, b: FiniteGroupTable) -> Result<Self, GroupError> {
        let c = FiniteGroupTable::trivial();
        let c_in_a = Embedding::new(&c, &a, vec![0])?;
        let c_in_b = Embedding::new(&c, &b, vec![0])?;
        Self::new(a, b, c, c_in_a, c_in_b)
    }

    pub fn index_a(&self) -> usize {
        self.cosets_a.index()
    }

    pub fn index_b(&self) -> usize {
        self.cosets_b.index()
    }

    fn factor_table(&self, f: Factor) -> &FiniteGroupTable {
        match f {
            Factor::A => &self.a,
            Factor::B => &self.b,
        }
    }

    fn embedding(&self, f: Factor) -> &Embedding {
        match f {
            Factor::A => &self.c_in_a,
            Factor::B => &self.c_in_b,
        }
    }

    /// Pushes a syllable onto a reduced alternating word, folding subgroup
    /// elements into the previous syllable and merging equal factors. A lone
    /// subgroup element lives on the A side, so canonical forms stay unique.
    fn push_syllable(stack: &mut Vec<(Factor, u16)>, group: &AfpGroup, mut syl: (Factor, u16)) {
        loop {
            if syl.1 == 0 {
                return;
            }
            let Some(&top) = stack.last() else {
                if syl.0 == Factor::B {
                    if let Some(c) = group.c_in_b.preimage(syl.1) {
                        syl = (Factor::A, group.c_in_a.apply(c));
                    }
                }
                stack.push(syl);
                return;
            };
            if top.0 == syl.0 {
                stack.pop();
                let merged = group.factor_table(syl.0).mul(top.1, syl.1);
                syl = (syl.0, merged);
                continue;
            }
            if let Some(c) = group.embedding(syl.0).preimage(syl.1) {
                stack.pop();
                let folded = group.factor_table(top.0).mul(top.1, group.embedding(top.0).apply(c));
                syl = (top.0, folded);
                continue;
            }
            stack.push(syl);
            return;
        }
    }

    /// Left-normalizes a reduced alternating word into the canonical form.
    fn canonicalize(&self, word: &[(Factor, u16)]) -> AfpWord {
        // Bracket the word so it reads a_0 b_1 a_1 ... b_n a_n.
        let mut syls: Vec<(Factor, u16)> = Vec::with_capacity(word.len() + 2);
        if word.first().map(|s| s.0) == Some(Factor::B) {
            syls.push((Factor::A, 0));
        }
        syls.extend_from_slice(word);
        if syls.last().map(|s| s.0) != Some(Factor::A) {
            syls.push((Factor::A, 0));
        }
        debug_assert!(syls.len() % 2 == 1);

        let n = syls.len() / 2;
        let mut head = Vec::with_capacity(n);
        let mut carry = 0u16; // element of C
        for i in 0..n {
            let x = self.a.mul(self.c_in_a.apply(carry), syls[2 * i].1);
            let rep_a = self.cosets_a.rep(x);
            carry = self.cosets_a.sub_part(x);
            let y = self.b.mul(self.c_in_b.apply(carry), syls[2 * i + 1].1);
            let rep_b = self.cosets_b.rep(y);
            carry = self.cosets_b.sub_part(y);
            debug_assert!(i == 0 || rep_a != 0, "interior syllable reduced to the subgroup");
            debug_assert!(rep_b != 0, "B-syllable reduced to the subgroup");
            head.push((rep_a, rep_b));
        }
        let tail = self.a.mul(self.c_in_a.apply(carry), syls[2 * n].1);
        AfpWord { head, tail }
    }

    fn generic_syllables(&self, w: &AfpWord, out: &mut Vec<(Factor, u16)>) {
        for &(a, b) in &w.head {
            out.push((Factor::A, a));
            out.push((Factor::B, b));
        }
        out.push((Factor::A, w.tail));
    }

    pub fn identity(&self) -> AfpWord {
        AfpWord::identity()
    }

    pub fn mul(&self, g: &AfpWord, h: &AfpWord) -> AfpWord {
        let mut raw = Vec::with_capacity(2 * (g.head.len() + h.head.len()) + 2);
        self.generic_syllables(g, &mut raw);
        self.generic_syllables(h, &mut raw);
        let mut reduced = Vec::with_capacity(raw.len());
        for syl in raw {
            Self::push_syllable(&mut reduced, self, syl);
        }
        self.canonicalize(&reduced)
    }

    pub fn inv(&self, g: &AfpWord) -> AfpWord {
        let mut raw = Vec::with_capacity(2 * g.head.len() + 1);
        self.generic_syllables(g, &mut raw);
        let mut reduced = Vec::with_capacity(raw.len());
        for &(f, x) in raw.iter().rev() {
            let xin = self.factor_table(f).inv(x);
            Self::push_syllable(&mut reduced, self, (f, xin));
        }
        self.canonicalize(&reduced)
    }

    /// Exact number of elements whose reduced form has `n >= 1` B-syllables.
    pub fn sphere_count(&self, n: u32) -> Result<u64, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidSphereIndex(0));
        }
        let ia = self.index_a() as u64;
        let ib = self.index_b() as u64;
        let mut count = ia.checked_mul(self.a.order() as u64);
        for _ in 1..n {
            count = count.and_then(|c| c.checked_mul(ia - 1));
        }
        for _ in 0..n {
            count = count.and_then(|c| c.checked_mul(ib - 1));
        }
        count.ok_or(GroupError::CountOverflow(n))
    }

    /// All canonical words with exactly `n` B-syllables, in lexicographic
    /// order of their encodings.
    pub fn sphere(&self, n: u32) -> Vec<AfpWord> {
        if n == 0 {
            return (0..self.a.order() as u16).map(|t| AfpWord { head: Vec::new(), tail: t }).collect();
        }
        let mut out = Vec::new();
        let mut head = Vec::with_capacity(n as usize);
        self.sphere_rec(n as usize, &mut head, &mut out);
        out
    }

    fn sphere_rec(&self, n: usize, head: &mut Vec<(u16, u16)>, out: &mut Vec<AfpWord>) {
        if head.len() == n {
            for t in 0..self.a.order() as u16 {
                out.push(AfpWord { head: head.clone(), tail: t });
            }
            return;
        }
        let interior = !head.is_empty();
        for &ra in self.cosets_a.reps() {
            if interior && ra == 0 {
                continue;
            }
            for &rb in self.cosets_b.reps() {
                if rb == 0 {
                    continue;
                }
                head.push((ra, rb));
                self.sphere_rec(n, head, out);
                head.pop();
            }
        }
    }

    /// The element of the B factor with the given id, in canonical form. An
    /// element of the amalgamated subgroup lands in the A-side encoding.
    pub fn b_element(&self, y: u16) -> AfpWord {
        let rep = self.cosets_b.rep(y);
        let c = self.cosets_b.sub_part(y);
        let tail = self.c_in_a.apply(c);
        if rep == 0 {
            AfpWord { head: Vec::new(), tail }
        } else {
            AfpWord { head: vec![(0, rep)], tail }
        }
    }

    pub fn label(&self, w: &AfpWord) -> String {
        if w.head.is_empty() {
            return self.a.name(w.tail).to_string();
        }
        let mut parts = Vec::with_capacity(2 * w.head.len() + 1);
        for &(a, b) in &w.head {
            parts.push(self.a.name(a).to_string());
            parts.push(self.b.name(b).to_string());
        }
        parts.push(self.a.name(w.tail).to_string());
        parts.join("·")
    }
}
