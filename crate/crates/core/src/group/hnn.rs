//! HNN extensions over a finite base group, with Britton-reduced canonical
//! normal forms relative to fixed coset transversals.

use super::finite::{CosetTable, Embedding, FiniteGroupTable};
use super::GroupError;

/// Canonical normal form `a_0 t^{e_1} a_1 ... t^{e_n} a_n` of an element of
/// an HNN extension.
///
/// `lead` is `a_0` and `letters[i] = (e_{i+1}, a_{i+1})`. For `i < n-1` the
/// element following `t^{e_i}` is a coset representative (of `C` when the next
/// letter is `t`, of `alpha(C)` when it is `t^{-1}`), non-identity whenever the
/// adjacent exponents differ; the final `a_n` is arbitrary in `A`. Words with
/// an empty letter list are the elements of `A` stored in `lead`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HnnWord {
    pub lead: u16,
    pub letters: Vec<(i8, u16)>,
}

impl HnnWord {
    pub fn identity() -> Self {
        HnnWord { lead: 0, letters: Vec::new() }
    }

    /// Number of stable letters in the reduced word.
    #[inline]
    pub fn syllables(&self) -> u32 {
        self.letters.len() as u32
    }
}

/// The HNN extension of a finite group `A` along an injective homomorphism
/// `alpha` defined on a subgroup `C <= A`, i.e. the group generated by `A`
/// and a stable letter `t` with `t^{-1} c t = alpha(c)` for `c` in `C`.
#[derive(Clone, Debug)]
pub struct HnnGroup {
    pub a: FiniteGroupTable,
    pub c: FiniteGroupTable,
    /// Inclusion of `C` into `A`; its image is the domain side of the relation.
    pub c_in_a: Embedding,
    /// The defining map `alpha : C -> A`; its image is the range side.
    pub alpha: Embedding,
    cosets_pos: CosetTable,
    cosets_neg: CosetTable,
}

impl HnnGroup {
    pub fn new(
        a: FiniteGroupTable,
        c: FiniteGroupTable,
        c_in_a: Embedding,
        alpha: Embedding,
    ) -> Result<Self, GroupError> {
        if c_in_a.image_size() != c.order() || alpha.image_size() != c.order() {
            return Err(GroupError::InvalidTable("embedding domain must be C".into()));
        }
        let cosets_pos = CosetTable::new(&a, &c_in_a);
        let cosets_neg = CosetTable::new(&a, &alpha);
        Ok(HnnGroup { a, c, c_in_a, alpha, cosets_pos, cosets_neg })
    }

    /// Index of `C` in `A` (equal on both sides since `|C| = |alpha(C)|`).
    pub fn index(&self) -> usize {
        self.cosets_pos.index()
    }

    fn cosets(&self, eps: i8) -> &CosetTable {
        if eps > 0 {
            &self.cosets_pos
        } else {
            &self.cosets_neg
        }
    }

    fn side(&self, eps: i8) -> &Embedding {
        if eps > 0 {
            &self.c_in_a
        } else {
            &self.alpha
        }
    }

    /// Conjugation through a stable letter: for `u` in the `eps`-side subgroup,
    /// `u t^{eps} = t^{eps} pass(eps, u)`.
    #[inline]
    fn pass(&self, eps: i8, u: u16) -> u16 {
        if eps > 0 {
            self.alpha.apply(self.c_in_a.preimage(u).expect("u lies in C"))
        } else {
            self.c_in_a.apply(self.alpha.preimage(u).expect("u lies in alpha(C)"))
        }
    }

    /// Britton reduction. The stack alternates `A(x)` and `T(eps)`, starting
    /// and ending with an `A` entry.
    fn push_a(stack: &mut Vec<StackItem>, group: &HnnGroup, x: u16) {
        match stack.last_mut() {
            Some(StackItem::A(top)) => *top = group.a.mul(*top, x),
            _ => stack.push(StackItem::A(x)),
        }
    }

    fn push_t(stack: &mut Vec<StackItem>, group: &HnnGroup, eps: i8) {
        let x = match stack.last() {
            Some(&StackItem::A(x)) => x,
            _ => 0,
        };
        let pinch = if stack.len() >= 2 {
            match stack[stack.len() - 2] {
                StackItem::T(prev) if prev == -eps => group.side(eps).contains(x),
                _ => false,
            }
        } else {
            false
        };
        if pinch {
            // t^{-eps} x t^{eps} collapses to the conjugated subgroup element.
            stack.pop();
            stack.pop();
            let y = group.pass(eps, x);
            Self::push_a(stack, group, y);
        } else {
            if !matches!(stack.last(), Some(StackItem::A(_))) {
                stack.push(StackItem::A(0));
            }
            stack.push(StackItem::T(eps));
            stack.push(StackItem::A(0));
        }
    }

    fn canonicalize(&self, stack: &[StackItem]) -> HnnWord {
        let mut raw_a = Vec::new();
        let mut raw_eps = Vec::new();
        for item in stack {
            match *item {
                StackItem::A(x) => raw_a.push(x),
                StackItem::T(e) => raw_eps.push(e),
            }
        }
        debug_assert_eq!(raw_a.len(), raw_eps.len() + 1);
        let n = raw_eps.len();
        if n == 0 {
            return HnnWord { lead: raw_a[0], letters: Vec::new() };
        }
        // Left-normalize: decompose each a_i against the coset family of the
        // next stable letter and push the subgroup part through it.
        let mut lead = 0u16;
        let mut letters: Vec<(i8, u16)> = Vec::with_capacity(n);
        let mut carry = 0u16; // element of A lying in one of the edge subgroups
        for i in 0..n {
            let eps = raw_eps[i];
            let x = self.a.mul(carry, raw_a[i]);
            let rep = self.cosets(eps).rep(x);
            let u = self.side(eps).apply(self.cosets(eps).sub_part(x));
            carry = self.pass(eps, u);
            if i == 0 {
                lead = rep;
            } else {
                debug_assert!(
                    raw_eps[i - 1] == eps || rep != 0,
                    "Britton pinch survived reduction"
                );
                letters.push((raw_eps[i - 1], rep));
            }
        }
        letters.push((raw_eps[n - 1], self.a.mul(carry, raw_a[n])));
        HnnWord { lead, letters }
    }

    fn feed(&self, stack: &mut Vec<StackItem>, w: &HnnWord) {
        Self::push_a(stack, self, w.lead);
        for &(eps, x) in &w.letters {
            Self::push_t(stack, self, eps);
            Self::push_a(stack, self, x);
        }
    }

    pub fn identity(&self) -> HnnWord {
        HnnWord::identity()
    }

    pub fn mul(&self, g: &HnnWord, h: &HnnWord) -> HnnWord {
        let mut stack = Vec::with_capacity(2 * (g.letters.len() + h.letters.len()) + 3);
        stack.push(StackItem::A(0));
        self.feed(&mut stack, g);
        self.feed(&mut stack, h);
        self.canonicalize(&stack)
    }

    pub fn inv(&self, g: &HnnWord) -> HnnWord {
        let mut stack = Vec::with_capacity(2 * g.letters.len() + 3);
        stack.push(StackItem::A(0));
        // (a_0 t^{e_1} a_1 ... t^{e_n} a_n)^{-1}
        //   = a_n^{-1} t^{-e_n} ... a_1^{-1} t^{-e_1} a_0^{-1}
        let mut items: Vec<(i8, u16)> = Vec::with_capacity(g.letters.len() + 1);
        items.push((0, g.lead));
        items.extend_from_slice(&g.letters);
        for i in (0..items.len()).rev() {
            Self::push_a(&mut stack, self, self.a.inv(items[i].1));
            if i > 0 {
                Self::push_t(&mut stack, self, -items[i].0);
            }
        }
        self.canonicalize(&stack)
    }

    /// Exact number of elements whose Britton-reduced form has `n >= 1`
    /// stable letters: `2 |A| rho1 (rho1 + rho2)^{n-1}` with `rho1 = [A:C]`
    /// and `rho2 = [A:C] - 1`.
    pub fn sphere_count(&self, n: u32) -> Result<u64, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidSphereIndex(0));
        }
        let rho1 = self.index() as u64;
        let rho2 = rho1 - 1;
        let mut count = 2u64
            .checked_mul(self.a.order() as u64)
            .and_then(|c| c.checked_mul(rho1));
        for _ in 1..n {
            count = count.and_then(|c| c.checked_mul(rho1 + rho2));
        }
        count.ok_or(GroupError::CountOverflow(n))
    }

    /// All canonical words with exactly `n` stable letters.
    pub fn sphere(&self, n: u32) -> Vec<HnnWord> {
        if n == 0 {
            return (0..self.a.order() as u16).map(|x| HnnWord { lead: x, letters: Vec::new() }).collect();
        }
        let mut out = Vec::new();
        for first_eps in [-1i8, 1] {
            self.sphere_rec(n as usize, first_eps, &[], &mut out);
        }
        out.sort_unstable();
        out
    }

    fn sphere_rec(&self, n: usize, next_eps: i8, prefix: &[(i8, u16)], out: &mut Vec<HnnWord>) {
        // prefix holds (eps_i, a_i) for the letters already fixed; next_eps is
        // the exponent to place next. Representative constraints refer to the
        // following exponent, so the a-value for position i is chosen when
        // eps_{i+1} is known (or the arbitrary tail at the end).
        let depth = prefix.len();
        if depth + 1 == n {
            // Last letter: the following element is the arbitrary tail.
            for tail in 0..self.a.order() as u16 {
                let mut letters = prefix.to_vec();
                letters.push((next_eps, tail));
                out.extend(self.assemble(&letters));
            }
            return;
        }
        for following_eps in [-1i8, 1] {
            for &rep in self.cosets(following_eps).reps() {
                // Interior a_i = e is forbidden when the adjacent exponents differ.
                if next_eps != following_eps && rep == 0 {
                    continue;
                }
                let mut letters = prefix.to_vec();
                letters.push((next_eps, rep));
                self.sphere_rec(n, following_eps, &letters, out);
            }
        }
    }

    fn assemble(&self, letters: &[(i8, u16)]) -> Vec<HnnWord> {
        // Leading a_0 ranges over representatives for the first exponent.
        let first_eps = letters[0].0;
        self.cosets(first_eps)
            .reps()
            .iter()
            .map(|&lead| HnnWord { lead, letters: letters.to_vec() })
            .collect()
    }

    /// True when the canonical word contains no Britton pinch; enumeration
    /// soundness checks rely on this.
    pub fn is_britton_reduced(&self, w: &HnnWord) -> bool {
        for i in 0..w.letters.len().saturating_sub(1) {
            let (eps, a) = w.letters[i];
            let (next_eps, _) = w.letters[i + 1];
            if eps == -1 && next_eps == 1 && self.c_in_a.contains(a) {
                return false;
            }
            if eps == 1 && next_eps == -1 && self.alpha.contains(a) {
                return false;
            }
        }
        true
    }

    pub fn label(&self, w: &HnnWord) -> String {
        if w.letters.is_empty() {
            return self.a.name(w.lead).to_string();
        }
        let mut parts = vec![self.a.name(w.lead).to_string()];
        for &(eps, x) in &w.letters {
            parts.push(if eps > 0 { "t".to_string() } else { "t^-1".to_string() });
            parts.push(self.a.name(x).to_string());
        }
        parts.join("·")
    }
}

#[derive(Clone, Copy, Debug)]
enum StackItem {
    A(u16),
    T(i8),
}
