//! Locally finite groups presented as a strictly increasing chain of finite
//! subgroups. The concrete carrier is the direct sum of copies of Z/2; the
//! chain rule fixes how many coordinates each level contains.

use super::GroupError;

#[derive(Clone, Debug, PartialEq)]
pub enum ChainRule {
    /// Level n is the first n coordinates.
    Z2Sum,
    /// Level n is the first `coords[n-1]` coordinates; beyond the declared
    /// levels the chain grows one coordinate at a time.
    Z2Prefix { coords: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainGroup {
    pub rule: ChainRule,
}

/// Elements are coordinate masks over the direct sum, stored little-endian in
/// 64-bit words with no trailing zero words.
pub type ChainMask = Vec<u64>;

const MAX_ENUM_COORDS: u64 = 63;

impl ChainGroup {
    pub fn z2_sum() -> Self {
        ChainGroup { rule: ChainRule::Z2Sum }
    }

    pub fn z2_prefix(coords: Vec<u64>) -> Result<Self, GroupError> {
        if coords.is_empty() || coords.windows(2).any(|w| w[0] >= w[1]) || coords[0] == 0 {
            return Err(GroupError::InvalidTable(
                "chain coordinate counts must be strictly increasing and positive".into(),
            ));
        }
        Ok(ChainGroup { rule: ChainRule::Z2Prefix { coords } })
    }

    /// Number of coordinates in level `n >= 1`.
    pub fn level_coords(&self, n: u32) -> u64 {
        match &self.rule {
            ChainRule::Z2Sum => n as u64,
            ChainRule::Z2Prefix { coords } => {
                let k = coords.len() as u32;
                if n <= k {
                    coords[(n - 1) as usize]
                } else {
                    coords[coords.len() - 1] + (n - k) as u64
                }
            }
        }
    }

    /// log2 of the order of level `n`; level 0 is the trivial group.
    pub fn level_log2_order(&self, n: u32) -> u64 {
        if n == 0 {
            0
        } else {
            self.level_coords(n)
        }
    }

    /// Exact order of level `n` as a float (levels can be astronomically large).
    pub fn level_order_f64(&self, n: u32) -> f64 {
        (self.level_log2_order(n) as f64).exp2()
    }

    /// Size of the shell `G_n \ G_{n-1}` as a float.
    pub fn shell_size_f64(&self, n: u32) -> f64 {
        if n == 0 {
            return 1.0;
        }
        self.level_order_f64(n) - self.level_order_f64(n - 1)
    }

    pub fn identity(&self) -> ChainMask {
        Vec::new()
    }

    pub fn mul(&self, g: &[u64], h: &[u64]) -> ChainMask {
        let mut out = vec![0u64; g.len().max(h.len())];
        for (i, slot) in out.iter_mut().enumerate() {
            let a = g.get(i).copied().unwrap_or(0);
            let b = h.get(i).copied().unwrap_or(0);
            *slot = a ^ b;
        }
        while out.last() == Some(&0) {
            out.pop();
        }
        out
    }

    pub fn inv(&self, g: &[u64]) -> ChainMask {
        g.to_vec()
    }

    /// Highest occupied coordinate, 1-based; 0 for the identity.
    pub fn top_coord(&self, g: &[u64]) -> u64 {
        match g.last() {
            None => 0,
            Some(&w) => (g.len() as u64 - 1) * 64 + (64 - w.leading_zeros() as u64),
        }
    }

    /// Smallest level containing `g`; the identity sits in level 0.
    pub fn shell_index(&self, g: &[u64]) -> u32 {
        let top = self.top_coord(g);
        if top == 0 {
            return 0;
        }
        let mut n = 1u32;
        while self.level_coords(n) < top {
            n += 1;
        }
        n
    }

    /// All elements of level `r`, ordered by (shell index, mask value).
    pub fn ball(&self, r: u32, budget: usize) -> Result<Vec<ChainMask>, GroupError> {
        if r == 0 {
            return Ok(vec![Vec::new()]);
        }
        let coords = self.level_coords(r);
        if coords > MAX_ENUM_COORDS {
            return Err(GroupError::ChainTooDeep { level: r, max: MAX_ENUM_COORDS });
        }
        let size = 1u64 << coords;
        if size > budget as u64 {
            let mut attainable = 0;
            for n in (0..r).rev() {
                let c = self.level_log2_order(n);
                if c <= MAX_ENUM_COORDS && (1u64 << c) <= budget as u64 {
                    attainable = n;
                    break;
                }
            }
            return Err(GroupError::BudgetExceeded { requested: r, attainable, budget });
        }
        let mut masks: Vec<u64> = (0..size).collect();
        masks.sort_unstable_by_key(|&m| {
            let v = if m == 0 { Vec::new() } else { vec![m] };
            (self.shell_index(&v), m)
        });
        Ok(masks
            .into_iter()
            .map(|m| if m == 0 { Vec::new() } else { vec![m] })
            .collect())
    }

    pub fn label(&self, g: &[u64]) -> String {
        if g.is_empty() {
            return "e".to_string();
        }
        let mut parts = Vec::new();
        for (w, &word) in g.iter().enumerate() {
            for bit in 0..64 {
                if word & (1 << bit) != 0 {
                    parts.push(format!("s{}", w as u64 * 64 + bit + 1));
                }
            }
        }
        parts.join("·")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_of_consecutive_chain() {
        let g = ChainGroup::z2_sum();
        assert_eq!(g.shell_index(&[]), 0);
        assert_eq!(g.shell_index(&[0b1]), 1);
        assert_eq!(g.shell_index(&[0b10]), 2);
        assert_eq!(g.shell_index(&[0b101]), 3);
        assert_eq!(g.ball(3, 1000).unwrap().len(), 8);
    }

    #[test]
    fn prefix_chain_levels() {
        let g = ChainGroup::z2_prefix(vec![1, 3, 6]).unwrap();
        assert_eq!(g.level_coords(2), 3);
        assert_eq!(g.level_coords(5), 8);
        assert_eq!(g.shell_index(&[0b100]), 2);
        assert_eq!(g.shell_index(&[0b1000]), 3);
    }

    #[test]
    fn xor_is_the_group_law() {
        let g = ChainGroup::z2_sum();
        let x = vec![0b101u64];
        let y = vec![0b011u64];
        assert_eq!(g.mul(&x, &y), vec![0b110]);
        assert_eq!(g.mul(&x, &x), g.identity());
    }
}
