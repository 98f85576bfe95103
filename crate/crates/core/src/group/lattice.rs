//! Integer lattices with the l1 word metric.

use super::GroupError;

/// The free abelian group of the given rank. `finite_cofactor` marks a
/// virtually cyclic group (rank 1 times a finite group); the cofactor is
/// carried as documentation only and does not enter the arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGroup {
    pub dim: usize,
    pub finite_cofactor: Option<String>,
}

impl LatticeGroup {
    pub fn new(dim: usize) -> Result<Self, GroupError> {
        if dim == 0 {
            return Err(GroupError::InvalidTable("lattice rank must be at least 1".into()));
        }
        Ok(LatticeGroup { dim, finite_cofactor: None })
    }

    pub fn integers() -> Self {
        Self::new(1).expect("rank 1 is valid")
    }

    pub fn identity(&self) -> Vec<i64> {
        vec![0; self.dim]
    }

    pub fn mul(&self, g: &[i64], h: &[i64]) -> Vec<i64> {
        g.iter().zip(h).map(|(a, b)| a + b).collect()
    }

    pub fn inv(&self, g: &[i64]) -> Vec<i64> {
        g.iter().map(|a| -a).collect()
    }

    pub fn word_length(&self, g: &[i64]) -> u32 {
        g.iter().map(|a| a.unsigned_abs()).sum::<u64>() as u32
    }

    /// Number of lattice points with l1 norm at most `r`.
    pub fn ball_size(&self, r: u32) -> u64 {
        // Sum over the number of nonzero coordinates.
        let d = self.dim as u64;
        let r = r as u64;
        let mut total = 0u64;
        for k in 0..=d.min(r) {
            total += binomial(d, k) * binomial(r, k) * (1u64 << k);
        }
        total
    }

    pub fn ball(&self, r: u32) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut point = vec![0i64; self.dim];
        self.ball_rec(r as i64, 0, &mut point, &mut out);
        out.sort_unstable_by_key(|p| (self.word_length(p), p.clone()));
        out
    }

    fn ball_rec(&self, budget: i64, coord: usize, point: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if coord == self.dim {
            out.push(point.clone());
            return;
        }
        for v in -budget..=budget {
            point[coord] = v;
            self.ball_rec(budget - v.abs(), coord + 1, point, out);
        }
        point[coord] = 0;
    }

    pub fn label(&self, g: &[i64]) -> String {
        if self.dim == 1 {
            g[0].to_string()
        } else {
            let coords: Vec<String> = g.iter().map(|v| v.to_string()).collect();
            format!("({})", coords.join(","))
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
