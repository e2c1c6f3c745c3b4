//! Graded Z/2 rank arithmetic for path and loop spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest degree stored explicitly.
pub const MAX_EXPLICIT_DEGREE: usize = 64;

/// Ranks in degrees `0..explicit.len()`, then `tail` in every higher degree.
/// Negative degrees have rank 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedRanks {
    explicit: Vec<u64>,
    tail: u64,
}

impl GradedRanks {
    pub fn new(explicit: Vec<u64>, tail: u64) -> Result<Self> {
        if explicit.len() > MAX_EXPLICIT_DEGREE + 1 {
            return Err(Error::Unsupported(format!("ranks stabilize at degree {} > {MAX_EXPLICIT_DEGREE}", explicit.len())));
        }
        let mut out = Self { explicit, tail };
        out.normalize();
        Ok(out)
    }

    /// Ranks of a space with finitely many nonzero Betti numbers.
    pub fn finite(ranks: &[u64]) -> Self {
        let mut out = Self { explicit: ranks.to_vec(), tail: 0 };
        out.normalize();
        out
    }

    /// The point: rank 1 in degree 0.
    pub fn unit() -> Self {
        Self::finite(&[1])
    }

    pub fn circle() -> Self {
        Self::finite(&[1, 1])
    }

    fn normalize(&mut self) {
        while self.explicit.last() == Some(&self.tail) {
            self.explicit.pop();
        }
    }

    pub fn rank(&self, degree: i64) -> u64 {
        if degree < 0 {
            return 0;
        }
        self.explicit.get(degree as usize).copied().unwrap_or(self.tail)
    }

    pub fn tail(&self) -> u64 {
        self.tail
    }

    /// First degree from which the rank equals the tail.
    pub fn stable_from(&self) -> usize {
        self.explicit.len()
    }

    pub fn ranks_up_to(&self, degree: usize) -> Vec<u64> {
        (0..=degree as i64).map(|k| self.rank(k)).collect()
    }

    fn total_finite(&self) -> u64 {
        self.explicit.iter().sum()
    }
}

/// Ranks of a product over a field: the convolution of the two rank sequences.
/// Fails when both factors have nonzero tails, since the product ranks then grow without bound.
pub fn kunneth(a: &GradedRanks, b: &GradedRanks) -> Result<GradedRanks> {
    let (fin, inf) = match (a.tail, b.tail) {
        (0, _) => (a, b),
        (_, 0) => (b, a),
        _ => return Err(Error::Unsupported("product of two spaces with infinite total rank".into())),
    };
    // beyond this degree every term of the convolution uses the tail of `inf`
    let stable = fin.explicit.len() + inf.explicit.len();
    let explicit = (0..stable as i64).map(|n| (0..=n).map(|i| fin.rank(i) * inf.rank(n - i)).sum()).collect();
    GradedRanks::new(explicit, fin.total_finite() * inf.tail)
}

/// `H_*(Omega S^2; Z/2)`: rank 1 in every degree.
pub fn loop_ranks_sphere(dim: usize) -> Result<GradedRanks> {
    if dim != 2 {
        return Err(Error::Unsupported(format!("loop space ranks only for S^2 (got S^{dim})")));
    }
    GradedRanks::new(vec![], 1)
}

/// Paths in `S^2` with ends on a circle: homotopy equivalent to `Omega S^2 x S^1 x S^1`.
pub fn path_space_ranks() -> GradedRanks {
    let loops = loop_ranks_sphere(2).expect("dim 2 is supported");
    let once = kunneth(&loops, &GradedRanks::circle()).expect("finite factor");
    kunneth(&once, &GradedRanks::circle()).expect("finite factor")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfhRank {
    Rank(u64),
    /// Degrees outside the range where the rank formula applies.
    NotComputed,
}

/// Ranks `path(*) + path(-* + 2d - n + 1)` in the given degrees; cohomology and
/// homology ranks agree over a field. Requires `2d <= n`.
pub fn rfh_ranks(path: &GradedRanks, d: i64, n: i64, degrees: std::ops::RangeInclusive<i64>) -> Result<Vec<(i64, RfhRank)>> {
    if n < 1 || d < 0 || 2 * d > n {
        return Err(Error::InvalidParameter(format!("need 0 <= d <= n/2, n >= 1 (got d = {d}, n = {n})")));
    }
    Ok(degrees
        .map(|k| {
            let r = if k == 0 || k == 1 { RfhRank::NotComputed } else { RfhRank::Rank(path.rank(k) + path.rank(-k + 2 * d - n + 1)) };
            (k, r)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_trims_tail() {
        let g = GradedRanks::new(vec![1, 3, 4, 4, 4], 4).unwrap();
        assert_eq!(g.stable_from(), 2);
        assert_eq!(g.rank(-1), 0);
        assert_eq!(g.rank(100), 4);
        assert!(GradedRanks::new(vec![1; 70], 0).is_err());
    }

    #[test]
    fn infinite_products_are_rejected() {
        let l = loop_ranks_sphere(2).unwrap();
        assert!(kunneth(&l, &l).is_err());
        assert!(loop_ranks_sphere(3).is_err());
    }
}
