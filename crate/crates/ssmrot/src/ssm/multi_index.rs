//! Multi-indices over the reduced coordinates and ordered/unordered
//! partition enumeration for the polynomial composition sums.

use std::fmt;

/// Exponent vector of a monomial p₁^m₁ ··· p_M^m_M. Lexicographic `Ord`
/// gives deterministic iteration everywhere.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex(pub Vec<u8>);

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{:?}", self.0)
    }
}

impl MultiIndex {
    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, slot: usize) -> Self {
        let mut v = vec![0u8; dim];
        v[slot] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&x| x as u32).sum()
    }

    /// Conjugate slot swap under the interleaved pair convention:
    /// exponents of slots 2k and 2k+1 exchange.
    pub fn conj_swap(&self) -> Self {
        let mut v = self.0.clone();
        for k in 0..v.len() / 2 {
            v.swap(2 * k, 2 * k + 1);
        }
        MultiIndex(v)
    }

    /// Self-conjugate monomials keep real coefficients in a real system.
    pub fn is_self_conjugate(&self) -> bool {
        *self == self.conj_swap()
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut v = self.0.clone();
        for i in 0..v.len() {
            if other.0[i] > v[i] {
                return None;
            }
            v[i] -= other.0[i];
        }
        Some(MultiIndex(v))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let v = self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a + b)
            .collect();
        MultiIndex(v)
    }

    pub fn bump(&self, slot: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[slot] += 1;
        MultiIndex(v)
    }

    /// All multi-indices of dimension `dim` and exact degree `deg`, in
    /// lexicographic order.
    pub fn all_of_degree(dim: usize, deg: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u8; dim];
        fn rec(cur: &mut Vec<u8>, slot: usize, left: u32, out: &mut Vec<MultiIndex>) {
            if slot == cur.len() - 1 {
                cur[slot] = left as u8;
                out.push(MultiIndex(cur.clone()));
                return;
            }
            // Descending leading exponent gives ascending lex order after
            // the final reverse... enumerate ascending directly instead.
            for e in 0..=left {
                cur[slot] = e as u8;
                rec(cur, slot + 1, left - e, out);
            }
        }
        if dim == 0 {
            return out;
        }
        rec(&mut cur, 0, deg, &mut out);
        out.sort();
        out
    }

    /// All sub-indices s with 0 ≤ s ≤ m componentwise and 1 ≤ |s| ≤ |m|−1.
    pub fn proper_subindices(&self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u8; self.dim()];
        fn rec(m: &[u8], cur: &mut Vec<u8>, slot: usize, out: &mut Vec<MultiIndex>) {
            if slot == m.len() {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for e in 0..=m[slot] {
                cur[slot] = e;
                rec(m, cur, slot + 1, out);
            }
        }
        rec(&self.0, &mut cur, 0, &mut out);
        let deg = self.degree();
        out.retain(|s| {
            let d = s.degree();
            d >= 1 && d <= deg - 1
        });
        out
    }

    /// Unordered 2-part partitions {m1, m2}, m1 + m2 = self, each of degree
    /// ≥ 1, with the ordered-tuple multiplicity (1 when m1 = m2, else 2).
    pub fn partitions2(&self) -> Vec<(MultiIndex, MultiIndex, u32)> {
        let mut out = Vec::new();
        for s in self.proper_subindices() {
            let rest = self.checked_sub(&s).unwrap();
            if s <= rest {
                let mult = if s == rest { 1 } else { 2 };
                out.push((s, rest, mult));
            }
        }
        out
    }

    /// Unordered 3-part partitions {m1 ≤ m2 ≤ m3}, each degree ≥ 1, with
    /// ordered-tuple multiplicity (6 distinct / 3 two-equal / 1 all-equal).
    pub fn partitions3(&self) -> Vec<(MultiIndex, MultiIndex, MultiIndex, u32)> {
        let mut out = Vec::new();
        if self.degree() < 3 {
            return out;
        }
        for s1 in self.proper_subindices() {
            let rest1 = self.checked_sub(&s1).unwrap();
            if rest1.degree() < 2 {
                continue;
            }
            for s2 in rest1.proper_subindices() {
                if s2 < s1 {
                    continue;
                }
                let s3 = rest1.checked_sub(&s2).unwrap();
                if s3.degree() < 1 || s3 < s2 {
                    continue;
                }
                let mult = if s1 == s2 && s2 == s3 {
                    1
                } else if s1 == s2 || s2 == s3 {
                    3
                } else {
                    6
                };
                out.push((s1.clone(), s2, s3, mult));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_counts() {
        // Compositions of d into dim parts: C(d + dim − 1, dim − 1).
        assert_eq!(MultiIndex::all_of_degree(2, 3).len(), 4);
        assert_eq!(MultiIndex::all_of_degree(4, 2).len(), 10);
        assert_eq!(MultiIndex::all_of_degree(4, 5).len(), 56);
    }

    #[test]
    fn lexicographic_order() {
        let all = MultiIndex::all_of_degree(2, 2);
        let expect: Vec<Vec<u8>> = vec![vec![0, 2], vec![1, 1], vec![2, 0]];
        let got: Vec<Vec<u8>> = all.iter().map(|m| m.0.clone()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn conj_swap_pairs() {
        let m = MultiIndex(vec![2, 1, 0, 3]);
        assert_eq!(m.conj_swap().0, vec![1, 2, 3, 0]);
        assert!(MultiIndex(vec![1, 1, 2, 2]).is_self_conjugate());
    }

    #[test]
    fn partitions2_multiplicity_totals() {
        // Ordered pairs of (2,1): sub-indices with both parts ≥ 1.
        let m = MultiIndex(vec![2, 1]);
        let parts = m.partitions2();
        let total: u32 = parts.iter().map(|p| p.2).sum();
        // Ordered count: choose s with 1 ≤ |s| ≤ 2: (0,1),(1,0),(1,1),(2,0),(0+2 invalid comp)… = #proper = 4.
        assert_eq!(total, m.proper_subindices().len() as u32);
        for (a, b, _) in &parts {
            assert_eq!(a.add(b), m);
        }
    }

    #[test]
    fn partitions3_match_bruteforce_count() {
        let m = MultiIndex(vec![3, 2]);
        let parts = m.partitions3();
        let total: u32 = parts.iter().map(|p| p.3).sum();
        // Brute-force ordered triple count.
        let mut count = 0u32;
        for a in m.proper_subindices() {
            let rest = m.checked_sub(&a).unwrap();
            for b in rest.proper_subindices() {
                let c = rest.checked_sub(&b).unwrap();
                if c.degree() >= 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(total, count);
        for (a, b, c, _) in &parts {
            assert_eq!(a.add(b).add(c), m);
            assert!(a <= b && b <= c);
        }
    }
}
