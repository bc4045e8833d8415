//! Index mappings between tables whose scopes are related by inclusion.
//!
//! A mapping never materializes index lists. It keeps per-variable stride
//! recipes and walks destination entries with an odometer, so any
//! `[begin, end)` slice of the destination can be evaluated on its own.

use smallvec::SmallVec;

use super::{Domain, PotentialError};
use crate::network::VarId;

/// Odometer over a mixed-radix counter that tracks `Σ digit[k] · stride[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projector {
    cards: Vec<usize>,
    strides: Vec<usize>,
}

impl Projector {
    pub fn new(cards: Vec<usize>, strides: Vec<usize>) -> Self {
        debug_assert_eq!(cards.len(), strides.len());
        Projector { cards, strides }
    }

    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    /// Calls `f(offset, projected)` for counter values `begin..begin + len`,
    /// where `offset` counts from 0.
    #[inline]
    pub fn for_each(&self, begin: usize, len: usize, mut f: impl FnMut(usize, usize)) {
        if len == 0 {
            return;
        }
        let n = self.cards.len();
        if n == 0 {
            for i in 0..len {
                f(i, 0);
            }
            return;
        }
        let mut digits: SmallVec<[usize; 16]> = SmallVec::from_elem(0, n);
        let mut rest = begin;
        let mut proj = 0;
        for k in (0..n).rev() {
            digits[k] = rest % self.cards[k];
            rest /= self.cards[k];
            proj += digits[k] * self.strides[k];
        }
        let last = n - 1;
        let (lc, ls) = (self.cards[last], self.strides[last]);
        let mut i = 0;
        loop {
            let run = (lc - digits[last]).min(len - i);
            let mut p = proj;
            for k in 0..run {
                f(i + k, p);
                p += ls;
            }
            i += run;
            if i >= len {
                return;
            }
            // last digit wrapped; carry upward
            proj -= digits[last] * ls;
            digits[last] = 0;
            let mut k = last;
            loop {
                k -= 1;
                digits[k] += 1;
                proj += self.strides[k];
                if digits[k] < self.cards[k] {
                    break;
                }
                proj -= digits[k] * self.strides[k];
                digits[k] = 0;
            }
        }
    }
}

/// Sum-out recipe: destination entry `d` aggregates the source entries at
/// `base(d) + off` for every `off` produced by the summed-out odometer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginalizeMap {
    base: Projector,
    summed: Projector,
}

impl MarginalizeMap {
    pub fn new(src: &Domain, keep: &Domain) -> Result<Self, PotentialError> {
        let mut base_strides = Vec::with_capacity(keep.len());
        for (&v, &c) in keep.vars().iter().zip(keep.cards()) {
            let pos = src.position(v).ok_or(PotentialError::NotSubset(v))?;
            if src.cards()[pos] != c {
                return Err(PotentialError::CardinalityMismatch(v));
            }
            base_strides.push(src.strides()[pos]);
        }
        let (mut out_cards, mut out_strides) = (Vec::new(), Vec::new());
        for (k, &v) in src.vars().iter().enumerate() {
            if keep.position(v).is_none() {
                out_cards.push(src.cards()[k]);
                out_strides.push(src.strides()[k]);
            }
        }
        Ok(MarginalizeMap {
            base: Projector::new(keep.cards().to_vec(), base_strides),
            summed: Projector::new(out_cards, out_strides),
        })
    }

    /// Source indices feeding destination entry `d`, ascending.
    pub fn sources(&self, d: usize) -> Vec<usize> {
        let mut base = 0;
        self.base.for_each(d, 1, |_, p| base = p);
        let mut out = Vec::with_capacity(self.summed.size());
        self.summed.for_each(0, self.summed.size(), |_, off| out.push(base + off));
        out
    }

    /// Fills `dst` with destination entries `begin..begin + dst.len()`.
    /// Each entry is summed in ascending source-index order.
    #[inline]
    pub fn compute_range(&self, src: &[f64], begin: usize, dst: &mut [f64]) {
        let inner = self.summed.size();
        if inner == 1 {
            self.base.for_each(begin, dst.len(), |i, b| dst[i] = src[b]);
            return;
        }
        self.base.for_each(begin, dst.len(), |i, b| {
            let mut acc = 0.0;
            self.summed.for_each(0, inner, |_, off| acc += src[b + off]);
            dst[i] = acc;
        });
    }
}

/// Projection recipe: destination entry `d` reads source entry `project(d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendMap {
    proj: Projector,
}

impl ExtendMap {
    pub fn new(src: &Domain, superscope: &Domain) -> Result<Self, PotentialError> {
        for (&v, &c) in src.vars().iter().zip(src.cards()) {
            match superscope.position(v) {
                None => return Err(PotentialError::NotSubset(v)),
                Some(pos) if superscope.cards()[pos] != c => {
                    return Err(PotentialError::CardinalityMismatch(v))
                }
                Some(_) => {}
            }
        }
        let strides = superscope
            .vars()
            .iter()
            .map(|&v| src.position(v).map_or(0, |pos| src.strides()[pos]))
            .collect();
        Ok(ExtendMap {
            proj: Projector::new(superscope.cards().to_vec(), strides),
        })
    }

    pub fn source(&self, d: usize) -> usize {
        let mut s = 0;
        self.proj.for_each(d, 1, |_, p| s = p);
        s
    }

    /// Calls `f(offset, source_index)` for destination entries
    /// `begin..begin + len`.
    #[inline]
    pub fn for_each(&self, begin: usize, len: usize, f: impl FnMut(usize, usize)) {
        self.proj.for_each(begin, len, f);
    }
}

/// How destination entries relate to source entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexMapping {
    Identity { size: usize },
    Marginalize(MarginalizeMap),
    Extend(ExtendMap),
}

impl IndexMapping {
    /// Source indices contributing to destination entry `d`.
    pub fn sources(&self, d: usize) -> Vec<usize> {
        match self {
            IndexMapping::Identity { .. } => vec![d],
            IndexMapping::Marginalize(m) => m.sources(d),
            IndexMapping::Extend(e) => vec![e.source(d)],
        }
    }
}

/// Mapping from a table over `src` to one over `dst`, where `dst` is a
/// subset (marginalization) or a superset (extension) of `src`.
pub fn build_index_mapping(src: &Domain, dst: &Domain) -> Result<IndexMapping, PotentialError> {
    if src == dst {
        return Ok(IndexMapping::Identity { size: src.size() });
    }
    let contains = |outer: &Domain, inner: &Domain| {
        inner.vars().iter().all(|&v| outer.position(v).is_some())
    };
    if contains(src, dst) {
        MarginalizeMap::new(src, dst).map(IndexMapping::Marginalize)
    } else if contains(dst, src) {
        ExtendMap::new(src, dst).map(IndexMapping::Extend)
    } else {
        let stray: Vec<VarId> = dst
            .vars()
            .iter()
            .copied()
            .filter(|&v| src.position(v).is_none())
            .collect();
        Err(PotentialError::UnrelatedScopes(stray))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(pairs: &[(VarId, usize)]) -> Domain {
        Domain::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn projector_matches_division() {
        let p = Projector::new(vec![2, 3, 4], vec![12, 4, 1]);
        let mut seen = Vec::new();
        p.for_each(5, 14, |i, x| seen.push((i, x)));
        let expect: Vec<_> = (0..14).map(|i| (i, i + 5)).collect();
        assert_eq!(seen, expect);
    }

    #[test]
    fn marginalize_mapping_2x2() {
        let m = build_index_mapping(&dom(&[(0, 2), (1, 2)]), &dom(&[(0, 2)])).unwrap();
        assert_eq!(m.sources(0), vec![0, 1]);
        assert_eq!(m.sources(1), vec![2, 3]);
        // keep the slower variable out: B kept
        let m = build_index_mapping(&dom(&[(0, 2), (1, 2)]), &dom(&[(1, 2)])).unwrap();
        assert_eq!(m.sources(0), vec![0, 2]);
        assert_eq!(m.sources(1), vec![1, 3]);
    }

    #[test]
    fn extend_mapping_2x2() {
        let m = build_index_mapping(&dom(&[(1, 2)]), &dom(&[(0, 2), (1, 2)])).unwrap();
        let got: Vec<_> = (0..4).map(|d| m.sources(d)).collect();
        assert_eq!(got, vec![vec![0], vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn identity_and_unrelated() {
        let d = dom(&[(0, 2), (3, 3)]);
        assert_eq!(build_index_mapping(&d, &d).unwrap(), IndexMapping::Identity { size: 6 });
        let e = build_index_mapping(&dom(&[(0, 2), (1, 2)]), &dom(&[(1, 2), (2, 2)]));
        assert_eq!(e.unwrap_err(), PotentialError::UnrelatedScopes(vec![2]));
    }

    #[test]
    fn compute_range_any_split_is_identical() {
        let src_dom = dom(&[(0, 3), (2, 2), (5, 4)]);
        let keep = dom(&[(0, 3), (5, 4)]);
        let m = MarginalizeMap::new(&src_dom, &keep).unwrap();
        let src: Vec<f64> = (0..24).map(|i| (i as f64).sqrt()).collect();
        let mut whole = vec![0.0; 12];
        m.compute_range(&src, 0, &mut whole);
        for split in 1..12 {
            let mut parts = vec![0.0; 12];
            let (a, b) = parts.split_at_mut(split);
            m.compute_range(&src, 0, a);
            m.compute_range(&src, split, b);
            assert_eq!(parts, whole);
        }
    }
}
