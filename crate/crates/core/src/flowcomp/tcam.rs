//! Bit-sliced lookup over a table's ternary entries.
//!
//! An entry `(value, mask)` mismatches a header `h` iff some care bit `b`
//! (`mask_b = 1`) has `h_b != value_b`. For every bit that appears in any mask we
//! keep two bitmaps over the priority-ordered entries: entries that require the
//! bit set, and entries that require it clear. The mismatch set for `h` is the OR
//! of the bitmaps selected by `h`; the first clear position is the
//! highest-priority match. This is the same parallel compare plus priority
//! encoder a hardware TCAM performs, so results equal a linear scan.

use crate::bits::Bits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TcamIndex {
    len: usize,
    words: usize,
    /// `(bit, entries requiring 1, entries requiring 0)`; empty bitmaps are `None`.
    slices: Vec<(usize, Option<Vec<u64>>, Option<Vec<u64>>)>,
}

impl TcamIndex {
    /// `entries` must already be in lookup order (highest priority first).
    pub(crate) fn build<'a>(entries: impl ExactSizeIterator<Item = (&'a Bits, &'a Bits)>) -> TcamIndex {
        let len = entries.len();
        let words = len.div_ceil(64).max(1);
        let mut care = std::collections::BTreeMap::<usize, (Option<Vec<u64>>, Option<Vec<u64>>)>::new();
        for (pos, (value, mask)) in entries.enumerate() {
            for b in mask.ones_iter() {
                let slot = care.entry(b).or_default();
                let map = if value.get(b) { &mut slot.0 } else { &mut slot.1 };
                map.get_or_insert_with(|| vec![0; words])[pos / 64] |= 1 << (pos % 64);
            }
        }
        TcamIndex { len, words, slices: care.into_iter().map(|(b, (one, zero))| (b, one, zero)).collect() }
    }

    /// Position of the highest-priority entry matching `header`.
    pub(crate) fn lookup(&self, header: &Bits) -> Option<usize> {
        let selected: Vec<&Vec<u64>> = self
            .slices
            .iter()
            .filter_map(|(b, one, zero)| if header.get(*b) { zero.as_ref() } else { one.as_ref() })
            .collect();
        for w in 0..self.words {
            let mut miss = 0u64;
            for s in &selected {
                miss |= s[w];
            }
            let hit = !miss;
            if hit != 0 {
                let pos = w * 64 + hit.trailing_zeros() as usize;
                return (pos < self.len).then_some(pos);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear(entries: &[(Bits, Bits)], h: &Bits) -> Option<usize> {
        entries.iter().position(|(v, m)| h.masked_eq(m, v))
    }

    proptest! {
        #[test]
        fn agrees_with_linear_scan(
            raw in proptest::collection::vec((any::<u16>(), any::<u16>()), 0..150),
            headers in proptest::collection::vec(any::<u16>(), 1..20),
        ) {
            let entries: Vec<(Bits, Bits)> = raw
                .iter()
                .map(|&(v, m)| (Bits::from_u128(16, (v & m) as u128).unwrap(), Bits::from_u128(16, m as u128).unwrap()))
                .collect();
            let idx = TcamIndex::build(entries.iter().map(|(v, m)| (v, m)));
            for h in headers {
                let h = Bits::from_u128(16, h as u128).unwrap();
                prop_assert_eq!(idx.lookup(&h), linear(&entries, &h));
            }
        }
    }

    #[test]
    fn catch_all_always_hits() {
        let z = Bits::zeros(8).unwrap();
        let idx = TcamIndex::build([(&z, &z)].into_iter());
        assert_eq!(idx.lookup(&Bits::from_u128(8, 0xff).unwrap()), Some(0));
        let empty = TcamIndex::build(std::iter::empty::<(&Bits, &Bits)>());
        assert_eq!(empty.lookup(&z), None);
    }
}
