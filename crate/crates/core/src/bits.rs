//! Packed bit rows with per-group word ranges.
//!
//! Columns are permuted once so each group occupies a contiguous run of
//! words starting on a word boundary; padding bits stay zero. Per-group
//! counts are then plain popcounts over a word range.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

pub type Word = u64;
pub const WORD_BITS: usize = 64;

/// Column layout shared by all rows of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    group_sizes: Vec<u32>,
    group_words: Vec<Range<usize>>,
    words: usize,
}

impl Layout {
    pub fn new(group_sizes: &[u32]) -> Self {
        let mut group_words = Vec::with_capacity(group_sizes.len());
        let mut start = 0;
        for &size in group_sizes {
            let len = (size as usize).div_ceil(WORD_BITS);
            group_words.push(start..start + len);
            start += len;
        }
        Self {
            group_sizes: group_sizes.to_vec(),
            group_words,
            words: start,
        }
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_size(&self, group: usize) -> u32 {
        self.group_sizes[group]
    }

    pub fn group_sizes(&self) -> &[u32] {
        &self.group_sizes
    }

    pub fn total(&self) -> u32 {
        self.group_sizes.iter().sum()
    }

    pub fn group_words(&self, group: usize) -> Range<usize> {
        self.group_words[group].clone()
    }

    /// Word index and bit mask of column `col` within `group`.
    #[inline]
    pub fn position(&self, group: usize, col: usize) -> (usize, Word) {
        debug_assert!(col < self.group_sizes[group] as usize);
        let base = self.group_words[group].start;
        (base + col / WORD_BITS, 1 << (col % WORD_BITS))
    }

    pub fn empty_row(&self) -> Vec<Word> {
        vec![0; self.words]
    }

    /// Per-group popcounts of `row`.
    pub fn group_counts(&self, row: &[Word]) -> Vec<u32> {
        (0..self.groups()).map(|g| self.count_in(row, g)).collect()
    }

    #[inline]
    pub fn count_in(&self, row: &[Word], group: usize) -> u32 {
        row[self.group_words[group].clone()]
            .iter()
            .map(|w| w.count_ones())
            .sum()
    }

    /// Popcount of `a | b` restricted to `group`, without materialising the union.
    #[inline]
    pub fn union_count_in(&self, a: &[Word], b: &[Word], group: usize) -> u32 {
        let r = self.group_words[group].clone();
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| (x | y).count_ones()).sum()
    }
}

pub fn count(row: &[Word]) -> u32 {
    row.iter().map(|w| w.count_ones()).sum()
}

pub fn or_assign(acc: &mut [Word], row: &[Word]) {
    for (a, b) in acc.iter_mut().zip(row) {
        *a |= *b;
    }
}

#[inline]
pub fn test(row: &[Word], word: usize, mask: Word) -> bool {
    row[word] & mask != 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_start_on_word_boundaries() {
        let layout = Layout::new(&[3, 64, 65]);
        assert_eq!(layout.group_words(0), 0..1);
        assert_eq!(layout.group_words(1), 1..2);
        assert_eq!(layout.group_words(2), 2..4);
        assert_eq!(layout.words(), 4);
        assert_eq!(layout.position(2, 64), (3, 1));
    }

    #[test]
    fn masked_counts() {
        let layout = Layout::new(&[5, 70]);
        let mut a = layout.empty_row();
        let mut b = layout.empty_row();
        for c in [0, 2, 4] {
            let (w, m) = layout.position(0, c);
            a[w] |= m;
        }
        for c in [2, 3] {
            let (w, m) = layout.position(0, c);
            b[w] |= m;
        }
        let (w, m) = layout.position(1, 69);
        b[w] |= m;
        assert_eq!(layout.group_counts(&a), [3, 0]);
        assert_eq!(layout.group_counts(&b), [2, 1]);
        assert_eq!(layout.union_count_in(&a, &b, 0), 4);
        assert_eq!(layout.union_count_in(&a, &b, 1), 1);
        or_assign(&mut a, &b);
        assert_eq!(count(&a), 5);
    }
}
