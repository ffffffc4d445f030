//! Synthetic matrices: independent rows with fixed per-group margins, and
//! planted perfectly exclusive sets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::Layout;
use crate::dataset::{Alteration, AlterationMatrix};
use crate::{Error, Result};

fn padded(prefix: &str, i: usize, count: usize) -> String {
    let width = format!("{}", count.max(1)).len();
    format!("{prefix}{:0width$}", i + 1)
}

struct Frame {
    layout: Layout,
    samples: Vec<String>,
    sample_group: Vec<u32>,
    group_labels: Vec<String>,
}

fn frame(group_sizes: &[u32]) -> Frame {
    let layout = Layout::new(group_sizes);
    let total: u32 = group_sizes.iter().sum();
    let samples = (0..total as usize).map(|j| padded("S", j, total as usize)).collect();
    let sample_group = group_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| core::iter::repeat_n(g as u32, s as usize))
        .collect();
    let group_labels = (0..group_sizes.len())
        .map(|g| padded("G", g, group_sizes.len()))
        .collect();
    Frame {
        layout,
        samples,
        sample_group,
        group_labels,
    }
}

fn finish(frame: Frame, rows: usize, prefix: &str, bits: Vec<u64>) -> AlterationMatrix {
    let alterations = (0..rows).map(|i| Alteration::parse(&padded(prefix, i, rows))).collect();
    AlterationMatrix::assemble(
        alterations,
        frame.samples,
        frame.sample_group,
        frame.group_labels,
        frame.layout,
        bits,
    )
}

fn check_margins(group_sizes: &[u32], margins: &[Vec<u32>]) -> Result<()> {
    for row in margins {
        if row.len() != group_sizes.len() {
            return Err(Error::Config(format!(
                "margin row has {} entries for {} groups",
                row.len(),
                group_sizes.len()
            )));
        }
        for (&m, &size) in row.iter().zip(group_sizes) {
            if m > size {
                return Err(Error::InfeasibleMargin { margin: m, size });
            }
        }
    }
    Ok(())
}

/// Each row is an independent uniform subset of each group's columns with
/// exactly the requested size. `margins[i][g]` is row `i`'s count in group `g`.
/// Rows are labelled `R1..`, samples `S1..`, groups `G1..` (zero-padded).
pub fn simulate_null(group_sizes: &[u32], margins: &[Vec<u32>], seed: u64) -> Result<AlterationMatrix> {
    check_margins(group_sizes, margins)?;
    let frame = frame(group_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<u32> = Vec::new();
    let mut bits = Vec::with_capacity(margins.len() * frame.layout.words());
    for row in margins {
        let mut packed = frame.layout.empty_row();
        for (g, &count) in row.iter().enumerate() {
            cols.clear();
            cols.extend(0..group_sizes[g]);
            let (chosen, _) = cols.partial_shuffle(&mut rng, count as usize);
            for &c in chosen.iter() {
                let (w, m) = frame.layout.position(g, c as usize);
                packed[w] |= m;
            }
        }
        bits.extend_from_slice(&packed);
    }
    Ok(finish(frame, margins.len(), "R", bits))
}

/// Like [`simulate_null`], but the first `planted.len()` rows are pairwise
/// disjoint within every group (a perfectly exclusive set, labelled `P1..`);
/// the `background` rows (`R1..`) are independent.
pub fn simulate_planted(
    group_sizes: &[u32],
    planted: &[Vec<u32>],
    background: &[Vec<u32>],
    seed: u64,
) -> Result<AlterationMatrix> {
    check_margins(group_sizes, planted)?;
    for (g, &size) in group_sizes.iter().enumerate() {
        let total: u32 = planted.iter().map(|r| r[g]).sum();
        if total > size {
            return Err(Error::InfeasibleMargin { margin: total, size });
        }
    }
    let bg = simulate_null(group_sizes, background, seed ^ 0x5eed_5eed_5eed_5eed)?;
    let frame = frame(group_sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = frame.layout.words();
    let mut planted_bits: Vec<Vec<u64>> = planted.iter().map(|_| frame.layout.empty_row()).collect();
    for (g, &size) in group_sizes.iter().enumerate() {
        let mut cols: Vec<u32> = (0..size).collect();
        cols.shuffle(&mut rng);
        let mut next = 0usize;
        for (row, margins) in planted_bits.iter_mut().zip(planted) {
            for &c in &cols[next..next + margins[g] as usize] {
                let (w, m) = frame.layout.position(g, c as usize);
                row[w] |= m;
            }
            next += margins[g] as usize;
        }
    }
    let mut alterations: Vec<Alteration> = (0..planted.len())
        .map(|i| Alteration::parse(&padded("P", i, planted.len())))
        .collect();
    alterations.extend(bg.alterations().iter().cloned());
    let mut bits: Vec<u64> = planted_bits.into_iter().flatten().collect();
    for r in 0..bg.rows() as u32 {
        bits.extend_from_slice(bg.row_bits(r));
    }
    debug_assert_eq!(bits.len(), alterations.len() * words);
    Ok(AlterationMatrix::assemble(
        alterations,
        frame.samples,
        frame.sample_group,
        frame.group_labels,
        frame.layout,
        bits,
    ))
}
