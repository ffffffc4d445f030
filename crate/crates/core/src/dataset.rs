//! The binary alteration-by-sample matrix, its preprocessing, and coverage
//! queries.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::bits::{self, Layout, Word};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AlterationKind {
    Snv,
    Amp,
    Del,
}

/// One row of the matrix: a (gene, alteration kind) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alteration {
    label: String,
    gene: String,
    kind: AlterationKind,
    merged_from: Vec<String>,
}

impl Alteration {
    /// Parses `GENE`, `GENE(A)` or `GENE(D)`.
    pub fn parse(label: &str) -> Self {
        let (gene, kind) = if let Some(g) = label.strip_suffix("(A)") {
            (g, AlterationKind::Amp)
        } else if let Some(g) = label.strip_suffix("(D)") {
            (g, AlterationKind::Del)
        } else {
            (label, AlterationKind::Snv)
        };
        Self {
            label: label.to_string(),
            gene: gene.to_string(),
            kind,
            merged_from: alloc::vec![label.to_string()],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gene(&self) -> &str {
        &self.gene
    }

    pub fn kind(&self) -> AlterationKind {
        self.kind
    }

    /// Labels of the original rows this row stands for (itself included).
    pub fn merged_from(&self) -> &[String] {
        &self.merged_from
    }
}

/// Sorted, duplicate-free set of row indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlterationSet(Vec<u32>);

impl AlterationSet {
    pub fn new<I: IntoIterator<Item = u32>>(members: I) -> Self {
        let mut v: Vec<u32> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn singleton(row: u32) -> Self {
        Self(alloc::vec![row])
    }

    pub fn members(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, row: u32) -> bool {
        self.0.binary_search(&row).is_ok()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for x in &self.0 {
            for y in it.by_ref() {
                if y == x {
                    continue 'outer;
                }
                if y > x {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            if a < b {
                v.push(a);
                i += 1;
            } else if b < a {
                v.push(b);
                j += 1;
            } else {
                v.push(a);
                i += 1;
                j += 1;
            }
        }
        v.extend_from_slice(&self.0[i..]);
        v.extend_from_slice(&other.0[j..]);
        Self(v)
    }

    pub fn into_members(self) -> Vec<u32> {
        self.0
    }
}

impl From<Vec<u32>> for AlterationSet {
    fn from(v: Vec<u32>) -> Self {
        Self::new(v)
    }
}

impl fmt::Display for AlterationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

/// Total and per-group coverage of one row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageVector {
    pub total: u32,
    pub per_group: Vec<u32>,
}

/// Immutable packed binary matrix. Samples are stored grouped: groups in
/// ascending label order, samples within a group in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlterationMatrix {
    alterations: Vec<Alteration>,
    samples: Vec<String>,
    sample_group: Vec<u32>,
    group_labels: Vec<String>,
    layout: Layout,
    bits: Vec<Word>,
    group_coverage: Vec<u32>,
    coverage: Vec<u32>,
}

impl AlterationMatrix {
    /// Builds a matrix from dense rows. `sample_groups[j]` is the group label of
    /// `samples[j]`; `rows[i][j]` is the presence of alteration `i` in sample `j`.
    pub fn from_rows<R: AsRef<[bool]>>(
        labels: &[String],
        samples: &[String],
        sample_groups: &[String],
        rows: &[R],
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::NoRows);
        }
        if rows.len() != labels.len() {
            return Err(Error::Config("one row per label required".into()));
        }
        if sample_groups.len() != samples.len() {
            return Err(Error::Config("one group label per sample required".into()));
        }
        let mut seen = BTreeMap::new();
        for s in samples {
            if seen.insert(s.as_str(), ()).is_some() {
                return Err(Error::DuplicateSample(s.clone()));
            }
        }
        let mut group_labels: Vec<String> = sample_groups.to_vec();
        group_labels.sort();
        group_labels.dedup();
        let group_of: Vec<u32> = sample_groups
            .iter()
            .map(|g| group_labels.binary_search(g).unwrap() as u32)
            .collect();
        // Stable grouping permutation.
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by_key(|&j| group_of[j]);
        let mut sizes = alloc::vec![0u32; group_labels.len()];
        let mut col_in_group = alloc::vec![0usize; samples.len()];
        for &j in &order {
            let g = group_of[j] as usize;
            col_in_group[j] = sizes[g] as usize;
            sizes[g] += 1;
        }
        let layout = Layout::new(&sizes);
        let mut bits = Vec::with_capacity(labels.len() * layout.words());
        let mut alterations = Vec::with_capacity(labels.len());
        let mut seen_rows = BTreeMap::new();
        for (label, row) in labels.iter().zip(rows) {
            let row = row.as_ref();
            if row.len() != samples.len() {
                return Err(Error::RowLength {
                    row: label.clone(),
                    found: row.len(),
                    expected: samples.len(),
                });
            }
            if seen_rows.insert(label.as_str(), ()).is_some() {
                return Err(Error::DuplicateRow(label.clone()));
            }
            let mut packed = layout.empty_row();
            for (j, &present) in row.iter().enumerate() {
                if present {
                    let (w, m) = layout.position(group_of[j] as usize, col_in_group[j]);
                    packed[w] |= m;
                }
            }
            bits.extend_from_slice(&packed);
            alterations.push(Alteration::parse(label));
        }
        let samples = order.iter().map(|&j| samples[j].clone()).collect();
        let sample_group = order.iter().map(|&j| group_of[j]).collect();
        Ok(Self::assemble(
            alterations,
            samples,
            sample_group,
            group_labels,
            layout,
            bits,
        ))
    }

    pub(crate) fn assemble(
        alterations: Vec<Alteration>,
        samples: Vec<String>,
        sample_group: Vec<u32>,
        group_labels: Vec<String>,
        layout: Layout,
        bits: Vec<Word>,
    ) -> Self {
        let words = layout.words();
        let groups = layout.groups();
        let mut group_coverage = Vec::with_capacity(alterations.len() * groups);
        let mut coverage = Vec::with_capacity(alterations.len());
        for i in 0..alterations.len() {
            let row = &bits[i * words..(i + 1) * words];
            let counts = layout.group_counts(row);
            coverage.push(counts.iter().sum());
            group_coverage.extend(counts);
        }
        Self {
            alterations,
            samples,
            sample_group,
            group_labels,
            layout,
            bits,
            group_coverage,
            coverage,
        }
    }

    /// Number of rows `m`.
    pub fn rows(&self) -> usize {
        self.alterations.len()
    }

    /// Number of samples `n`.
    pub fn samples_len(&self) -> u32 {
        self.samples.len() as u32
    }

    /// Sample ids in storage (grouped) order.
    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn sample_group(&self, sample: usize) -> usize {
        self.sample_group[sample] as usize
    }

    pub fn groups(&self) -> usize {
        self.group_labels.len()
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn group_index(&self, label: &str) -> Result<usize> {
        self.group_labels
            .binary_search_by(|g| g.as_str().cmp(label))
            .map_err(|_| Error::UnknownGroup(label.to_string()))
    }

    pub fn group_size(&self, group: usize) -> u32 {
        self.layout.group_size(group)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn alteration(&self, row: u32) -> &Alteration {
        &self.alterations[row as usize]
    }

    pub fn alterations(&self) -> &[Alteration] {
        &self.alterations
    }

    pub fn find(&self, label: &str) -> Option<u32> {
        self.alterations.iter().position(|a| a.label == label).map(|i| i as u32)
    }

    pub fn row_bits(&self, row: u32) -> &[Word] {
        let w = self.layout.words();
        let i = row as usize;
        &self.bits[i * w..(i + 1) * w]
    }

    /// Presence of alteration `row` in the sample at storage position `sample`.
    pub fn get(&self, row: u32, sample: usize) -> bool {
        let g = self.sample_group[sample] as usize;
        let first = self.group_first_sample(g);
        let (w, m) = self.layout.position(g, sample - first);
        bits::test(self.row_bits(row), w, m)
    }

    fn group_first_sample(&self, group: usize) -> usize {
        self.layout.group_sizes()[..group].iter().map(|&s| s as usize).sum()
    }

    /// Γ(i), the row sum.
    pub fn row_coverage(&self, row: u32) -> u32 {
        self.coverage[row as usize]
    }

    /// Γ_τ(i).
    pub fn row_group_coverage(&self, row: u32, group: usize) -> u32 {
        self.group_coverage[row as usize * self.groups() + group]
    }

    pub fn coverage_vector(&self, row: u32) -> CoverageVector {
        let g = self.groups();
        let i = row as usize;
        CoverageVector {
            total: self.coverage[i],
            per_group: self.group_coverage[i * g..(i + 1) * g].to_vec(),
        }
    }

    pub(crate) fn check_set(&self, set: &AlterationSet) -> Result<()> {
        match set.members().last() {
            Some(&last) if last as usize >= self.rows() => Err(Error::RowIndex {
                index: last,
                rows: self.rows(),
            }),
            _ => Ok(()),
        }
    }

    /// Packed indicator "at least one member present".
    pub fn indicator(&self, set: &AlterationSet) -> Vec<Word> {
        let mut acc = self.layout.empty_row();
        for &r in set.members() {
            bits::or_assign(&mut acc, self.row_bits(r));
        }
        acc
    }

    /// Γ(M), over all samples or within one group.
    pub fn coverage(&self, set: &AlterationSet, group: Option<&str>) -> Result<u32> {
        self.check_set(set)?;
        let group = group.map(|g| self.group_index(g)).transpose()?;
        if let [single] = set.members() {
            return Ok(match group {
                Some(g) => self.row_group_coverage(*single, g),
                None => self.row_coverage(*single),
            });
        }
        let ind = self.indicator(set);
        Ok(match group {
            Some(g) => self.layout.count_in(&ind, g),
            None => bits::count(&ind),
        })
    }

    /// Per-group Γ_τ(M).
    pub fn group_coverages(&self, set: &AlterationSet) -> Vec<u32> {
        self.layout.group_counts(&self.indicator(set))
    }

    /// ω(M) = Σ Γ(g) − Γ(M).
    pub fn overlap(&self, set: &AlterationSet) -> Result<u32> {
        let union = self.coverage(set, None)?;
        let total: u32 = set.members().iter().map(|&r| self.row_coverage(r)).sum();
        Ok(total - union)
    }

    fn select_rows(&self, keep: &[usize], alterations: Vec<Alteration>) -> Self {
        let w = self.layout.words();
        let mut bits = Vec::with_capacity(keep.len() * w);
        for &i in keep {
            bits.extend_from_slice(&self.bits[i * w..(i + 1) * w]);
        }
        Self::assemble(
            alterations,
            self.samples.clone(),
            self.sample_group.clone(),
            self.group_labels.clone(),
            self.layout.clone(),
            bits,
        )
    }

    /// Merges rows with bit-identical patterns into the first of them.
    pub fn merge_identical_rows(&self) -> Self {
        let mut first_of: BTreeMap<&[Word], usize> = BTreeMap::new();
        let mut keep: Vec<usize> = Vec::new();
        let mut alterations: Vec<Alteration> = Vec::new();
        for i in 0..self.rows() {
            let row = self.row_bits(i as u32);
            match first_of.get(row) {
                Some(&slot) => {
                    let from = self.alterations[i].merged_from.iter().cloned();
                    alterations[slot].merged_from.extend(from);
                }
                None => {
                    first_of.insert(row, keep.len());
                    keep.push(i);
                    alterations.push(self.alterations[i].clone());
                }
            }
        }
        self.select_rows(&keep, alterations)
    }

    /// Repeatedly drops every row with coverage `<= log2(m - 1)`, where `m` is
    /// the current row count, until no row violates the rule.
    pub fn filter_rare(&self) -> Self {
        let mut keep: Vec<usize> = (0..self.rows()).collect();
        loop {
            let threshold = rarity_threshold(keep.len());
            let next: Vec<usize> = keep
                .iter()
                .copied()
                .filter(|&i| self.coverage[i] as f64 > threshold)
                .collect();
            if next.len() == keep.len() {
                break;
            }
            keep = next;
        }
        let alterations = keep.iter().map(|&i| self.alterations[i].clone()).collect();
        self.select_rows(&keep, alterations)
    }

    /// `merge_identical_rows` followed by `filter_rare`.
    pub fn preprocess(&self) -> Self {
        self.merge_identical_rows().filter_rare()
    }

    pub fn labels(&self, set: &AlterationSet) -> Vec<&str> {
        set.members().iter().map(|&r| self.alteration(r).label()).collect()
    }

    /// Canonical text key of a set: member labels sorted and comma-joined.
    /// Independent of row order.
    pub fn set_key(&self, set: &AlterationSet) -> String {
        let mut labels = self.labels(set);
        labels.sort_unstable();
        labels.join(",")
    }

    /// Parses a comma-separated list of row labels into a set.
    pub fn parse_set(&self, text: &str) -> Result<AlterationSet> {
        let mut rows = Vec::new();
        for label in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            rows.push(
                self.find(label)
                    .ok_or_else(|| Error::UnknownAlteration(label.to_string()))?,
            );
        }
        Ok(AlterationSet::new(rows))
    }
}

/// `log2(m - 1)`; `-inf` for `m <= 1`.
pub fn rarity_threshold(m: usize) -> f64 {
    if m <= 1 {
        f64::NEG_INFINITY
    } else {
        libm::log2((m - 1) as f64)
    }
}
