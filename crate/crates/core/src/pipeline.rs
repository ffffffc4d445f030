//! End-to-end analysis: preprocess, greedy candidates, subset closure,
//! exact per-group tests, randomised Stouffer, weighted correction, pruning.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::combine::{combine_across_groups_ln, set_group_weight, CombineMode, GroupEvidence};
use crate::dataset::{AlterationMatrix, AlterationSet};
use crate::exact::{effective_members, upper_p, GroupMargins, PValueTriple};
use crate::exec::Executor;
use crate::greedy::{generate_candidates, subset_closure, CandidatePool, GreedyParams};
use crate::multiplicity::{prune_nested, weighted_bh, weighted_bonferroni, AdjustedResult, TestedSet, WeightScheme};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    Bonferroni,
    Bh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub k_max: usize,
    pub max_iter: usize,
    /// Weight parameter of the size-dependent weights.
    pub alpha_w: f64,
    /// Significance level for the adjusted p-values.
    pub level: f64,
    pub correction: Correction,
    pub seed: u64,
    /// Upper bound on the pool size after subset closure.
    pub closure_budget: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            k_max: 10,
            max_iter: 5000,
            alpha_w: 0.05,
            level: 0.05,
            correction: Correction::Bonferroni,
            seed: 0,
            closure_budget: 10_000_000,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 2 {
            return Err(Error::Config("k_max must be at least 2".to_string()));
        }
        for (name, v) in [("level", self.level), ("alpha_w", self.alpha_w)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(alloc::format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTest {
    pub margins: GroupMargins,
    pub triple: PValueTriple,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetTest {
    pub set: AlterationSet,
    pub groups: Vec<GroupTest>,
    /// Combined log p-value.
    pub ln_p: f64,
}

/// Exact per-group tests of `set` combined across groups.
pub fn test_set(matrix: &AlterationMatrix, set: &AlterationSet, mode: CombineMode) -> Result<SetTest> {
    let margins = effective_members(matrix, set)?;
    let mut groups = Vec::with_capacity(margins.len());
    for m in margins {
        let triple = upper_p(m.size, &m.coverages, m.observed)?;
        let weight = set_group_weight(m.size, &m.coverages);
        groups.push(GroupTest {
            margins: m,
            triple,
            weight,
        });
    }
    let labels = matrix.group_labels();
    let evidence: Vec<GroupEvidence<'_>> = groups
        .iter()
        .map(|g| GroupEvidence {
            group: &labels[g.margins.group],
            triple: g.triple,
            weight: g.weight,
        })
        .collect();
    let ln_p = combine_across_groups_ln(&evidence, mode, &matrix.set_key(set));
    Ok(SetTest {
        set: set.clone(),
        groups,
        ln_p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub rank: usize,
    pub set: AlterationSet,
    pub labels: Vec<String>,
    pub coverage: u32,
    pub coverage_fraction: f64,
    pub ln_p_raw: f64,
    pub ln_p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub row: u32,
    pub label: String,
    pub coverage: u32,
}

/// Union of the complete graphs on each reported set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnionGraph {
    pub nodes: Vec<GraphNode>,
    /// Pairs of indices into `nodes`, `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl UnionGraph {
    pub fn build(matrix: &AlterationMatrix, sets: &[&AlterationSet]) -> Self {
        let rows: BTreeSet<u32> = sets.iter().flat_map(|s| s.members().iter().copied()).collect();
        let rows: Vec<u32> = rows.into_iter().collect();
        let pos = |r: u32| rows.binary_search(&r).unwrap();
        let mut edges = BTreeSet::new();
        for s in sets {
            let m = s.members();
            for (i, &a) in m.iter().enumerate() {
                for &b in &m[i + 1..] {
                    edges.insert((pos(a), pos(b)));
                }
            }
        }
        Self {
            nodes: rows
                .iter()
                .map(|&r| GraphNode {
                    row: r,
                    label: matrix.alteration(r).label().to_string(),
                    coverage: matrix.row_coverage(r),
                })
                .collect(),
            edges: edges.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub rows_input: usize,
    pub rows_after_merge: usize,
    /// `m` used for the weights.
    pub rows_tested: usize,
    pub samples: u32,
    pub groups: usize,
    pub k_max_used: usize,
    pub pool_size: usize,
    pub candidates_tested: usize,
    pub significant_before_pruning: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Reported sets, ascending adjusted p.
    pub entries: Vec<ReportEntry>,
    pub graph: UnionGraph,
    /// Every tested candidate with its adjusted p-value.
    pub tested: Vec<AdjustedResult>,
    pub summary: RunSummary,
    /// Preprocessed matrix the row indices refer to.
    pub matrix: AlterationMatrix,
    /// Greedy pool before closure, for inspection.
    pub pool: Option<CandidatePool>,
}

impl Report {
    /// Adjusted p-value of `set` among the tested candidates.
    pub fn tested_ln_p_adjusted(&self, set: &AlterationSet) -> Option<f64> {
        self.tested.iter().find(|r| &r.set == set).map(|r| r.ln_p_adjusted)
    }
}

fn build_report(
    matrix: AlterationMatrix,
    tested: Vec<AdjustedResult>,
    kept: Vec<AdjustedResult>,
    summary: RunSummary,
    pool: Option<CandidatePool>,
) -> Report {
    let mut kept = kept;
    kept.sort_by(|a, b| a.report_cmp(b));
    let n = matrix.samples_len();
    let entries: Vec<ReportEntry> = kept
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let coverage = matrix.coverage(&r.set, None).expect("valid set");
            ReportEntry {
                rank: i + 1,
                set: r.set.clone(),
                labels: matrix.labels(&r.set).into_iter().map(ToString::to_string).collect(),
                coverage,
                coverage_fraction: if n == 0 { 0.0 } else { coverage as f64 / n as f64 },
                ln_p_raw: r.ln_p_raw,
                ln_p_adjusted: r.ln_p_adjusted,
            }
        })
        .collect();
    let sets: Vec<&AlterationSet> = entries.iter().map(|e| &e.set).collect();
    let graph = UnionGraph::build(&matrix, &sets);
    Report {
        entries,
        graph,
        tested,
        summary,
        matrix,
        pool,
    }
}

/// Full analysis of a raw (not yet preprocessed) matrix.
pub fn analyze<E: Executor>(raw: &AlterationMatrix, config: &AnalysisConfig, exec: &E) -> Result<Report> {
    config.validate()?;
    let merged = raw.merge_identical_rows();
    let matrix = merged.filter_rare();
    let m = matrix.rows();
    let mut summary = RunSummary {
        rows_input: raw.rows(),
        rows_after_merge: merged.rows(),
        rows_tested: m,
        samples: matrix.samples_len(),
        groups: matrix.groups(),
        ..RunSummary::default()
    };
    if m < 2 {
        return Ok(build_report(matrix, Vec::new(), Vec::new(), summary, None));
    }
    let k_max = config.k_max.min(m);
    summary.k_max_used = k_max;
    let params = GreedyParams {
        max_iter: config.max_iter,
        k_max,
    };
    let pool = generate_candidates(&matrix, params, exec);
    let closed = subset_closure(&pool, config.closure_budget)?;
    summary.pool_size = closed.len();
    let candidates: Vec<&AlterationSet> = closed.candidates().collect();
    summary.candidates_tested = candidates.len();

    let mode = CombineMode::Randomized { seed: config.seed };
    let tests = exec.map(candidates.len(), |i| {
        test_set(&matrix, candidates[i], mode).map(|t| t.ln_p)
    });
    let tested: Vec<TestedSet> = candidates
        .iter()
        .zip(tests)
        .map(|(s, r)| {
            r.map(|ln_p| TestedSet {
                set: (*s).clone(),
                ln_p,
            })
        })
        .collect::<Result<_>>()?;

    let scheme = WeightScheme::new(m, k_max, config.alpha_w)?;
    let adjusted = match config.correction {
        Correction::Bonferroni => weighted_bonferroni(&tested, &scheme, config.level)?,
        Correction::Bh => weighted_bh(&tested, &scheme, config.level)?,
    };
    let significant: Vec<AdjustedResult> = adjusted.iter().filter(|r| r.significant).cloned().collect();
    summary.significant_before_pruning = significant.len();
    let kept = prune_nested(&significant);
    Ok(build_report(matrix, adjusted, kept, summary, Some(pool)))
}

/// Pairwise baseline: every pair tested with mid-p Stouffer, plain Bonferroni
/// over `m(m−1)/2` pairs, no pruning.
pub fn pairwise_baseline<E: Executor>(raw: &AlterationMatrix, level: f64, exec: &E) -> Result<Report> {
    let merged = raw.merge_identical_rows();
    let matrix = merged.filter_rare();
    let m = matrix.rows();
    let mut summary = RunSummary {
        rows_input: raw.rows(),
        rows_after_merge: merged.rows(),
        rows_tested: m,
        samples: matrix.samples_len(),
        groups: matrix.groups(),
        k_max_used: 2,
        ..RunSummary::default()
    };
    if m < 2 {
        return Ok(build_report(matrix, Vec::new(), Vec::new(), summary, None));
    }
    let per_row = exec.map(m, |i| {
        ((i + 1)..m)
            .map(|j| {
                let set = AlterationSet::new([i as u32, j as u32]);
                test_set(&matrix, &set, CombineMode::Mid).map(|t| TestedSet { set, ln_p: t.ln_p })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut tested = Vec::new();
    for row in per_row {
        tested.extend(row?);
    }
    summary.candidates_tested = tested.len();
    summary.pool_size = tested.len();
    // k_max = 2: unit weights, factor C(m, 2).
    let scheme = WeightScheme::new(m, 2, 0.05)?;
    let adjusted = weighted_bonferroni(&tested, &scheme, level)?;
    let kept: Vec<AdjustedResult> = adjusted.iter().filter(|r| r.significant).cloned().collect();
    summary.significant_before_pruning = kept.len();
    Ok(build_report(matrix, adjusted, kept, summary, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::simulate::{simulate_null, simulate_planted};
    use alloc::vec;

    #[test]
    fn pair_test_matches_pair_score() {
        let a = simulate_null(&[60, 40], &[vec![10, 12], vec![20, 5], vec![3, 9]], 5).unwrap();
        let set = AlterationSet::new([0, 1]);
        let t = test_set(&a, &set, CombineMode::Mid).unwrap();
        let s = crate::greedy::score_pair(&a, &AlterationSet::singleton(0), &AlterationSet::singleton(1));
        assert!((libm::exp(t.ln_p) - s).abs() < 1e-14);
    }

    #[test]
    fn planted_triple_beats_its_pairs() {
        let background: Vec<Vec<u32>> = (0..9).map(|i| vec![20 + 3 * i, 25 + 2 * i]).collect();
        let a = simulate_planted(&[150, 150], &vec![vec![30, 30]; 3], &background, 21).unwrap();
        let cfg = AnalysisConfig {
            k_max: 4,
            max_iter: 60,
            seed: 3,
            ..AnalysisConfig::default()
        };
        let report = analyze(&a, &cfg, &Serial).unwrap();
        let triple = AlterationSet::new([0, 1, 2]);
        assert!(report.entries.iter().any(|e| e.set == triple));
        let t = report.tested_ln_p_adjusted(&triple).unwrap();
        for pair in [[0, 1], [0, 2], [1, 2]] {
            assert!(report.tested_ln_p_adjusted(&AlterationSet::new(pair)).unwrap() > t);
        }
        // Reported sets never nest with a better one.
        for e in &report.entries {
            for o in &report.tested {
                if o.significant && o.set != e.set && (o.set.is_subset_of(&e.set) || e.set.is_subset_of(&o.set)) {
                    assert!(o.ln_p_adjusted >= e.ln_p_adjusted);
                }
            }
        }
        let sets: Vec<&AlterationSet> = report.entries.iter().map(|e| &e.set).collect();
        assert_eq!(report.graph, UnionGraph::build(&report.matrix, &sets));
    }

    #[test]
    fn tiny_matrix_gives_empty_report() {
        let a = simulate_null(&[50], &[vec![20]], 1).unwrap();
        let r = analyze(&a, &AnalysisConfig::default(), &Serial).unwrap();
        assert!(r.entries.is_empty() && r.graph.nodes.is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = AnalysisConfig {
            level: 1.5,
            ..AnalysisConfig::default()
        };
        assert!(bad.validate().is_err());
        let k = AnalysisConfig {
            k_max: 1,
            ..AnalysisConfig::default()
        };
        assert!(k.validate().is_err());
    }

    #[test]
    fn graph_of_one_pair() {
        let a = simulate_null(&[30], &[vec![10], vec![12]], 1).unwrap();
        let g = UnionGraph::build(&a, &[&AlterationSet::new([0, 1])]);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, [(0, 1)]);
        assert_eq!(UnionGraph::build(&a, &[]).nodes.len(), 0);
    }
}
