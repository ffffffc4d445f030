//! Report files: ranked sets (TSV), union graph (GraphML), run metadata
//! (JSON) and an optional candidate-pool dump (TSV).

use std::fmt::Write as _;
use std::path::Path;

use anticooc_core::greedy::CandidatePool;
use anticooc_core::pipeline::{AnalysisConfig, Correction, Report, UnionGraph};
use serde::Serialize;

use crate::io::write_file;
use crate::{Error, Result};

pub const SETS_FILE: &str = "significant_sets.tsv";
pub const GRAPH_FILE: &str = "union_graph.graphml";
pub const METADATA_FILE: &str = "metadata.json";
pub const POOL_FILE: &str = "candidate_pool.tsv";

/// `x.xxe±k` from a natural-log value; works below the `f64` range.
pub fn format_ln_sci(ln_value: f64) -> String {
    if ln_value == f64::NEG_INFINITY {
        return "0.00e0".into();
    }
    let direct = ln_value.exp();
    if direct.is_normal() && direct > 1e-300 {
        return format!("{direct:.2e}");
    }
    let log10 = ln_value / std::f64::consts::LN_10;
    let mut exponent = log10.floor();
    let mut mantissa = (100.0 * 10f64.powf(log10 - exponent)).round() / 100.0;
    if mantissa >= 10.0 {
        mantissa /= 10.0;
        exponent += 1.0;
    }
    format!("{mantissa:.2}e{}", exponent as i64)
}

/// Ranked significant sets; adjusted p-values are capped at 1.
pub fn significant_sets_tsv(report: &Report) -> String {
    let mut out = String::from("rank\tcoverage_fraction\tp_raw\tp_adjusted\tmembers\n");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{}\t{:.1}%\t{}\t{}\t{}",
            e.rank,
            100.0 * e.coverage_fraction,
            format_ln_sci(e.ln_p_raw),
            format_ln_sci(e.ln_p_adjusted.min(0.0)),
            e.labels.join(", ")
        );
    }
    out
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Undirected GraphML with `label` and `coverage` node attributes.
pub fn graphml(graph: &UnionGraph) -> String {
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n",
        "  <key id=\"coverage\" for=\"node\" attr.name=\"coverage\" attr.type=\"int\"/>\n",
        "  <graph id=\"union\" edgedefault=\"undirected\">\n",
    ));
    for (i, node) in graph.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <node id=\"n{i}\"><data key=\"label\">{}</data><data key=\"coverage\">{}</data></node>",
            escape_xml(&node.label),
            node.coverage
        );
    }
    for (a, b) in &graph.edges {
        let _ = writeln!(out, "    <edge source=\"n{a}\" target=\"n{b}\"/>");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Candidate pool in insertion order with the search score (`NA` for seeds).
pub fn pool_tsv(report: &Report, pool: &CandidatePool) -> String {
    let mut out = String::from("members\tscore\n");
    for c in pool.entries() {
        let score = c.ln_score.map_or_else(|| "NA".to_string(), format_ln_sci);
        let _ = writeln!(out, "{}\t{score}", report.matrix.labels(&c.set).join(", "));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Greedy,
    PairwiseBaseline,
}

/// What produced a report; serialised into the metadata file.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub config: AnalysisConfig,
    pub mode: Mode,
    pub matrix_path: Option<String>,
    pub groups_path: Option<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    seed: u64,
    config: ConfigMeta,
    inputs: Inputs<'a>,
    summary: SummaryMeta,
}

#[derive(Serialize)]
struct ConfigMeta {
    k_max: usize,
    k_max_used: usize,
    max_iter: usize,
    alpha_weights: f64,
    level: f64,
    correction: &'static str,
    closure_budget: usize,
}

#[derive(Serialize)]
struct Inputs<'a> {
    matrix: Option<&'a str>,
    groups: Option<&'a str>,
}

#[derive(Serialize)]
struct SummaryMeta {
    rows_input: usize,
    rows_after_merge: usize,
    rows_tested: usize,
    samples: u32,
    groups: usize,
    pool_size: usize,
    candidates_tested: usize,
    significant_before_pruning: usize,
    reported: usize,
}

pub fn metadata_json(report: &Report, info: &RunInfo) -> Result<String> {
    let s = &report.summary;
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: info.mode,
        seed: info.config.seed,
        config: ConfigMeta {
            k_max: info.config.k_max,
            k_max_used: s.k_max_used,
            max_iter: info.config.max_iter,
            alpha_weights: info.config.alpha_w,
            level: info.config.level,
            correction: match info.config.correction {
                Correction::Bonferroni => "bonferroni",
                Correction::Bh => "bh",
            },
            closure_budget: info.config.closure_budget,
        },
        inputs: Inputs {
            matrix: info.matrix_path.as_deref(),
            groups: info.groups_path.as_deref(),
        },
        summary: SummaryMeta {
            rows_input: s.rows_input,
            rows_after_merge: s.rows_after_merge,
            rows_tested: s.rows_tested,
            samples: s.samples,
            groups: s.groups,
            pool_size: s.pool_size,
            candidates_tested: s.candidates_tested,
            significant_before_pruning: s.significant_before_pruning,
            reported: report.entries.len(),
        },
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    Ok(text)
}

/// Writes the report files into `dir`, creating it if needed; the pool dump
/// is written only when `dump_pool` is set and the report carries a pool.
pub fn export_report(report: &Report, info: &RunInfo, dir: &Path, dump_pool: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(SETS_FILE), significant_sets_tsv(report).as_bytes())?;
    write_file(&dir.join(GRAPH_FILE), graphml(&report.graph).as_bytes())?;
    write_file(&dir.join(METADATA_FILE), metadata_json(report, info)?.as_bytes())?;
    if let (true, Some(pool)) = (dump_pool, &report.pool) {
        write_file(&dir.join(POOL_FILE), pool_tsv(report, pool).as_bytes())?;
    }
    Ok(())
}
