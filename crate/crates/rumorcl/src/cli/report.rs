//! Report rendering and atomic output files.
//!
//! Every command writes both a human-readable text report and a CSV. CSV
//! content is a pure function of the inputs and the seed — measured wall
//! times appear only in the text reports, so re-running a command with the
//! same seed reproduces every CSV byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::ablation::CellResult;
use crate::augment::{AugmentPlanner, AugmentedView};
use crate::centrality::{CentralityScores, PrincipleReport};
use crate::gradcheck::GradCheckReport;
use crate::stats::{ClaimStats, CorpusStats};
use crate::train::{EpochLog, EvalMetrics, MetricSummary};

/// Collects files written by one command; failed commands discard their
/// partial outputs.
pub struct OutputSession {
    dir: PathBuf,
    created: Vec<PathBuf>,
}

impl OutputSession {
    pub fn new(dir: &Path) -> io::Result<OutputSession> {
        fs::create_dir_all(dir)?;
        Ok(OutputSession {
            dir: dir.to_path_buf(),
            created: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Atomic write: a temp file in the same directory, then a rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.created.push(path.clone());
        Ok(path)
    }

    /// Removes everything written so far.
    pub fn discard(&mut self) {
        for path in self.created.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

pub fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

pub fn f(value: f64) -> String {
    format!("{value:.6}")
}

pub fn stats_csv(stats: &CorpusStats) -> String {
    let mut out = String::from("statistic,value,share_percent\n");
    for (name, value, share) in stats.rows() {
        let share = share.map(|s| format!("{s:.1}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", csv_field(&name), f(value), share);
    }
    out
}

pub fn stats_text(stats: &CorpusStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "corpus statistics ({} claims)", stats.claims);
    for (name, value, share) in stats.rows() {
        match share {
            Some(s) => {
                let _ = writeln!(out, "  {name:<30} {value:>10.1} ({s:.1}%)");
            }
            None => {
                let _ = writeln!(out, "  {name:<30} {value:>10.1}");
            }
        }
    }
    out
}

pub fn centrality_csv(
    claim_id: &str,
    levels: &[usize],
    raw: &CentralityScores,
    adjusted: &CentralityScores,
) -> String {
    let mut out = String::from("claim,node,level,raw,root_adjusted\n");
    for v in 0..raw.values.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(claim_id),
            v,
            levels[v],
            f(raw.values[v]),
            f(adjusted.values[v])
        );
    }
    out
}

pub fn centrality_text(
    claim_id: &str,
    raw: &CentralityScores,
    adjusted: &CentralityScores,
    report: Option<&PrincipleReport>,
    seconds: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "claim {} — {} on the {} view ({:.6} s)",
        claim_id, raw.measure.kind, raw.measure.direction, seconds
    );
    let _ = writeln!(out, "  node       raw   root-adjusted");
    for v in 0..raw.values.len() {
        let _ = writeln!(out, "  {v:<5} {:>9.5} {:>9.5}", raw.values[v], adjusted.values[v]);
    }
    match report {
        Some(report) => {
            let _ = writeln!(out, "{report}");
        }
        None => {
            let _ = writeln!(out, "principle checks need at least 2 nodes");
        }
    }
    out
}

pub fn augment_csv(planner: &AugmentPlanner) -> String {
    let mut out = String::from("kind,item,importance,log_importance,probability\n");
    if let Some(plan) = planner.node_plan() {
        for v in 0..plan.probs.len() {
            let _ = writeln!(
                out,
                "node_drop,{v},{},{},{}",
                f(plan.importance[v]),
                f(plan.log_importance[v]),
                f(plan.probs[v])
            );
        }
    }
    if let Some(plan) = planner.mask_plan() {
        for v in 0..plan.probs.len() {
            let _ = writeln!(
                out,
                "attr_mask,{v},{},{},{}",
                f(plan.importance[v]),
                f(plan.log_importance[v]),
                f(plan.probs[v])
            );
        }
    }
    if let Some(plan) = planner.edge_plan() {
        for (i, &(p, c)) in plan.edges.iter().enumerate() {
            let _ = writeln!(
                out,
                "edge_drop,{p}->{c},{},{},{}",
                f(plan.importance[i]),
                f(plan.log_importance[i]),
                f(plan.probs[i])
            );
        }
    }
    out
}

fn view_text(label: &str, view: &AugmentedView) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{label}:");
    let kept: Vec<String> = view.kept.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "  kept nodes   [{}]", kept.join(", "));
    let masked: Vec<String> = view.masked.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "  masked nodes [{}]", masked.join(", "));
    let edges: Vec<String> = view
        .edges
        .iter()
        .map(|&(p, c)| format!("{}->{}", view.kept[p], view.kept[c]))
        .collect();
    let _ = writeln!(out, "  edges        [{}]", edges.join(", "));
    out
}

pub fn augment_text(
    claim_id: &str,
    seed: u64,
    planner: &AugmentPlanner,
    views: &(AugmentedView, AugmentedView),
) -> String {
    let cfg = planner.config();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "claim {} — operators {}+{}, seed {seed}",
        claim_id, cfg.operators.0, cfg.operators.1
    );
    if let Some(plan) = planner.node_plan() {
        let probs: Vec<String> = plan.probs.iter().map(|p| format!("{p:.4}")).collect();
        let _ = writeln!(out, "node-drop probabilities  [{}]", probs.join(", "));
    }
    if let Some(plan) = planner.mask_plan() {
        let probs: Vec<String> = plan.probs.iter().map(|p| format!("{p:.4}")).collect();
        let _ = writeln!(out, "attr-mask probabilities  [{}]", probs.join(", "));
    }
    if let Some(plan) = planner.edge_plan() {
        let probs: Vec<String> = plan
            .edges
            .iter()
            .zip(&plan.probs)
            .map(|(&(p, c), prob)| format!("{p}->{c}: {prob:.4}"))
            .collect();
        let _ = writeln!(out, "edge-drop probabilities  [{}]", probs.join(", "));
    }
    out.push_str(&view_text("view 1", &views.0));
    out.push_str(&view_text("view 2", &views.1));
    out
}

pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,l_sup,l_unsup,total,val_accuracy\n");
    for row in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.epoch,
            f(row.loss.l_sup),
            f(row.loss.l_unsup),
            f(row.loss.total),
            f(row.val_accuracy)
        );
    }
    out
}

pub fn metrics_csv(runs: &[(String, EvalMetrics)], summary: Option<MetricSummary>) -> String {
    let classes = runs.first().map_or(0, |(_, m)| m.per_class.len());
    let mut out = String::from("run,accuracy");
    for c in 0..classes {
        let _ = write!(out, ",class{c}_precision,class{c}_recall,class{c}_f1");
    }
    out.push('\n');
    for (name, metrics) in runs {
        let _ = write!(out, "{},{}", csv_field(name), f(metrics.accuracy));
        for class in &metrics.per_class {
            let _ = write!(out, ",{},{},{}", f(class.precision), f(class.recall), f(class.f1));
        }
        out.push('\n');
    }
    if let Some(summary) = summary {
        let _ = writeln!(
            out,
            "mean±std,{}±{}{}",
            f(summary.mean),
            f(summary.std),
            ",".repeat(classes * 3)
        );
    }
    out
}

pub fn metrics_text(runs: &[(String, EvalMetrics)], summary: Option<MetricSummary>) -> String {
    let mut out = String::new();
    for (name, metrics) in runs {
        let _ = writeln!(out, "{name}: accuracy {:.4}", metrics.accuracy);
        for (c, class) in metrics.per_class.iter().enumerate() {
            let _ = writeln!(
                out,
                "  class {c}: precision {:.4}  recall {:.4}  f1 {:.4}",
                class.precision, class.recall, class.f1
            );
        }
    }
    if let Some(summary) = summary {
        let _ = writeln!(out, "accuracy over runs: {:.4} ± {:.4}", summary.mean, summary.std);
    }
    out
}

pub fn ablate_csv(axes: &[String], cells: &[CellResult]) -> String {
    let mut out = String::new();
    for axis in axes {
        let _ = write!(out, "{},", csv_field(axis));
    }
    out.push_str("accuracy_mean,accuracy_std\n");
    for cell in cells {
        for (_, value) in &cell.settings {
            let _ = write!(out, "{},", csv_field(value));
        }
        let _ = writeln!(out, "{},{}", f(cell.accuracy.mean), f(cell.accuracy.std));
    }
    out
}

pub fn ablate_text(cells: &[CellResult]) -> String {
    let mut out = String::new();
    for cell in cells {
        let settings: Vec<String> = cell
            .settings
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = write!(
            out,
            "{:<50} accuracy {:.4} ± {:.4}",
            settings.join(" "),
            cell.accuracy.mean,
            cell.accuracy.std
        );
        if let Some(seconds) = cell.centrality_seconds {
            let _ = write!(out, "  ({:.6} s/tree centrality)", seconds);
        }
        out.push('\n');
        let per_split: Vec<String> = cell.per_split.iter().map(|a| format!("{a:.4}")).collect();
        let _ = writeln!(out, "    per split: [{}]", per_split.join(", "));
    }
    out
}

pub fn truth_csv(claim_ids: &[String], truth: &[ClaimStats]) -> String {
    let mut out =
        String::from("claim,replies,level1,level2,deeper,responded_level1\n");
    for (id, stats) in claim_ids.iter().zip(truth) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(id),
            stats.replies,
            stats.level1,
            stats.level2,
            stats.deeper,
            stats.responded_level1
        );
    }
    out
}

pub fn gradcheck_csv(report: &GradCheckReport) -> String {
    let mut out = String::from("tensor,parameters,max_rel_error\n");
    for entry in &report.entries {
        let _ = writeln!(
            out,
            "{},{},{:e}",
            csv_field(&entry.tensor),
            entry.checked,
            entry.max_rel_error
        );
    }
    out
}

pub fn gradcheck_text(report: &GradCheckReport, tolerance: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "finite-difference check: {} graphs, step {:e}",
        report.graphs, report.step
    );
    for entry in &report.entries {
        let _ = writeln!(
            out,
            "  {:<16} {:>5} params  max rel error {:.3e}",
            entry.tensor, entry.checked, entry.max_rel_error
        );
    }
    let verdict = if report.passes(tolerance) { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "worst {:.3e} vs tolerance {:.0e}: {verdict}",
        report.worst, tolerance
    );
    out
}
