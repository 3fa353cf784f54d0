//! Report serialization: adjacency JSON/CSV, split-plan JSON, learning-curve
//! CSV, fold summaries, metrics JSON, confusion matrices. Every file opens
//! with a provenance line tying it to the run configuration and the weights
//! content version that produced it.

use std::path::Path;

use agtc_eval::{sma, Fold, FoldResult, LeakageViolation, MetricTrace, SplitPlan, Summary, SMA_WINDOW};
use agtc_graph::AdjacencyGraph;
use serde::{Deserialize, Serialize};

use crate::IoError;

pub const TRACE_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,lr,sma_val_acc";
pub const SUMMARY_HEADER: &str = "fold,ma_acc,acc,kappa,best_epoch,epochs,stopped_early";

/// Attribution stamped into every output file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub config: String,
    pub weights: String,
}

impl Provenance {
    pub fn new(config: impl Into<String>, weights: impl Into<String>) -> Provenance {
        Provenance { config: config.into(), weights: weights.into() }
    }

    fn comment(&self) -> String {
        format!("# provenance config={} weights={}\n", self.config, self.weights)
    }
}

fn write_text(path: impl AsRef<Path>, text: &str) -> Result<(), IoError> {
    std::fs::write(&path, text).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

// ---- adjacency ----

#[derive(Serialize, Deserialize)]
struct AdjacencyJson {
    labels: Vec<String>,
    edges: Vec<(usize, usize)>,
}

pub fn write_adjacency_json(g: &AdjacencyGraph, path: impl AsRef<Path>) -> Result<(), IoError> {
    let doc = AdjacencyJson {
        labels: g.labels().iter().map(|l| l.raw.clone()).collect(),
        edges: g.edges(),
    };
    write_text(path, &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))
}

pub fn write_adjacency_csv(g: &AdjacencyGraph, path: impl AsRef<Path>) -> Result<(), IoError> {
    let c = g.num_channels();
    let mut out = String::from("label");
    for l in g.labels() {
        out.push(',');
        out.push_str(&l.raw);
    }
    out.push('\n');
    for i in 0..c {
        out.push_str(&g.labels()[i].raw);
        for j in 0..c {
            out.push(',');
            out.push(if g.has_edge(i, j) { '1' } else { '0' });
        }
        out.push('\n');
    }
    write_text(path, &out)
}

// ---- split plans ----

#[derive(Serialize, Deserialize)]
pub struct PlanFile {
    pub params_hash: String,
    pub plan: SplitPlan,
}

pub fn write_plan(path: impl AsRef<Path>, plan: &PlanFile) -> Result<(), IoError> {
    write_text(path, &(serde_json::to_string_pretty(plan).expect("serializes") + "\n"))
}

pub fn read_plan(path: impl AsRef<Path>) -> Result<PlanFile, IoError> {
    let text = std::fs::read_to_string(&path).map_err(|e| IoError::File {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::ManifestParse {
        path: path.as_ref().display().to_string(),
        detail: e.to_string(),
    })
}

/// Restrict a plan to one fold (still a valid plan for auditing).
pub fn single_fold(plan: &SplitPlan, fold: usize) -> Option<Fold> {
    plan.folds.get(fold).cloned()
}

// ---- learning curves ----

pub fn trace_csv(trace: &MetricTrace, lr_history: &[f64], provenance: &Provenance) -> String {
    let smoothed = sma(&trace.val_acc, SMA_WINDOW);
    let mut out = provenance.comment();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (e, sm) in smoothed.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            e + 1,
            trace.train_loss[e],
            trace.train_acc[e],
            trace.val_loss[e],
            trace.val_acc[e],
            lr_history.get(e).copied().unwrap_or(f64::NAN),
            sm,
        ));
    }
    out
}

pub fn write_trace_csv(
    path: impl AsRef<Path>,
    trace: &MetricTrace,
    lr_history: &[f64],
    provenance: &Provenance,
) -> Result<(), IoError> {
    write_text(path, &trace_csv(trace, lr_history, provenance))
}

// ---- fold summaries ----

pub struct FoldRow {
    pub result: FoldResult,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

pub fn summary_csv(rows: &[FoldRow], summary: &Summary, provenance: &Provenance) -> String {
    let mut out = provenance.comment();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{},{}\n",
            row.result.fold,
            row.result.ma_acc,
            row.result.acc,
            row.result.kappa,
            row.best_epoch.map(|e| (e + 1).to_string()).unwrap_or_else(|| "initial".into()),
            row.epochs_run,
            row.stopped_early,
        ));
    }
    out.push_str(&format!(
        "mean,{:.6},{:.6},{:.6},,,\n",
        summary.ma_acc.mean, summary.acc.mean, summary.kappa.mean
    ));
    out.push_str(&format!(
        "std,{:.6},{:.6},{:.6},,,\n",
        summary.ma_acc.std, summary.acc.std, summary.kappa.std
    ));
    out
}

pub fn write_summary_csv(
    path: impl AsRef<Path>,
    rows: &[FoldRow],
    summary: &Summary,
    provenance: &Provenance,
) -> Result<(), IoError> {
    write_text(path, &summary_csv(rows, summary, provenance))
}

// ---- evaluation metrics ----

#[derive(Serialize, Deserialize)]
pub struct MetricsJson {
    pub provenance: Provenance,
    pub n: usize,
    pub classes: usize,
    pub acc: f64,
    pub kappa: f64,
    pub kappa_degenerate: bool,
    pub loss: f64,
}

pub fn write_metrics_json(path: impl AsRef<Path>, doc: &MetricsJson) -> Result<(), IoError> {
    write_text(path, &(serde_json::to_string_pretty(doc).expect("serializes") + "\n"))
}

pub fn confusion_csv(matrix: &[Vec<usize>], class_names: &[String], provenance: &Provenance) -> String {
    let mut out = provenance.comment();
    out.push_str("true\\pred");
    for name in class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (r, row) in matrix.iter().enumerate() {
        out.push_str(&class_names[r]);
        for &v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_confusion_csv(
    path: impl AsRef<Path>,
    matrix: &[Vec<usize>],
    class_names: &[String],
    provenance: &Provenance,
) -> Result<(), IoError> {
    write_text(path, &confusion_csv(matrix, class_names, provenance))
}

// ---- leakage reports ----

pub fn leakage_report(violations: &[LeakageViolation], plan: &SplitPlan) -> String {
    if violations.is_empty() {
        return "leakage audit: clean (0 violations)\n".to_string();
    }
    let mut out = format!("leakage audit: {} violation(s)\n", violations.len());
    for v in violations {
        let t = &plan.provenance[v.train_trial];
        let w = &plan.provenance[v.val_trial];
        out.push_str(&format!(
            "  fold {}: train trial {} [{}..{}) overlaps val trial {} [{}..{}) by {} samples (subject {}, session {}, run {})\n",
            v.fold,
            v.train_trial,
            t.window_span.0,
            t.window_span.1,
            v.val_trial,
            w.window_span.0,
            w.window_span.1,
            v.overlap_samples,
            t.subject,
            t.session,
            t.run,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use agtc_graph::build_adjacency;

    fn prov() -> Provenance {
        Provenance::new("deadbeefdeadbeef", "none")
    }

    #[test]
    fn trace_csv_schema_is_pinned() {
        let mut trace = MetricTrace::default();
        trace.push(1.5, 0.25, 1.4, 0.3);
        trace.push(1.2, 0.5, 1.1, 0.6);
        let text = trace_csv(&trace, &[1e-3, 1e-3], &prov());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# provenance config=deadbeefdeadbeef weights=none");
        assert_eq!(lines[1], TRACE_HEADER);
        assert_eq!(lines[2], "1,1.500000,0.250000,1.400000,0.300000,0.001000,0.300000");
        assert_eq!(lines[3], "2,1.200000,0.500000,1.100000,0.600000,0.001000,0.450000");
    }

    #[test]
    fn summary_csv_schema_is_pinned() {
        let rows = vec![FoldRow {
            result: FoldResult {
                fold: 0,
                trace: None,
                acc: 0.75,
                ma_acc: 0.7,
                kappa: 0.6,
                confusion: vec![],
            },
            best_epoch: Some(4),
            epochs_run: 10,
            stopped_early: false,
        }];
        let summary = agtc_eval::aggregate_report(&[rows[0].result.clone()], None).unwrap();
        let text = summary_csv(&rows, &summary, &prov());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], SUMMARY_HEADER);
        assert_eq!(lines[2], "0,0.700000,0.750000,0.600000,5,10,false");
        assert_eq!(lines[3], "mean,0.700000,0.750000,0.600000,,,");
        assert_eq!(lines[4], "std,0.000000,0.000000,0.000000,,,");
    }

    #[test]
    fn adjacency_json_matches_declared_shape() {
        let g = build_adjacency(&["C1", "Cz", "C2"]).unwrap();
        let dir = std::env::temp_dir().join(format!("agtc-fmt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("adj.json");
        write_adjacency_json(&g, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["labels"].as_array().unwrap().len(), 3);
        assert_eq!(doc["edges"].as_array().unwrap().len(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn confusion_csv_layout() {
        let m = vec![vec![3, 1], vec![0, 4]];
        let names = vec!["left".to_string(), "right".to_string()];
        let text = confusion_csv(&m, &names, &prov());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "true\\pred,left,right");
        assert_eq!(lines[2], "left,3,1");
        assert_eq!(lines[3], "right,0,4");
    }
}
