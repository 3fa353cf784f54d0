//! The `agtc` command line: preprocess -> graph -> split -> train/finetune
//! -> eval/infer, plus a standalone leakage audit.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use agtc_eval::{
    aggregate_report, cohens_kappa, confusion_matrix, leakage_audit, make_splits, FoldResult,
    Framework, SplitOptions, SplitPlan,
};
use agtc_graph::{build_adjacency, AdjacencyGraph};
use agtc_model::{load_weights, read_weights_config, save_weights, ModelState};
use agtc_signal::{extract_epochs, preprocess, EpochedTrial, Event, RawRecording, TrialOrigin, Unit};
use agtc_tensor::{RngStream, Tensor};
use agtc_train::{evaluate_dataset, fine_tune, train, LossKind, TrainError, TrainReport};

use crate::container::{read_container, write_container, TrialContainer};
use crate::edf::read_edf_file;
use crate::formats::{
    leakage_report, read_plan, single_fold, write_adjacency_csv, write_adjacency_json,
    write_confusion_csv, write_metrics_json, write_plan, write_summary_csv, write_trace_csv,
    FoldRow, MetricsJson, PlanFile, Provenance,
};
use crate::manifest::{resolve, DatasetManifest, RecordingEntry};
use crate::runconfig::{content_hash, RunConfig};
use crate::IoError;

#[derive(Parser)]
#[command(name = "agtc", version, about = "Graph-temporal EEG classification engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Preprocess raw recordings (EDF or trial containers) into
    /// model-ready epoch containers plus a trials manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Resample recordings above 200 Hz to this rate.
        #[arg(long)]
        target_fs: Option<f64>,
        /// Cue-relative window start in seconds.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t_start: f64,
        /// Cue-relative window end in seconds (required for EDF inputs;
        /// containers default to their full length).
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Build the electrode adjacency graph from a montage file
    /// (one 10-20 label per line); writes JSON edges and a dense 0/1 CSV.
    Graph {
        #[arg(long)]
        montage: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Generate an audited split plan for a training-evaluation framework.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// SN, SL-DS, SL-RS, SM-DS, SM-RS or SL-DS-FT.
        #[arg(long)]
        framework: String,
        /// Fold count (LMSO / the RS variants).
        #[arg(long)]
        k: Option<usize>,
        /// Restrict subject-level frameworks to one subject.
        #[arg(long)]
        subject: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per fold as described by a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fine-tune a saved base checkpoint per fold (SL-DS-FT).
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        base: PathBuf,
    },
    /// Evaluate a checkpoint on every trial in a manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        montage: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print per-class probabilities for one trial container.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        montage: PathBuf,
    },
    /// Audit a split plan for train/validation leakage.
    Audit {
        #[arg(long)]
        plan: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendering but normalize the exit code contract
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { 0 } else { 1 };
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Graph(#[from] agtc_graph::GraphError),
    #[error(transparent)]
    Signal(#[from] agtc_signal::SignalError),
    #[error(transparent)]
    Model(#[from] agtc_model::ModelError),
    #[error(transparent)]
    Eval(#[from] agtc_eval::EvalError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Usage(String),
}

fn exit_code_for(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => 1,
        CliError::Train(TrainError::NumericFailure { .. }) => 3,
        _ => 2,
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, CliError> {
    match cmd {
        Cmd::Preprocess { manifest, out, target_fs, t_start, t_end } => {
            cmd_preprocess(&manifest, &out, target_fs, t_start, t_end)
        }
        Cmd::Graph { montage, out_prefix } => cmd_graph(&montage, &out_prefix),
        Cmd::Split { manifest, framework, k, subject, seed, out } => {
            cmd_split(&manifest, &framework, k, subject, seed, &out)
        }
        Cmd::Train { config } => cmd_train(&config, None),
        Cmd::Finetune { config, base } => cmd_train(&config, Some(&base)),
        Cmd::Eval { checkpoint, manifest, montage, out_dir } => {
            cmd_eval(&checkpoint, &manifest, &montage, &out_dir)
        }
        Cmd::Infer { checkpoint, input, montage } => cmd_infer(&checkpoint, &input, &montage),
        Cmd::Audit { plan } => cmd_audit(&plan),
    }
}

fn read_montage(path: &Path) -> Result<AdjacencyGraph, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File {
        path: path.display().to_string(),
        source: e,
    })?;
    let labels: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .collect();
    Ok(build_adjacency(&labels)?)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Io(IoError::File { path: dir.display().to_string(), source: e })
    })
}

// ---- preprocess ----

fn cmd_preprocess(
    manifest_path: &Path,
    out: &Path,
    target_fs: Option<f64>,
    t_start: f64,
    t_end: Option<f64>,
) -> Result<i32, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    ensure_dir(out)?;

    let mut out_entries: Vec<RecordingEntry> = Vec::new();
    let mut out_fs = None;
    let mut skipped_total = 0usize;
    let mut trial_idx = 0usize;

    for entry in &manifest.trials {
        let src = resolve(manifest_path, &entry.file);
        let origin = TrialOrigin {
            subject_id: entry.subject.clone(),
            session_id: entry.session.clone(),
            run_id: entry.run.clone(),
        };
        let is_edf = src.extension().map(|e| e.eq_ignore_ascii_case("edf")).unwrap_or(false);

        let (recording, label_map): (RawRecording, BTreeMap<String, usize>) = if is_edf {
            if entry.label_map.is_empty() {
                return Err(CliError::Usage(format!(
                    "recording '{}' has no label_map; EDF events cannot be classified",
                    entry.file
                )));
            }
            (read_edf_file(&src)?.to_raw_recording()?, entry.label_map.clone())
        } else {
            let container = read_container(&src)?;
            let label = entry.label.unwrap_or(container.label);
            let channels = if manifest.channels.len() == container.data.len() {
                manifest.channels.clone()
            } else {
                (0..container.data.len()).map(|i| format!("ch{i}")).collect()
            };
            let rec = RawRecording {
                channel_labels: channels,
                data: container.data,
                sampling_rate: container.sampling_rate,
                unit: Unit::Microvolts,
                events: vec![Event { onset_sample: 0, code: "trial".into() }],
            };
            let mut map = BTreeMap::new();
            map.insert("trial".to_string(), label);
            (rec, map)
        };

        let processed = preprocess(&recording, target_fs)?;
        let window_end = t_end.unwrap_or_else(|| {
            processed.data.first().map(|r| r.len()).unwrap_or(0) as f64 / processed.sampling_rate
        });
        if is_edf && t_end.is_none() {
            return Err(CliError::Usage(
                "--t-end is required when epoching EDF recordings".into(),
            ));
        }
        let extraction = extract_epochs(&processed, t_start, window_end, &label_map, &origin)?;
        for skip in &extraction.skipped {
            eprintln!(
                "warning: {}: event '{}' at sample {} skipped ({})",
                entry.file, skip.code, skip.onset_sample, skip.reason
            );
        }
        skipped_total += extraction.skipped.len();

        for trial in extraction.trials {
            let file = format!("trial_{trial_idx:05}.eegt");
            write_container(
                out.join(&file),
                &TrialContainer {
                    sampling_rate: trial.sampling_rate,
                    label: trial.label,
                    data: trial.data.clone(),
                },
            )?;
            out_fs = Some(trial.sampling_rate);
            out_entries.push(RecordingEntry {
                file,
                subject: trial.subject_id.clone(),
                session: trial.session_id.clone(),
                run: trial.run_id.clone(),
                label_map: BTreeMap::new(),
                label: Some(trial.label),
                window_span: Some(trial.window_span),
            });
            trial_idx += 1;
        }
    }

    let out_manifest = DatasetManifest {
        dataset: manifest.dataset.clone(),
        classes: manifest.classes.clone(),
        sampling_rate: out_fs,
        channels: manifest.channels.clone(),
        subjects: manifest.subjects.clone(),
        trials: out_entries,
    };
    out_manifest.save(out.join("trials.json"))?;
    println!(
        "preprocessed {trial_idx} trial(s) into {} ({skipped_total} skipped)",
        out.display()
    );
    Ok(0)
}

// ---- graph ----

fn cmd_graph(montage: &Path, out_prefix: &Path) -> Result<i32, CliError> {
    let graph = read_montage(montage)?;
    if let Some(dir) = out_prefix.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    let json = out_prefix.with_extension("json");
    let csv = out_prefix.with_extension("csv");
    write_adjacency_json(&graph, &json)?;
    write_adjacency_csv(&graph, &csv)?;
    let hist = agtc_graph::degree_histogram(&graph);
    println!(
        "graph: {} channels, {} edges, {} connected component(s) -> {}, {}",
        graph.num_channels(),
        graph.edges().len(),
        hist.connected_components,
        json.display(),
        csv.display()
    );
    Ok(0)
}

// ---- split ----

fn cmd_split(
    manifest_path: &Path,
    framework: &str,
    k: Option<usize>,
    subject: Option<String>,
    seed: u64,
    out: &Path,
) -> Result<i32, CliError> {
    let framework = Framework::parse(framework)
        .ok_or_else(|| CliError::Usage(format!("unknown framework '{framework}'")))?;
    let manifest = DatasetManifest::load(manifest_path)?;
    let trials = manifest.load_trials(manifest_path)?;
    let meta = manifest.trial_meta(&trials);
    let opts = SplitOptions { k, subject, seed };
    let plan = make_splits(framework, &meta, &opts)?;

    let violations = leakage_audit(&plan);
    if !violations.is_empty() {
        eprint!("{}", leakage_report(&violations, &plan));
        eprintln!("refusing to write a leaking plan");
        return Ok(2);
    }
    let params_hash = content_hash(
        format!(
            "split framework={} k={:?} subject={:?} seed={seed}",
            plan.framework.as_str(),
            opts.k,
            opts.subject
        )
        .as_bytes(),
    );
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write_plan(out, &PlanFile { params_hash, plan: plan.clone() })?;
    println!("split: {} fold(s) under {} -> {}", plan.folds.len(), plan.framework.as_str(), out.display());
    Ok(0)
}

// ---- train / finetune ----

fn subset(trials: &[EpochedTrial], ids: &[usize]) -> Vec<EpochedTrial> {
    ids.iter().map(|&i| trials[i].clone()).collect()
}

fn cmd_train(config_path: &Path, base: Option<&Path>) -> Result<i32, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let manifest_rel = cfg
        .manifest
        .as_deref()
        .ok_or_else(|| CliError::Usage("[data] manifest is required".into()))?;
    let manifest_path = PathBuf::from(manifest_rel);
    let manifest = DatasetManifest::load(&manifest_path)?;
    let trials = manifest.load_trials(&manifest_path)?;
    if trials.is_empty() {
        return Err(CliError::Usage("manifest lists no trials".into()));
    }
    let meta = manifest.trial_meta(&trials);

    let plan: SplitPlan = match (&cfg.plan, cfg.framework) {
        (Some(p), _) => read_plan(Path::new(p))?.plan,
        (None, Some(fw)) => {
            let opts = SplitOptions { k: cfg.k, subject: cfg.subject.clone(), seed: cfg.seed };
            let plan = make_splits(fw, &meta, &opts)?;
            let violations = leakage_audit(&plan);
            if !violations.is_empty() {
                eprint!("{}", leakage_report(&violations, &plan));
                return Err(CliError::Usage("generated plan leaks; aborting".into()));
            }
            plan
        }
        (None, None) => {
            return Err(CliError::Usage(
                "[split] needs either a plan file or a framework".into(),
            ))
        }
    };

    let graph = match &cfg.montage {
        Some(m) => read_montage(Path::new(m))?,
        None if !manifest.channels.is_empty() => build_adjacency(&manifest.channels)?,
        None => {
            return Err(CliError::Usage(
                "[data] montage (or manifest channels) is required to build the adjacency".into(),
            ))
        }
    };

    let (channels, samples) = (trials[0].num_channels(), trials[0].num_samples());
    let model_cfg = cfg.model_config(channels, samples, manifest.classes.len())?;
    let tag = if base.is_some() { "SL-DS-FT" } else { plan.framework.as_str() };
    let mut hyper = cfg.hyper(tag);
    if base.is_some() && cfg.learning_rate.is_none() {
        hyper.learning_rate = agtc_train::FINE_TUNE_LR;
    }

    let out_dir = PathBuf::from(&cfg.output_dir);
    ensure_dir(&out_dir)?;

    let folds: Vec<usize> = match cfg.fold {
        Some(f) if f < plan.folds.len() => vec![f],
        Some(f) => {
            return Err(CliError::Usage(format!(
                "fold {f} out of range; the plan has {} folds",
                plan.folds.len()
            )))
        }
        None => (0..plan.folds.len()).collect(),
    };

    let root_rng = RngStream::new(cfg.seed);
    let mut rows: Vec<FoldRow> = Vec::new();
    let mut results: Vec<FoldResult> = Vec::new();
    for &fold_idx in &folds {
        let fold = single_fold(&plan, fold_idx).expect("validated above");
        let train_set = subset(&trials, &fold.train);
        let val_set = subset(&trials, &fold.val);

        let report: TrainReport = match base {
            None => {
                let mut init_rng = root_rng.substream(2 * fold_idx as u64);
                let mut model = ModelState::new(model_cfg.clone(), graph.clone(), &mut init_rng)?;
                train(
                    &mut model,
                    &train_set,
                    &val_set,
                    &hyper,
                    &root_rng.substream(2 * fold_idx as u64 + 1),
                )?
            }
            Some(ckpt) => fine_tune(
                ckpt,
                graph.clone(),
                &train_set,
                &val_set,
                &hyper,
                &root_rng.substream(2 * fold_idx as u64 + 1),
            )?,
        };

        let ckpt_path = out_dir.join(format!("fold_{fold_idx}.agtc"));
        save_weights(&report.best_model, &ckpt_path)?;
        let weights_hash = content_hash(&std::fs::read(&ckpt_path).map_err(|e| {
            IoError::File { path: ckpt_path.display().to_string(), source: e }
        })?);
        let provenance = Provenance::new(cfg.hash(), weights_hash);

        write_trace_csv(
            out_dir.join(format!("fold_{fold_idx}_trace.csv")),
            &report.trace,
            &report.lr_history,
            &provenance,
        )?;

        // final metrics of the checkpointed model on the validation side
        let (_, acc, preds) =
            evaluate_dataset(&report.best_model, &val_set, hyper.batch_size, hyper.loss)?;
        let labels: Vec<usize> = val_set.iter().map(|t| t.label).collect();
        let kappa = cohens_kappa(&preds, &labels, manifest.classes.len())?;
        let confusion = confusion_matrix(&preds, &labels, manifest.classes.len())?;
        println!(
            "fold {fold_idx}: {} epochs, best val acc {:.4} (epoch {}), ma acc {:.4}, kappa {:.4}{}",
            report.trace.len(),
            report.best_val_acc,
            report.best_epoch.map(|e| (e + 1).to_string()).unwrap_or_else(|| "initial".into()),
            report.best_sma_val_acc,
            kappa.value,
            if report.stopped_early { " [early stop]" } else { "" }
        );
        let result = FoldResult {
            fold: fold_idx,
            trace: Some(report.trace.clone()),
            acc,
            ma_acc: report.best_sma_val_acc,
            kappa: kappa.value,
            confusion,
        };
        results.push(result.clone());
        rows.push(FoldRow {
            result,
            best_epoch: report.best_epoch,
            epochs_run: report.trace.len(),
            stopped_early: report.stopped_early,
        });
    }

    let summary = aggregate_report(&results, None)?;
    let provenance = Provenance::new(cfg.hash(), "per-fold");
    write_summary_csv(out_dir.join("summary.csv"), &rows, &summary, &provenance)?;
    println!(
        "summary over {} fold(s): ma_acc {:.4} +/- {:.4}, acc {:.4} +/- {:.4}, kappa {:.4} +/- {:.4}",
        summary.folds,
        summary.ma_acc.mean,
        summary.ma_acc.std,
        summary.acc.mean,
        summary.acc.std,
        summary.kappa.mean,
        summary.kappa.std
    );
    Ok(0)
}

// ---- eval ----

fn cmd_eval(
    checkpoint: &Path,
    manifest_path: &Path,
    montage: &Path,
    out_dir: &Path,
) -> Result<i32, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let trials = manifest.load_trials(manifest_path)?;
    if trials.is_empty() {
        return Err(CliError::Usage("manifest lists no trials".into()));
    }
    let graph = read_montage(montage)?;
    let model_cfg = read_weights_config(checkpoint)?;
    let model = load_weights(checkpoint, model_cfg.clone(), graph)?;

    let loss_kind = if model_cfg.num_classes == 2 { LossKind::Bce } else { LossKind::Cce };
    let (loss, acc, preds) = evaluate_dataset(&model, &trials, 32, loss_kind)?;
    let labels: Vec<usize> = trials.iter().map(|t| t.label).collect();
    let kappa = cohens_kappa(&preds, &labels, manifest.classes.len())?;
    let confusion = confusion_matrix(&preds, &labels, manifest.classes.len())?;

    ensure_dir(out_dir)?;
    let weights_hash = content_hash(&std::fs::read(checkpoint).map_err(|e| IoError::File {
        path: checkpoint.display().to_string(),
        source: e,
    })?);
    let provenance = Provenance::new("none", weights_hash);
    write_metrics_json(
        out_dir.join("metrics.json"),
        &MetricsJson {
            provenance: provenance.clone(),
            n: trials.len(),
            classes: manifest.classes.len(),
            acc,
            kappa: kappa.value,
            kappa_degenerate: kappa.degenerate_marginals,
            loss,
        },
    )?;
    write_confusion_csv(out_dir.join("confusion.csv"), &confusion, &manifest.classes, &provenance)?;
    println!("eval: n={} acc {:.4} kappa {:.4} loss {:.4}", trials.len(), acc, kappa.value, loss);
    Ok(0)
}

// ---- infer ----

fn cmd_infer(checkpoint: &Path, input: &Path, montage: &Path) -> Result<i32, CliError> {
    let graph = read_montage(montage)?;
    let model_cfg = read_weights_config(checkpoint)?;
    let model = load_weights(checkpoint, model_cfg, graph)?;
    let container = read_container(input)?;
    let (c, t) = (container.data.len(), container.data.first().map(|r| r.len()).unwrap_or(0));
    let mut flat = Vec::with_capacity(c * t);
    for row in &container.data {
        flat.extend_from_slice(row);
    }
    let batch = Tensor::new(&[1, c, t, 1], flat);
    let probs = model.infer(&batch)?;
    for k in 0..probs.shape()[1] {
        println!("{k} {:.6}", probs.at(&[0, k]));
    }
    Ok(0)
}

// ---- audit ----

fn cmd_audit(plan_path: &Path) -> Result<i32, CliError> {
    let plan = read_plan(plan_path)?.plan;
    let violations = leakage_audit(&plan);
    print!("{}", leakage_report(&violations, &plan));
    Ok(if violations.is_empty() { 0 } else { 2 })
}
