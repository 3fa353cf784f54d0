//! End-to-end runs of the `agtc` binary on synthetic data, including the
//! byte-identical-reruns determinism contract.

use std::path::{Path, PathBuf};
use std::process::Command;

use agtc_io::container::{write_container, TrialContainer};
use agtc_io::edf::{write_edf, EdfAnnotation, EdfSignalSpec, EdfWriteSpec};

fn agtc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agtc"))
}

fn tmp(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agtc-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_montage(dir: &Path) -> PathBuf {
    let path = dir.join("montage.txt");
    std::fs::write(&path, "C1\nCz\nC2\nC4\n").unwrap();
    path
}

/// One synthetic EDF per subject: 4 channels at 250 Hz, 8 cue annotations
/// alternating T1/T2, class-dependent sinusoid amplitudes.
fn write_subject_edf(dir: &Path, subject: usize) {
    let fs = 250usize;
    let records = 18;
    let n = fs * records;
    let mut signals = Vec::new();
    let mut digital = Vec::new();
    for c in 0..4 {
        signals.push(EdfSignalSpec {
            label: ["C1", "Cz", "C2", "C4"][c].to_string(),
            physical_dimension: "uV".into(),
            physical_min: -1000.0,
            physical_max: 1000.0,
            digital_min: -32768,
            digital_max: 32767,
            samples_per_record: fs,
        });
        let row: Vec<i16> = (0..n)
            .map(|i| {
                let t = i as f64 / fs as f64;
                let event = (t as usize).saturating_sub(1) / 2; // which cue window
                let label = event % 2;
                let amp = if (c == 0 && label == 0) || (c == 2 && label == 1) { 600.0 } else { 60.0 };
                let phase = (subject as f64) * 0.31;
                ((amp * (2.0 * std::f64::consts::PI * 9.0 * t + phase).sin()) * 32.767) as i16
            })
            .collect();
        digital.push(row);
    }
    let annotations: Vec<EdfAnnotation> = (0..8)
        .map(|k| EdfAnnotation {
            onset_seconds: 1.0 + 2.0 * k as f64,
            duration_seconds: None,
            label: if k % 2 == 0 { "T1".into() } else { "T2".into() },
        })
        .collect();
    write_edf(
        dir.join(format!("s{subject}.edf")),
        &EdfWriteSpec {
            patient: format!("S{subject}"),
            recording: "synthetic".into(),
            start_date: "01.01.20".into(),
            start_time: "00.00.00".into(),
            record_duration: 1.0,
            signals,
            digital,
            annotations,
        },
    )
    .unwrap();
}

fn write_raw_manifest(dir: &Path, subjects: usize) -> PathBuf {
    let trials: Vec<String> = (0..subjects)
        .map(|s| {
            format!(
                r#"{{"file":"s{s}.edf","subject":"S{s}","session":"sess0","run":"r0","label_map":{{"T1":0,"T2":1}}}}"#
            )
        })
        .collect();
    let manifest = format!(
        r#"{{"dataset":"synthetic","classes":["left","right"],"channels":["C1","Cz","C2","C4"],"trials":[{}]}}"#,
        trials.join(",")
    );
    let path = dir.join("raw.json");
    std::fs::write(&path, manifest).unwrap();
    path
}

const RUN_CFG: &str = "\
[data]
manifest = out/trials.json
montage = montage.txt

[split]
plan = plan.json

[model]
preset = micro

[training]
max_epochs = 3
batch_size = 8
seed = 9
loss = bce
early_stop_patience = 300

[output]
dir = results
";

/// Run the whole chain (preprocess, split, train, eval) inside `dir`.
fn run_pipeline(dir: &Path) {
    for s in 0..3 {
        write_subject_edf(dir, s);
    }
    write_raw_manifest(dir, 3);
    write_montage(dir);

    let st = agtc()
        .current_dir(dir)
        .args([
            "preprocess",
            "--manifest",
            "raw.json",
            "--out",
            "out",
            "--target-fs",
            "125",
            "--t-start",
            "0",
            "--t-end",
            "1.0",
        ])
        .status()
        .unwrap();
    assert!(st.success(), "preprocess failed");

    let st = agtc()
        .current_dir(dir)
        .args([
            "split",
            "--manifest",
            "out/trials.json",
            "--framework",
            "sn",
            "--seed",
            "3",
            "--out",
            "plan.json",
        ])
        .status()
        .unwrap();
    assert!(st.success(), "split failed");

    std::fs::write(dir.join("run.cfg"), RUN_CFG).unwrap();
    let st = agtc().current_dir(dir).args(["train", "--config", "run.cfg"]).status().unwrap();
    assert!(st.success(), "train failed");

    let st = agtc()
        .current_dir(dir)
        .args([
            "eval",
            "--checkpoint",
            "results/fold_0.agtc",
            "--manifest",
            "out/trials.json",
            "--montage",
            "montage.txt",
            "--out-dir",
            "evaluation",
        ])
        .status()
        .unwrap();
    assert!(st.success(), "eval failed");
}

#[test]
fn full_pipeline_runs_and_is_byte_deterministic() {
    let a = tmp("det-a");
    let b = tmp("det-b");
    run_pipeline(&a);
    run_pipeline(&b);

    // the preprocessed trial count: 3 subjects x 8 cues
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("out/trials.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 24);
    // downsampled epochs: 1.0 s at 125 Hz
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["plan"]["folds"].as_array().unwrap().len(), 3);
    assert_eq!(
        plan["plan"]["provenance"][0]["window_span"][1].as_u64().unwrap()
            - plan["plan"]["provenance"][0]["window_span"][0].as_u64().unwrap(),
        125
    );

    for rel in [
        "out/trials.json",
        "plan.json",
        "results/fold_0_trace.csv",
        "results/fold_1_trace.csv",
        "results/fold_2_trace.csv",
        "results/summary.csv",
        "evaluation/metrics.json",
        "evaluation/confusion.csv",
    ] {
        let x = std::fs::read(a.join(rel)).unwrap_or_else(|_| panic!("{rel} missing in run A"));
        let y = std::fs::read(b.join(rel)).unwrap_or_else(|_| panic!("{rel} missing in run B"));
        assert_eq!(x, y, "{rel} differs between identically-seeded runs");
    }

    // trace CSV carries the pinned schema
    let trace = std::fs::read_to_string(a.join("results/fold_0_trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# provenance config="));
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,train_acc,val_loss,val_acc,lr,sma_val_acc");

    std::fs::remove_dir_all(&a).ok();
    std::fs::remove_dir_all(&b).ok();
}

#[test]
fn graph_subcommand_emits_edges_and_connectivity() {
    let dir = tmp("graph");
    let montage_path = dir.join("bci22.txt");
    std::fs::write(
        &montage_path,
        agtc_graph::montages::BCICIV2A_22.join("\n") + "\n",
    )
    .unwrap();
    let out = agtc()
        .current_dir(&dir)
        .args(["graph", "--montage", "bci22.txt", "--out-prefix", "adjacency"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 connected component"), "stdout: {stdout}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("adjacency.json")).unwrap())
            .unwrap();
    assert_eq!(doc["labels"].as_array().unwrap().len(), 22);
    assert!(doc["edges"].as_array().unwrap().len() > 21);
    let csv = std::fs::read_to_string(dir.join("adjacency.csv")).unwrap();
    assert!(csv.starts_with("label,Fz,FC3"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn split_loso_on_nine_subjects_yields_nine_folds() {
    let dir = tmp("loso");
    let mut trials = Vec::new();
    for s in 0..9 {
        for k in 0..4 {
            let file = format!("s{s}_t{k}.eegt");
            write_container(
                dir.join(&file),
                &TrialContainer {
                    sampling_rate: 125.0,
                    label: k % 2,
                    data: vec![vec![0.1; 64]; 4],
                },
            )
            .unwrap();
            trials.push(format!(
                r#"{{"file":"{file}","subject":"S{s}","session":"sess0","run":"r0","label":{},"window_span":[{},{}]}}"#,
                k % 2,
                k * 100,
                k * 100 + 64
            ));
        }
    }
    std::fs::write(
        dir.join("trials.json"),
        format!(
            r#"{{"dataset":"x","classes":["a","b"],"trials":[{}]}}"#,
            trials.join(",")
        ),
    )
    .unwrap();
    let st = agtc()
        .current_dir(&dir)
        .args([
            "split",
            "--manifest",
            "trials.json",
            "--framework",
            "sn",
            "--out",
            "plan.json",
        ])
        .status()
        .unwrap();
    assert!(st.success());
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["plan"]["folds"].as_array().unwrap().len(), 9);

    // the audit subcommand certifies the written plan
    let st = agtc().current_dir(&dir).args(["audit", "--plan", "plan.json"]).status().unwrap();
    assert!(st.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn audit_flags_a_leaking_plan_with_exit_2() {
    let dir = tmp("audit");
    let plan = r#"{
  "params_hash": "0",
  "plan": {
    "framework": "SM-RS",
    "folds": [{"train": [0], "val": [1]}],
    "provenance": [
      {"trial_id": 0, "subject": "S0", "session": "s0", "run": "r0", "label": 0, "window_span": [0, 500]},
      {"trial_id": 1, "subject": "S0", "session": "s0", "run": "r0", "label": 1, "window_span": [250, 750]}
    ]
  }
}"#;
    std::fs::write(dir.join("plan.json"), plan).unwrap();
    let out = agtc().current_dir(&dir).args(["audit", "--plan", "plan.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("250 samples"), "stdout: {stdout}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn infer_on_a_zeroed_checkpoint_prints_uniform_probabilities() {
    use agtc_graph::build_adjacency;
    use agtc_model::{save_weights, ModelConfig, ModelState};
    use agtc_tensor::RngStream;

    let dir = tmp("infer");
    write_montage(&dir);
    let adj = build_adjacency(&["C1", "Cz", "C2", "C4"]).unwrap();
    let mut model =
        ModelState::new(ModelConfig::micro(), adj, &mut RngStream::new(1)).unwrap();
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            *v = 0.0;
        }
    }
    save_weights(&model, dir.join("zero.agtc")).unwrap();
    write_container(
        dir.join("trial.eegt"),
        &TrialContainer {
            sampling_rate: 64.0,
            label: 0,
            data: (0..4).map(|c| (0..64).map(|t| ((c + t) % 7) as f64).collect()).collect(),
        },
    )
    .unwrap();

    let out = agtc()
        .current_dir(&dir)
        .args([
            "infer",
            "--checkpoint",
            "zero.agtc",
            "--input",
            "trial.eegt",
            "--montage",
            "montage.txt",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    for (k, line) in lines.iter().enumerate() {
        assert_eq!(*line, format!("{k} 0.250000"), "got {line}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn usage_errors_exit_1_and_bad_data_exits_2() {
    let dir = tmp("codes");
    let out = agtc().current_dir(&dir).args(["definitely-not-a-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = agtc()
        .current_dir(&dir)
        .args(["audit", "--plan", "does-not-exist.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
