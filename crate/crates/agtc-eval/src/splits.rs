//! Training-evaluation framework split generation and leakage auditing.
//!
//! Generation and auditing are deliberately independent code paths: the
//! audit never trusts the generator.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::EvalError;

/// The six training-evaluation frameworks. SL = single subject,
/// SM = subjects mixed, SN = new validation subjects; DS = distinct
/// train/validation sessions, RS = random stratified sessions;
/// FT = fine-tuned from an SN base model.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Framework {
    #[serde(rename = "SL-DS")]
    SlDs,
    #[serde(rename = "SL-RS")]
    SlRs,
    #[serde(rename = "SM-DS")]
    SmDs,
    #[serde(rename = "SM-RS")]
    SmRs,
    #[serde(rename = "SN")]
    Sn,
    #[serde(rename = "SL-DS-FT")]
    SlDsFt,
}

impl Framework {
    pub fn as_str(&self) -> &'static str {
        match self {
            Framework::SlDs => "SL-DS",
            Framework::SlRs => "SL-RS",
            Framework::SmDs => "SM-DS",
            Framework::SmRs => "SM-RS",
            Framework::Sn => "SN",
            Framework::SlDsFt => "SL-DS-FT",
        }
    }

    pub fn parse(s: &str) -> Option<Framework> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "SL-DS" => Some(Framework::SlDs),
            "SL-RS" => Some(Framework::SlRs),
            "SM-DS" => Some(Framework::SmDs),
            "SM-RS" => Some(Framework::SmRs),
            "SN" => Some(Framework::Sn),
            "SL-DS-FT" => Some(Framework::SlDsFt),
            _ => None,
        }
    }
}

/// Per-trial provenance used for splitting and leakage auditing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: usize,
    pub subject: String,
    pub session: String,
    pub run: String,
    pub label: usize,
    /// Half-open [start, end) sample window in its recording's timeline.
    pub window_span: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitPlan {
    pub framework: Framework,
    pub folds: Vec<Fold>,
    pub provenance: Vec<TrialMeta>,
}

#[derive(Clone, Debug, Default)]
pub struct SplitOptions {
    /// Fold count for LMSO and the RS variants (default 5 for RS).
    pub k: Option<usize>,
    /// Restrict SL frameworks to one subject.
    pub subject: Option<String>,
    /// Seed for the RS variants' stratified shuffling.
    pub seed: u64,
}

/// Deterministic shuffle (splitmix-style) so split plans depend only on
/// (metadata, seed).
fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    for i in (1..items.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

pub fn make_splits(
    framework: Framework,
    trials: &[TrialMeta],
    opts: &SplitOptions,
) -> Result<SplitPlan, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    for (i, t) in trials.iter().enumerate() {
        if t.trial_id != i {
            return Err(EvalError::BadTrialIds { index: i, found: t.trial_id });
        }
    }
    let folds = match framework {
        Framework::Sn => sn_folds(trials, opts.k)?,
        Framework::SlDs | Framework::SlDsFt => {
            sl_session_folds(trials, opts.subject.as_deref())?
        }
        Framework::SmDs => sm_session_folds(trials)?,
        Framework::SlRs => {
            let subjects = select_subjects(trials, opts.subject.as_deref())?;
            let mut folds = Vec::new();
            for s in subjects {
                let ids: Vec<usize> =
                    trials.iter().filter(|t| t.subject == s).map(|t| t.trial_id).collect();
                folds.extend(stratified_folds(trials, &ids, opts.k.unwrap_or(5), opts.seed)?);
            }
            folds
        }
        Framework::SmRs => {
            let ids: Vec<usize> = trials.iter().map(|t| t.trial_id).collect();
            stratified_folds(trials, &ids, opts.k.unwrap_or(5), opts.seed)?
        }
    };
    Ok(SplitPlan { framework, folds, provenance: trials.to_vec() })
}

fn subjects_of(trials: &[TrialMeta]) -> Vec<String> {
    let set: BTreeSet<&str> = trials.iter().map(|t| t.subject.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

fn select_subjects(
    trials: &[TrialMeta],
    filter: Option<&str>,
) -> Result<Vec<String>, EvalError> {
    let all = subjects_of(trials);
    match filter {
        None => Ok(all),
        Some(s) => {
            if all.iter().any(|x| x == s) {
                Ok(vec![s.to_string()])
            } else {
                Err(EvalError::UnknownSubject { subject: s.to_string() })
            }
        }
    }
}

/// SN: leave-one-subject-out when k is absent, otherwise k contiguous
/// blocks of sorted subjects (remainders land in the earliest folds).
fn sn_folds(trials: &[TrialMeta], k: Option<usize>) -> Result<Vec<Fold>, EvalError> {
    let subjects = subjects_of(trials);
    let blocks: Vec<Vec<String>> = match k {
        None => subjects.iter().map(|s| vec![s.clone()]).collect(),
        Some(k) => {
            if k < 2 || k > subjects.len() {
                return Err(EvalError::BadFoldCount { k, available: subjects.len() });
            }
            let base = subjects.len() / k;
            let rem = subjects.len() % k;
            let mut blocks = Vec::with_capacity(k);
            let mut at = 0;
            for i in 0..k {
                let size = base + usize::from(i < rem);
                blocks.push(subjects[at..at + size].to_vec());
                at += size;
            }
            blocks
        }
    };
    if blocks.len() < 2 {
        return Err(EvalError::BadFoldCount { k: blocks.len(), available: subjects.len() });
    }
    Ok(blocks
        .into_iter()
        .map(|val_subjects| {
            let val_set: BTreeSet<&str> = val_subjects.iter().map(String::as_str).collect();
            let mut fold = Fold::default();
            for t in trials {
                if val_set.contains(t.subject.as_str()) {
                    fold.val.push(t.trial_id);
                } else {
                    fold.train.push(t.trial_id);
                }
            }
            fold
        })
        .collect())
}

/// SL-DS: per subject, leave one session out. Both sides of every fold stay
/// within one subject.
fn sl_session_folds(
    trials: &[TrialMeta],
    subject_filter: Option<&str>,
) -> Result<Vec<Fold>, EvalError> {
    let subjects = select_subjects(trials, subject_filter)?;
    let mut folds = Vec::new();
    for s in subjects {
        let mine: Vec<&TrialMeta> = trials.iter().filter(|t| t.subject == s).collect();
        let sessions: BTreeSet<&str> = mine.iter().map(|t| t.session.as_str()).collect();
        if sessions.len() < 2 {
            return Err(EvalError::NoLeaveableSession { subject: s });
        }
        for held_out in &sessions {
            let mut fold = Fold::default();
            for t in &mine {
                if t.session == *held_out {
                    fold.val.push(t.trial_id);
                } else {
                    fold.train.push(t.trial_id);
                }
            }
            folds.push(fold);
        }
    }
    Ok(folds)
}

/// SM-DS: all subjects pooled, leave one session out.
fn sm_session_folds(trials: &[TrialMeta]) -> Result<Vec<Fold>, EvalError> {
    let sessions: BTreeSet<&str> = trials.iter().map(|t| t.session.as_str()).collect();
    if sessions.len() < 2 {
        return Err(EvalError::NoLeaveableSession { subject: "<all>".into() });
    }
    Ok(sessions
        .iter()
        .map(|held_out| {
            let mut fold = Fold::default();
            for t in trials {
                if t.session == *held_out {
                    fold.val.push(t.trial_id);
                } else {
                    fold.train.push(t.trial_id);
                }
            }
            fold
        })
        .collect())
}

/// Class-balanced k-fold over the given trial ids: per class, a seeded
/// shuffle then round-robin assignment of validation folds.
fn stratified_folds(
    trials: &[TrialMeta],
    ids: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, EvalError> {
    if k < 2 || k > ids.len() {
        return Err(EvalError::BadFoldCount { k, available: ids.len() });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &id in ids {
        by_class.entry(trials[id].label).or_default().push(id);
    }
    let mut val_assignment: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, mut members) in by_class {
        seeded_shuffle(&mut members, seed ^ (class as u64).wrapping_mul(0x9E37));
        for (i, id) in members.into_iter().enumerate() {
            val_assignment[i % k].push(id);
        }
    }
    let id_set: BTreeSet<usize> = ids.iter().copied().collect();
    Ok(val_assignment
        .into_iter()
        .map(|val| {
            let val_set: BTreeSet<usize> = val.iter().copied().collect();
            Fold {
                train: id_set.iter().copied().filter(|id| !val_set.contains(id)).collect(),
                val: { let mut v = val; v.sort_unstable(); v },
            }
        })
        .collect())
}

/// One train/validation pair whose sample windows overlap within the same
/// (subject, session, run): the sliding-window-cropping leakage scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageViolation {
    pub fold: usize,
    pub train_trial: usize,
    pub val_trial: usize,
    pub overlap_samples: usize,
}

/// Report every leaking pair; an empty result certifies the plan.
pub fn leakage_audit(plan: &SplitPlan) -> Vec<LeakageViolation> {
    type RunKey<'a> = (&'a str, &'a str, &'a str);
    let mut violations = Vec::new();
    for (fi, fold) in plan.folds.iter().enumerate() {
        let mut groups: BTreeMap<RunKey, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for &id in &fold.train {
            let t = &plan.provenance[id];
            groups
                .entry((t.subject.as_str(), t.session.as_str(), t.run.as_str()))
                .or_default()
                .0
                .push(id);
        }
        for &id in &fold.val {
            let t = &plan.provenance[id];
            groups
                .entry((t.subject.as_str(), t.session.as_str(), t.run.as_str()))
                .or_default()
                .1
                .push(id);
        }
        for (train_ids, val_ids) in groups.values() {
            for &tr in train_ids {
                let (ts, te) = plan.provenance[tr].window_span;
                for &va in val_ids {
                    let (vs, ve) = plan.provenance[va].window_span;
                    let lo = ts.max(vs);
                    let hi = te.min(ve);
                    if hi > lo {
                        violations.push(LeakageViolation {
                            fold: fi,
                            train_trial: tr,
                            val_trial: va,
                            overlap_samples: hi - lo,
                        });
                    }
                }
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(
        id: usize,
        subject: &str,
        session: &str,
        run: &str,
        label: usize,
        span: (usize, usize),
    ) -> TrialMeta {
        TrialMeta {
            trial_id: id,
            subject: subject.into(),
            session: session.into(),
            run: run.into(),
            label,
            window_span: span,
        }
    }

    fn synthetic(subjects: usize, sessions: usize, trials_per: usize) -> Vec<TrialMeta> {
        let mut out = Vec::new();
        for s in 0..subjects {
            for ses in 0..sessions {
                for t in 0..trials_per {
                    let id = out.len();
                    out.push(meta(
                        id,
                        &format!("S{s:02}"),
                        &format!("sess{ses}"),
                        "run0",
                        t % 4,
                        (t * 500, t * 500 + 375),
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn sn_loso_gives_one_fold_per_subject() {
        let trials = synthetic(9, 2, 8);
        let plan = make_splits(Framework::Sn, &trials, &SplitOptions::default()).unwrap();
        assert_eq!(plan.folds.len(), 9);
        for fold in &plan.folds {
            let val_subjects: BTreeSet<&str> =
                fold.val.iter().map(|&i| trials[i].subject.as_str()).collect();
            let train_subjects: BTreeSet<&str> =
                fold.train.iter().map(|&i| trials[i].subject.as_str()).collect();
            assert_eq!(val_subjects.len(), 1);
            assert_eq!(train_subjects.len(), 8);
            assert!(val_subjects.is_disjoint(&train_subjects));
        }
    }

    #[test]
    fn sn_lmso_contiguous_blocks_103_into_5() {
        let trials = synthetic(103, 1, 2);
        let plan = make_splits(
            Framework::Sn,
            &trials,
            &SplitOptions { k: Some(5), ..Default::default() },
        )
        .unwrap();
        let sizes: Vec<usize> = plan
            .folds
            .iter()
            .map(|f| {
                f.val
                    .iter()
                    .map(|&i| trials[i].subject.as_str())
                    .collect::<BTreeSet<_>>()
                    .len()
            })
            .collect();
        assert_eq!(sizes, vec![21, 21, 21, 20, 20]);
    }

    #[test]
    fn sl_ds_leaves_one_session_out() {
        let trials = synthetic(1, 2, 10);
        let plan = make_splits(Framework::SlDs, &trials, &SplitOptions::default()).unwrap();
        assert_eq!(plan.folds.len(), 2);
        for fold in &plan.folds {
            let val_sessions: BTreeSet<&str> =
                fold.val.iter().map(|&i| trials[i].session.as_str()).collect();
            assert_eq!(val_sessions.len(), 1);
            assert_eq!(fold.val.len(), 10);
            assert_eq!(fold.train.len(), 10);
        }
    }

    #[test]
    fn single_session_subject_rejected_under_ds() {
        let trials = synthetic(2, 1, 4);
        assert!(matches!(
            make_splits(Framework::SlDs, &trials, &SplitOptions::default()),
            Err(EvalError::NoLeaveableSession { .. })
        ));
    }

    #[test]
    fn stratified_rs_balances_classes() {
        let trials = synthetic(1, 1, 40); // labels cycle 0..4
        let plan = make_splits(
            Framework::SlRs,
            &trials,
            &SplitOptions { k: Some(5), seed: 7, ..Default::default() },
        )
        .unwrap();
        assert_eq!(plan.folds.len(), 5);
        for fold in &plan.folds {
            let mut counts = [0usize; 4];
            for &i in &fold.val {
                counts[trials[i].label] += 1;
            }
            assert_eq!(counts, [2, 2, 2, 2], "stratification off: {counts:?}");
        }
        // determinism
        let plan2 = make_splits(
            Framework::SlRs,
            &trials,
            &SplitOptions { k: Some(5), seed: 7, ..Default::default() },
        )
        .unwrap();
        assert_eq!(plan.folds, plan2.folds);
    }

    #[test]
    fn all_frameworks_generate_clean_plans() {
        let trials = synthetic(4, 3, 12);
        for fw in [
            Framework::Sn,
            Framework::SlDs,
            Framework::SlRs,
            Framework::SmDs,
            Framework::SmRs,
            Framework::SlDsFt,
        ] {
            let plan =
                make_splits(fw, &trials, &SplitOptions { k: None, subject: None, seed: 3 })
                    .unwrap_or_else(|e| panic!("{fw:?}: {e}"));
            let violations = leakage_audit(&plan);
            assert!(violations.is_empty(), "{fw:?} leaked: {violations:?}");
            for fold in &plan.folds {
                assert!(!fold.train.is_empty() && !fold.val.is_empty());
            }
        }
    }

    #[test]
    fn overlapping_swc_windows_flagged() {
        // two overlapping crops of the same run, split across train/val
        let trials = vec![
            meta(0, "S0", "sess0", "run0", 0, (0, 500)),
            meta(1, "S0", "sess0", "run0", 1, (250, 750)),
        ];
        let plan = SplitPlan {
            framework: Framework::SmRs,
            folds: vec![Fold { train: vec![0], val: vec![1] }],
            provenance: trials,
        };
        let v = leakage_audit(&plan);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].overlap_samples, 250);
    }

    #[test]
    fn duplicated_trial_id_flagged() {
        let trials = vec![meta(0, "S0", "sess0", "run0", 0, (0, 375))];
        let plan = SplitPlan {
            framework: Framework::SmRs,
            folds: vec![Fold { train: vec![0], val: vec![0] }],
            provenance: trials,
        };
        assert_eq!(leakage_audit(&plan).len(), 1);
    }

    #[test]
    fn distinct_sessions_cannot_leak() {
        let trials = vec![
            meta(0, "S0", "sess0", "run0", 0, (0, 500)),
            meta(1, "S0", "sess1", "run0", 1, (0, 500)),
        ];
        let plan = SplitPlan {
            framework: Framework::SlDs,
            folds: vec![Fold { train: vec![0], val: vec![1] }],
            provenance: trials,
        };
        assert!(leakage_audit(&plan).is_empty());
    }
}
