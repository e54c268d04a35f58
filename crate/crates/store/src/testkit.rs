//! Crash and oracle harnesses, shared by the store's own tests and the
//! workspace acceptance suite.
//!
//! The oracle is a plain `BTreeMap` plus a pending-write buffer. It knows
//! nothing about the log format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{RecordKey, Store, StoreError, StoreOptions, LOG_FILE};

type Model = BTreeMap<RecordKey, Vec<u8>>;

const KINDS: &[&str] = &["A", "B", "Student"];
const KEYS: &[&[u8]] = &[b"", b"a", b"ab", b"abc", b"b", b"ba", b"\x00", b"\xff", b"S0001", b"S0002"];

fn random_key<R: Rng>(rng: &mut R) -> RecordKey {
    RecordKey::new(*KINDS.choose(rng).expect("non-empty"), KEYS.choose(rng).expect("non-empty").to_vec())
}

fn random_bytes<R: Rng>(rng: &mut R) -> Vec<u8> {
    let len = rng.gen_range(0..40);
    (0..len).map(|_| rng.gen()).collect()
}

fn model_scan(m: &Model, kind: &str, prefix: &[u8]) -> Vec<(RecordKey, Vec<u8>)> {
    m.iter()
        .filter(|(k, _)| k.kind == kind && k.key.starts_with(prefix))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Result of one truncation sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub log_len: usize,
    pub offsets_checked: usize,
    pub failures: Vec<String>,
}

/// Commits `txns` random transactions into a fresh store, then reopens a
/// copy of the log cut at every byte offset. Each cut must recover exactly
/// the state after the last transaction whose record fits entirely.
pub fn truncation_sweep<R: Rng>(rng: &mut R, txns: usize, scratch: &Path) -> Result<SweepReport, StoreError> {
    let src = scratch.join("source");
    let mut states: Vec<Model> = vec![Model::new()];
    let mut boundaries: Vec<u64> = vec![1];
    {
        let store = Store::open_with(&src, StoreOptions { sync: false })?;
        let mut model = Model::new();
        for _ in 0..txns {
            let mut t = store.begin()?;
            for _ in 0..rng.gen_range(1..5) {
                let k = random_key(rng);
                if rng.gen_bool(0.25) {
                    t.delete(&k)?;
                    model.remove(&k);
                } else {
                    let v = random_bytes(rng);
                    t.put(k.clone(), v.clone())?;
                    model.insert(k, v);
                }
            }
            t.commit()?;
            states.push(model.clone());
            boundaries.push(fs::metadata(src.join(LOG_FILE))?.len());
        }
        store.close()?;
    }
    let log = fs::read(src.join(LOG_FILE))?;
    let mut failures = Vec::new();
    let cut_dir = scratch.join("cut");
    for cut in 0..=log.len() {
        let _ = fs::remove_dir_all(&cut_dir);
        fs::create_dir_all(&cut_dir)?;
        fs::write(cut_dir.join(LOG_FILE), &log[..cut])?;
        let expected_idx = boundaries.iter().rposition(|&b| b as usize <= cut).unwrap_or(0);
        let store = match Store::open_with(&cut_dir, StoreOptions { sync: false }) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("offset {cut}: open failed: {e}"));
                continue;
            }
        };
        let got: Model = KINDS.iter().flat_map(|k| store.scan(k, b"").expect("open store")).collect();
        if got != states[expected_idx] {
            failures.push(format!("offset {cut}: state differs from commit #{expected_idx}"));
        }
        let torn = cut != boundaries[expected_idx] as usize && cut > 0;
        if torn != store.recovery().truncated_at.is_some() {
            failures.push(format!("offset {cut}: truncation report {:?}", store.recovery().truncated_at));
        }
        store.close()?;
    }
    Ok(SweepReport { log_len: log.len(), offsets_checked: log.len() + 1, failures })
}

/// Outcome of [`oracle_run`].
#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub ops: usize,
    pub commits: usize,
    pub rollbacks: usize,
    pub snapshots: usize,
    pub reopens: usize,
    pub mismatches: Vec<String>,
}

/// Runs `ops` random store operations against a real store and the model,
/// comparing every observable result. Snapshots and reopens are interleaved
/// at random points; they must not change anything observable.
pub fn oracle_run<R: Rng>(rng: &mut R, ops: usize, root: &Path) -> Result<OracleReport, StoreError> {
    let opts = StoreOptions { sync: false };
    let mut store = Store::open_with(root, opts.clone())?;
    let mut committed = Model::new();
    let mut txn: Option<(crate::Transaction, Model)> = None;
    let mut report = OracleReport { ops, ..Default::default() };
    let check = |report: &mut OracleReport, i: usize, what: &str, ok: bool| {
        if !ok && report.mismatches.len() < 20 {
            report.mismatches.push(format!("op {i}: {what}"));
        }
    };

    for i in 0..ops {
        let roll = rng.gen_range(0..100);
        match (&mut txn, roll) {
            (None, 0..=29) => {
                let t = store.begin()?;
                txn = Some((t, committed.clone()));
            }
            (Some((t, view)), 0..=34) => {
                let k = random_key(rng);
                let v = random_bytes(rng);
                t.put(k.clone(), v.clone())?;
                view.insert(k, v);
            }
            (Some((t, view)), 35..=44) => {
                let k = random_key(rng);
                t.delete(&k)?;
                view.remove(&k);
            }
            (Some((t, view)), 45..=54) => {
                let k = random_key(rng);
                check(&mut report, i, "txn get", t.get(&k)? == view.get(&k).cloned());
                check(&mut report, i, "outside get", store.get(&k)? == committed.get(&k).cloned());
            }
            (Some((t, view)), 55..=62) => {
                let kind = *KINDS.choose(rng).expect("non-empty");
                let prefix = KEYS.choose(rng).expect("non-empty");
                check(&mut report, i, "txn scan", t.scan(kind, prefix)? == model_scan(view, kind, prefix));
                check(&mut report, i, "outside scan", store.scan(kind, prefix)? == model_scan(&committed, kind, prefix));
            }
            (Some(_), 63..=79) => {
                let (mut t, view) = txn.take().expect("matched Some");
                t.commit()?;
                committed = view;
                report.commits += 1;
                check(&mut report, i, "commit again", matches!(t.commit(), Err(StoreError::NotActive)));
            }
            (Some(_), 80..=89) => {
                let (mut t, _) = txn.take().expect("matched Some");
                t.rollback()?;
                report.rollbacks += 1;
                check(&mut report, i, "put after rollback", matches!(t.put(random_key(rng), vec![]), Err(StoreError::NotActive)));
            }
            (Some(_), _) => {
                check(&mut report, i, "snapshot during txn", matches!(store.snapshot(), Err(StoreError::ActiveTransaction)));
            }
            (None, 30..=59) => {
                let kind = *KINDS.choose(rng).expect("non-empty");
                let prefix = KEYS.choose(rng).expect("non-empty");
                check(&mut report, i, "scan", store.scan(kind, prefix)? == model_scan(&committed, kind, prefix));
            }
            (None, 60..=79) => {
                let k = random_key(rng);
                check(&mut report, i, "get", store.get(&k)? == committed.get(&k).cloned());
            }
            (None, 80..=91) => {
                store.snapshot()?;
                report.snapshots += 1;
            }
            (None, _) => {
                store.close()?;
                store = Store::open_with(root, opts.clone())?;
                report.reopens += 1;
            }
        }
    }
    if let Some((t, _)) = txn.take() {
        drop(t);
    }
    let all: Model = KINDS.iter().flat_map(|k| store.scan(k, b"").expect("open store")).collect();
    check(&mut report, ops, "final state", all == committed);
    store.close()?;
    let reopened = Store::open_with(root, opts)?;
    let all: Model = KINDS.iter().flat_map(|k| reopened.scan(k, b"").expect("open store")).collect();
    check(&mut report, ops, "state after final reopen", all == committed);
    Ok(report)
}
