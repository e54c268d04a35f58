use std::fs;
use std::time::Instant;

use cis_store::testkit::{oracle_run, truncation_sweep};
use cis_store::{RecordKey, Store, StoreOptions, LOG_FILE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn truncation_sweep_over_fifty_transactions() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let started = Instant::now();
    let report = truncation_sweep(&mut rng, 50, dir.path()).unwrap();
    assert!(report.failures.is_empty(), "{:#?}", report.failures);
    assert_eq!(report.offsets_checked, report.log_len + 1);
    eprintln!("swept {} offsets in {:?}", report.offsets_checked, started.elapsed());
}

#[test]
fn oracle_equivalence_ten_thousand_ops() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let report = oracle_run(&mut rng, 10_000, dir.path()).unwrap();
    assert!(report.mismatches.is_empty(), "{:#?}", report.mismatches);
    assert!(report.commits > 100 && report.snapshots > 10 && report.reopens > 10, "{report:?}");
}

fn apply_script(store: &Store, script: &[(u8, Option<u8>)], snapshot_at: &[usize]) {
    for (i, chunk) in script.chunks(3).enumerate() {
        let mut t = store.begin().unwrap();
        for (k, v) in chunk {
            let key = RecordKey::new("K", vec![*k]);
            match v {
                Some(v) => t.put(key, vec![*v]).unwrap(),
                None => t.delete(&key).unwrap(),
            }
        }
        t.commit().unwrap();
        if snapshot_at.contains(&i) {
            store.snapshot().unwrap();
        }
    }
}

#[test]
fn snapshots_at_random_points_match_a_plain_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let script: Vec<(u8, Option<u8>)> =
        (0..1000).map(|_| (rng.gen_range(0..32), rng.gen_bool(0.8).then(|| rng.gen()))).collect();
    let snaps: Vec<usize> = (0..20).map(|_| rng.gen_range(0..334)).collect();

    let plain = tempfile::tempdir().unwrap();
    let snapped = tempfile::tempdir().unwrap();
    let a = Store::open_with(plain.path(), StoreOptions { sync: false }).unwrap();
    let b = Store::open_with(snapped.path(), StoreOptions { sync: false }).unwrap();
    apply_script(&a, &script, &[]);
    apply_script(&b, &script, &snaps);
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    b.close().unwrap();
    let b = Store::open(snapped.path()).unwrap();
    assert_eq!(a.scan("K", b"").unwrap(), b.scan("K", b"").unwrap());
}

#[test]
fn corrupt_byte_mid_log_keeps_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let sizes: Vec<u64> = {
        let s = Store::open(dir.path()).unwrap();
        (0..3u8)
            .map(|i| {
                let mut t = s.begin().unwrap();
                t.put(RecordKey::new("K", vec![i]), vec![i; 4]).unwrap();
                t.commit().unwrap();
                fs::metadata(dir.path().join(LOG_FILE)).unwrap().len()
            })
            .collect()
    };
    let path = dir.path().join(LOG_FILE);
    let mut log = fs::read(&path).unwrap();
    log[sizes[0] as usize + 10] ^= 0x55;
    fs::write(&path, log).unwrap();
    let s = Store::open(dir.path()).unwrap();
    assert_eq!(s.recovery().truncated_at, Some(sizes[0]));
    assert_eq!(s.scan("K", b"").unwrap().len(), 1);
    assert_eq!(fs::metadata(&path).unwrap().len(), sizes[0]);
}

#[test]
fn readers_share_a_connection_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let s = Store::open(dir.path()).unwrap();
    let writer = {
        let s = s.clone();
        std::thread::spawn(move || {
            for i in 0..200u32 {
                let mut t = s.begin().unwrap();
                t.put(RecordKey::new("C", b"a".to_vec()), i.to_le_bytes().to_vec()).unwrap();
                t.put(RecordKey::new("C", b"b".to_vec()), i.to_le_bytes().to_vec()).unwrap();
                t.commit().unwrap();
            }
        })
    };
    for _ in 0..500 {
        let v = s.view().unwrap();
        let a = v.get(&RecordKey::new("C", b"a".to_vec()));
        let b = v.get(&RecordKey::new("C", b"b".to_vec()));
        assert_eq!(a, b, "reader saw a half-applied transaction");
    }
    writer.join().unwrap();
}
