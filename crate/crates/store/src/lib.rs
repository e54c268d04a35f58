//! Embedded transactional record store.
//!
//! A store root holds three files:
//!
//! * `LOCK`: advisory lock held by the one open [`Store`] for that root.
//! * `log.v1`: append-only log, one checksummed record per committed transaction.
//! * `snapshot.v1`: optional compacted state; recovery loads it, then replays the log.
//!
//! Each commit is a single log append followed by `fsync`, so a transaction is
//! either fully present after a crash or not at all. A torn tail is cut off
//! during [`Store::open`] and reported in [`RecoveryReport`].
//!
//! There is at most one write [`Transaction`] at a time; [`Store::begin`]
//! blocks until the previous one finishes. Reads outside a transaction see the
//! last committed state only.

mod format;
#[cfg(feature = "testkit")]
pub mod testkit;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::ops::Bound;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use log::warn;
use parking_lot::lock_api::ArcMutexGuard;
use parking_lot::{Mutex, RawMutex, RwLock};
use sha2::{Digest, Sha256};

use format::{Framed, Op, FORMAT_VERSION};

pub const LOCK_FILE: &str = "LOCK";
pub const LOG_FILE: &str = "log.v1";
pub const SNAPSHOT_FILE: &str = "snapshot.v1";
const SNAPSHOT_TMP: &str = "snapshot.v1.tmp";

/// Environment variable naming the store root when no path is configured.
pub const DB_DIR_ENV: &str = "FNUCIS_DB_DIR";

/// Key of a stored record: an entity kind tag plus an opaque byte key.
///
/// Ordering is by kind, then byte-lexicographic on the key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub kind: String,
    pub key: Vec<u8>,
}

impl RecordKey {
    pub fn new(kind: impl Into<String>, key: impl Into<Vec<u8>>) -> Self {
        RecordKey { kind: kind.into(), key: key.into() }
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, String::from_utf8_lossy(&self.key))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store at {0} is locked by another connection")]
    Locked(PathBuf),
    #[error("{file} is corrupt at offset {offset}: {reason}")]
    Corrupt { file: PathBuf, offset: u64, reason: String },
    #[error("transaction is not active")]
    NotActive,
    #[error("a write transaction is active")]
    ActiveTransaction,
    #[error("connection is closed")]
    Closed,
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// What [`Store::open`] found on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub snapshot_entries: u64,
    pub log_transactions: u64,
    /// Offset at which a torn or corrupt log tail was cut off.
    pub truncated_at: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// `fsync` the log on every commit. Only tests should turn this off.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions { sync: true }
    }
}

type Map = BTreeMap<RecordKey, Vec<u8>>;

struct Writer {
    log: File,
    log_len: u64,
    next_txn: u64,
}

struct Inner {
    root: PathBuf,
    lock: File,
    options: StoreOptions,
    state: RwLock<Arc<Map>>,
    writer: Arc<Mutex<Writer>>,
    closed: AtomicBool,
    recovery: RecoveryReport,
}

/// An open connection to a store root. Cheap to clone; clones share the connection.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("root", &self.inner.root).finish()
    }
}

fn corrupt(file: &Path, offset: u64, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt { file: file.to_path_buf(), offset, reason: reason.into() }
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Store> {
        Self::open_with(path, StoreOptions::default())
    }

    pub fn open_with(path: impl AsRef<Path>, options: StoreOptions) -> Result<Store> {
        let root = path.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(root.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(root)),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }

        let mut recovery = RecoveryReport::default();
        let (mut map, mut last_txn) = load_snapshot(&root.join(SNAPSHOT_FILE), &mut recovery)?;

        let log_path = root.join(LOG_FILE);
        let mut log = OpenOptions::new().create(true).read(true).append(true).open(&log_path)?;
        let buf = fs::read(&log_path)?;
        let mut valid_len = buf.len();
        if buf.is_empty() {
            log.write_all(&[FORMAT_VERSION])?;
            log.sync_all()?;
            valid_len = 1;
        } else if buf[0] != FORMAT_VERSION {
            return Err(corrupt(&log_path, 0, format!("unsupported log version {}", buf[0])));
        } else {
            let mut offset = 1;
            loop {
                match format::read_record(&buf, offset) {
                    Framed::End => break,
                    Framed::Record { payload, next } => match format::decode_txn(payload) {
                        Some((id, ops)) => {
                            apply(&mut map, ops);
                            last_txn = last_txn.max(id);
                            recovery.log_transactions += 1;
                            offset = next;
                        }
                        None => {
                            warn!("{}: undecodable transaction at offset {offset}", log_path.display());
                            valid_len = offset;
                            break;
                        }
                    },
                    Framed::Invalid(reason) => {
                        warn!("{}: {reason} at offset {offset}; truncating", log_path.display());
                        valid_len = offset;
                        break;
                    }
                }
            }
            if valid_len < buf.len() {
                recovery.truncated_at = Some(valid_len as u64);
                log.set_len(valid_len as u64)?;
                log.sync_all()?;
            }
        }

        let writer = Writer { log, log_len: valid_len as u64, next_txn: last_txn + 1 };
        Ok(Store {
            inner: Arc::new(Inner {
                root,
                lock,
                options,
                state: RwLock::new(Arc::new(map)),
                writer: Arc::new(Mutex::new(writer)),
                closed: AtomicBool::new(false),
                recovery,
            }),
        })
    }

    /// Opens the root named by `FNUCIS_DB_DIR`.
    pub fn open_from_env() -> Result<Store> {
        let dir = std::env::var_os(DB_DIR_ENV)
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("{DB_DIR_ENV} is not set")))?;
        Self::open(PathBuf::from(dir))
    }

    pub fn root(&self) -> &Path {
        &self.inner.root
    }

    pub fn recovery(&self) -> &RecoveryReport {
        &self.inner.recovery
    }

    fn check_open(&self) -> Result<()> {
        if self.inner.closed.load(Ordering::SeqCst) {
            Err(StoreError::Closed)
        } else {
            Ok(())
        }
    }

    /// Releases the lock. Every later operation on this connection fails.
    pub fn close(&self) -> Result<()> {
        if self.inner.closed.swap(true, Ordering::SeqCst) {
            return Ok(());
        }
        // Wait out an in-flight commit before dropping the lock.
        let _w = self.inner.writer.lock();
        self.inner.lock.unlock()?;
        Ok(())
    }

    /// Starts a write transaction, waiting for any active one to finish.
    pub fn begin(&self) -> Result<Transaction> {
        self.check_open()?;
        let guard = self.inner.writer.lock_arc();
        self.check_open()?;
        Ok(Transaction::new(self.clone(), guard))
    }

    /// Starts a write transaction only if none is active.
    pub fn try_begin(&self) -> Result<Option<Transaction>> {
        self.check_open()?;
        Ok(self.inner.writer.try_lock_arc().map(|g| Transaction::new(self.clone(), g)))
    }

    /// Consistent read-only view of the committed state.
    pub fn view(&self) -> Result<ReadView> {
        self.check_open()?;
        Ok(ReadView { map: self.inner.state.read().clone() })
    }

    pub fn get(&self, key: &RecordKey) -> Result<Option<Vec<u8>>> {
        Ok(self.view()?.get(key))
    }

    pub fn scan(&self, kind: &str, prefix: &[u8]) -> Result<Vec<(RecordKey, Vec<u8>)>> {
        Ok(self.view()?.scan(kind, prefix))
    }

    /// SHA-256 over every committed entry in key order.
    pub fn digest(&self) -> Result<[u8; 32]> {
        Ok(self.view()?.digest())
    }

    /// Compacts the log into a fresh snapshot. Fails while a write transaction is active.
    pub fn snapshot(&self) -> Result<()> {
        self.check_open()?;
        let mut w = self.inner.writer.try_lock().ok_or(StoreError::ActiveTransaction)?;
        let map = self.inner.state.read().clone();

        let mut out = vec![FORMAT_VERSION];
        for (k, v) in map.iter() {
            let mut payload = vec![format::SNAP_ENTRY];
            format::put_key(&mut payload, k);
            format::put_value(&mut payload, v);
            out.extend(format::frame_record(&payload));
        }
        let mut end = vec![format::SNAP_END];
        end.extend_from_slice(&(map.len() as u64).to_le_bytes());
        end.extend_from_slice(&(w.next_txn - 1).to_le_bytes());
        out.extend(format::frame_record(&end));

        let tmp = self.inner.root.join(SNAPSHOT_TMP);
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&out)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.inner.root.join(SNAPSHOT_FILE))?;
        sync_dir(&self.inner.root);

        // Replaying a log already folded into the snapshot is harmless, so a
        // crash between the rename and this truncation loses nothing.
        w.log.set_len(1)?;
        w.log.sync_all()?;
        w.log_len = 1;
        Ok(())
    }
}

fn sync_dir(dir: &Path) {
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

fn apply(map: &mut Map, ops: Vec<Op>) {
    for op in ops {
        match op {
            Op::Put(k, v) => {
                map.insert(k, v);
            }
            Op::Delete(k) => {
                map.remove(&k);
            }
        }
    }
}

fn load_snapshot(path: &Path, recovery: &mut RecoveryReport) -> Result<(Map, u64)> {
    let buf = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Map::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    if buf.first() != Some(&FORMAT_VERSION) {
        return Err(corrupt(path, 0, "bad snapshot version"));
    }
    let mut map = Map::new();
    let mut offset = 1;
    loop {
        match format::read_record(&buf, offset) {
            Framed::End => return Err(corrupt(path, offset as u64, "missing end marker")),
            Framed::Invalid(reason) => return Err(corrupt(path, offset as u64, reason)),
            Framed::Record { payload, next } => {
                let mut c = format::Cursor::new(payload);
                match c.u8() {
                    Some(format::SNAP_ENTRY) => {
                        let entry = c.key().and_then(|k| c.bytes().map(|v| (k, v.to_vec())));
                        match entry {
                            Some((k, v)) if c.at_end() => {
                                map.insert(k, v);
                            }
                            _ => return Err(corrupt(path, offset as u64, "malformed entry")),
                        }
                    }
                    Some(format::SNAP_END) => {
                        let count = c.u64();
                        let last = c.u64();
                        return match (count, last) {
                            (Some(n), Some(last)) if n == map.len() as u64 && next == buf.len() => {
                                recovery.snapshot_entries = n;
                                Ok((map, last))
                            }
                            _ => Err(corrupt(path, offset as u64, "end marker does not match contents")),
                        };
                    }
                    _ => return Err(corrupt(path, offset as u64, "unknown record tag")),
                }
                offset = next;
            }
        }
    }
}

/// Immutable snapshot of committed state.
#[derive(Clone)]
pub struct ReadView {
    map: Arc<Map>,
}

impl ReadView {
    pub fn get(&self, key: &RecordKey) -> Option<Vec<u8>> {
        self.map.get(key).cloned()
    }

    /// Entries of `kind` whose key starts with `prefix`, in key order.
    pub fn scan(&self, kind: &str, prefix: &[u8]) -> Vec<(RecordKey, Vec<u8>)> {
        scan_map(&self.map, kind, prefix).map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in self.map.iter() {
            for part in [k.kind.as_bytes(), &k.key, v] {
                h.update((part.len() as u64).to_le_bytes());
                h.update(part);
            }
        }
        h.finalize().into()
    }
}

fn scan_map<'a>(map: &'a Map, kind: &'a str, prefix: &'a [u8]) -> impl Iterator<Item = (&'a RecordKey, &'a Vec<u8>)> + 'a {
    let start = RecordKey::new(kind, prefix.to_vec());
    map.range((Bound::Included(start), Bound::Unbounded))
        .take_while(move |(k, _)| k.kind == kind && k.key.starts_with(prefix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnState {
    Active,
    Committed,
    Aborted,
}

/// A write transaction. Dropping an active transaction rolls it back.
pub struct Transaction {
    store: Store,
    guard: Option<ArcMutexGuard<RawMutex, Writer>>,
    id: u64,
    writes: BTreeMap<RecordKey, Option<Vec<u8>>>,
    state: TxnState,
}

impl Transaction {
    fn new(store: Store, guard: ArcMutexGuard<RawMutex, Writer>) -> Self {
        let id = guard.next_txn;
        Transaction { store, guard: Some(guard), id, writes: BTreeMap::new(), state: TxnState::Active }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> TxnState {
        self.state
    }

    fn check(&self) -> Result<()> {
        self.store.check_open()?;
        if self.state == TxnState::Active {
            Ok(())
        } else {
            Err(StoreError::NotActive)
        }
    }

    pub fn put(&mut self, key: RecordKey, value: Vec<u8>) -> Result<()> {
        self.check()?;
        self.writes.insert(key, Some(value));
        Ok(())
    }

    pub fn delete(&mut self, key: &RecordKey) -> Result<()> {
        self.check()?;
        self.writes.insert(key.clone(), None);
        Ok(())
    }

    /// Reads through this transaction's own writes.
    pub fn get(&self, key: &RecordKey) -> Result<Option<Vec<u8>>> {
        self.check()?;
        match self.writes.get(key) {
            Some(w) => Ok(w.clone()),
            None => Ok(self.store.inner.state.read().get(key).cloned()),
        }
    }

    /// Prefix scan merging committed state with this transaction's writes.
    pub fn scan(&self, kind: &str, prefix: &[u8]) -> Result<Vec<(RecordKey, Vec<u8>)>> {
        self.check()?;
        let base = self.store.inner.state.read().clone();
        let mut merged: BTreeMap<&RecordKey, &Vec<u8>> = scan_map(&base, kind, prefix).collect();
        let start = RecordKey::new(kind, prefix.to_vec());
        for (k, w) in self
            .writes
            .range((Bound::Included(&start), Bound::Unbounded))
            .take_while(|(k, _)| k.kind == kind && k.key.starts_with(prefix))
        {
            match w {
                Some(v) => merged.insert(k, v),
                None => merged.remove(k),
            };
        }
        Ok(merged.into_iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }

    /// Durably appends all writes as one log record, then publishes them.
    pub fn commit(&mut self) -> Result<()> {
        self.check()?;
        let mut guard = self.guard.take().expect("active transaction holds the writer");
        self.state = TxnState::Aborted;
        if self.writes.is_empty() {
            self.state = TxnState::Committed;
            return Ok(());
        }
        let ops: Vec<Op> = std::mem::take(&mut self.writes)
            .into_iter()
            .map(|(k, v)| match v {
                Some(v) => Op::Put(k, v),
                None => Op::Delete(k),
            })
            .collect();
        let record = format::frame_record(&format::encode_txn(self.id, &ops));
        let w = &mut *guard;
        let written = w.log.write_all(&record).and_then(|_| {
            if self.store.inner.options.sync {
                w.log.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            // Cut any partial append so the next commit starts on a clean boundary.
            let _ = w.log.set_len(w.log_len);
            return Err(e.into());
        }
        w.log_len += record.len() as u64;
        w.next_txn = self.id + 1;
        {
            let mut state = self.store.inner.state.write();
            apply(Arc::make_mut(&mut state), ops);
        }
        self.state = TxnState::Committed;
        Ok(())
    }

    pub fn rollback(&mut self) -> Result<()> {
        if self.state != TxnState::Active {
            return Err(StoreError::NotActive);
        }
        self.writes.clear();
        self.guard = None;
        self.state = TxnState::Aborted;
        Ok(())
    }
}

impl Drop for Transaction {
    fn drop(&mut self) {
        if self.state == TxnState::Active {
            let _ = self.rollback();
        }
    }
}
