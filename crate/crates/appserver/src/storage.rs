//! [`Repo`] over the record store. Values are stored as their codec bytes
//! against the contract record named by the entity kind.

use cis_domain::{DomainError, DomainResult, Repo};
use cis_middleware::{decode_exact, encode_value, IdlDocument, IdlType, Value};
use cis_store::{ReadView, RecordKey, Transaction};

fn encode(doc: &IdlDocument, kind: &str, v: &Value) -> DomainResult<Vec<u8>> {
    encode_value(v, &IdlType::Record(kind.to_string()), doc)
        .map_err(|e| DomainError::Storage(format!("encoding {kind}: {e}")))
}

fn decode(doc: &IdlDocument, kind: &str, bytes: &[u8]) -> DomainResult<Value> {
    decode_exact(bytes, &IdlType::Record(kind.to_string()), doc)
        .map_err(|e| DomainError::Storage(format!("stored {kind} is corrupt: {e}")))
}

fn store_err(e: cis_store::StoreError) -> DomainError {
    DomainError::Storage(e.to_string())
}

pub struct TxnRepo<'a> {
    pub txn: &'a mut Transaction,
    pub doc: &'a IdlDocument,
}

impl Repo for TxnRepo<'_> {
    fn get_value(&self, kind: &str, key: &str) -> DomainResult<Option<Value>> {
        self.txn
            .get(&RecordKey::new(kind, key))
            .map_err(store_err)?
            .map(|b| decode(self.doc, kind, &b))
            .transpose()
    }

    fn scan_values(&self, kind: &str, prefix: &str) -> DomainResult<Vec<Value>> {
        self.txn
            .scan(kind, prefix.as_bytes())
            .map_err(store_err)?
            .iter()
            .map(|(_, b)| decode(self.doc, kind, b))
            .collect()
    }

    fn put_value(&mut self, kind: &str, key: &str, value: Value) -> DomainResult<()> {
        let bytes = encode(self.doc, kind, &value)?;
        self.txn.put(RecordKey::new(kind, key), bytes).map_err(store_err)
    }

    fn delete_value(&mut self, kind: &str, key: &str) -> DomainResult<()> {
        self.txn.delete(&RecordKey::new(kind, key)).map_err(store_err)
    }
}

/// Read-only view of the committed state.
pub struct ViewRepo<'a> {
    pub view: ReadView,
    pub doc: &'a IdlDocument,
}

impl Repo for ViewRepo<'_> {
    fn get_value(&self, kind: &str, key: &str) -> DomainResult<Option<Value>> {
        self.view.get(&RecordKey::new(kind, key)).map(|b| decode(self.doc, kind, &b)).transpose()
    }

    fn scan_values(&self, kind: &str, prefix: &str) -> DomainResult<Vec<Value>> {
        self.view.scan(kind, prefix.as_bytes()).iter().map(|(_, b)| decode(self.doc, kind, b)).collect()
    }

    fn put_value(&mut self, kind: &str, _key: &str, _value: Value) -> DomainResult<()> {
        Err(DomainError::Storage(format!("write of {kind} through a read view")))
    }

    fn delete_value(&mut self, kind: &str, _key: &str) -> DomainResult<()> {
        Err(DomainError::Storage(format!("delete of {kind} through a read view")))
    }
}
