//! Client-side invocation.
//!
//! A [`Client`] keeps one persistent connection per endpoint and multiplexes
//! any number of in-flight requests over it. Request ids are assigned
//! monotonically per connection; a reader task routes each reply to the
//! caller waiting on that id. Requests are never retried, so every call
//! executes at most once.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use log::debug;
use parking_lot::Mutex;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};

use crate::codec::{decode_exact, CodecError};
use crate::idl::{IdlDocument, IdlType};
use crate::protocol::{self, decode_fault, encode_request, put_str, Fault, ObjectRef};
use crate::value::Value;
use crate::wire::{frame, read_frame, MessageKind, WireMessage, DEFAULT_BODY_CAP};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RpcError {
    #[error("connect to {endpoint} failed: {reason}")]
    ConnectFailed { endpoint: String, reason: String },
    #[error("call timed out")]
    Timeout,
    #[error("remote error {}: {}", .0.code, .0.message)]
    Remote(Fault),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("connection lost before the reply arrived")]
    ConnectionLost,
    #[error("argument mismatch: {0}")]
    BadArguments(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl RpcError {
    /// The remote error code, if the failure came from an ErrorReply.
    pub fn code(&self) -> Option<&str> {
        match self {
            RpcError::Remote(f) => Some(&f.code),
            _ => None,
        }
    }

    /// True when the request never reached a live server.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, RpcError::ConnectFailed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub timeout: Duration,
    pub body_cap: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig { timeout: DEFAULT_TIMEOUT, body_cap: DEFAULT_BODY_CAP }
    }
}

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<WireMessage>>>>;

/// One multiplexed stream connection.
pub struct Connection {
    out: mpsc::UnboundedSender<Vec<u8>>,
    pending: Pending,
    next_id: AtomicU64,
    closed: Arc<AtomicBool>,
}

impl Connection {
    pub async fn connect(endpoint: &str, body_cap: usize) -> Result<Connection, RpcError> {
        let stream = TcpStream::connect(endpoint).await.map_err(|e| RpcError::ConnectFailed {
            endpoint: endpoint.to_string(),
            reason: e.to_string(),
        })?;
        let _ = stream.set_nodelay(true);
        let (mut rd, mut wr) = stream.into_split();
        let pending: Pending = Arc::default();
        let closed = Arc::new(AtomicBool::new(false));
        let (out, mut out_rx) = mpsc::unbounded_channel::<Vec<u8>>();

        let closed_w = closed.clone();
        tokio::spawn(async move {
            while let Some(bytes) = out_rx.recv().await {
                if wr.write_all(&bytes).await.is_err() {
                    break;
                }
            }
            closed_w.store(true, Ordering::SeqCst);
            let _ = wr.shutdown().await;
        });

        let pending_r = pending.clone();
        let closed_r = closed.clone();
        tokio::spawn(async move {
            loop {
                match read_frame(&mut rd, body_cap).await {
                    Ok(Some(msg)) => {
                        let waiter = pending_r.lock().remove(&msg.request_id);
                        match waiter {
                            Some(tx) => {
                                let _ = tx.send(msg);
                            }
                            None => debug!("dropping reply for unknown request id {}", msg.request_id),
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        debug!("middleware connection failed: {e}");
                        break;
                    }
                }
            }
            closed_r.store(true, Ordering::SeqCst);
            // Dropping the senders wakes every waiter with ConnectionLost.
            pending_r.lock().clear();
        });

        Ok(Connection { out, pending, next_id: AtomicU64::new(1), closed })
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    /// Sends one frame and waits for the frame carrying the same request id.
    pub async fn round_trip(&self, kind: MessageKind, body: Vec<u8>) -> Result<WireMessage, RpcError> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = oneshot::channel();
        self.pending.lock().insert(id, tx);
        let _cleanup = PendingGuard { pending: &self.pending, id };
        if self.is_closed() || self.out.send(frame(&WireMessage::new(kind, id, body))).is_err() {
            return Err(RpcError::ConnectionLost);
        }
        let reply = rx.await.map_err(|_| RpcError::ConnectionLost)?;
        if reply.request_id != id {
            return Err(RpcError::Protocol(format!("reply id {} for request {id}", reply.request_id)));
        }
        Ok(reply)
    }
}

struct PendingGuard<'a> {
    pending: &'a Pending,
    id: u64,
}

impl Drop for PendingGuard<'_> {
    fn drop(&mut self) {
        self.pending.lock().remove(&self.id);
    }
}

/// Invokes methods on remote objects described by a shared [`IdlDocument`].
///
/// Cheap to clone; clones share connections.
#[derive(Clone)]
pub struct Client {
    doc: Arc<IdlDocument>,
    config: ClientConfig,
    conns: Arc<tokio::sync::Mutex<HashMap<String, Arc<Connection>>>>,
}

impl Client {
    pub fn new(doc: Arc<IdlDocument>) -> Self {
        Self::with_config(doc, ClientConfig::default())
    }

    pub fn with_config(doc: Arc<IdlDocument>, config: ClientConfig) -> Self {
        Client { doc, config, conns: Arc::default() }
    }

    pub fn doc(&self) -> &Arc<IdlDocument> {
        &self.doc
    }

    pub fn timeout(&self) -> Duration {
        self.config.timeout
    }

    async fn connection(&self, endpoint: &str) -> Result<Arc<Connection>, RpcError> {
        let mut conns = self.conns.lock().await;
        if let Some(c) = conns.get(endpoint) {
            if !c.is_closed() {
                return Ok(c.clone());
            }
        }
        let c = Arc::new(Connection::connect(endpoint, self.config.body_cap).await?);
        conns.insert(endpoint.to_string(), c.clone());
        Ok(c)
    }

    async fn exchange(&self, endpoint: &str, kind: MessageKind, body: Vec<u8>) -> Result<WireMessage, RpcError> {
        let call = async {
            let conn = self.connection(endpoint).await?;
            conn.round_trip(kind, body).await
        };
        tokio::time::timeout(self.config.timeout, call)
            .await
            .map_err(|_| RpcError::Timeout)?
    }

    /// Calls `method` on `target` with the client's default timeout.
    pub async fn invoke(&self, target: &ObjectRef, method: &str, args: Vec<Value>) -> Result<Value, RpcError> {
        let doc = self.doc.clone();
        self.invoke_with(target, method, args, &doc).await
    }

    /// Calls `method` using an explicit contract document.
    ///
    /// A method missing from `doc` is still sent (without arguments) so the
    /// server can answer `no-such-method`.
    pub async fn invoke_with(
        &self,
        target: &ObjectRef,
        method: &str,
        args: Vec<Value>,
        doc: &IdlDocument,
    ) -> Result<Value, RpcError> {
        let sig = doc.method(&target.interface_name, method);
        let body = match sig {
            Some(sig) => {
                if sig.params.len() != args.len() {
                    return Err(RpcError::BadArguments(format!(
                        "{} takes {} arguments, got {}",
                        method,
                        sig.params.len(),
                        args.len()
                    )));
                }
                let typed: Vec<(Value, &IdlType)> = args.into_iter().zip(sig.params.iter().map(|p| &p.ty)).collect();
                encode_request(&target.object_name, method, &typed, doc)?
            }
            None => encode_request(&target.object_name, method, &[], doc)?,
        };
        let reply = self.exchange(&target.endpoint(), MessageKind::Request, body).await?;
        match reply.kind {
            MessageKind::Reply => {
                let sig = sig.ok_or_else(|| RpcError::Protocol(format!("reply for undeclared method `{method}`")))?;
                decode_exact(&reply.body, &sig.returns, doc).map_err(|e| RpcError::Protocol(format!("malformed reply: {e}")))
            }
            MessageKind::ErrorReply => Err(RpcError::Remote(
                decode_fault(&reply.body).map_err(|e| RpcError::Protocol(format!("malformed error reply: {e}")))?,
            )),
            other => Err(RpcError::Protocol(format!("unexpected {other} in reply to a request"))),
        }
    }

    /// Round-trips a Ping frame to `endpoint`.
    pub async fn ping(&self, endpoint: &str) -> Result<(), RpcError> {
        let reply = self.exchange(endpoint, MessageKind::Ping, vec![]).await?;
        match reply.kind {
            MessageKind::Pong => Ok(()),
            other => Err(RpcError::Protocol(format!("expected Pong, got {other}"))),
        }
    }

    /// Looks up `name` in the naming registry at `registry`.
    pub async fn resolve(&self, registry: &ObjectRef, name: &str) -> Result<ObjectRef, RpcError> {
        let mut body = Vec::new();
        put_str(&mut body, name);
        let reply = self.exchange(&registry.endpoint(), MessageKind::Resolve, body).await?;
        match reply.kind {
            MessageKind::ResolveReply => {
                let v = decode_exact(&reply.body, &ObjectRef::idl_type(), protocol::naming_idl())
                    .map_err(|e| RpcError::Protocol(format!("malformed resolve reply: {e}")))?;
                ObjectRef::from_value(&v).map_err(|e| RpcError::Protocol(e.to_string()))
            }
            MessageKind::ErrorReply => Err(RpcError::Remote(
                decode_fault(&reply.body).map_err(|e| RpcError::Protocol(e.to_string()))?,
            )),
            other => Err(RpcError::Protocol(format!("unexpected {other} in reply to Resolve"))),
        }
    }

    /// Binds `name` to `target` in the registry; later binds overwrite.
    pub async fn bind(&self, registry: &ObjectRef, name: &str, target: &ObjectRef) -> Result<(), RpcError> {
        self.invoke_with(
            registry,
            "bind",
            vec![Value::str(name), target.to_value()],
            protocol::naming_idl(),
        )
        .await
        .map(|_| ())
    }

    /// Names currently bound in the registry.
    pub async fn list_names(&self, registry: &ObjectRef) -> Result<Vec<String>, RpcError> {
        let v = self.invoke_with(registry, "list", vec![], protocol::naming_idl()).await?;
        v.as_list()
            .map_err(|e| RpcError::Protocol(e.to_string()))?
            .iter()
            .map(|n| n.as_str().map(str::to_string).map_err(|e| RpcError::Protocol(e.to_string())))
            .collect()
    }
}
