//! Server-side dispatch.
//!
//! A [`Server`] accepts stream connections, decodes Request frames against the
//! interface each servant is bound under, runs the servant on the blocking
//! pool and writes back a Reply or ErrorReply carrying the same request id.
//! Requests on one connection are processed concurrently and replies may be
//! written out of order.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use log::{debug, warn};
use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::codec::{encode_value, Reader};
use crate::idl::{IdlDocument, MethodSignature};
use crate::naming::Registry;
use crate::protocol::{self, codes, decode_request_head, encode_fault, Fault, NAMING_INTERFACE, NAMING_OBJECT};
use crate::value::Value;
use crate::wire::{frame, read_frame, MessageKind, WireMessage, DEFAULT_BODY_CAP};

/// Server-side implementation object.
///
/// `dispatch` runs on a blocking thread and may be called concurrently.
pub trait Servant: Send + Sync + 'static {
    fn dispatch(&self, method: &MethodSignature, args: Vec<Value>) -> Result<Value, Fault>;
}

impl<F> Servant for F
where
    F: Fn(&MethodSignature, Vec<Value>) -> Result<Value, Fault> + Send + Sync + 'static,
{
    fn dispatch(&self, method: &MethodSignature, args: Vec<Value>) -> Result<Value, Fault> {
        self(method, args)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("bind to {addr} failed: {source}")]
    BindFailed { addr: String, source: io::Error },
    #[error("object name `{0}` bound twice")]
    DuplicateObject(String),
    #[error("interface `{0}` not declared in the document")]
    UnknownInterface(String),
}

struct Binding {
    interface: String,
    doc: Arc<IdlDocument>,
    servant: Arc<dyn Servant>,
}

/// Collects servants before binding a listener.
pub struct Server {
    doc: Arc<IdlDocument>,
    bindings: HashMap<String, Binding>,
    naming: Option<Arc<Registry>>,
    body_cap: usize,
}

impl Server {
    pub fn new(doc: Arc<IdlDocument>) -> Self {
        Server { doc, bindings: HashMap::new(), naming: None, body_cap: DEFAULT_BODY_CAP }
    }

    pub fn body_cap(mut self, cap: usize) -> Self {
        self.body_cap = cap;
        self
    }

    pub fn servant(
        mut self,
        object_name: &str,
        interface: &str,
        servant: impl Servant,
    ) -> Result<Self, ServeError> {
        self.add(object_name, interface, self.doc.clone(), Arc::new(servant))?;
        Ok(self)
    }

    pub fn servant_arc(
        mut self,
        object_name: &str,
        interface: &str,
        servant: Arc<dyn Servant>,
    ) -> Result<Self, ServeError> {
        self.add(object_name, interface, self.doc.clone(), servant)?;
        Ok(self)
    }

    /// Hosts a naming registry on this server: answers Resolve frames and
    /// Requests addressed to the `NameService` object.
    pub fn naming(mut self, registry: Arc<Registry>) -> Result<Self, ServeError> {
        let doc = Arc::new(protocol::naming_idl().clone());
        self.add(NAMING_OBJECT, NAMING_INTERFACE, doc, registry.clone())?;
        self.naming = Some(registry);
        Ok(self)
    }

    fn add(
        &mut self,
        object_name: &str,
        interface: &str,
        doc: Arc<IdlDocument>,
        servant: Arc<dyn Servant>,
    ) -> Result<(), ServeError> {
        if doc.interface(interface).is_none() {
            return Err(ServeError::UnknownInterface(interface.to_string()));
        }
        if self.bindings.contains_key(object_name) {
            return Err(ServeError::DuplicateObject(object_name.to_string()));
        }
        self.bindings.insert(
            object_name.to_string(),
            Binding { interface: interface.to_string(), doc, servant },
        );
        Ok(())
    }

    /// Binds `addr` and starts accepting connections on the current runtime.
    pub async fn serve(self, addr: &str) -> Result<ServerHandle, ServeError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::BindFailed { addr: addr.to_string(), source })?;
        let local_addr = listener
            .local_addr()
            .map_err(|source| ServeError::BindFailed { addr: addr.to_string(), source })?;
        let (shutdown_tx, shutdown_rx) = watch::channel(false);
        let (drain_tx, drain_rx) = mpsc::channel::<()>(1);
        let shared = Arc::new(Shared { bindings: self.bindings, naming: self.naming, body_cap: self.body_cap });
        let accept = tokio::spawn(accept_loop(listener, shared, shutdown_rx, drain_tx));
        Ok(ServerHandle { local_addr, shutdown: shutdown_tx, accept: Some(accept), drain: Some(drain_rx) })
    }
}

struct Shared {
    bindings: HashMap<String, Binding>,
    naming: Option<Arc<Registry>>,
    body_cap: usize,
}

/// Handle to a running server. Dropping it without [`ServerHandle::stop`]
/// signals shutdown but does not wait for in-flight requests.
pub struct ServerHandle {
    local_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    accept: Option<JoinHandle<()>>,
    drain: Option<mpsc::Receiver<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn port(&self) -> u16 {
        self.local_addr.port()
    }

    /// Stops accepting connections and reading new requests, then waits for
    /// every in-flight request to be answered.
    pub async fn stop(mut self) {
        let _ = self.shutdown.send(true);
        if let Some(accept) = self.accept.take() {
            let _ = accept.await;
        }
        if let Some(mut drain) = self.drain.take() {
            // Resolves once every connection and request task dropped its sender.
            let _ = drain.recv().await;
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown.send(true);
    }
}

async fn accept_loop(
    listener: TcpListener,
    shared: Arc<Shared>,
    mut shutdown: watch::Receiver<bool>,
    drain: mpsc::Sender<()>,
) {
    loop {
        tokio::select! {
            _ = shutdown.changed() => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    debug!("accepted middleware connection from {peer}");
                    let _ = stream.set_nodelay(true);
                    tokio::spawn(connection(stream, shared.clone(), shutdown.clone(), drain.clone()));
                }
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    }
}

async fn connection(
    stream: TcpStream,
    shared: Arc<Shared>,
    mut shutdown: watch::Receiver<bool>,
    drain: mpsc::Sender<()>,
) {
    let (mut rd, mut wr) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<WireMessage>();
    let writer = tokio::spawn(async move {
        while let Some(msg) = out_rx.recv().await {
            if wr.write_all(&frame(&msg)).await.is_err() {
                break;
            }
        }
        let _ = wr.shutdown().await;
    });

    loop {
        if *shutdown.borrow() {
            break;
        }
        let msg = tokio::select! {
            _ = shutdown.changed() => break,
            r = read_frame(&mut rd, shared.body_cap) => r,
        };
        let msg = match msg {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                debug!("closing connection: {e}");
                break;
            }
        };
        let id = msg.request_id;
        match msg.kind {
            MessageKind::Ping => {
                let _ = out_tx.send(WireMessage::new(MessageKind::Pong, id, vec![]));
            }
            MessageKind::Resolve => {
                let _ = out_tx.send(resolve(&shared, id, &msg.body));
            }
            MessageKind::Request => {
                let shared = shared.clone();
                let out = out_tx.clone();
                let guard = drain.clone();
                tokio::spawn(async move {
                    let reply = tokio::task::spawn_blocking(move || handle_request(&shared, id, &msg.body))
                        .await
                        .unwrap_or_else(|_| {
                            error_reply(id, Fault::new(codes::INTERNAL, "servant panicked"))
                        });
                    let _ = out.send(reply);
                    drop(guard);
                });
            }
            other => {
                let fault = Fault::new(codes::BAD_REQUEST, format!("unexpected {other} frame"));
                let _ = out_tx.send(error_reply(id, fault));
            }
        }
    }
    drop(out_tx);
    let _ = writer.await;
    drop(drain);
}

fn error_reply(id: u64, fault: Fault) -> WireMessage {
    WireMessage::new(MessageKind::ErrorReply, id, encode_fault(&fault))
}

fn resolve(shared: &Shared, id: u64, body: &[u8]) -> WireMessage {
    let Some(registry) = &shared.naming else {
        return error_reply(id, Fault::new(codes::NO_NAMING, "no naming service on this endpoint"));
    };
    let name = match Reader::new(body).string() {
        Ok(n) => n,
        Err(e) => return error_reply(id, Fault::new(codes::BAD_REQUEST, e.to_string())),
    };
    match registry.resolve(&name) {
        Some(target) => {
            let body = encode_value(&target.to_value(), &protocol::ObjectRef::idl_type(), protocol::naming_idl())
                .expect("ObjectRef conforms");
            WireMessage::new(MessageKind::ResolveReply, id, body)
        }
        None => error_reply(id, Fault::new(codes::NOT_BOUND, format!("`{name}` is not bound"))),
    }
}

fn handle_request(shared: &Shared, id: u64, body: &[u8]) -> WireMessage {
    match dispatch(shared, body) {
        Ok(bytes) => WireMessage::new(MessageKind::Reply, id, bytes),
        Err(fault) => error_reply(id, fault),
    }
}

fn dispatch(shared: &Shared, body: &[u8]) -> Result<Vec<u8>, Fault> {
    let bad = |e: crate::codec::CodecError| Fault::new(codes::BAD_REQUEST, e.to_string());
    let head = decode_request_head(body).map_err(bad)?;
    let binding = shared.bindings.get(&head.object_name).ok_or_else(|| {
        Fault::new(codes::NO_SUCH_OBJECT, format!("no object named `{}`", head.object_name))
    })?;
    let sig = binding.doc.method(&binding.interface, &head.method).ok_or_else(|| {
        Fault::new(
            codes::NO_SUCH_METHOD,
            format!("{} has no method `{}`", binding.interface, head.method),
        )
    })?;
    let mut reader = Reader::new(&body[head.args_offset..]);
    let mut args = Vec::with_capacity(sig.params.len());
    for p in &sig.params {
        args.push(reader.value(&p.ty, &binding.doc).map_err(bad)?);
    }
    if reader.remaining() != 0 {
        return Err(Fault::new(codes::BAD_REQUEST, "trailing bytes after arguments"));
    }
    let result = binding.servant.dispatch(sig, args)?;
    encode_value(&result, &sig.returns, &binding.doc).map_err(|e| {
        warn!("servant {} returned a bad value for {}: {e}", head.object_name, sig.name);
        Fault::new(codes::INTERNAL, format!("servant returned a value not matching {}", sig.returns))
    })
}
