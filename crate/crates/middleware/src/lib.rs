//! IDL-driven request/reply middleware.
//!
//! The pieces stack as follows:
//!
//! * [`idl`] parses interface contracts into an [`IdlDocument`].
//! * [`value`] and [`codec`] marshal dynamic [`Value`]s against [`IdlType`]s.
//! * [`wire`] frames messages; [`protocol`] defines the message bodies.
//! * [`client`] and [`server`] carry invocations over stream connections.
//! * [`naming`] is the name registry servants are published in.

pub mod capture;
pub mod client;
pub mod codec;
pub mod idl;
pub mod naming;
pub mod protocol;
pub mod server;
#[cfg(feature = "testkit")]
pub mod testkit;
pub mod value;
pub mod wire;

pub use client::{Client, ClientConfig, RpcError};
pub use codec::{decode_exact, decode_value, encode_value, CodecError};
pub use idl::{parse_idl, pretty_print, IdlDocument, IdlError, IdlType, MethodSignature};
pub use naming::Registry;
pub use protocol::{codes, split_endpoint, Fault, ObjectRef};
pub use server::{Server, ServerHandle, Servant, ServeError};
pub use value::{conforms_to, Value, ValueError};
pub use wire::{frame, unframe, MessageKind, WireError, WireMessage};
