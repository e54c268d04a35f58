//! Naming registry: maps service names to object references.

use std::collections::BTreeMap;

use parking_lot::RwLock;

use crate::idl::MethodSignature;
use crate::protocol::{codes, Fault, ObjectRef};
use crate::server::Servant;
use crate::value::Value;

/// In-memory name table. Later binds overwrite earlier ones.
#[derive(Debug, Default)]
pub struct Registry {
    names: RwLock<BTreeMap<String, ObjectRef>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&self, name: &str, target: ObjectRef) {
        self.names.write().insert(name.to_string(), target);
    }

    pub fn resolve(&self, name: &str) -> Option<ObjectRef> {
        self.names.read().get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.names.read().keys().cloned().collect()
    }
}

impl Servant for Registry {
    fn dispatch(&self, method: &MethodSignature, args: Vec<Value>) -> Result<Value, Fault> {
        let bad = |e: crate::value::ValueError| Fault::new(codes::BAD_REQUEST, e.to_string());
        match method.name.as_str() {
            "bind" => {
                let name = args[0].as_str().map_err(bad)?;
                let target = ObjectRef::from_value(&args[1]).map_err(bad)?;
                self.bind(name, target);
                Ok(Value::Bool(true))
            }
            "resolve" => {
                let name = args[0].as_str().map_err(bad)?;
                self.resolve(name)
                    .map(|r| r.to_value())
                    .ok_or_else(|| Fault::new(codes::NOT_BOUND, format!("`{name}` is not bound")))
            }
            "list" => Ok(Value::list(self.names().into_iter().map(Value::Str))),
            other => Err(Fault::new(codes::NO_SUCH_METHOD, other.to_string())),
        }
    }
}
