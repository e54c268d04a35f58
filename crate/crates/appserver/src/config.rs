//! Plain `key = value` configuration text.
//!
//! `#` starts a comment line. `[name]` opens a section; keys before any
//! section header belong to the unnamed section `""`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use cis_domain::{GradeScale, Policy};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

/// Sections in file order, each mapping keys to values.
pub type Sections = Vec<(String, BTreeMap<String, String>)>;

pub fn parse_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut out: Sections = vec![(String::new(), BTreeMap::new())];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| ConfigError::Syntax { line: i + 1, message: message.to_string() };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("section header lacks `]`"))?.trim();
            if name.is_empty() {
                return Err(err("empty section name"));
            }
            if out.iter().any(|(n, _)| n == name) {
                return Err(err("section declared twice"));
            }
            out.push((name.to_string(), BTreeMap::new()));
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(err("empty key"));
        }
        let section = &mut out.last_mut().expect("never empty").1;
        if section.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(err("key given twice"));
        }
    }
    if out[0].1.is_empty() && out.len() > 1 {
        out.remove(0);
    }
    Ok(out)
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value { key: key.to_string(), message: e.to_string() })
}

/// App-server settings.
#[derive(Debug, Clone)]
pub struct Config {
    pub policy: Policy,
    pub token_ttl_hours: i64,
    pub listen: String,
    /// Host written into published object references; defaults to the
    /// listen host, or 127.0.0.1 when listening on a wildcard address.
    pub advertise_host: Option<String>,
    pub registry: String,
    pub db_dir: Option<PathBuf>,
    /// Bootstrap academic-services account, created when absent.
    pub admin_user: String,
    pub admin_password: Option<String>,
    pub hash_iterations: u32,
    pub sync: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            policy: Policy::default(),
            token_ttl_hours: 8,
            listen: "127.0.0.1:7101".into(),
            advertise_host: None,
            registry: "127.0.0.1:7100".into(),
            db_dir: None,
            admin_user: "admin".into(),
            admin_password: None,
            hash_iterations: 10_000,
            sync: true,
        }
    }
}

impl Config {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        for (k, v) in map {
            match k.as_str() {
                "term" => {
                    cis_domain::check_term(v).map_err(|e| ConfigError::Value { key: k.clone(), message: e.to_string() })?;
                    c.policy.current_term = v.clone();
                }
                "fee_per_credit" => c.policy.fee_per_credit = value(k, v)?,
                "grades" => {
                    c.policy.grades = GradeScale::parse(v).map_err(|message| ConfigError::Value { key: k.clone(), message })?
                }
                "decline_suffix" => c.policy.decline_suffix = v.clone(),
                "default_capacity" => c.policy.default_capacity = value(k, v)?,
                "token_ttl_hours" => c.token_ttl_hours = value(k, v)?,
                "listen" => c.listen = v.clone(),
                "advertise_host" => c.advertise_host = Some(v.clone()),
                "registry" => c.registry = v.clone(),
                "db_dir" => c.db_dir = Some(PathBuf::from(v)),
                "admin_user" => c.admin_user = v.clone(),
                "admin_password" => c.admin_password = Some(v.clone()),
                "hash_iterations" => c.hash_iterations = value(k, v)?,
                "sync" => c.sync = value(k, v)?,
                _ => return Err(ConfigError::UnknownKey(k.clone())),
            }
        }
        if c.token_ttl_hours <= 0 {
            return Err(ConfigError::Value { key: "token_ttl_hours".into(), message: "must be positive".into() });
        }
        if c.hash_iterations == 0 {
            return Err(ConfigError::Value { key: "hash_iterations".into(), message: "must be positive".into() });
        }
        Ok(c)
    }

    /// Parses a whole file whose keys are all in the unnamed section.
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let sections = parse_sections(text)?;
        match sections.as_slice() {
            [(name, map)] if name.is_empty() => Config::from_map(map),
            _ => Err(ConfigError::Syntax { line: 0, message: "app config takes no sections".into() }),
        }
    }
}
