//! The shared service contract and its companion tables.

use std::sync::{Arc, OnceLock};

use cis_middleware::{parse_idl, IdlDocument};

/// Service contract in IDL form.
pub const IDL: &str = include_str!("../../../contract/fnucis.idl");
/// `code <TAB> http status <TAB> message`, one error code per line.
pub const ERROR_CODES: &str = include_str!("../../../contract/error_codes.tsv");
/// Operation by role authorization matrix.
pub const CAPABILITY_MATRIX: &str = include_str!("../../../contract/capability_matrix.tsv");

pub fn doc() -> Arc<IdlDocument> {
    static DOC: OnceLock<Arc<IdlDocument>> = OnceLock::new();
    DOC.get_or_init(|| Arc::new(parse_idl(IDL).expect("contract IDL is valid"))).clone()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCode {
    pub code: String,
    pub status: u16,
    pub message: String,
}

/// Parses a tab-separated error table; `#` lines are comments.
pub fn parse_error_table(text: &str) -> Result<Vec<ErrorCode>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(format!("line {}: expected 3 fields", i + 1));
        }
        let status = f[1].parse().map_err(|_| format!("line {}: bad status `{}`", i + 1, f[1]))?;
        out.push(ErrorCode { code: f[0].to_string(), status, message: f[2].to_string() });
    }
    Ok(out)
}

pub fn error_table() -> &'static [ErrorCode] {
    static TABLE: OnceLock<Vec<ErrorCode>> = OnceLock::new();
    TABLE.get_or_init(|| parse_error_table(ERROR_CODES).expect("error table is valid"))
}

pub fn error_entry(code: &str) -> Option<&'static ErrorCode> {
    error_table().iter().find(|e| e.code == code)
}

/// One row of the authorization matrix: an `Interface.method` and the
/// roles (in [`crate::Role::ALL`] order) allowed to call it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixRow {
    pub operation: String,
    pub option: String,
    pub allowed: Vec<bool>,
}

pub fn parse_matrix(text: &str) -> Result<Vec<MatrixRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty matrix")?;
    let roles: Vec<&str> = header.trim_start_matches("# ").split('\t').skip(2).collect();
    let expected: Vec<&str> = crate::Role::ALL.iter().map(|r| r.as_str()).collect();
    if roles != expected {
        return Err(format!("matrix roles {roles:?} differ from {expected:?}"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != roles.len() + 2 {
            return Err(format!("line {}: expected {} fields", i + 2, roles.len() + 2));
        }
        let allowed = f[2..]
            .iter()
            .map(|c| match *c {
                "Y" => Ok(true),
                "N" => Ok(false),
                other => Err(format!("line {}: cell `{other}` is not Y or N", i + 2)),
            })
            .collect::<Result<_, _>>()?;
        out.push(MatrixRow { operation: f[0].to_string(), option: f[1].to_string(), allowed });
    }
    Ok(out)
}
