//! Interface definition language: document model, parser and pretty-printer.
//!
//! The grammar is deliberately small:
//!
//! ```text
//! record Pair { a: i32; b: i32; }
//! enum Colour { red, green, blue }
//! interface Echo {
//!     echo(p: Pair) -> Pair throws bad-pair, other;
//! }
//! ```
//!
//! `//` starts a comment that runs to the end of the line. Builtin types are
//! `bool`, `i32`, `i64`, `f64`, `string`, `bytes`, `optional<T>` and `list<T>`;
//! any other identifier must name a record or enum declared in the same
//! document (declaration order does not matter).

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IdlType {
    Bool,
    I32,
    I64,
    F64,
    String,
    Bytes,
    Optional(Box<IdlType>),
    List(Box<IdlType>),
    Record(String),
    Enum(String),
}

impl IdlType {
    pub fn optional(inner: IdlType) -> Self {
        IdlType::Optional(Box::new(inner))
    }

    pub fn list(inner: IdlType) -> Self {
        IdlType::List(Box::new(inner))
    }

    /// Kind name as used in error messages and capture dumps.
    pub fn kind_name(&self) -> &'static str {
        match self {
            IdlType::Bool => "bool",
            IdlType::I32 => "i32",
            IdlType::I64 => "i64",
            IdlType::F64 => "f64",
            IdlType::String => "string",
            IdlType::Bytes => "bytes",
            IdlType::Optional(_) => "optional",
            IdlType::List(_) => "list",
            IdlType::Record(_) => "record",
            IdlType::Enum(_) => "enum",
        }
    }
}

impl fmt::Display for IdlType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdlType::Optional(inner) => write!(f, "optional<{inner}>"),
            IdlType::List(inner) => write!(f, "list<{inner}>"),
            IdlType::Record(name) | IdlType::Enum(name) => f.write_str(name),
            other => f.write_str(other.kind_name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: IdlType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl RecordDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub name: String,
    pub cases: Vec<String>,
}

impl EnumDef {
    pub fn index_of(&self, case: &str) -> Option<u32> {
        self.cases.iter().position(|c| c == case).map(|i| i as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSignature {
    pub name: String,
    pub params: Vec<FieldDef>,
    pub returns: IdlType,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceDef {
    pub name: String,
    pub methods: Vec<MethodSignature>,
}

impl InterfaceDef {
    pub fn method(&self, name: &str) -> Option<&MethodSignature> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeclKind {
    Record(usize),
    Enum(usize),
    Interface(usize),
}

/// A parsed and validated set of records, enums and interfaces.
///
/// Equality is structural: two documents are equal when they declare the same
/// items in the same order.
#[derive(Debug, Clone, Default)]
pub struct IdlDocument {
    pub interfaces: Vec<InterfaceDef>,
    pub records: Vec<RecordDef>,
    pub enums: Vec<EnumDef>,
    index: HashMap<String, DeclKind>,
}

impl PartialEq for IdlDocument {
    fn eq(&self, other: &Self) -> bool {
        self.interfaces == other.interfaces
            && self.records == other.records
            && self.enums == other.enums
    }
}

impl IdlDocument {
    /// Builds a document from already-resolved declarations and validates it.
    pub fn new(
        interfaces: Vec<InterfaceDef>,
        records: Vec<RecordDef>,
        enums: Vec<EnumDef>,
    ) -> Result<Self, IdlError> {
        let mut doc = IdlDocument {
            interfaces,
            records,
            enums,
            index: HashMap::new(),
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn record(&self, name: &str) -> Option<&RecordDef> {
        match self.index.get(name) {
            Some(DeclKind::Record(i)) => self.records.get(*i),
            _ => None,
        }
    }

    pub fn enum_def(&self, name: &str) -> Option<&EnumDef> {
        match self.index.get(name) {
            Some(DeclKind::Enum(i)) => self.enums.get(*i),
            _ => None,
        }
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDef> {
        match self.index.get(name) {
            Some(DeclKind::Interface(i)) => self.interfaces.get(*i),
            _ => None,
        }
    }

    pub fn method(&self, interface: &str, method: &str) -> Option<&MethodSignature> {
        self.interface(interface).and_then(|i| i.method(method))
    }

    /// True when `ty` only references declarations present in this document.
    pub fn resolves(&self, ty: &IdlType) -> bool {
        match ty {
            IdlType::Optional(inner) | IdlType::List(inner) => self.resolves(inner),
            IdlType::Record(name) => self.record(name).is_some(),
            IdlType::Enum(name) => self.enum_def(name).is_some(),
            _ => true,
        }
    }

    /// Appends every declaration of `other`, failing on any name clash.
    pub fn merge(&self, other: &IdlDocument) -> Result<IdlDocument, IdlError> {
        let mut interfaces = self.interfaces.clone();
        interfaces.extend(other.interfaces.iter().cloned());
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        let mut enums = self.enums.clone();
        enums.extend(other.enums.iter().cloned());
        IdlDocument::new(interfaces, records, enums)
    }

    fn validate(&mut self) -> Result<(), IdlError> {
        self.index.clear();
        let decls = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (&r.name, DeclKind::Record(i)))
            .chain(self.enums.iter().enumerate().map(|(i, e)| (&e.name, DeclKind::Enum(i))))
            .chain(
                self.interfaces
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (&d.name, DeclKind::Interface(i))),
            );
        for (name, kind) in decls {
            check_identifier(name)?;
            if builtin_type(name).is_some() || self.index.insert(name.clone(), kind).is_some() {
                return Err(IdlError::NameClash(name.clone()));
            }
        }

        for record in &self.records {
            unique(record.fields.iter().map(|f| &f.name), &record.name)?;
            for field in &record.fields {
                check_identifier(&field.name)?;
                self.check_type(&field.ty)?;
            }
        }
        for e in &self.enums {
            unique(e.cases.iter(), &e.name)?;
            for case in &e.cases {
                check_identifier(case)?;
            }
        }
        for iface in &self.interfaces {
            unique(iface.methods.iter().map(|m| &m.name), &iface.name)?;
            for m in &iface.methods {
                check_identifier(&m.name)?;
                let scope = format!("{}.{}", iface.name, m.name);
                unique(m.params.iter().map(|p| &p.name), &scope)?;
                unique(m.errors.iter(), &scope)?;
                for p in &m.params {
                    check_identifier(&p.name)?;
                    self.check_type(&p.ty)?;
                }
                self.check_type(&m.returns)?;
            }
        }
        self.check_acyclic()
    }

    fn check_type(&self, ty: &IdlType) -> Result<(), IdlError> {
        if self.resolves(ty) {
            Ok(())
        } else {
            Err(IdlError::UnresolvedType(ty.to_string()))
        }
    }

    fn check_acyclic(&self) -> Result<(), IdlError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        for r in &self.records {
            self.visit(&r.name, &mut state)?;
        }
        Ok(())
    }

    fn visit<'a>(&'a self, name: &'a str, state: &mut HashMap<&'a str, u8>) -> Result<(), IdlError> {
        match state.get(name) {
            Some(2) => return Ok(()),
            Some(1) => return Err(IdlError::RecursiveRecord(name.to_string())),
            _ => {}
        }
        state.insert(name, 1);
        let record = self.record(name).expect("validated");
        for field in &record.fields {
            let mut referenced = Vec::new();
            records_in(&field.ty, &mut referenced);
            for r in referenced {
                self.visit(r, state)?;
            }
        }
        state.insert(name, 2);
        Ok(())
    }
}

// Lists are allowed to be empty and optionals absent, but both still count as
// containment here: a record may not reach itself through any field path.
fn records_in<'a>(ty: &'a IdlType, out: &mut Vec<&'a str>) {
    match ty {
        IdlType::Record(name) => out.push(name),
        IdlType::Optional(inner) | IdlType::List(inner) => records_in(inner, out),
        _ => {}
    }
}

fn unique<'a>(names: impl Iterator<Item = &'a String>, scope: &str) -> Result<(), IdlError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(IdlError::NameClash(format!("{scope}.{n}")));
        }
    }
    Ok(())
}

fn check_identifier(name: &str) -> Result<(), IdlError> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(IdlError::InvalidName(name.to_string()))
    }
}

fn builtin_type(name: &str) -> Option<IdlType> {
    Some(match name {
        "bool" => IdlType::Bool,
        "i32" => IdlType::I32,
        "i64" => IdlType::I64,
        "f64" => IdlType::F64,
        "string" => IdlType::String,
        "bytes" => IdlType::Bytes,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdlError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("duplicate name `{0}`")]
    NameClash(String),
    #[error("unresolved type `{0}`")]
    UnresolvedType(String),
    #[error("record `{0}` contains itself")]
    RecursiveRecord(String),
    #[error("invalid identifier `{0}`")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, IdlError> {
    let mut out = Vec::new();
    let mut chars = source.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            chars.next();
            col += 1;
        } else if c == '/' {
            chars.next();
            col += 1;
            if chars.peek() != Some(&'/') {
                return Err(IdlError::Syntax { line: tl, col: tc, message: "expected `//`".into() });
            }
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let mut ident = String::new();
            while let Some(&c) = chars.peek() {
                // `-` only appears inside error codes; `->` always follows `)`.
                let dash = c == '-' && !ident.is_empty();
                if c.is_ascii_alphanumeric() || c == '_' || dash {
                    ident.push(c);
                    chars.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(ident), line: tl, col: tc });
        } else {
            chars.next();
            col += 1;
            let punct = match c {
                '{' => "{",
                '}' => "}",
                '(' => "(",
                ')' => ")",
                '<' => "<",
                '>' => ">",
                ':' => ":",
                ';' => ";",
                ',' => ",",
                '-' if chars.peek() == Some(&'>') => {
                    chars.next();
                    col += 1;
                    "->"
                }
                other => {
                    return Err(IdlError::Syntax {
                        line: tl,
                        col: tc,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            };
            out.push(Token { tok: Tok::Punct(punct), line: tl, col: tc });
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Unresolved type expression as written in the source.
enum TypeExpr {
    Builtin(IdlType),
    Optional(Box<TypeExpr>),
    List(Box<TypeExpr>),
    Named(String),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, IdlError> {
        let t = self.peek();
        Err(IdlError::Syntax { line: t.line, col: t.col, message: message.into() })
    }

    fn describe(&self) -> String {
        match &self.peek().tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect(&mut self, punct: &'static str) -> Result<(), IdlError> {
        if self.peek().tok == Tok::Punct(punct) {
            self.next();
            Ok(())
        } else {
            let found = self.describe();
            self.error(format!("expected `{punct}`, found {found}"))
        }
    }

    fn eat(&mut self, punct: &'static str) -> bool {
        if self.peek().tok == Tok::Punct(punct) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, IdlError> {
        if let Tok::Ident(s) = &self.peek().tok {
            if s.contains('-') {
                return self.error(format!("`{s}` is not a valid identifier"));
            }
            let s = s.clone();
            self.next();
            Ok(s)
        } else {
            let found = self.describe();
            self.error(format!("expected identifier, found {found}"))
        }
    }

    fn error_code(&mut self) -> Result<String, IdlError> {
        if let Tok::Ident(s) = &self.peek().tok {
            let s = s.clone();
            self.next();
            Ok(s)
        } else {
            let found = self.describe();
            self.error(format!("expected error code, found {found}"))
        }
    }

    fn type_expr(&mut self) -> Result<TypeExpr, IdlError> {
        let name = self.ident()?;
        match name.as_str() {
            "optional" | "list" => {
                self.expect("<")?;
                let inner = Box::new(self.type_expr()?);
                self.expect(">")?;
                Ok(if name == "optional" { TypeExpr::Optional(inner) } else { TypeExpr::List(inner) })
            }
            other => Ok(match builtin_type(other) {
                Some(t) => TypeExpr::Builtin(t),
                None => TypeExpr::Named(name),
            }),
        }
    }

    fn fields(&mut self) -> Result<Vec<(String, TypeExpr)>, IdlError> {
        let mut fields = Vec::new();
        while !self.eat("}") {
            let name = self.ident()?;
            self.expect(":")?;
            let ty = self.type_expr()?;
            self.expect(";")?;
            fields.push((name, ty));
        }
        Ok(fields)
    }
}

struct RawMethod {
    name: String,
    params: Vec<(String, TypeExpr)>,
    returns: TypeExpr,
    errors: Vec<String>,
}

/// Parses and validates an IDL source text.
pub fn parse_idl(source: &str) -> Result<IdlDocument, IdlError> {
    let mut p = Parser { tokens: lex(source)?, pos: 0 };
    let mut raw_records: Vec<(String, Vec<(String, TypeExpr)>)> = Vec::new();
    let mut enums = Vec::new();
    let mut raw_ifaces: Vec<(String, Vec<RawMethod>)> = Vec::new();

    loop {
        let keyword = match &p.peek().tok {
            Tok::Eof => break,
            Tok::Ident(k) => k.clone(),
            Tok::Punct(_) => {
                let found = p.describe();
                return p.error(format!("expected `record`, `enum` or `interface`, found {found}"));
            }
        };
        p.next();
        match keyword.as_str() {
            "record" => {
                let name = p.ident()?;
                p.expect("{")?;
                raw_records.push((name, p.fields()?));
            }
            "enum" => {
                let name = p.ident()?;
                p.expect("{")?;
                let mut cases = Vec::new();
                while !p.eat("}") {
                    cases.push(p.ident()?);
                    if !p.eat(",") {
                        p.expect("}")?;
                        break;
                    }
                }
                if cases.is_empty() {
                    return p.error(format!("enum `{name}` has no cases"));
                }
                enums.push(EnumDef { name, cases });
            }
            "interface" => {
                let name = p.ident()?;
                p.expect("{")?;
                let mut methods = Vec::new();
                while !p.eat("}") {
                    let mname = p.ident()?;
                    p.expect("(")?;
                    let mut params = Vec::new();
                    if !p.eat(")") {
                        loop {
                            let pname = p.ident()?;
                            p.expect(":")?;
                            params.push((pname, p.type_expr()?));
                            if p.eat(")") {
                                break;
                            }
                            p.expect(",")?;
                        }
                    }
                    p.expect("->")?;
                    let returns = p.type_expr()?;
                    let mut errors = Vec::new();
                    if matches!(&p.peek().tok, Tok::Ident(k) if k == "throws") {
                        p.next();
                        loop {
                            errors.push(p.error_code()?);
                            if !p.eat(",") {
                                break;
                            }
                        }
                    }
                    p.expect(";")?;
                    methods.push(RawMethod { name: mname, params, returns, errors });
                }
                raw_ifaces.push((name, methods));
            }
            other => {
                p.pos -= 1;
                return p.error(format!("expected `record`, `enum` or `interface`, found `{other}`"));
            }
        }
    }

    let enum_names: HashSet<String> = enums.iter().map(|e| e.name.clone()).collect();
    let resolve = |expr: TypeExpr| resolve_expr(expr, &enum_names);
    let records = raw_records
        .into_iter()
        .map(|(name, fields)| RecordDef {
            name,
            fields: fields.into_iter().map(|(n, t)| FieldDef { name: n, ty: resolve(t) }).collect(),
        })
        .collect();
    let interfaces = raw_ifaces
        .into_iter()
        .map(|(name, methods)| InterfaceDef {
            name,
            methods: methods
                .into_iter()
                .map(|m| MethodSignature {
                    name: m.name,
                    params: m.params.into_iter().map(|(n, t)| FieldDef { name: n, ty: resolve(t) }).collect(),
                    returns: resolve(m.returns),
                    errors: m.errors,
                })
                .collect(),
        })
        .collect();
    IdlDocument::new(interfaces, records, enums)
}

// Names not declared as enums are taken as records; validation then reports
// anything that is neither as unresolved.
fn resolve_expr(expr: TypeExpr, enums: &HashSet<String>) -> IdlType {
    match expr {
        TypeExpr::Builtin(t) => t,
        TypeExpr::Optional(inner) => IdlType::Optional(Box::new(resolve_expr(*inner, enums))),
        TypeExpr::List(inner) => IdlType::List(Box::new(resolve_expr(*inner, enums))),
        TypeExpr::Named(n) if enums.contains(&n) => IdlType::Enum(n),
        TypeExpr::Named(n) => IdlType::Record(n),
    }
}

/// Renders a document in canonical form. Parsing the output yields an equal document.
pub fn pretty_print(doc: &IdlDocument) -> String {
    let mut out = String::new();
    for e in &doc.enums {
        out.push_str(&format!("enum {} {{ {} }}\n\n", e.name, e.cases.join(", ")));
    }
    for r in &doc.records {
        out.push_str(&format!("record {} {{\n", r.name));
        for f in &r.fields {
            out.push_str(&format!("    {}: {};\n", f.name, f.ty));
        }
        out.push_str("}\n\n");
    }
    for i in &doc.interfaces {
        out.push_str(&format!("interface {} {{\n", i.name));
        for m in &i.methods {
            let params: Vec<String> = m.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
            out.push_str(&format!("    {}({}) -> {}", m.name, params.join(", "), m.returns));
            if !m.errors.is_empty() {
                out.push_str(&format!(" throws {}", m.errors.join(", ")));
            }
            out.push_str(";\n");
        }
        out.push_str("}\n\n");
    }
    out
}

impl fmt::Display for IdlDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
