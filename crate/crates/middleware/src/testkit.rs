//! Random generators used as test oracles for the codec, framing and parser.
//!
//! These are written against the type model only and never call into the
//! codec, so round-trip checks built on them stay independent.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::idl::{parse_idl, EnumDef, FieldDef, IdlDocument, IdlType, InterfaceDef, MethodSignature, RecordDef};
use crate::value::Value;
use crate::wire::{MessageKind, WireMessage};

/// Contract with nested records and enums used by the generators.
pub const FIXTURE_IDL: &str = r#"
enum Colour { red, green, blue }
enum Single { only }
record Pair { a: i32; b: i32; }
record Empty {}
record Nested {
    name: string;
    pair: Pair;
    tags: list<string>;
    colour: optional<Colour>;
    blob: bytes;
    ratio: f64;
    children: list<Pair>;
    empty: Empty;
}
record Outer { inner: optional<Nested>; flags: list<bool>; id: i64; single: Single; }
interface Echo { echo(p: Pair) -> Pair; }
"#;

pub fn fixture_doc() -> IdlDocument {
    parse_idl(FIXTURE_IDL).expect("fixture IDL is valid")
}

/// One representative type per [`IdlType`] kind, in kind order.
pub fn kind_samples() -> Vec<IdlType> {
    vec![
        IdlType::Bool,
        IdlType::I32,
        IdlType::I64,
        IdlType::F64,
        IdlType::String,
        IdlType::Bytes,
        IdlType::optional(IdlType::Record("Pair".into())),
        IdlType::list(IdlType::optional(IdlType::String)),
        IdlType::Record("Outer".into()),
        IdlType::Enum("Colour".into()),
    ]
}

fn random_f64<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..6) {
        0 => f64::NAN,
        1 => f64::INFINITY,
        2 => -0.0,
        3 => f64::MIN_POSITIVE / 2.0,
        4 => f64::from_bits(rng.gen()),
        _ => rng.gen_range(-1e9..1e9),
    }
}

fn random_string<R: Rng>(rng: &mut R) -> String {
    const POOL: &[char] = &['a', 'Z', '0', ' ', 'é', 'ß', '中', '🎓', '\n', '"'];
    let len = rng.gen_range(0..12);
    (0..len).map(|_| *POOL.choose(rng).expect("non-empty")).collect()
}

/// Random value conforming to `t` in `doc`.
pub fn random_value<R: Rng>(rng: &mut R, t: &IdlType, doc: &IdlDocument, depth: u32) -> Value {
    match t {
        IdlType::Bool => Value::Bool(rng.gen()),
        IdlType::I32 => Value::I32(rng.gen()),
        IdlType::I64 => Value::I64(rng.gen()),
        IdlType::F64 => Value::F64(random_f64(rng)),
        IdlType::String => Value::Str(random_string(rng)),
        IdlType::Bytes => {
            let len = rng.gen_range(0..24);
            Value::Bytes((0..len).map(|_| rng.gen()).collect())
        }
        IdlType::Optional(inner) => {
            if depth == 0 || rng.gen_bool(0.3) {
                Value::Opt(None)
            } else {
                Value::some(random_value(rng, inner, doc, depth - 1))
            }
        }
        IdlType::List(inner) => {
            let len = if depth == 0 { 0 } else { rng.gen_range(0..5) };
            Value::List((0..len).map(|_| random_value(rng, inner, doc, depth - 1)).collect())
        }
        IdlType::Record(name) => {
            let def = doc.record(name).expect("record declared");
            Value::Record(
                def.fields
                    .iter()
                    .map(|f| (f.name.clone(), random_value(rng, &f.ty, doc, depth.saturating_sub(1))))
                    .collect(),
            )
        }
        IdlType::Enum(name) => {
            let def = doc.enum_def(name).expect("enum declared");
            Value::Enum(rng.gen_range(0..def.cases.len() as u32))
        }
    }
}

pub fn random_message<R: Rng>(rng: &mut R, max_body: usize) -> WireMessage {
    let kind = *MessageKind::ALL.choose(rng).expect("non-empty");
    let len = rng.gen_range(0..=max_body);
    WireMessage {
        kind,
        request_id: rng.gen(),
        body: (0..len).map(|_| rng.gen()).collect(),
    }
}

fn random_type<R: Rng>(rng: &mut R, records: &[String], enums: &[String], depth: u32) -> IdlType {
    let pick = rng.gen_range(0..if depth == 0 { 8 } else { 10 });
    match pick {
        0 => IdlType::Bool,
        1 => IdlType::I32,
        2 => IdlType::I64,
        3 => IdlType::F64,
        4 => IdlType::String,
        5 => IdlType::Bytes,
        6 if !records.is_empty() => IdlType::Record(records.choose(rng).expect("non-empty").clone()),
        7 if !enums.is_empty() => IdlType::Enum(enums.choose(rng).expect("non-empty").clone()),
        8 => IdlType::optional(random_type(rng, records, enums, depth - 1)),
        9 => IdlType::list(random_type(rng, records, enums, depth - 1)),
        _ => IdlType::String,
    }
}

/// Random valid document. Records only reference earlier records, which
/// keeps the containment graph acyclic.
pub fn random_document<R: Rng>(rng: &mut R) -> IdlDocument {
    let enums: Vec<EnumDef> = (0..rng.gen_range(0..3))
        .map(|i| EnumDef {
            name: format!("E{i}"),
            cases: (0..rng.gen_range(1..4)).map(|c| format!("case{c}")).collect(),
        })
        .collect();
    let enum_names: Vec<String> = enums.iter().map(|e| e.name.clone()).collect();
    let mut records = Vec::new();
    let mut record_names: Vec<String> = Vec::new();
    for i in 0..rng.gen_range(0..4) {
        let fields = (0..rng.gen_range(0..4))
            .map(|f| FieldDef { name: format!("f{f}"), ty: random_type(rng, &record_names, &enum_names, 2) })
            .collect();
        let name = format!("R{i}");
        records.push(RecordDef { name: name.clone(), fields });
        record_names.push(name);
    }
    let interfaces = (0..rng.gen_range(0..3))
        .map(|i| InterfaceDef {
            name: format!("I{i}"),
            methods: (0..rng.gen_range(0..3))
                .map(|m| MethodSignature {
                    name: format!("m{m}"),
                    params: (0..rng.gen_range(0..3))
                        .map(|p| FieldDef { name: format!("p{p}"), ty: random_type(rng, &record_names, &enum_names, 2) })
                        .collect(),
                    returns: random_type(rng, &record_names, &enum_names, 2),
                    errors: (0..rng.gen_range(0..3)).map(|e| format!("err-{e}")).collect(),
                })
                .collect(),
        })
        .collect();
    IdlDocument::new(interfaces, records, enums).expect("generated document is valid")
}
