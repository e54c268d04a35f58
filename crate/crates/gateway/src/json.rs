//! IDL-typed conversion between JSON bodies and middleware values.
//!
//! Records are objects keyed by field name, enums their case name, optionals
//! `null` or the inner value, bytes a lowercase hex string. Path and query
//! parameters use a text form: scalars as written, enums by case name and
//! all-string records joined with `:`.

use cis_middleware::{IdlDocument, IdlType, Value};
use serde_json::{Map, Number, Value as Json};

fn mismatch(t: &IdlType, j: &Json) -> String {
    let found = match j {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "array",
        Json::Object(_) => "object",
    };
    format!("expected {}, found {found}", describe(t))
}

fn describe(t: &IdlType) -> String {
    match t {
        IdlType::Optional(inner) => format!("optional {}", describe(inner)),
        IdlType::List(inner) => format!("list of {}", describe(inner)),
        IdlType::Record(n) | IdlType::Enum(n) => n.clone(),
        other => other.kind_name().to_string(),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

pub fn to_json(v: &Value, t: &IdlType, doc: &IdlDocument) -> Result<Json, String> {
    Ok(match (t, v) {
        (IdlType::Bool, Value::Bool(b)) => Json::Bool(*b),
        (IdlType::I32, Value::I32(n)) => Json::from(*n),
        (IdlType::I64, Value::I64(n)) => Json::from(*n),
        (IdlType::F64, Value::F64(x)) => Number::from_f64(*x).map(Json::Number).unwrap_or(Json::Null),
        (IdlType::String, Value::Str(s)) => Json::String(s.clone()),
        (IdlType::Bytes, Value::Bytes(b)) => Json::String(hex(b)),
        (IdlType::Optional(_), Value::Opt(None)) => Json::Null,
        (IdlType::Optional(inner), Value::Opt(Some(x))) => to_json(x, inner, doc)?,
        (IdlType::List(inner), Value::List(xs)) => {
            Json::Array(xs.iter().map(|x| to_json(x, inner, doc)).collect::<Result<_, _>>()?)
        }
        (IdlType::Enum(name), Value::Enum(i)) => {
            let def = doc.enum_def(name).ok_or_else(|| format!("unknown enum {name}"))?;
            Json::String(def.cases.get(*i as usize).ok_or_else(|| format!("{name} has no case {i}"))?.clone())
        }
        (IdlType::Record(name), Value::Record(fields)) => {
            let def = doc.record(name).ok_or_else(|| format!("unknown record {name}"))?;
            let mut out = Map::new();
            for f in &def.fields {
                let fv = fields.get(&f.name).ok_or_else(|| format!("{name} lacks field {}", f.name))?;
                out.insert(f.name.clone(), to_json(fv, &f.ty, doc)?);
            }
            Json::Object(out)
        }
        _ => return Err(format!("value does not match {}", describe(t))),
    })
}

pub fn from_json(j: &Json, t: &IdlType, doc: &IdlDocument) -> Result<Value, String> {
    Ok(match (t, j) {
        (IdlType::Optional(_), Json::Null) => Value::Opt(None),
        (IdlType::Optional(inner), _) => Value::some(from_json(j, inner, doc)?),
        (IdlType::Bool, Json::Bool(b)) => Value::Bool(*b),
        (IdlType::I32, Json::Number(n)) => Value::I32(
            n.as_i64().and_then(|x| i32::try_from(x).ok()).ok_or_else(|| format!("{n} is not a 32-bit integer"))?,
        ),
        (IdlType::I64, Json::Number(n)) => Value::I64(n.as_i64().ok_or_else(|| format!("{n} is not an integer"))?),
        (IdlType::F64, Json::Number(n)) => Value::F64(n.as_f64().ok_or_else(|| format!("{n} is not a number"))?),
        (IdlType::String, Json::String(s)) => Value::Str(s.clone()),
        (IdlType::Bytes, Json::String(s)) => Value::Bytes(unhex(s).ok_or("bytes must be hex")?),
        (IdlType::List(inner), Json::Array(xs)) => {
            Value::List(xs.iter().map(|x| from_json(x, inner, doc)).collect::<Result<_, _>>()?)
        }
        (IdlType::Enum(name), Json::String(s)) => enum_case(name, s, doc)?,
        (IdlType::Record(name), Json::Object(obj)) => {
            let def = doc.record(name).ok_or_else(|| format!("unknown record {name}"))?;
            if let Some(extra) = obj.keys().find(|k| def.field(k).is_none()) {
                return Err(format!("{name} has no field `{extra}`"));
            }
            let mut fields = Vec::with_capacity(def.fields.len());
            for f in &def.fields {
                let v = match obj.get(&f.name) {
                    Some(x) => from_json(x, &f.ty, doc).map_err(|e| format!("{}: {e}", f.name))?,
                    None if matches!(f.ty, IdlType::Optional(_)) => Value::Opt(None),
                    None => return Err(format!("{name} needs field `{}`", f.name)),
                };
                fields.push((f.name.clone(), v));
            }
            Value::Record(fields.into_iter().collect())
        }
        _ => return Err(mismatch(t, j)),
    })
}

fn enum_case(name: &str, s: &str, doc: &IdlDocument) -> Result<Value, String> {
    let def = doc.enum_def(name).ok_or_else(|| format!("unknown enum {name}"))?;
    def.index_of(s).map(Value::Enum).ok_or_else(|| format!("`{s}` is not one of {}", def.cases.join(", ")))
}

/// Parses a path segment or query value.
pub fn from_text(s: &str, t: &IdlType, doc: &IdlDocument) -> Result<Value, String> {
    Ok(match t {
        IdlType::Optional(inner) => Value::some(from_text(s, inner, doc)?),
        IdlType::Bool => Value::Bool(s.parse().map_err(|_| format!("`{s}` is not true or false"))?),
        IdlType::I32 => Value::I32(s.parse().map_err(|_| format!("`{s}` is not a 32-bit integer"))?),
        IdlType::I64 => Value::I64(s.parse().map_err(|_| format!("`{s}` is not an integer"))?),
        IdlType::F64 => Value::F64(s.parse().map_err(|_| format!("`{s}` is not a number"))?),
        IdlType::String => Value::str(s),
        IdlType::Bytes => Value::Bytes(unhex(s).ok_or("bytes must be hex")?),
        IdlType::Enum(name) => enum_case(name, s, doc)?,
        IdlType::Record(name) => {
            let def = doc.record(name).ok_or_else(|| format!("unknown record {name}"))?;
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != def.fields.len() || def.fields.iter().any(|f| f.ty != IdlType::String) {
                return Err(format!("`{s}` is not a {name} written as {}", field_names(def)));
            }
            Value::Record(def.fields.iter().zip(parts).map(|(f, p)| (f.name.clone(), Value::str(p))).collect())
        }
        IdlType::List(_) => return Err("lists cannot be given in a path or query".into()),
    })
}

fn field_names(def: &cis_middleware::idl::RecordDef) -> String {
    def.fields.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(":")
}

#[cfg(test)]
mod tests {
    use super::*;
    use cis_domain::contract;
    use serde_json::json;

    #[test]
    fn records_enums_and_optionals() {
        let doc = contract::doc();
        let t = IdlType::Record("OfferingRequest".into());
        let j = json!({"unit": "CS101", "campus": "Samabula", "term": "2024-S1", "capacity": 2, "teacher": null,
                       "timetable": [{"kind": "final_exam", "day": "fri", "start": "09:00", "end": "11:00", "room": "H"}]});
        let v = from_json(&j, &t, &doc).unwrap();
        assert_eq!(to_json(&v, &t, &doc).unwrap(), j);
        let missing_optional = json!({"unit": "CS101", "campus": "S", "term": "2024-S1", "capacity": 2, "timetable": []});
        assert!(from_json(&missing_optional, &t, &doc).is_ok());
        assert!(from_json(&json!({"unit": "CS101"}), &t, &doc).unwrap_err().contains("needs field"));
        let extra = json!({"unit": "CS101", "campus": "S", "term": "2024-S1", "capacity": 2, "timetable": [], "x": 1});
        assert!(from_json(&extra, &t, &doc).unwrap_err().contains("no field"));
        assert!(from_json(&json!("bogus"), &IdlType::Enum("Decision".into()), &doc).is_err());
        assert!(from_json(&json!(1u64 << 40), &IdlType::I32, &doc).is_err());
    }

    #[test]
    fn text_forms() {
        let doc = contract::doc();
        let k = from_text("CS101:Samabula:2024-S1", &IdlType::Record("OfferingKey".into()), &doc).unwrap();
        assert_eq!(
            to_json(&k, &IdlType::Record("OfferingKey".into()), &doc).unwrap(),
            serde_json::json!({"unit": "CS101", "campus": "Samabula", "term": "2024-S1"})
        );
        assert!(from_text("CS101:Samabula", &IdlType::Record("OfferingKey".into()), &doc).is_err());
        assert_eq!(from_text("pass_rates", &IdlType::Enum("ReportKind".into()), &doc).unwrap(), Value::Enum(1));
        assert_eq!(from_text("0a10", &IdlType::Bytes, &doc).unwrap(), Value::Bytes(vec![10, 16]));
    }
}
