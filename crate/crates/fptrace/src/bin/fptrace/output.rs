//! Output formatting: JSON and CSV with floats printed to 12 significant
//! digits, so repeated runs diff cleanly.

use serde::Serialize;
use serde_json::Value;

/// `%.12g`-style rendering: 12 significant digits, plain notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        // JSON has no literals for these; mirror serde_json.
        return "null".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let plain = format!("{x:.decimals$}");
        let trimmed = if plain.contains('.') {
            plain.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            plain
        };
        trimmed
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    out.push_str(&sig12(f));
                } else {
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let inline = items
                .iter()
                .all(|i| matches!(i, Value::Number(_) | Value::Bool(_) | Value::Null));
            if inline {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_json(out, item, 0);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&"  ".repeat(indent + 1));
                    write_json(out, item, indent + 1);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("key encodes"));
                out.push_str(": ");
                write_json(out, item, indent + 1);
                if k + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad);
            out.push('}');
        }
    }
}

/// Pretty JSON with deterministic float formatting. Struct field order is
/// preserved.
pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_json(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// Flatten a serialized struct into dotted `key,value` CSV lines.
pub fn to_flat_csv<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut rows = Vec::new();
    flatten("", &v, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, val) in rows {
        out.push_str(&k);
        out.push(',');
        out.push_str(&val);
        out.push('\n');
    }
    Ok(out)
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            for (key, item) in map {
                flatten(&join(key), item, rows);
            }
        }
        Value::Array(items) => {
            for (idx, item) in items.iter().enumerate() {
                flatten(&join(&idx.to_string()), item, rows);
            }
        }
        Value::Number(n) => {
            let s = if n.is_f64() {
                sig12(n.as_f64().expect("float"))
            } else {
                n.to_string()
            };
            rows.push((prefix.to_string(), s));
        }
        Value::Bool(b) => rows.push((prefix.to_string(), b.to_string())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), "null".into())),
    }
}
