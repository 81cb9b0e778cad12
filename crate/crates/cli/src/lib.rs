//! Canonical serialization for the command line binary.
//!
//! Reports must satisfy two properties the integration tests check: the same
//! inputs always produce byte-identical output, and parsing an emitted JSON
//! record then re-serializing it reproduces the original bytes. Both come
//! down to fixing an order for object keys and a single decimal rendering
//! per number: floats get 17 significant digits (enough to round-trip the
//! exact bit pattern), integers print plainly, and keys are emitted sorted.

use serde_json::Value;

/// Renders a finite float with 17 significant digits in scientific form.
pub fn json_float(x: f64) -> String {
    debug_assert!(x.is_finite(), "canonical JSON cannot hold {x}");
    format!("{x:.16e}")
}

/// Renders a float with 12 significant digits, the CSV precision.
pub fn csv_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// Quotes a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Serializes a JSON value in canonical form: object keys sorted, floats in
/// fixed scientific notation, no insignificant whitespace, one trailing
/// newline. Equal values always give equal bytes.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out.push('\n');
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                out.push_str(&json_float(n.as_f64().expect("JSON numbers are u64, i64, or f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("keys are valid strings"));
                out.push(':');
                write_value(&map[key.as_str()], out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_exactly() {
        for &x in &[0.0, -0.0, 0.5, 1.0 / 3.0, -2.718281828459045e-7, 6.02e23, f64::MIN_POSITIVE]
        {
            let s = json_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn canonical_form_is_stable_under_reparse() {
        let v = json!({
            "zeta": [1.0f64, 2u64, null, true],
            "alpha": {"b": 0.1f64, "a": "text, with comma"},
        });
        let once = canonical_json(&v);
        let reparsed: Value = serde_json::from_str(&once).unwrap();
        assert_eq!(canonical_json(&reparsed), once);
        let keys: Vec<usize> =
            ["\"alpha\"", "\"zeta\""].iter().map(|k| once.find(*k).unwrap()).collect();
        assert!(keys[0] < keys[1], "keys must be sorted: {once}");
    }

    #[test]
    fn integers_stay_integers() {
        let v = json!({"count": 512u64, "offset": -3i64});
        let s = canonical_json(&v);
        assert_eq!(s, "{\"count\":512,\"offset\":-3}\n");
    }

    #[test]
    fn csv_fields_quote_delimiters() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("uniform(0, 1)"), "\"uniform(0, 1)\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
