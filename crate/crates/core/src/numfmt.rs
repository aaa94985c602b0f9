//! Fixed 17-significant-digit float formatting for every data file we write.

use serde_json::{Number, Value};

/// `x` with 17 significant digits in scientific notation; non-finite values as `nan`/`inf`.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Rewrite every non-integer number of a JSON tree with [`f17`]; non-finite floats were
/// already mapped to `null` by serde_json.
pub fn fix_json_floats(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                return;
            }
            if let Some(x) = n.as_f64() {
                if let Ok(fixed) = f17(x).parse::<Number>() {
                    *n = fixed;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(fix_json_floats),
        Value::Object(map) => map.values_mut().for_each(fix_json_floats),
        _ => {}
    }
}

/// Pretty JSON with fixed-precision floats.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    fix_json_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
