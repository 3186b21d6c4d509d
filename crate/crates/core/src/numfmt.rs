//! Number formatting shared by the JSON and CSV writers.

use serde::Serializer;

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`;
/// JSON has no literal for them.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn serialize_extended_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_extended(x, s),
        None => s.serialize_none(),
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn csv_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
