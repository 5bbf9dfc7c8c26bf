//! Canonical serialization of run records: JSON with sorted keys in which
//! every float carries an exact hex-float twin, and numeric CSV.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value as Json};
use serde_value::Value;
use sha2::{Digest, Sha256};

use crate::instance::InstanceDescriptor;

/// Format `v` as a C99 hexadecimal float (`%a`), e.g. `0x1.8p+1`.
pub fn hexfloat(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    let esign = if exp >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{frac}p{esign}{}", exp.abs())
}

/// Inverse of [`hexfloat`]; also accepts any C99 hex float with a
/// normalised or denormalised leading digit that fits exactly.
pub fn parse_hexfloat(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (mant, exp) = rest.split_once('p')?;
    let exp: i32 = exp.parse().ok()?;
    let (lead, frac) = match mant.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant, ""),
    };
    if frac.len() > 13 || !matches!(lead, "0" | "1") {
        return None;
    }
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).ok()? << (4 * (13 - frac.len()))
    };
    let bits = match (lead, exp) {
        ("0", _) if frac_bits == 0 => 0,
        ("0", -1022) => frac_bits,
        ("1", e) if (-1022..=1023).contains(&e) => (((e + 1023) as u64) << 52) | frac_bits,
        _ => return None,
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}

fn float_to_json(v: f64) -> Json {
    let mut m = Map::new();
    m.insert(
        "dec".into(),
        Number::from_f64(v).map_or(Json::Null, Json::Number),
    );
    m.insert("hex".into(), Json::String(hexfloat(v)));
    Json::Object(m)
}

fn key_string(k: &Value) -> String {
    match k {
        Value::String(s) => s.clone(),
        Value::Char(c) => c.to_string(),
        other => match value_to_json(other) {
            Json::String(s) => s,
            j => j.to_string(),
        },
    }
}

/// Convert a serde value tree to JSON, wrapping floats as `{dec, hex}`.
pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => Json::Bool(*b),
        Value::U8(n) => Json::from(*n),
        Value::U16(n) => Json::from(*n),
        Value::U32(n) => Json::from(*n),
        Value::U64(n) => Json::from(*n),
        Value::I8(n) => Json::from(*n),
        Value::I16(n) => Json::from(*n),
        Value::I32(n) => Json::from(*n),
        Value::I64(n) => Json::from(*n),
        Value::F32(x) => float_to_json(*x as f64),
        Value::F64(x) => float_to_json(*x),
        Value::Char(c) => Json::String(c.to_string()),
        Value::String(s) => Json::String(s.clone()),
        Value::Unit | Value::Option(None) => Json::Null,
        Value::Option(Some(b)) | Value::Newtype(b) => value_to_json(b),
        Value::Seq(items) => Json::Array(items.iter().map(value_to_json).collect()),
        Value::Map(m) => Json::Object(
            m.iter()
                .map(|(k, v)| (key_string(k), value_to_json(v)))
                .collect(),
        ),
        Value::Bytes(b) => Json::Array(b.iter().map(|x| Json::from(*x)).collect()),
    }
}

/// Inverse of [`value_to_json`]: `{dec, hex}` objects become exact floats.
pub fn json_to_value(j: &Json) -> Value {
    match j {
        Json::Null => Value::Option(None),
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => {
            if let Some(u) = n.as_u64() {
                Value::U64(u)
            } else if let Some(i) = n.as_i64() {
                Value::I64(i)
            } else {
                Value::F64(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Json::String(s) => Value::String(s.clone()),
        Json::Array(a) => Value::Seq(a.iter().map(json_to_value).collect()),
        Json::Object(m) => {
            if m.len() == 2 {
                if let (Some(Json::String(h)), true) = (m.get("hex"), m.contains_key("dec")) {
                    if let Some(x) = parse_hexfloat(h) {
                        return Value::F64(x);
                    }
                }
            }
            Value::Map(
                m.iter()
                    .map(|(k, v)| (Value::String(k.clone()), json_to_value(v)))
                    .collect(),
            )
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadStats {
    pub evaluations: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

/// One command's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub config_hash: String,
    pub instance: Option<InstanceDescriptor>,
    pub operation: String,
    pub result: Value,
    pub quadrature: QuadStats,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot serialize: {0}")]
    Serialize(String),
    #[error("invalid run record: {0}")]
    Parse(String),
}

impl RunRecord {
    /// A record stamped with the current time and this build's version.
    pub fn new(
        operation: &str,
        config_hash: String,
        instance: Option<InstanceDescriptor>,
        result: &impl Serialize,
        quadrature: QuadStats,
    ) -> Result<Self, ReportError> {
        Ok(Self {
            tool: "hardylab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config_hash,
            instance,
            operation: operation.into(),
            result: serde_value::to_value(result)
                .map_err(|e| ReportError::Serialize(e.to_string()))?,
            quadrature,
        })
    }

    /// Deserialize the payload into a typed value.
    pub fn result_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, ReportError> {
        T::deserialize(self.result.clone()).map_err(|e| ReportError::Parse(e.to_string()))
    }
}

/// Any serializable value as canonical JSON (sorted keys, floats twinned).
pub fn to_canonical_json(v: &impl Serialize) -> Result<Json, ReportError> {
    let value = serde_value::to_value(v).map_err(|e| ReportError::Serialize(e.to_string()))?;
    Ok(value_to_json(&value))
}

/// Pretty, deterministic JSON bytes for a record.
pub fn emit_json(record: &RunRecord) -> Result<Vec<u8>, ReportError> {
    let json = to_canonical_json(record)?;
    let mut out =
        serde_json::to_vec_pretty(&json).map_err(|e| ReportError::Serialize(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn parse_json(bytes: &[u8]) -> Result<RunRecord, ReportError> {
    let json: Json =
        serde_json::from_slice(bytes).map_err(|e| ReportError::Parse(e.to_string()))?;
    RunRecord::deserialize(json_to_value(&json)).map_err(|e| ReportError::Parse(e.to_string()))
}

/// SHA-256 of the compact canonical JSON of `config`, as lowercase hex.
pub fn config_hash(config: &impl Serialize) -> Result<String, ReportError> {
    let json = to_canonical_json(config)?;
    let bytes = serde_json::to_vec(&json).map_err(|e| ReportError::Serialize(e.to_string()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Numeric CSV: a header row and one row per record, 17 significant digits.
pub fn emit_csv(header: &[&str], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| csv_number(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn csv_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hexfloat_examples() {
        assert_eq!(hexfloat(1.0), "0x1p+0");
        assert_eq!(hexfloat(3.0), "0x1.8p+1");
        assert_eq!(hexfloat(-0.1), "-0x1.999999999999ap-4");
        assert_eq!(hexfloat(0.0), "0x0p+0");
        assert_eq!(hexfloat(-0.0), "-0x0p+0");
        assert_eq!(hexfloat(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(hexfloat(f64::MAX), "0x1.fffffffffffffp+1023");
        assert_eq!(hexfloat(f64::INFINITY), "inf");
    }

    #[test]
    fn hexfloat_round_trips_edge_values() {
        for v in [
            0.0,
            -0.0,
            1.0,
            -2.5,
            5e-324,
            f64::MIN_POSITIVE,
            f64::MAX,
            f64::EPSILON,
            f64::NEG_INFINITY,
        ] {
            assert_eq!(
                parse_hexfloat(&hexfloat(v)).unwrap().to_bits(),
                v.to_bits(),
                "{v}"
            );
        }
        assert!(parse_hexfloat("nan").unwrap().is_nan());
        assert_eq!(parse_hexfloat("0x2p+0"), None);
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(emit_csv(&["a", "b"], &[]), b"a,b\n");
        let s = String::from_utf8(emit_csv(&["x"], &[vec![0.1], vec![f64::INFINITY]])).unwrap();
        assert_eq!(s, "x\n1.0000000000000001e-1\ninf\n");
    }

    #[test]
    fn config_hash_is_stable() {
        let a = std::collections::BTreeMap::from([("b", 1.0), ("a", 2.0)]);
        let b = std::collections::BTreeMap::from([("a", 2.0), ("b", 1.0)]);
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }
}
