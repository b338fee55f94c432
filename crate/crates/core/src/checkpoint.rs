//! Parameter snapshots with exact hexadecimal float encoding.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Constraint, Matrix, ParamStore};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckpointError {
    #[error("invalid hex float {0:?}")]
    BadFloat(String),
    #[error("checkpoint has no parameter named {0:?}")]
    MissingParam(String),
    #[error("parameter {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error("parameter {name:?} violates its constraint")]
    Infeasible { name: String },
    #[error("unsupported checkpoint: {0}")]
    Unsupported(String),
    #[error("malformed checkpoint JSON: {0}")]
    Json(String),
}

/// Formats `x` as a C99-style hexadecimal float, e.g. `0x1.8p+1` for 3.
pub fn encode_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    let esign = if exp < 0 { '-' } else { '+' };
    format!("{sign}0x{lead}{frac}p{esign}{}", exp.abs())
}

/// Inverse of [`encode_f64`]; accepts only that exact layout.
pub fn decode_f64(s: &str) -> Result<f64, CheckpointError> {
    let bad = || CheckpointError::BadFloat(s.to_string());
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let value = match body {
        "nan" => f64::NAN,
        "inf" => f64::INFINITY,
        _ => {
            let body = body.strip_prefix("0x").ok_or_else(bad)?;
            let (mant, exp) = body.split_once('p').ok_or_else(bad)?;
            let exp: i64 = exp.parse().map_err(|_| bad())?;
            let (lead, frac) = match mant.split_once('.') {
                Some((l, f)) => (l, f),
                None => (mant, ""),
            };
            if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(bad());
            }
            let frac_bits = if frac.is_empty() {
                0
            } else {
                u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len()))
            };
            match lead {
                "0" if frac_bits == 0 => 0.0,
                "0" if exp == -1022 => f64::from_bits(frac_bits),
                "1" if (-1022..=1023).contains(&exp) => {
                    f64::from_bits((((exp + 1023) as u64) << 52) | frac_bits)
                }
                _ => return Err(bad()),
            }
        }
    };
    Ok(if neg { -value } else { value })
}

pub const FORMAT: &str = "nst-checkpoint-v1";

/// Serialized model: geometry tag, resolved configuration and every
/// parameter tensor with hex-float values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub geometry: String,
    pub config: serde_json::Value,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_exponent: Option<String>,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| CheckpointError::Json(e.to_string()))?;
        if ck.format != FORMAT {
            return Err(CheckpointError::Unsupported(format!("format {:?}", ck.format)));
        }
        Ok(ck)
    }
}

/// One named tensor in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub constraint: String,
    pub values: Vec<String>,
}

fn constraint_tag(c: Constraint) -> String {
    match c {
        Constraint::Free => "free".into(),
        Constraint::LowerBound(lo) => format!("lower_bound {}", encode_f64(lo)),
        Constraint::Interval(lo, hi) => format!("interval {} {}", encode_f64(lo), encode_f64(hi)),
    }
}

pub fn snapshot(store: &ParamStore) -> Vec<ParamRecord> {
    store
        .iter()
        .map(|(_, p)| ParamRecord {
            name: p.name.clone(),
            rows: p.value.rows(),
            cols: p.value.cols(),
            constraint: constraint_tag(p.constraint),
            values: p.value.data().iter().map(|&x| encode_f64(x)).collect(),
        })
        .collect()
}

/// Overwrites every parameter of `store` with the record of the same name.
pub fn restore(store: &mut ParamStore, records: &[ParamRecord]) -> Result<(), CheckpointError> {
    for p in store.iter_mut() {
        let rec = records
            .iter()
            .find(|r| r.name == p.name)
            .ok_or_else(|| CheckpointError::MissingParam(p.name.clone()))?;
        let expected = p.value.shape();
        if (rec.rows, rec.cols) != expected || rec.values.len() != rec.rows * rec.cols {
            return Err(CheckpointError::ShapeMismatch {
                name: rec.name.clone(),
                found: (rec.rows, rec.cols),
                expected,
            });
        }
        let data = rec
            .values
            .iter()
            .map(|v| decode_f64(v))
            .collect::<Result<Vec<_>, _>>()?;
        let value = Matrix::from_vec(rec.rows, rec.cols, data);
        if !p.constraint.is_satisfied(&value) {
            return Err(CheckpointError::Infeasible {
                name: rec.name.clone(),
            });
        }
        p.value = value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encodings() {
        assert_eq!(encode_f64(3.0), "0x1.8p+1");
        assert_eq!(encode_f64(1.0), "0x1p+0");
        assert_eq!(encode_f64(-0.5), "-0x1p-1");
        assert_eq!(encode_f64(0.1), "0x1.999999999999ap-4");
        assert_eq!(encode_f64(0.0), "0x0p+0");
        assert_eq!(encode_f64(-0.0), "-0x0p+0");
        assert_eq!(encode_f64(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert!(decode_f64("0x1.8").is_err());
        assert!(decode_f64("0x2p+0").is_err());
        assert!(decode_f64("1.5").is_err());
    }

    proptest! {
        #[test]
        fn round_trips_every_bit_pattern(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            let back = decode_f64(&encode_f64(x)).unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), bits);
            }
        }
    }
}
