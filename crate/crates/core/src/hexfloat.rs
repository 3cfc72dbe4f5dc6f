//! Bit-exact text encoding of `f64` values.
//!
//! A value is written as the 16 lowercase hex digits of its IEEE-754 binary64
//! bit pattern (`1.0` is `3ff0000000000000`). No decimal conversion happens in
//! either direction, so every value, including `-0.0` and subnormals,
//! round-trips exactly.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numgrad::Matrix;

pub fn encode(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn decode(s: &str) -> Option<f64> {
    if s.len() != 16 {
        return None;
    }
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

pub fn encode_all(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| encode(v)).collect()
}

pub fn decode_all(values: &[String]) -> Option<Vec<f64>> {
    values.iter().map(|s| decode(s)).collect()
}

/// `#[serde(with = "hexfloat::scalar")]` for single `f64` fields.
pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        encode(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        decode(&text).ok_or_else(|| serde::de::Error::custom(format!("bad hex float {text:?}")))
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<String>,
}

/// `#[serde(with = "hexfloat::matrix")]`: shape metadata plus a flat hex array.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: encode_all(m.as_slice()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        use serde::de::Error;
        let repr = MatrixRepr::deserialize(d)?;
        let data = decode_all(&repr.data).ok_or_else(|| D::Error::custom("bad hex float in matrix"))?;
        Matrix::new(repr.rows, repr.cols, data).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_patterns() {
        assert_eq!(encode(1.0), "3ff0000000000000");
        assert_eq!(encode(-2.0), "c000000000000000");
        assert_eq!(decode("3fe0000000000000"), Some(0.5));
        assert_eq!(decode("3ff"), None);
        assert_eq!(decode("zzzzzzzzzzzzzzzz"), None);
    }

    proptest! {
        #[test]
        fn round_trips_every_bit_pattern(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assert_eq!(decode(&encode(v)).unwrap().to_bits(), bits);
        }
    }
}
