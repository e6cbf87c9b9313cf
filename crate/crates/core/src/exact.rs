//! Serde helpers for exact rationals: a rational is written as a pair of
//! decimal strings `["num", "den"]`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(q: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
    [q.numer().to_string(), q.denom().to_string()].serialize(ser)
}

pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
    let [n, d] = <[String; 2]>::deserialize(de)?;
    let n: BigInt = n.parse().map_err(D::Error::custom)?;
    let d: BigInt = d.parse().map_err(D::Error::custom)?;
    if d.is_zero() {
        return Err(D::Error::custom("zero denominator"));
    }
    Ok(BigRational::new(n, d))
}

/// A rational that serializes through this module, for use inside collections.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rat(#[serde(with = "self")] pub BigRational);

pub mod vec {
    use super::Rat;
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], ser: S) -> Result<S::Ok, S::Error> {
        v.iter().cloned().map(Rat).collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<BigRational>, D::Error> {
        Ok(Vec::<Rat>::deserialize(de)?.into_iter().map(|r| r.0).collect())
    }
}

/// Arbitrary-precision naturals as decimal strings.
pub mod big_uint {
    use num_bigint::BigUint;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        String::deserialize(de)?.parse().map_err(D::Error::custom)
    }
}
