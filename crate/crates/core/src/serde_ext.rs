//! JSON encodings for reals that may be infinite.
//!
//! Finite values stay numbers; `±∞` and NaN become the strings `"inf"`,
//! `"-inf"` and `"nan"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Number(f64),
    Text(String),
}

fn to_repr<T: Real>(v: T) -> Repr {
    let x = v.as_f64();
    if x.is_finite() {
        Repr::Number(x)
    } else if x.is_nan() {
        Repr::Text("nan".into())
    } else if x > 0.0 {
        Repr::Text("inf".into())
    } else {
        Repr::Text("-inf".into())
    }
}

fn from_repr<T: Real, E: serde::de::Error>(r: Repr) -> Result<T, E> {
    match r {
        Repr::Number(x) => Ok(T::lit(x)),
        Repr::Text(s) => match s.as_str() {
            "inf" => Ok(T::lit(f64::INFINITY)),
            "-inf" => Ok(T::lit(f64::NEG_INFINITY)),
            "nan" => Ok(T::lit(f64::NAN)),
            other => Err(E::custom(format!("expected a number, \"inf\", \"-inf\" or \"nan\", got {other:?}"))),
        },
    }
}

pub mod real {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

pub mod real_vec {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }
}

pub mod real_opt {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        v.map(to_repr).serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr::<T, D::Error>).transpose()
    }
}
