//! Serde helpers for exponents that may be infinite. Infinity is written as
//! the string "inf" so JSON can carry it; numbers and "inf"/"infinity" are read.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rho(pub f64);

impl Serialize for Rho {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Rho {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rho;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rho, E> {
                Ok(Rho(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rho, E> {
                Ok(Rho(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rho, E> {
                Ok(Rho(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rho, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(Rho(f64::INFINITY)),
                    other => Err(E::custom(format!("expected \"inf\", got {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub mod single {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Rho(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Rho::deserialize(d)?.0)
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| Rho(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Rho>::deserialize(d)?.into_iter().map(|r| r.0).collect())
    }
}
