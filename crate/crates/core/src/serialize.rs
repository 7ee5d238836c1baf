//! Serde helpers for exact values inside structured documents.

/// Serialize a [`crate::rational::Rat`] as a `"p/q"` string field.
pub mod rat_string {
    use crate::rational::{format_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(de)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}
