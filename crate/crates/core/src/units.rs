//! Power units. 0 dBm is unit mean-square amplitude in simulation units.

/// Converts dBm to linear power. `-inf` maps to exactly zero.
pub fn dbm_to_power(dbm: f64) -> f64 {
    if dbm == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(dbm / 10.0)
    }
}

/// Converts linear power to dBm; zero power maps to `-inf`.
pub fn power_to_db(power: f64) -> f64 {
    if power <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * power.log10()
    }
}

/// Serde adapter for dB quantities that may be infinite.
///
/// Finite values are plain numbers; infinities are the strings `"-inf"` and
/// `"inf"` so that JSON documents stay valid.
pub mod db_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.trim() {
                "-inf" | "-Infinity" | "off" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| de::Error::custom(format!("not a dB value: {other:?}"))),
            },
        }
    }
}
