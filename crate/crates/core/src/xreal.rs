use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Extended real number in `[-inf, +inf]`.
///
/// Backed by an `f64` that is never NaN. Addition saturates at the
/// infinities; `(+inf) + (-inf)` is reported as [`Error::Indeterminate`].
#[derive(Clone, Copy, PartialEq)]
pub struct XReal(f64);

impl XReal {
    pub const POS_INF: XReal = XReal(f64::INFINITY);
    pub const NEG_INF: XReal = XReal(f64::NEG_INFINITY);
    pub const ZERO: XReal = XReal(0.0);

    /// Wraps `v`; NaN is rejected.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::Indeterminate)
        } else {
            Ok(XReal(v))
        }
    }

    /// Wraps a finite value.
    ///
    /// # Panics
    /// If `v` is NaN.
    pub fn finite(v: f64) -> Self {
        assert!(!v.is_nan(), "XReal::finite called with NaN");
        XReal(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_pos_inf(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_neg_inf(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Saturating sum; opposite infinities are an error.
    pub fn add(self, other: XReal) -> Result<XReal> {
        if (self.is_pos_inf() && other.is_neg_inf()) || (self.is_neg_inf() && other.is_pos_inf()) {
            return Err(Error::Indeterminate);
        }
        XReal::new(self.0 + other.0)
    }

    /// Adds a real; NaN input is an error.
    pub fn add_f64(self, v: f64) -> Result<XReal> {
        self.add(XReal::new(v)?)
    }

    /// Sum of an iterator of extended reals.
    pub fn sum<I: IntoIterator<Item = XReal>>(it: I) -> Result<XReal> {
        it.into_iter().try_fold(XReal::ZERO, |acc, v| acc.add(v))
    }

    pub fn min(self, other: XReal) -> XReal {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Eq for XReal {}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for XReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).expect("XReal is never NaN")
    }
}

impl From<XReal> for f64 {
    fn from(v: XReal) -> f64 {
        v.0
    }
}

impl fmt::Debug for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pos_inf() {
            f.write_str("+inf")
        } else if self.is_neg_inf() {
            f.write_str("-inf")
        } else {
            fmt::Display::fmt(&self.0, f)
        }
    }
}

/// Finite values serialize as numbers, infinities as the strings `"+inf"` / `"-inf"`.
impl Serialize for XReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_pos_inf() {
            s.serialize_str("+inf")
        } else if self.is_neg_inf() {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for XReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = XReal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"+inf\", \"inf\", \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<XReal, E> {
                XReal::new(v).map_err(|_| E::custom("NaN is not an extended real"))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<XReal, E> {
                Ok(XReal(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<XReal, E> {
                Ok(XReal(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<XReal, E> {
                match v {
                    "+inf" | "inf" => Ok(XReal::POS_INF),
                    "-inf" => Ok(XReal::NEG_INF),
                    other => Err(E::custom(format!("invalid extended real `{other}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Serde adapter for `f64` fields that may hold `+-inf`, using the [`XReal`] encoding.
pub mod ext_f64 {
    use super::XReal;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        XReal::finite(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        XReal::deserialize(d).map(f64::from)
    }
}

/// Serde adapter for `Vec<f64>` fields whose entries may be `+-inf`.
pub mod ext_vec {
    use super::XReal;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| XReal::finite(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<XReal>::deserialize(d).map(|v| v.into_iter().map(f64::from).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_addition() {
        let a = XReal::finite(3.0);
        assert_eq!(a.add(XReal::POS_INF).unwrap(), XReal::POS_INF);
        assert_eq!(XReal::NEG_INF.add(a).unwrap(), XReal::NEG_INF);
        assert_eq!(a.add_f64(-1.0).unwrap(), XReal::finite(2.0));
    }

    #[test]
    fn opposite_infinities_are_an_error() {
        assert_eq!(XReal::POS_INF.add(XReal::NEG_INF), Err(Error::Indeterminate));
        assert_eq!(XReal::NEG_INF.add(XReal::POS_INF), Err(Error::Indeterminate));
    }

    #[test]
    fn nan_rejected() {
        assert!(XReal::new(f64::NAN).is_err());
    }

    #[test]
    fn ordering_places_infinities_at_ends() {
        let mut v = vec![XReal::POS_INF, XReal::finite(1.0), XReal::NEG_INF];
        v.sort();
        assert_eq!(v, vec![XReal::NEG_INF, XReal::finite(1.0), XReal::POS_INF]);
    }
}
