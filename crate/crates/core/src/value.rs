use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::scalar::Scalar;

/// Literal used for [`ExtValue::Unreachable`] in serialized documents.
pub const UNREACHABLE: &str = "unreachable";

/// A property value extended with "the target cannot be reached" (+∞).
///
/// `Unreachable` absorbs addition and any probability-weighted sum in which it
/// carries positive weight, and compares greater than every finite value.
/// Subtraction is only defined where the result is representable; see
/// [`ExtValue::checked_sub`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtValue<T> {
    Finite(T),
    Unreachable,
}

impl<T: Scalar> ExtValue<T> {
    pub fn zero() -> Self {
        ExtValue::Finite(T::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtValue::Finite(_))
    }

    pub fn is_unreachable(&self) -> bool {
        matches!(self, ExtValue::Unreachable)
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtValue::Finite(x) => Some(x),
            ExtValue::Unreachable => None,
        }
    }

    /// `self - rhs` for `self >= rhs`.
    ///
    /// `Unreachable - finite` is `Unreachable`. `Unreachable - Unreachable`
    /// and `finite - Unreachable` are not representable and yield `None`.
    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        match (self, rhs) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => Some(ExtValue::Finite(a - b)),
            (ExtValue::Unreachable, ExtValue::Finite(_)) => Some(ExtValue::Unreachable),
            _ => None,
        }
    }

    /// `Σ p·v` over `(p, v)` pairs; any `Unreachable` with `p > 0` wins.
    pub fn weighted_sum<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (T, ExtValue<T>)>,
    {
        let mut acc = T::zero();
        for (p, v) in terms {
            if p <= T::zero() {
                continue;
            }
            match v {
                ExtValue::Finite(x) => acc = acc + p * x,
                ExtValue::Unreachable => return ExtValue::Unreachable,
            }
        }
        ExtValue::Finite(acc)
    }

    /// Total order used for all min/max decisions. Finite values are compared
    /// with `partial_cmp`; NaN never enters a value table.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => {
                a.partial_cmp(b).unwrap_or(Ordering::Equal)
            }
            (ExtValue::Finite(_), ExtValue::Unreachable) => Ordering::Less,
            (ExtValue::Unreachable, ExtValue::Finite(_)) => Ordering::Greater,
            (ExtValue::Unreachable, ExtValue::Unreachable) => Ordering::Equal,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other.total_cmp(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }

    /// Whether `self` strictly exceeds the finite threshold.
    pub fn exceeds(&self, threshold: T) -> bool {
        match self {
            ExtValue::Finite(x) => *x > threshold,
            ExtValue::Unreachable => true,
        }
    }

    /// Absolute difference for finite pairs; `None` once either side is
    /// unreachable, unless both are (then the values agree).
    pub fn distance(&self, other: &Self) -> Option<T> {
        match (self, other) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => Some((*a - *b).abs()),
            (ExtValue::Unreachable, ExtValue::Unreachable) => Some(T::zero()),
            _ => None,
        }
    }
}

impl<T: Scalar> PartialOrd for ExtValue<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl<T: Scalar> Add for ExtValue<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => ExtValue::Finite(a + b),
            _ => ExtValue::Unreachable,
        }
    }
}

impl<T: Scalar> From<T> for ExtValue<T> {
    fn from(x: T) -> Self {
        ExtValue::Finite(x)
    }
}

impl<T: Scalar> fmt::Display for ExtValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(x) => match f.precision() {
                Some(p) => write!(f, "{:.*}", p, x),
                None => write!(f, "{}", x),
            },
            ExtValue::Unreachable => f.write_str(UNREACHABLE),
        }
    }
}

impl<T: Scalar> Serialize for ExtValue<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtValue::Finite(x) => x.serialize(serializer),
            ExtValue::Unreachable => serializer.serialize_str(UNREACHABLE),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ExtValue<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtVisitor<T>(std::marker::PhantomData<T>);

        impl<T: Scalar> Visitor<'_> for ExtVisitor<T> {
            type Value = ExtValue<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a number or the string \"{UNREACHABLE}\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(ExtValue::Finite(T::lit(v)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(ExtValue::Finite(T::lit(v as f64)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(ExtValue::Finite(T::lit(v as f64)))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == UNREACHABLE {
                    Ok(ExtValue::Unreachable)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(ExtVisitor(std::marker::PhantomData))
    }
}
