//! Simulation time base. One tick is one nanosecond.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A point in simulated time, in nanoseconds since scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Instant(u64);

/// A non-negative length of simulated time, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span(u64);

impl Span {
    pub const ZERO: Span = Span(0);

    pub const fn from_nanos(ns: u64) -> Self {
        Span(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        Span(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Span(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Span(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    /// Whole microseconds, truncating.
    pub const fn as_micros(self) -> u64 {
        self.0 / 1_000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn checked_add(self, rhs: Span) -> Option<Span> {
        self.0.checked_add(rhs.0).map(Span)
    }

    pub fn checked_sub(self, rhs: Span) -> Option<Span> {
        self.0.checked_sub(rhs.0).map(Span)
    }

    pub fn saturating_sub(self, rhs: Span) -> Span {
        Span(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_mul(self, k: u64) -> Option<Span> {
        self.0.checked_mul(k).map(Span)
    }

    /// Integer division of two spans (how many `rhs` fit in `self`).
    pub fn div_span(self, rhs: Span) -> u64 {
        self.0 / rhs.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Instant {
    pub const ZERO: Instant = Instant(0);

    pub const fn from_nanos(ns: u64) -> Self {
        Instant(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        Instant(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Instant(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        Instant(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub const fn as_micros(self) -> u64 {
        self.0 / 1_000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    /// Time elapsed since `earlier`, or `None` if `earlier` is later than `self`.
    pub fn checked_since(self, earlier: Instant) -> Option<Span> {
        self.0.checked_sub(earlier.0).map(Span)
    }

    pub fn saturating_since(self, earlier: Instant) -> Span {
        Span(self.0.saturating_sub(earlier.0))
    }

    pub fn checked_add(self, span: Span) -> Option<Instant> {
        self.0.checked_add(span.0).map(Instant)
    }

    pub fn checked_sub(self, span: Span) -> Option<Instant> {
        self.0.checked_sub(span.0).map(Instant)
    }

    pub fn saturating_sub(self, span: Span) -> Instant {
        Instant(self.0.saturating_sub(span.0))
    }
}

impl Add for Span {
    type Output = Span;
    fn add(self, rhs: Span) -> Span {
        self.checked_add(rhs).expect("span overflow")
    }
}

impl AddAssign for Span {
    fn add_assign(&mut self, rhs: Span) {
        *self = *self + rhs;
    }
}

impl Sub for Span {
    type Output = Span;
    fn sub(self, rhs: Span) -> Span {
        self.checked_sub(rhs).expect("span underflow")
    }
}

impl Mul<u64> for Span {
    type Output = Span;
    fn mul(self, k: u64) -> Span {
        self.checked_mul(k).expect("span overflow")
    }
}

impl Add<Span> for Instant {
    type Output = Instant;
    fn add(self, rhs: Span) -> Instant {
        self.checked_add(rhs).expect("instant overflow")
    }
}

impl AddAssign<Span> for Instant {
    fn add_assign(&mut self, rhs: Span) {
        *self = *self + rhs;
    }
}

impl Sub<Span> for Instant {
    type Output = Instant;
    fn sub(self, rhs: Span) -> Instant {
        self.checked_sub(rhs).expect("instant before time zero")
    }
}

impl Sub for Instant {
    type Output = Span;
    fn sub(self, rhs: Instant) -> Span {
        self.checked_since(rhs).expect("negative span")
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.as_micros())
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}us", self.as_micros())
    }
}

/// Serde adapter storing a [`Span`] as integer microseconds.
pub mod micros {
    use super::Span;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(span: &Span, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(span.as_micros())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Span, D::Error> {
        let us = u64::deserialize(d)?;
        us.checked_mul(1_000)
            .map(Span::from_nanos)
            .ok_or_else(|| serde::de::Error::custom("duration out of range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_conversions() {
        assert_eq!(Span::from_millis(2).as_nanos(), 2_000_000);
        assert_eq!(Span::from_secs(1).as_micros(), 1_000_000);
        assert_eq!(Instant::from_micros(5) + Span::from_micros(3), Instant::from_micros(8));
        assert_eq!(Instant::from_secs(2) - Instant::from_secs(1), Span::from_secs(1));
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn span_addition_never_wraps() {
        let _ = Span::from_nanos(u64::MAX) + Span::from_nanos(1);
    }

    #[test]
    fn negative_differences_are_detected() {
        assert_eq!(Instant::from_nanos(1).checked_since(Instant::from_nanos(2)), None);
        assert_eq!(Instant::from_nanos(1).saturating_since(Instant::from_nanos(2)), Span::ZERO);
    }

    proptest! {
        #[test]
        fn span_addition_is_associative_and_commutative(
            a in 0u64..1_000_000_000_000_000,
            b in 0u64..1_000_000_000_000_000,
            c in 0u64..1_000_000_000_000_000,
        ) {
            let (a, b, c) = (Span::from_nanos(a), Span::from_nanos(b), Span::from_nanos(c));
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a + b, b + a);
        }
    }
}
