//! Integer simulated time.
//!
//! All simulated instants and spans are 64-bit nanosecond counts. Every
//! duration used by the model (slot times, frame airtimes, guard intervals)
//! is an exact number of nanoseconds, so event ordering is total and runs
//! replay bit-identically across platforms.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

/// An instant of simulated time, in nanoseconds since the start of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

/// A non-negative span of simulated time, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dur(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> SimTime {
        SimTime(ns)
    }

    pub const fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    /// Shift by a signed nanosecond amount, saturating at time zero.
    pub fn offset(self, delta_ns: i64) -> SimTime {
        if delta_ns >= 0 {
            SimTime(self.0.saturating_add(delta_ns as u64))
        } else {
            SimTime(self.0.saturating_sub(delta_ns.unsigned_abs()))
        }
    }

    pub fn saturating_sub(self, earlier: SimTime) -> Dur {
        Dur(self.0.saturating_sub(earlier.0))
    }
}

impl Dur {
    pub const ZERO: Dur = Dur(0);

    pub const fn from_nanos(ns: u64) -> Dur {
        Dur(ns)
    }

    pub const fn from_micros(us: u64) -> Dur {
        Dur(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Dur {
        Dur(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Dur {
        Dur(s * 1_000_000_000)
    }

    /// Round a length in seconds to the nearest nanosecond.
    pub fn from_secs_f64(s: f64) -> Dur {
        assert!(s >= 0.0 && s.is_finite(), "duration must be finite and non-negative");
        Dur((s * 1e9).round() as u64)
    }

    pub const fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 * 1e-3
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, other: Dur) -> Dur {
        Dur(self.0.saturating_sub(other.0))
    }

    pub fn max(self, other: Dur) -> Dur {
        Dur(self.0.max(other.0))
    }
}

impl Add<Dur> for SimTime {
    type Output = SimTime;
    fn add(self, d: Dur) -> SimTime {
        SimTime(self.0 + d.0)
    }
}

impl AddAssign<Dur> for SimTime {
    fn add_assign(&mut self, d: Dur) {
        self.0 += d.0;
    }
}

impl Sub<SimTime> for SimTime {
    type Output = Dur;
    /// Span between two instants; panics if `rhs` is later than `self`.
    fn sub(self, rhs: SimTime) -> Dur {
        Dur(self.0.checked_sub(rhs.0).expect("negative time span"))
    }
}

impl Add for Dur {
    type Output = Dur;
    fn add(self, rhs: Dur) -> Dur {
        Dur(self.0 + rhs.0)
    }
}

impl AddAssign for Dur {
    fn add_assign(&mut self, rhs: Dur) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for Dur {
    type Output = Dur;
    fn mul(self, k: u64) -> Dur {
        Dur(self.0 * k)
    }
}

impl Sum for Dur {
    fn sum<I: Iterator<Item = Dur>>(iter: I) -> Dur {
        Dur(iter.map(|d| d.0).sum())
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl fmt::Display for Dur {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_saturates_at_zero() {
        let t = SimTime::from_nanos(100);
        assert_eq!(t.offset(-200), SimTime::ZERO);
        assert_eq!(t.offset(50), SimTime::from_nanos(150));
    }

    #[test]
    fn micros_are_exact() {
        assert_eq!(Dur::from_micros(920).nanos(), 920_000);
        assert_eq!(Dur::from_secs_f64(0.000_92).nanos(), 920_000);
    }

    #[test]
    fn span_arithmetic() {
        let a = SimTime::from_nanos(5_000);
        let b = a + Dur::from_micros(2);
        assert_eq!(b - a, Dur::from_micros(2));
        assert_eq!(a.saturating_sub(b), Dur::ZERO);
    }
}
