use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// A real interval, possibly unbounded.
///
/// Infinite endpoints are always open. Every interval built through the
/// constructors satisfies `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Result<Self, DomainError> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(DomainError::EmptyInterval { lo, hi });
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(DomainError::EmptyInterval { lo, hi });
        }
        Ok(Self {
            lo,
            hi,
            lo_open: lo_open || lo.is_infinite(),
            hi_open: hi_open || hi.is_infinite(),
        })
    }

    pub fn open(lo: f64, hi: f64) -> Result<Self, DomainError> {
        Self::new(lo, hi, true, true)
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self, DomainError> {
        Self::new(lo, hi, false, false)
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY).expect("nonempty")
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo_open(&self) -> bool {
        self.lo_open
    }

    pub fn hi_open(&self) -> bool {
        self.hi_open
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Membership in the interval, honouring openness.
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open {
            x > self.lo
        } else {
            x >= self.lo
        };
        let below = if self.hi_open {
            x < self.hi
        } else {
            x <= self.hi
        };
        above && below
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// True when `other` lies inside `self` (closure of `other` inside the closure of `self`).
    pub fn encloses(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if other.lo > self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            (self.hi, self.hi_open)
        } else if other.hi < self.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        Interval::new(lo, hi, lo_open, hi_open).ok()
    }

    /// Map from the unit parameter `t ∈ [0, 1]` onto the interval.
    ///
    /// Bounded intervals use the affine map; unbounded ones use
    /// `x = a + t/(1-t)`, its mirror, or `x = s/(1-s²)` with `s = 2t-1`
    /// for the whole line. Used for sampling grids, not for quadrature.
    pub fn from_unit(&self, t: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => self.lo + t * (self.hi - self.lo),
            (true, false) => self.lo + t / (1.0 - t),
            (false, true) => self.hi - (1.0 - t) / t,
            (false, false) => {
                let s = 2.0 * t - 1.0;
                s / (1.0 - s * s)
            }
        }
    }

    /// Inverse of [`Interval::from_unit`].
    pub fn to_unit(&self, x: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => (x - self.lo) / (self.hi - self.lo),
            (true, false) => {
                let d = x - self.lo;
                d / (1.0 + d)
            }
            (false, true) => {
                let d = self.hi - x;
                1.0 / (1.0 + d)
            }
            (false, false) => {
                if x == 0.0 {
                    0.5
                } else {
                    // s/(1-s²) = x  =>  s = (-1 + sqrt(1 + 4x²)) / (2x)
                    let s = (-1.0 + (1.0 + 4.0 * x * x).sqrt()) / (2.0 * x);
                    0.5 * (s + 1.0)
                }
            }
        }
    }

    /// Cell-centred sampling grid of `n` interior points (in the unit parameter).
    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.from_unit((i as f64 + 0.5) / n as f64))
            .filter(|x| x.is_finite())
            .collect()
    }

    /// Finite endpoints of the closure.
    pub fn finite_endpoints(&self) -> Vec<f64> {
        [self.lo, self.hi]
            .into_iter()
            .filter(|v| v.is_finite())
            .collect()
    }
}

fn fmt_endpoint(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { '(' } else { '[' },
            fmt_endpoint(self.lo),
            fmt_endpoint(self.hi),
            if self.hi_open { ')' } else { ']' }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_forces_open_infinite_ends() {
        assert!(Interval::open(1.0, 1.0).is_err());
        assert!(Interval::open(2.0, 1.0).is_err());
        let i = Interval::closed(0.0, f64::INFINITY).unwrap();
        assert!(!i.lo_open());
        assert!(i.hi_open());
    }

    #[test]
    fn unit_map_round_trips() {
        for i in [
            Interval::open(-2.0, 3.0).unwrap(),
            Interval::open(1.0, f64::INFINITY).unwrap(),
            Interval::open(f64::NEG_INFINITY, -1.0).unwrap(),
            Interval::real_line(),
        ] {
            for k in 1..20 {
                let t = k as f64 / 20.0;
                let x = i.from_unit(t);
                assert!(i.contains_interior(x), "{i} {x}");
                assert!((i.to_unit(x) - t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn intersection_keeps_tighter_bounds() {
        let a = Interval::open(0.0, f64::INFINITY).unwrap();
        let b = Interval::closed(-1.0, 2.0).unwrap();
        let c = a.intersect(&b).unwrap();
        assert_eq!(
            (c.lo(), c.hi(), c.lo_open(), c.hi_open()),
            (0.0, 2.0, true, false)
        );
        assert!(a.intersect(&Interval::open(-3.0, -1.0).unwrap()).is_none());
    }
}
