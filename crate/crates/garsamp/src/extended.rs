//! Extended reals and intervals.
//!
//! Simple estimates may be `±∞` sentinels (an observation outside the range of
//! a bounded branch). Sentinels are kept as explicit tags and never enter
//! floating-point arithmetic; where a finite endpoint is arithmetically
//! required they are clipped to a configurable horizon.

use std::cmp::Ordering;

/// Default horizon used when a sentinel must be replaced by a finite value.
pub const DEFAULT_HORIZON: f64 = 1e3;

/// A real number extended with `±∞` sentinels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Replaces a sentinel by `±horizon`, logging the clip.
    pub fn clip(self, horizon: f64) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::NegInf => {
                log::debug!("clipping -inf sentinel to {}", -horizon);
                -horizon
            }
            Extended::PosInf => {
                log::debug!("clipping +inf sentinel to {}", horizon);
                horizon
            }
        }
    }

    /// Total order: `-inf < finite < +inf`.
    pub fn cmp_ext(self, other: Extended) -> Ordering {
        use Extended::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
        }
    }

    pub fn min_ext(self, other: Extended) -> Extended {
        if self.cmp_ext(other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn max_ext(self, other: Extended) -> Extended {
        if self.cmp_ext(other) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::Finite(v)
    }
}

impl std::fmt::Display for Extended {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInf => write!(f, "+inf"),
        }
    }
}

/// A closed interval with extended endpoints, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: Extended,
    pub hi: Extended,
}

impl Interval {
    pub fn new(lo: Extended, hi: Extended) -> Self {
        debug_assert!(
            lo.cmp_ext(hi) != Ordering::Greater,
            "interval endpoints out of order"
        );
        Interval { lo, hi }
    }

    pub fn finite(lo: f64, hi: f64) -> Self {
        Interval::new(Extended::Finite(lo), Extended::Finite(hi))
    }

    /// The whole real line.
    pub fn all() -> Self {
        Interval {
            lo: Extended::NegInf,
            hi: Extended::PosInf,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lo {
            Extended::NegInf => true,
            Extended::Finite(l) => x >= l,
            Extended::PosInf => false,
        };
        let below = match self.hi {
            Extended::PosInf => true,
            Extended::Finite(h) => x <= h,
            Extended::NegInf => false,
        };
        above && below
    }

    /// Containment with an absolute slack on finite endpoints.
    pub fn contains_tol(&self, x: f64, tol: f64) -> bool {
        let above = match self.lo {
            Extended::NegInf => true,
            Extended::Finite(l) => x >= l - tol,
            Extended::PosInf => false,
        };
        let below = match self.hi {
            Extended::PosInf => true,
            Extended::Finite(h) => x <= h + tol,
            Extended::NegInf => false,
        };
        above && below
    }

    /// Both endpoints clipped to the horizon.
    pub fn clip(&self, horizon: f64) -> (f64, f64) {
        (self.lo.clip(horizon), self.hi.clip(horizon))
    }

    /// Finite length, or `None` when an endpoint is a sentinel.
    pub fn length(&self) -> Option<f64> {
        match (self.lo, self.hi) {
            (Extended::Finite(l), Extended::Finite(h)) => Some(h - l),
            _ => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!((self.lo, self.hi), (Extended::Finite(l), Extended::Finite(h)) if l == h)
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_of_sentinels() {
        assert_eq!(
            Extended::NegInf.cmp_ext(Extended::Finite(-1e300)),
            Ordering::Less
        );
        assert_eq!(
            Extended::PosInf.cmp_ext(Extended::Finite(1e300)),
            Ordering::Greater
        );
        assert_eq!(
            Extended::Finite(2.0).cmp_ext(Extended::Finite(3.0)),
            Ordering::Less
        );
    }

    #[test]
    fn interval_containment() {
        let i = Interval::finite(-1.0, 2.0);
        assert!(i.contains(0.0));
        assert!(!i.contains(2.5));
        assert!(Interval::all().contains(1e308));
    }

    #[test]
    fn clip_uses_horizon() {
        assert_eq!(Extended::NegInf.clip(1e3), -1e3);
        assert_eq!(Extended::Finite(7.0).clip(1e3), 7.0);
    }
}
