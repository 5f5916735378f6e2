use crate::error::{invalid, Result};
use crate::scalar::rational_to_f64;
use crate::Rational;

/// The tolerance knobs, made explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct ToleranceProfile {
    pub eps: Rational,
    pub eps0: Rational,
    pub upsilon: Rational,
    pub eta: Rational,
    pub implicit_constant: Rational,
    /// Whether `eps0` was raised to the floor.
    pub eps0_clamped: bool,
}

impl ToleranceProfile {
    /// Default profile: `eps0 = eps^ceil(2/eps)` raised to at least `floor`.
    pub fn new(eps: Rational, floor: Rational) -> Result<Self> {
        if eps <= Rational::from_integer(0) || eps >= Rational::from_integer(1) {
            return invalid(format!("eps={eps} must lie in (0,1)"));
        }
        let (eps0, clamped) = default_eps0(&eps, &floor);
        Ok(ToleranceProfile {
            eps,
            eps0,
            upsilon: eps,
            eta: eps,
            implicit_constant: Rational::from_integer(4),
            eps0_clamped: clamped,
        })
    }

    pub fn with_eps0(mut self, eps0: Rational) -> Result<Self> {
        if eps0 <= Rational::from_integer(0) || eps0 > self.eps {
            return invalid(format!("eps0={eps0} must lie in (0, eps]"));
        }
        self.eps0 = eps0;
        self.eps0_clamped = false;
        Ok(self)
    }

    pub fn eps_f64(&self) -> f64 {
        rational_to_f64(&self.eps)
    }
}

/// `eps^ceil(2/eps)`, or `floor` when that is smaller.
pub fn default_eps0(eps: &Rational, floor: &Rational) -> (Rational, bool) {
    let power = (Rational::from_integer(2) / eps).ceil().to_integer() as u32;
    let approx = rational_to_f64(eps).powi(power as i32);
    if approx <= rational_to_f64(floor) {
        return (*floor, true);
    }
    // fits: the float value is above the floor, so the exact power is representable
    let mut v = Rational::from_integer(1);
    for _ in 0..power {
        v *= *eps;
    }
    if v < *floor {
        (*floor, true)
    } else {
        (v, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_tiny_eps0() {
        let p = ToleranceProfile::new(Rational::new(1, 10), Rational::new(4, 1024)).unwrap();
        assert!(p.eps0_clamped);
        assert_eq!(p.eps0, Rational::new(4, 1024));
        let p = ToleranceProfile::new(Rational::new(1, 2), Rational::new(1, 1 << 20)).unwrap();
        assert_eq!(p.eps0, Rational::new(1, 16));
        assert!(!p.eps0_clamped);
    }
}
