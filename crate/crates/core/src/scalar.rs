//! Scalar abstraction shared by the numeric modules.
//!
//! Exact checks run over [`Rational`](crate::Rational); sweeps and FFT-backed
//! code run over `f64` or `f32`.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

use crate::Rational;

pub trait Scalar:
    Clone + PartialOrd + Debug + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Slack used when comparing derived quantities. Zero for exact types.
    fn tolerance() -> Self;

    fn ratio(num: i64, den: i64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
}

impl Scalar for Rational {
    fn tolerance() -> Self {
        Rational::from_integer(0)
    }
    fn ratio(num: i64, den: i64) -> Self {
        Rational::new(num as i128, den as i128)
    }
}

/// Parses `p/q`, an integer, or a decimal literal into a rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i128 = p.trim().parse().ok()?;
        let q: i128 = q.trim().parse().ok()?;
        if q == 0 {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: i128 = if int.is_empty() || int == "-" { 0 } else { int.parse().ok()? };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return None;
        }
        let den = 10i128.pow(frac.len() as u32);
        let f: i128 = frac.parse().ok()?;
        let mag = int_part.abs() * den + f;
        return Some(Rational::new(if neg { -mag } else { mag }, den));
    }
    t.parse::<i128>().ok().map(Rational::from_integer)
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/2"), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("0.25"), Some(Rational::new(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(Rational::new(-3, 2)));
        assert_eq!(parse_rational("3"), Some(Rational::from_integer(3)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }
}
