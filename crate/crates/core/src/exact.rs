//! Exact comparisons involving rational powers of two.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive};

use crate::Rational;

/// Decides `x <= y * 2^(z * s)` exactly, for `x, y >= 0` and `s >= 0`.
pub fn le_scaled_pow2(x: &Rational, y: &Rational, z: i64, s: &Rational) -> bool {
    debug_assert!(!x.is_negative() && !y.is_negative() && !s.is_negative());
    let q = s.denom().to_u32().expect("exponent denominator fits u32");
    let p = *s.numer();
    let xn = BigInt::from(*x.numer()).pow(q);
    let xd = BigInt::from(*x.denom()).pow(q);
    let yn = BigInt::from(*y.numer()).pow(q);
    let yd = BigInt::from(*y.denom()).pow(q);
    let mut lhs = xn * yd;
    let mut rhs = yn * xd;
    let shift = z as i128 * p;
    if shift >= 0 {
        rhs <<= shift as usize;
    } else {
        lhs <<= (-shift) as usize;
    }
    lhs <= rhs
}

/// `floor(2^(k * s))` for rational `s >= 0`.
pub fn floor_pow2(k: u32, s: &Rational) -> u64 {
    let q = s.denom().to_u32().expect("exponent denominator fits u32");
    let p = s.numer().to_u64().expect("nonnegative exponent");
    let big = BigUint::one() << (k as u64 * p) as usize;
    let root = big.nth_root(q);
    root.to_u64().unwrap_or(u64::MAX)
}

/// Whether `k * s` is an integer.
pub fn is_integral_product(k: u32, s: &Rational) -> bool {
    (Rational::from_integer(k as i128) * s).is_integer()
}

/// Integer value of `k * s` when integral.
pub fn integral_product(k: u32, s: &Rational) -> Option<u32> {
    let v = Rational::from_integer(k as i128) * s;
    if v.is_integer() && !v.is_negative() {
        v.to_integer().to_u32()
    } else {
        None
    }
}
