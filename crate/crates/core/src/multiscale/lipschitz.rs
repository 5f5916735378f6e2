use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::Rational;

/// Samples `f(k/n)`, `k = 0..=n`, of a nondecreasing Lipschitz function.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzFn<S: Scalar> {
    values: Vec<S>,
    lipschitz: S,
}

impl<S: Scalar> LipschitzFn<S> {
    /// Validates monotonicity, `f(0) >= 0` and increments `<= C/n`.
    pub fn new(values: Vec<S>, lipschitz: S) -> Result<Self> {
        if values.len() < 2 {
            return invalid("need at least two samples");
        }
        let n = S::from_usize(values.len() - 1).expect("grid size");
        let tol = S::tolerance();
        if values[0] < S::zero() - tol.clone() {
            return invalid("f(0) must be nonnegative");
        }
        for (k, w) in values.windows(2).enumerate() {
            let step = w[1].clone() - w[0].clone();
            if step < S::zero() - tol.clone() {
                return invalid(format!("not nondecreasing at k={k}"));
            }
            if step * n.clone() > lipschitz.clone() + tol.clone() {
                return invalid(format!("Lipschitz bound violated at k={k}"));
            }
        }
        Ok(LipschitzFn { values, lipschitz })
    }

    /// Grid size `n`.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn at(&self, k: usize) -> S {
        self.values[k].clone()
    }

    pub fn lipschitz(&self) -> S {
        self.lipschitz.clone()
    }

    /// Slope of the chord between grid points `i < j`, in units of `[0,1]`.
    pub fn chord_slope(&self, i: usize, j: usize) -> S {
        let n = S::from_usize(self.n()).expect("grid size");
        let dx = S::from_usize(j - i).expect("grid size");
        (self.at(j) - self.at(i)) * n / dx
    }
}

/// Seeded random nondecreasing 1-Lipschitz function on `n` steps, exact.
///
/// The grid is cut into a random number of runs (one to eight) at random
/// points; each run draws a slope `u/64` and every step adds
/// `(u ± 1 jitter)/(64 n)`, clamped to `[0, 1/n]`.
pub fn random_monotone(n: usize, seed: u64) -> Result<LipschitzFn<Rational>> {
    if n < 2 {
        return invalid("need at least two steps");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let runs = rng.gen_range(1..=8usize).min(n);
    let mut cuts: Vec<usize> = (0..runs - 1).map(|_| rng.gen_range(1..n)).collect();
    cuts.push(n);
    cuts.sort_unstable();
    let den = 64 * n as i128;
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0i128;
    values.push(Rational::from_integer(0));
    let mut k = 0usize;
    for &end in &cuts {
        let u: i128 = rng.gen_range(0..=64);
        while k < end {
            let step = (u + rng.gen_range(-1..=1)).clamp(0, 64);
            acc += step;
            values.push(Rational::new(acc, den));
            k += 1;
        }
    }
    LipschitzFn::new(values, Rational::from_integer(1))
}

/// Lower-convex-hull decomposition on a coarsened grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LipDecomposition<S: Scalar> {
    /// Grid indices `a_1 = 0 < ... < a_{J+1} = n`.
    pub breakpoints: Vec<usize>,
    /// Strictly increasing slopes `σ_j`.
    pub slopes: Vec<S>,
    /// Spacing of the coarse grid, in fine steps.
    pub stride: usize,
    /// `2 C stride / n`: how far `f` may dip below a hull piece between coarse points.
    pub hull_slack: S,
}

impl<S: Scalar> LipDecomposition<S> {
    /// Hull value at grid index `x` on piece `j`.
    pub fn line_at(&self, f: &LipschitzFn<S>, j: usize, x: usize) -> S {
        let n = S::from_usize(f.n()).expect("grid size");
        let a = self.breakpoints[j];
        let dx = S::from_usize(x - a).expect("grid size");
        f.at(a) + self.slopes[j].clone() * dx / n
    }
}

/// Smallest power of two that is at least `steps`.
pub(crate) fn pow2_at_least(steps: usize) -> usize {
    steps.max(1).next_power_of_two()
}

/// Decomposition with coarse spacing `τ = ε / (4C)`.
pub fn lip_decompose<S: Scalar>(f: &LipschitzFn<S>, eps: &S) -> Result<LipDecomposition<S>> {
    let n = f.n();
    let c = f.lipschitz().to_f64_lossy().max(f64::MIN_POSITIVE);
    let tau = eps.to_f64_lossy() / (4.0 * c);
    if !(tau > 0.0) || (n as f64) * tau < 1.0 {
        return invalid(format!("grid too coarse: 1/n = {} exceeds eps/(4C) = {tau}", 1.0 / n as f64));
    }
    Ok(lip_decompose_with_stride(f, pow2_at_least((n as f64 * tau).ceil() as usize)))
}

/// Lower convex hull of `f` sampled every `stride` steps, collinear vertices dropped.
///
/// When `stride` does not divide `n`, the last coarse point is moved to `n`.
pub fn lip_decompose_with_stride<S: Scalar>(f: &LipschitzFn<S>, stride: usize) -> LipDecomposition<S> {
    let n = f.n();
    let stride = stride.clamp(1, n);
    let mut grid: Vec<usize> = (0..=n).step_by(stride).collect();
    if *grid.last().expect("nonempty") != n {
        if n - grid[grid.len() - 1] < stride && grid.len() > 1 {
            grid.pop();
        }
        grid.push(n);
    }
    let tol = S::tolerance();
    let mut hull: Vec<usize> = Vec::with_capacity(grid.len());
    for &p in &grid {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b when slope(a,b) >= slope(b,p)
            let lhs = (f.at(b) - f.at(a)) * S::from_usize(p - b).expect("grid");
            let rhs = (f.at(p) - f.at(b)) * S::from_usize(b - a).expect("grid");
            if lhs >= rhs - tol.clone() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let slopes = hull.windows(2).map(|w| f.chord_slope(w[0], w[1])).collect();
    let two = S::from_u32(2).expect("small");
    let hull_slack = two * f.lipschitz() * S::from_usize(stride).expect("grid") / S::from_usize(n).expect("grid");
    LipDecomposition { breakpoints: hull, slopes, stride, hull_slack }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn from_fn(n: usize, g: impl Fn(Rational) -> Rational) -> LipschitzFn<Rational> {
        let vals = (0..=n).map(|k| g(q(k as i128, n as i128))).collect();
        LipschitzFn::new(vals, q(1, 1)).unwrap()
    }

    #[test]
    fn identity_is_one_piece() {
        let f = from_fn(1024, |x| x);
        let d = lip_decompose(&f, &q(1, 10)).unwrap();
        assert_eq!(d.breakpoints, vec![0, 1024]);
        assert_eq!(d.slopes, vec![q(1, 1)]);
    }

    #[test]
    fn zero_is_flat() {
        let f = from_fn(1024, |_| q(0, 1));
        let d = lip_decompose(&f, &q(1, 10)).unwrap();
        assert_eq!(d.slopes, vec![q(0, 1)]);
    }

    #[test]
    fn kink_at_half() {
        let f = from_fn(1024, |x| if x > q(1, 2) { x - q(1, 2) } else { q(0, 1) });
        let d = lip_decompose(&f, &q(1, 10)).unwrap();
        assert_eq!(d.breakpoints, vec![0, 512, 1024]);
        assert_eq!(d.slopes, vec![q(0, 1), q(1, 1)]);
    }

    #[test]
    fn too_coarse() {
        let f = from_fn(16, |x| x);
        assert!(lip_decompose(&f, &q(1, 10)).is_err());
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(LipschitzFn::new(vec![q(0, 1), q(1, 1), q(1, 2)], q(1, 1)).is_err());
        assert!(LipschitzFn::new(vec![q(0, 1), q(1, 1)], q(1, 2)).is_err());
        assert!(LipschitzFn::new(vec![0.0f64, 0.25, 0.5], 1.0).is_ok());
    }
}
