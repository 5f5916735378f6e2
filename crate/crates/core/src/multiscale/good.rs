use crate::error::{invalid, LabError, Result};
use crate::multiscale::lipschitz::{lip_decompose_with_stride, pow2_at_least, LipDecomposition, LipschitzFn};
use crate::scalar::Scalar;

/// A partition of `[0,1]` into good intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalePartition<S: Scalar> {
    /// Grid size the breakpoints refer to.
    pub n: usize,
    /// Grid indices `A_1 = 0 < ... < A_{L+1} = n`.
    pub breakpoints: Vec<usize>,
    /// Slope class index `k_l`, so that `t_l = eps k_l`.
    pub classes: Vec<u32>,
    /// `t_1 < ... < t_L`.
    pub slopes: Vec<S>,
    pub eps: S,
    pub eps0: S,
    /// Hull slack added to the ε-slack of the lower bound.
    pub hull_slack: S,
    /// The underlying hull decomposition.
    pub hull: LipDecomposition<S>,
}

impl<S: Scalar> ScalePartition<S> {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    /// Breakpoint `A_l` as a point of `[0,1]`.
    pub fn breakpoint(&self, l: usize) -> S {
        S::from_usize(self.breakpoints[l]).expect("grid") / S::from_usize(self.n).expect("grid")
    }
}

fn class_of<S: Scalar>(sigma: &S, eps: &S, classes: u32) -> u32 {
    let tol = S::tolerance();
    let est = (sigma.to_f64_lossy() / eps.to_f64_lossy()).floor().max(0.0) as i64;
    let mut k = est.max(0);
    let kv = |k: i64| S::from_i64(k).expect("small") * eps.clone();
    while k > 0 && kv(k) > sigma.clone() + tol.clone() {
        k -= 1;
    }
    while kv(k + 1) <= sigma.clone() + tol.clone() {
        k += 1;
    }
    (k as u32).min(classes - 1)
}

/// A merged run of slope classes `lo..=hi` carrying the seed's class.
struct Merged {
    lo: usize,
    hi: usize,
    seed: usize,
}

/// Merge step for one seed. `left`/`right` say whether the seed may absorb
/// classes on that side, `bounds` is the unassigned class range.
fn expand(
    lens: &[usize],
    seed: usize,
    bounds: (usize, usize),
    left: bool,
    right: bool,
    out: &mut Vec<Merged>,
    small: &dyn Fn(usize, usize) -> bool,
) {
    let mut lo = seed;
    let mut next_left = None;
    if left {
        let mut k = seed;
        while k > bounds.0 {
            k -= 1;
            if !small(lens[k], lens[seed]) {
                next_left = Some(k);
                break;
            }
            lo = k;
        }
    }
    let mut hi = seed;
    let mut next_right = None;
    if right {
        let mut k = seed;
        while k < bounds.1 {
            k += 1;
            if !small(lens[k], lens[seed]) {
                next_right = Some(k);
                break;
            }
            hi = k;
        }
    }
    out.push(Merged { lo, hi, seed });
    if let Some(k) = next_left {
        expand(lens, k, (bounds.0, k), true, false, out, small);
    }
    if let Some(k) = next_right {
        expand(lens, k, (k, bounds.1), false, true, out, small);
    }
}

/// Partition of `[0,1]` into intervals that are all good.
///
/// Runs the hull decomposition with coarse spacing `eps0/eps`, groups hull
/// pieces into slope classes `[eps k, eps (k+1))` (the top class closed),
/// and merges short classes into their longest neighbours. Every
/// postcondition is checked before returning.
pub fn good_intervals<S: Scalar>(f: &LipschitzFn<S>, eps: &S, eps0: &S) -> Result<ScalePartition<S>> {
    let zero = S::zero();
    let half = S::ratio(1, 2);
    if !(*eps > zero && *eps < half) {
        return invalid(format!("eps={eps:?} must lie in (0, 1/2)"));
    }
    if !(*eps0 > zero && *eps0 <= *eps) {
        return invalid(format!("eps0={eps0:?} must lie in (0, eps]"));
    }
    if f.lipschitz() > S::one() + S::tolerance() {
        return invalid("good intervals need a 1-Lipschitz function");
    }
    let n = f.n();
    let nn = S::from_usize(n).expect("grid");
    let tau_steps = (nn.clone() * eps0.clone() / eps.clone()).to_f64_lossy();
    let stride = pow2_at_least(tau_steps.ceil() as usize);
    let hull = lip_decompose_with_stride(f, stride);
    let classes = (1.0 / eps.to_f64_lossy()).ceil() as u32;
    let classes = {
        // ceil(1/eps) computed exactly
        let mut k = classes.max(1);
        while k > 1 && S::from_u32(k - 1).expect("small") * eps.clone() >= S::one() {
            k -= 1;
        }
        while S::from_u32(k).expect("small") * eps.clone() < S::one() {
            k += 1;
        }
        k
    };
    let class: Vec<u32> = hull.slopes.iter().map(|s| class_of(s, eps, classes)).collect();
    // class k covers fine grid [start[k], end[k]); empty classes have length 0
    let mut lens = vec![0usize; classes as usize];
    let mut start = vec![usize::MAX; classes as usize];
    let mut end = vec![0usize; classes as usize];
    for (j, &k) in class.iter().enumerate() {
        let k = k as usize;
        lens[k] += hull.breakpoints[j + 1] - hull.breakpoints[j];
        start[k] = start[k].min(hull.breakpoints[j]);
        end[k] = end[k].max(hull.breakpoints[j + 1]);
    }
    let eps2 = eps.clone() * eps.clone();
    let small = |len: usize, seed_len: usize| {
        S::from_usize(len).expect("grid") < eps2.clone() * S::from_usize(seed_len).expect("grid")
    };
    let first = (0..lens.len()).fold(0, |best, k| if lens[k] > lens[best] { k } else { best });
    let mut merged = Vec::new();
    expand(&lens, first, (0, lens.len() - 1), true, true, &mut merged, &small);
    merged.sort_by_key(|m| m.lo);
    let mut breakpoints = vec![0usize];
    let mut seeds = Vec::new();
    for m in &merged {
        let hi_end = (m.lo..=m.hi).filter(|&k| lens[k] > 0).map(|k| end[k]).max().expect("seed is nonempty");
        breakpoints.push(hi_end);
        seeds.push(m.seed as u32);
    }
    let slopes: Vec<S> = seeds.iter().map(|&k| S::from_u32(k).expect("small") * eps.clone()).collect();
    let part = ScalePartition {
        n,
        breakpoints,
        classes: seeds,
        slopes,
        eps: eps.clone(),
        eps0: eps0.clone(),
        hull_slack: hull.hull_slack.clone(),
        hull,
    };
    verify_partition(f, &part)?;
    Ok(part)
}

/// Re-checks every postcondition of a good partition.
pub fn verify_partition<S: Scalar>(f: &LipschitzFn<S>, part: &ScalePartition<S>) -> Result<()> {
    let fail = |msg: String| Err(LabError::Postcondition(msg));
    let tol = S::tolerance();
    let n = part.n;
    let nn = S::from_usize(n).expect("grid");
    let eps = part.eps.clone();
    let three = S::from_u32(3).expect("small");
    if part.is_empty() || part.breakpoints.first() != Some(&0) || part.breakpoints.last() != Some(&n) {
        return fail("breakpoints must run from 0 to 1".into());
    }
    for (l, w) in part.slopes.windows(2).enumerate() {
        if w[1] <= w[0] {
            return fail(format!("slopes not strictly increasing at l={l}"));
        }
    }
    for l in 0..part.len() {
        let (a, b) = (part.breakpoints[l], part.breakpoints[l + 1]);
        let len = S::from_usize(b - a).expect("grid");
        // length at least eps0 / eps
        if len.clone() * eps.clone() < part.eps0.clone() * nn.clone() - tol.clone() {
            return fail(format!("interval {l} shorter than eps0/eps"));
        }
        let t = part.slopes[l].clone();
        let slack = eps.clone() * len.clone() / nn.clone() + part.hull_slack.clone();
        for x in a..=b {
            let dx = S::from_usize(x - a).expect("grid") / nn.clone();
            if f.at(x) < f.at(a) + t.clone() * dx - slack.clone() - tol.clone() {
                return fail(format!("lower bound fails in interval {l} at grid point {x}"));
            }
        }
        if f.at(b) > f.at(a) + (t.clone() + three.clone() * eps.clone()) * len / nn.clone() + tol.clone() {
            return fail(format!("growth bound fails on interval {l}"));
        }
    }
    if part.slopes[0] > f.at(n) - f.at(0) + eps + tol {
        return fail("first slope exceeds total growth plus eps".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn from_fn(n: usize, g: impl Fn(Rational) -> Rational) -> LipschitzFn<Rational> {
        LipschitzFn::new((0..=n).map(|k| g(q(k as i128, n as i128))).collect(), q(1, 1)).unwrap()
    }

    #[test]
    fn identity_lands_in_top_class() {
        let f = from_fn(1024, |x| x);
        let p = good_intervals(&f, &q(1, 10), &q(4, 1024)).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.slopes, vec![q(9, 10)]);
    }

    #[test]
    fn zero_function() {
        let f = from_fn(1024, |_| q(0, 1));
        let p = good_intervals(&f, &q(1, 10), &q(4, 1024)).unwrap();
        assert_eq!(p.slopes, vec![q(0, 1)]);
    }

    #[test]
    fn kink_gives_two_intervals() {
        let f = from_fn(1024, |x| if x > q(1, 2) { x - q(1, 2) } else { q(0, 1) });
        let p = good_intervals(&f, &q(1, 10), &q(4, 1024)).unwrap();
        assert_eq!(p.breakpoints, vec![0, 512, 1024]);
        assert_eq!(p.slopes, vec![q(0, 1), q(9, 10)]);
    }

    #[test]
    fn short_class_is_absorbed() {
        // slope 1/2 with a short steep tail
        let f = from_fn(4096, |x| {
            let c = q(4064, 4096);
            if x <= c { x / 2 } else { c / 2 + (x - c) }
        });
        let p = good_intervals(&f, &q(1, 5), &q(4, 4096)).unwrap();
        assert_eq!(p.hull.slopes.len(), 2);
        assert_eq!(p.len(), 1);
        assert_eq!(p.slopes, vec![q(2, 5)]);
    }

    #[test]
    fn float_instantiation() {
        let vals: Vec<f64> = (0..=1024).map(|k| (k as f64 / 1024.0) * 0.5).collect();
        let f = LipschitzFn::new(vals, 1.0).unwrap();
        let p = good_intervals(&f, &0.1, &(4.0 / 1024.0)).unwrap();
        assert_eq!(p.classes, vec![5]);
    }

    #[test]
    fn rejects_bad_eps() {
        let f = from_fn(64, |x| x);
        assert!(good_intervals(&f, &q(1, 2), &q(1, 64)).is_err());
        assert!(good_intervals(&f, &q(1, 10), &q(1, 5)).is_err());
    }
}
