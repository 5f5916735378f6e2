use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, LabError, Result};
use crate::exact::{integral_product, le_scaled_pow2};
use crate::grid::{Cell, Family, Interval, Scale, Square};
use crate::scalar::rational_to_f64;
use crate::Rational;

/// Cantor-type interval family keeping `2^{sT}` evenly spaced children per
/// node at every block level, with a seeded offset per node.
pub fn generate_ad_regular(scale: Scale, s: &Rational, seed: u64) -> Result<Family<Interval>> {
    let t = scale.block_exp();
    if *s < Rational::from_integer(0) || *s > Rational::from_integer(1) {
        return invalid(format!("s={s} must lie in [0,1]"));
    }
    let kept_exp = integral_product(t, s)
        .ok_or_else(|| LabError::InvalidParameter(format!("s*T = {s}*{t} is not an integer; choose T so that s*T is integral")))?;
    let keep = 1i64 << kept_exp;
    let stride = 1i64 << (t - kept_exp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![0i64];
    for _ in 0..scale.levels() {
        let mut next = Vec::with_capacity(nodes.len() * keep as usize);
        for &node in &nodes {
            let offset = rng.gen_range(0..stride);
            for c in 0..keep {
                next.push((node << t) + offset + c * stride);
            }
        }
        nodes = next;
    }
    Family::new(scale, nodes.into_iter().map(Interval))
}

/// Grid element types whose full grid can be enumerated.
pub trait GridCells: Cell {
    fn all(scale: &Scale) -> Vec<Self>;
}

impl GridCells for Interval {
    fn all(scale: &Scale) -> Vec<Self> {
        (0..scale.side()).map(Interval).collect()
    }
}

impl GridCells for Square {
    fn all(scale: &Scale) -> Vec<Self> {
        let n = scale.side();
        (0..n).flat_map(|c| (0..n).map(move |r| Square::new(c, r))).collect()
    }
}

/// Occupied points indexed by first coordinate, for ball enumeration.
struct Occupancy {
    dim: usize,
    cols: BTreeMap<i64, BTreeSet<i64>>,
}

impl Occupancy {
    fn in_ball(&self, c: [i64; 2], r: i64) -> impl Iterator<Item = [i64; 2]> + '_ {
        let dim = self.dim;
        self.cols.range(c[0] - r + 1..c[0] + r).flat_map(move |(&x, rows)| {
            let range = if dim == 1 { rows.range(0..1) } else { rows.range(c[1] - r + 1..c[1] + r) };
            range.map(move |&y| [x, y])
        })
    }

    fn count(&self, c: [i64; 2], r: i64) -> u64 {
        self.in_ball(c, r).count() as u64
    }

    fn insert(&mut self, p: [i64; 2]) {
        self.cols.entry(p[0]).or_default().insert(p[1]);
    }
}

/// Random greedy family satisfying the Katz-Tao condition with constant `2K`,
/// grown until it reaches `K 2^{es}` elements.
pub fn generate_random_frostman<E: GridCells>(scale: Scale, s: &Rational, seed: u64, k: &Rational) -> Result<Family<E>> {
    let d = E::DIM as i128;
    if *s <= Rational::from_integer(0) || *s > Rational::from_integer(d) {
        return invalid(format!("s={s} must lie in (0,{d}]"));
    }
    if *k < Rational::from_integer(1) {
        return invalid("K must be at least 1");
    }
    let e = scale.delta_exp();
    let sf = rational_to_f64(s);
    let kf = rational_to_f64(k);
    let target = (kf * (e as f64 * sf).exp2()).round().max(1.0) as usize;
    let two_k = *k * Rational::from_integer(2);
    // cap_k: largest integer <= 2K (2^{e-k})^s, or None when the bound is vacuous
    let caps: Vec<Option<u64>> = (0..=e)
        .map(|lvl| {
            let r = 1i64 << (e - lvl);
            let full = ((2 * r - 1) as u64).pow(E::DIM as u32);
            let mut c = (2.0 * kf * ((e - lvl) as f64 * sf).exp2()).floor() as u64;
            while c > 0 && !le_scaled_pow2(&Rational::from_integer(c as i128), &two_k, (e - lvl) as i64, s) {
                c -= 1;
            }
            while le_scaled_pow2(&Rational::from_integer(c as i128 + 1), &two_k, (e - lvl) as i64, s) {
                c += 1;
            }
            if c >= full {
                None
            } else {
                Some(c)
            }
        })
        .collect();
    let mut cells = E::all(&scale);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cells.shuffle(&mut rng);
    let mut occ = Occupancy { dim: E::DIM, cols: BTreeMap::new() };
    let mut chosen = Vec::new();
    for cell in cells {
        if chosen.len() >= target {
            break;
        }
        let y = cell.coords();
        let fits = caps.iter().enumerate().all(|(lvl, cap)| {
            let Some(cap) = *cap else { return true };
            let r = 1i64 << (e - lvl as u32);
            if occ.count(y, r) + 1 > cap {
                return false;
            }
            if occ.count(y, 2 * r - 1) < cap {
                return true;
            }
            occ.in_ball(y, r).all(|x| occ.count(x, r) < cap)
        });
        if fits {
            occ.insert(y);
            chosen.push(cell);
        }
    }
    if chosen.len() * 2 < target {
        return Err(LabError::BudgetExceeded(format!(
            "rejection sampling stalled at {} of {} elements",
            chosen.len(),
            target
        )));
    }
    Family::new(scale, chosen)
}
