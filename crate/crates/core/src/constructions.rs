//! Explicit configurations: bushes, the train track, random area saturation,
//! spread bushes for the two-ends pipeline, and maximal random families.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{augment_rigid, AugmentParams, DirectionalFamily};
use crate::error::{invalid, Result};
use crate::grid::{Family, Interval, Scale, Square, Tube};
use crate::incidence::{richness_map, RichnessMap};
use crate::two_ends::TubeSquareSystem;
use crate::Rational;

/// Evenly spaced Cantor set of `round(2^{e s})`-ish points: blocks of `q`
/// levels keep `2^{s q}` children, where `q` is the denominator of `s`, and a
/// final shorter block keeps `round(2^{s r})` of its `2^r` children.
pub fn even_cantor(e: u32, s: &Rational) -> Result<Vec<i64>> {
    if *s < Rational::from_integer(0) || *s > Rational::from_integer(1) {
        return invalid(format!("dimension {s} outside [0, 1]"));
    }
    let q = *s.denom() as u32;
    if q > e {
        return invalid(format!("dimension {s} needs blocks of {q} levels, more than e = {e}"));
    }
    let mut pts = vec![0i64];
    let mut done = 0u32;
    while done < e {
        let len = q.min(e - done);
        let keep = if len == q {
            1i64 << *s.numer()
        } else {
            ((len as f64 * *s.numer() as f64 / q as f64).exp2().round() as i64).max(1)
        };
        let width = 1i64 << len;
        let stride = width / keep;
        pts = pts.iter().flat_map(|&p| (0..keep).map(move |k| (p << len) + k * stride)).collect();
        done += len;
    }
    Ok(pts)
}

/// Bushes rooted on the left edge: one tube per (root, direction).
#[derive(Clone, Debug)]
pub struct BushExample {
    pub roots: Family<Square>,
    pub directions: Family<Interval>,
    pub tubes: Family<Tube>,
    /// Tubes lost to snapping coincidences.
    pub duplicates: usize,
}

/// Roots form an evenly spaced `(δ, 1-s)`-set on the column `x = 0`, the
/// directions an evenly spaced AD-regular `(δ, s)`-set, and each root carries
/// the grid tube through its centre in every direction.
pub fn bush_example(e: u32, s: &Rational) -> Result<BushExample> {
    if *s < Rational::new(1, 2) || *s >= Rational::from_integer(1) {
        return invalid(format!("bush example needs s in [1/2, 1), got {s}"));
    }
    let scale = Scale::new(e, 1)?;
    let rows = even_cantor(e, &(Rational::from_integer(1) - s))?;
    let dirs = even_cantor(e, s)?;
    let roots = Family::new(scale, rows.iter().map(|&r| Square::new(0, r)))?;
    let directions = Family::new(scale, dirs.iter().map(|&d| Interval(d)))?;
    let all: Vec<Tube> = roots
        .iter()
        .flat_map(|&p| dirs.iter().map(move |&d| Tube::through_center(&scale, p, d)))
        .collect();
    let raw = all.len();
    let tubes = Family::new(scale, all)?;
    Ok(BushExample { duplicates: raw - tubes.len(), roots, directions, tubes })
}

/// Parallel bushes through thin rectangles stacked vertically.
#[derive(Clone, Debug)]
pub struct TrainTrack {
    pub tubes: Family<Tube>,
    pub directions: Family<Interval>,
    /// Squares along the central line of each `δ × δ^{1/2}` rectangle.
    pub rectangles: Vec<Vec<Square>>,
}

/// `2^{e/2}` bushes of `2^{e/2}` tubes with consecutive slopes, each bush
/// through the centre of a `δ × δ^{1/2}` rectangle; rectangles are
/// `δ^{1/2}` apart vertically.
pub fn train_track(e: u32) -> Result<TrainTrack> {
    if e % 2 != 0 {
        return invalid(format!("train track needs an even e, got {e}"));
    }
    let scale = Scale::new(e, 2)?;
    let n = scale.side();
    let m = 1i64 << (e / 2);
    let mid = n / 2;
    let slopes: Vec<i64> = (0..m).map(|k| mid - m / 2 + k).collect();
    let mut tubes = Vec::new();
    let mut rectangles = Vec::new();
    for j in 0..m {
        let row = j * m + m / 2;
        let centre = Square::new(mid, row);
        tubes.extend(slopes.iter().map(|&a| Tube::through_center(&scale, centre, a)));
        // the rectangle follows the central direction, slope 1/2
        rectangles.push((mid - m / 2..mid + m / 2).map(|c| Square::new(c, row + (c - mid).div_euclid(2))).collect());
    }
    Ok(TrainTrack {
        tubes: Family::new(scale, tubes)?,
        directions: Family::new(scale, slopes.into_iter().map(Interval))?,
        rectangles,
    })
}

/// Random directions with many random tubes each, and how much of the grid
/// they saturate.
#[derive(Clone, Debug)]
pub struct AreaSaturation {
    pub tubes: Family<Tube>,
    pub directions: Family<Interval>,
    /// Average richness `Σ_T |T ∩ grid| / δ^{-2}`.
    pub mean_richness: f64,
    /// Fraction of squares met by at least one tube.
    pub covered: f64,
    /// Fraction of squares with richness in `[mean/4, 4 mean]`.
    pub typical: f64,
}

/// An evenly spaced `(δ, s)` direction set with `round(2^{et})` random tubes
/// (meeting the unit square) per direction.
pub fn area_saturation(e: u32, s: &Rational, t: &Rational, seed: u64) -> Result<AreaSaturation> {
    if e > 12 {
        return invalid(format!("area saturation is capped at e = 12, got {e}"));
    }
    let scale = Scale::new(e, 1)?;
    let n = scale.side();
    let dirs = even_cantor(e, s)?;
    let per = ((e as f64 * crate::scalar::rational_to_f64(t)).exp2().round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tubes = Vec::new();
    for &a in &dirs {
        // intercepts b with the segment meeting [0,1]^2: -a <= b < n
        let range = (n + a) as usize;
        let k = per.min(range);
        tubes.extend(sample(&mut rng, range, k).into_iter().map(|i| Tube::new(a, i as i64 - a)));
    }
    let tubes = Family::new(scale, tubes)?;
    let map = richness_map(&tubes);
    let (mean_richness, covered, typical) = saturation_stats(&map, n);
    Ok(AreaSaturation { tubes, directions: Family::new(scale, dirs.into_iter().map(Interval))?, mean_richness, covered, typical })
}

fn saturation_stats(map: &RichnessMap, n: i64) -> (f64, f64, f64) {
    let cells = (n * n) as f64;
    let mean = map.total() as f64 / cells;
    let mut covered = 0usize;
    let mut typical = 0usize;
    for (_, r) in map.nonzero() {
        covered += 1;
        let r = r as f64;
        if r >= mean / 4.0 && r <= 4.0 * mean {
            typical += 1;
        }
    }
    (mean, covered as f64 / cells, typical as f64 / cells)
}

/// A random `fraction` of the squares, each with the tube through its centre
/// in every direction of an evenly spaced `(δ, s)` direction set.
pub fn spread_bushes(e: u32, s: &Rational, fraction: f64, seed: u64) -> Result<TubeSquareSystem> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return invalid(format!("fraction {fraction} must lie in (0, 1]"));
    }
    let scale = Scale::new(e, 1)?;
    let n = scale.side();
    let dirs = even_cantor(e, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for col in 0..n {
        for row in 0..n {
            if rng.gen::<f64>() < fraction {
                let p = Square::new(col, row);
                let ts: BTreeSet<Tube> = dirs.iter().map(|&a| Tube::through_center(&scale, p, a)).collect();
                entries.push((p, ts.into_iter().collect()));
            }
        }
    }
    TubeSquareSystem::new(scale, Rational::from_integer(1), entries)
}

/// A maximal random configuration: a single tube augmented by `2^{es}`
/// direction shifts and `2^{e(1-s)}` shared intercept translates.
pub fn maximal_random(e: u32, s: &Rational, seed: u64) -> Result<DirectionalFamily> {
    let scale = Scale::new(e, 1)?;
    let n = scale.side();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Tube::new(rng.gen_range(0..n), rng.gen_range(0..n));
    let one = Rational::from_integer(1);
    let base = DirectionalFamily::new(Family::new(scale, [start])?)?;
    Ok(augment_rigid(&base, s, &one, &one, &AugmentParams::default(), seed)?.tubes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::{check_delta_set, check_katz_tao};

    #[test]
    fn cantor_sizes() {
        assert_eq!(even_cantor(8, &Rational::new(3, 4)).unwrap().len(), 64);
        assert_eq!(even_cantor(8, &Rational::new(1, 4)).unwrap().len(), 4);
        assert_eq!(even_cantor(10, &Rational::new(3, 4)).unwrap().len(), 8 * 8 * 3);
        assert_eq!(even_cantor(6, &Rational::from_integer(1)).unwrap().len(), 64);
    }

    #[test]
    fn bush_counts() {
        let b = bush_example(8, &Rational::new(3, 4)).unwrap();
        assert_eq!(b.roots.len(), 4);
        assert_eq!(b.directions.len(), 64);
        assert_eq!(b.tubes.len(), 256);
        assert_eq!(b.duplicates, 0);
        let map = richness_map(&b.tubes);
        for p in b.roots.iter() {
            assert_eq!(map.count(*p), 64);
        }
        assert!(check_delta_set(&b.directions, &Rational::new(3, 4), &Rational::from_integer(4)).unwrap().ok);
        assert!(bush_example(8, &Rational::new(1, 4)).is_err());
    }

    #[test]
    fn train_track_counts() {
        let tt = train_track(8).unwrap();
        assert_eq!(tt.tubes.len(), 256);
        assert_eq!(tt.rectangles.len(), 16);
        assert!(check_katz_tao(&tt.tubes, &Rational::from_integer(1), &Rational::from_integer(8)).unwrap().ok);
        let map = richness_map(&tt.tubes);
        let rich = tt.rectangles.iter().flatten().filter(|p| (4..=64).contains(&map.count(**p))).count();
        assert!(rich >= 64, "{rich}");
        assert!(train_track(7).is_err());
    }

    #[test]
    fn saturation_covers() {
        let a = area_saturation(8, &Rational::new(3, 4), &Rational::new(3, 4), 1).unwrap();
        assert!(a.covered >= 0.5, "{a:?}");
        let b = area_saturation(8, &Rational::new(3, 4), &Rational::new(1, 4), 1).unwrap();
        assert!(b.covered < a.covered, "{} {}", b.covered, a.covered);
        assert!(b.mean_richness < a.mean_richness / 8.0);
        let c = area_saturation(8, &Rational::new(3, 4), &Rational::from_integer(0), 1).unwrap();
        assert!(c.covered < 0.5);
    }

    #[test]
    fn spread_bushes_are_incident() {
        let sys = spread_bushes(6, &Rational::new(1, 2), 0.25, 2).unwrap();
        let (a, b) = sys.double_count();
        assert_eq!(a, b);
        assert!(sys.len() > 500 && sys.len() < 1500);
    }

    #[test]
    fn maximal_random_size() {
        let f = maximal_random(8, &Rational::new(1, 2), 4).unwrap();
        assert_eq!(f.tubes.len(), 256);
    }
}
