use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{incident, rows_in_column, Family, Scale, Square, Tube};
use crate::Rational;

/// How richness bands are read: "∼r" is `[r, 2r)` and "≳r" is `>= r`.
pub const RICHNESS_CONVENTION: &str = "band ~r = [r,2r); at least r = [r,inf)";

/// Largest `e` for which richness uses a dense grid of counters.
pub const DENSE_LIMIT_EXP: u32 = 12;

#[derive(Clone, Debug)]
enum Storage {
    /// Column-major `n x n` counts.
    Dense(Vec<u32>),
    /// Nonzero `(row, count)` pairs per column, rows ascending.
    Sparse(BTreeMap<i64, Vec<(i64, u32)>>),
}

/// Number of tubes meeting each square.
#[derive(Clone, Debug)]
pub struct RichnessMap {
    scale: Scale,
    thickness: Rational,
    storage: Storage,
}

impl PartialEq for RichnessMap {
    fn eq(&self, other: &Self) -> bool {
        self.scale == other.scale && self.thickness == other.thickness && self.nonzero().eq(other.nonzero())
    }
}

impl RichnessMap {
    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn thickness(&self) -> Rational {
        self.thickness
    }

    pub fn count(&self, p: Square) -> u32 {
        let n = self.scale.side();
        if !(0..n).contains(&p.col) || !(0..n).contains(&p.row) {
            return 0;
        }
        match &self.storage {
            Storage::Dense(v) => v[(p.col * n + p.row) as usize],
            Storage::Sparse(m) => m
                .get(&p.col)
                .and_then(|rows| rows.binary_search_by_key(&p.row, |&(r, _)| r).ok().map(|i| rows[i].1))
                .unwrap_or(0),
        }
    }

    /// Squares with positive count, in `(col, row)` order.
    pub fn nonzero(&self) -> Box<dyn Iterator<Item = (Square, u32)> + '_> {
        let n = self.scale.side();
        match &self.storage {
            Storage::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(move |(i, &c)| (Square::new(i as i64 / n, i as i64 % n), c)),
            ),
            Storage::Sparse(m) => Box::new(
                m.iter().flat_map(|(&col, rows)| rows.iter().map(move |&(row, c)| (Square::new(col, row), c))),
            ),
        }
    }

    pub fn max(&self) -> u32 {
        self.nonzero().map(|(_, c)| c).max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.nonzero().map(|(_, c)| c as u64).sum()
    }
}

fn column_counts(scale: &Scale, c: &Rational, tubes: &[Tube], col: i64) -> Vec<u32> {
    let n = scale.side() as usize;
    let mut diff = vec![0i32; n + 1];
    for &t in tubes {
        if let Some((lo, hi)) = rows_in_column(scale, c, t, col) {
            diff[lo as usize] += 1;
            diff[hi as usize + 1] -= 1;
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut run = 0i32;
    for d in &diff[..n] {
        run += d;
        out.push(run as u32);
    }
    out
}

/// Exact richness of every square, swept column by column in parallel.
///
/// Dense storage up to `e = DENSE_LIMIT_EXP`, sparse column buckets above.
pub fn richness_map(tubes: &Family<Tube>) -> RichnessMap {
    if tubes.scale().delta_exp() > DENSE_LIMIT_EXP {
        return richness_map_sparse(tubes);
    }
    let scale = tubes.scale();
    let c = tubes.thickness();
    let n = scale.side();
    let cols: Vec<Vec<u32>> = (0..n).into_par_iter().map(|col| column_counts(&scale, &c, tubes.elements(), col)).collect();
    RichnessMap { scale, thickness: c, storage: Storage::Dense(cols.concat()) }
}

/// Same counts as [`richness_map`], stored sparsely.
pub fn richness_map_sparse(tubes: &Family<Tube>) -> RichnessMap {
    let scale = tubes.scale();
    let c = tubes.thickness();
    let n = scale.side();
    let cols: Vec<(i64, Vec<(i64, u32)>)> = (0..n)
        .into_par_iter()
        .map(|col| {
            let counts = column_counts(&scale, &c, tubes.elements(), col);
            let rows = counts.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(r, c)| (r as i64, c)).collect();
            (col, rows)
        })
        .collect();
    let map = cols.into_iter().filter(|(_, r): &(i64, Vec<(i64, u32)>)| !r.is_empty()).collect();
    RichnessMap { scale, thickness: c, storage: Storage::Sparse(map) }
}

/// Squares per dyadic richness bin `[r, 2r)`, `r = 1, 2, 4, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RichnessHistogram {
    pub bins: Vec<(u64, usize)>,
}

impl RichnessHistogram {
    pub fn from_map(map: &RichnessMap) -> Self {
        let mut bins: BTreeMap<u64, usize> = BTreeMap::new();
        for (_, c) in map.nonzero() {
            *bins.entry(1u64 << (63 - (c as u64).leading_zeros())).or_insert(0) += 1;
        }
        RichnessHistogram { bins: bins.into_iter().collect() }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.1).sum()
    }

    pub fn at(&self, r: u64) -> usize {
        self.bins.iter().find(|b| b.0 == r).map(|b| b.1).unwrap_or(0)
    }
}

/// Result of [`rich_squares`].
#[derive(Clone, Debug)]
pub struct RichSquares {
    /// Squares with richness in `[r, 2r)`.
    pub band: Family<Square>,
    /// Squares with richness at least `r`.
    pub at_least: Family<Square>,
    pub histogram: RichnessHistogram,
}

pub fn rich_squares(tubes: &Family<Tube>, r: u64) -> Result<RichSquares> {
    if r < 1 {
        return invalid("richness threshold must be at least 1");
    }
    let map = richness_map(tubes);
    Ok(rich_squares_from_map(&map, r))
}

pub(crate) fn rich_squares_from_map(map: &RichnessMap, r: u64) -> RichSquares {
    let mut band = Vec::new();
    let mut at_least = Vec::new();
    for (p, c) in map.nonzero() {
        let c = c as u64;
        if c >= r {
            at_least.push(p);
            if c < 2 * r {
                band.push(p);
            }
        }
    }
    let t = map.thickness();
    RichSquares {
        band: Family::from_trusted(map.scale(), t, band),
        at_least: Family::from_trusted(map.scale(), t, at_least),
        histogram: RichnessHistogram::from_map(map),
    }
}

/// Incidences between a square family and a tube family.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceReport {
    pub incidences: u64,
    /// `I / (|P||T|)^{2/3}`.
    pub ratio: f64,
    /// `δ^{-1/3} (|P||T|)^{2/3}`.
    pub trivial_bound: f64,
    pub within_trivial: bool,
}

pub fn incidence_count(squares: &Family<Square>, tubes: &Family<Tube>) -> Result<IncidenceReport> {
    squares.ensure_same_scale(tubes)?;
    let scale = tubes.scale();
    let c = tubes.thickness();
    let n = scale.side() as u64;
    let pt = squares.len() as u64 * tubes.len() as u64;
    let incidences = if pt <= n * (tubes.len() as u64 + n) {
        squares
            .elements()
            .par_iter()
            .map(|&p| tubes.iter().filter(|&&t| incident(&scale, &c, p, t)).count() as u64)
            .sum()
    } else {
        let map = richness_map(tubes);
        squares.iter().map(|&p| map.count(p) as u64).sum()
    };
    let base = (pt as f64).powf(2.0 / 3.0);
    let trivial_bound = (n as f64).cbrt() * base;
    Ok(IncidenceReport {
        incidences,
        ratio: if base > 0.0 { incidences as f64 / base } else { 0.0 },
        trivial_bound,
        within_trivial: incidences as f64 <= trivial_bound,
    })
}

/// The empirical constant `max_r |P_r(T)| r^3 / |T|^2` with its table.
#[derive(Clone, Debug, PartialEq)]
pub struct StReport {
    pub max_ratio: f64,
    pub argmax_r: u64,
    /// Rows `(r, |P_r|, |P_r| r^3 / |T|^2)` for dyadic `r`.
    pub table: Vec<(u64, usize, f64)>,
    /// Whether `|T|` is far below `1/δ`, outside the regime the bound speaks about.
    pub small_family: bool,
}

pub fn st_ratio(tubes: &Family<Tube>) -> StReport {
    if tubes.is_empty() {
        return StReport { max_ratio: 0.0, argmax_r: 1, table: Vec::new(), small_family: true };
    }
    let map = richness_map(tubes);
    st_ratio_from_map(&map, tubes.len())
}

pub(crate) fn st_ratio_from_map(map: &RichnessMap, tube_count: usize) -> StReport {
    let hist = RichnessHistogram::from_map(map);
    let t2 = (tube_count as f64).powi(2);
    let table: Vec<(u64, usize, f64)> =
        hist.bins.iter().map(|&(r, cnt)| (r, cnt, cnt as f64 * (r as f64).powi(3) / t2)).collect();
    let (max_ratio, argmax_r) = table
        .iter()
        .fold((0.0f64, 1u64), |acc, &(r, _, q)| if q > acc.0 { (q, r) } else { acc });
    StReport { max_ratio, argmax_r, table, small_family: (tube_count as i64) * 4 < map.scale().side() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(tubes: &Family<Tube>) -> Vec<u32> {
        let s = tubes.scale();
        let n = s.side();
        let mut out = vec![0u32; (n * n) as usize];
        for col in 0..n {
            for row in 0..n {
                out[(col * n + row) as usize] =
                    tubes.iter().filter(|&&t| incident(&s, &tubes.thickness(), Square::new(col, row), t)).count() as u32;
            }
        }
        out
    }

    fn random_tubes(e: u32, count: usize, seed: u64) -> Family<Tube> {
        let s = Scale::new(e, 1).unwrap();
        let n = s.side();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Family::new(s, (0..count).map(|_| Tube::new(rng.gen_range(0..=n), rng.gen_range(-n..n)))).unwrap()
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..10 {
            let t = random_tubes(5, 40, seed);
            let map = richness_map(&t);
            let b = brute(&t);
            let n = t.scale().side();
            for col in 0..n {
                for row in 0..n {
                    assert_eq!(map.count(Square::new(col, row)), b[(col * n + row) as usize]);
                }
            }
            assert_eq!(map, richness_map_sparse(&t));
        }
    }

    #[test]
    fn single_tube() {
        let s = Scale::new(6, 2).unwrap();
        let t = Family::new(s, [Tube::new(0, 0), Tube::new(0, 0)]).unwrap();
        assert_eq!(t.len(), 1);
        let map = richness_map(&t);
        assert!(map.nonzero().all(|(_, c)| c == 1));
        let rs = rich_squares(&t, 1).unwrap();
        assert!(rs.at_least.len() >= 64 && rs.at_least.len() <= 3 * 64);
        assert_eq!(rs.histogram.total(), map.nonzero().count());
        assert!(rich_squares(&t, 2).unwrap().at_least.is_empty());
        assert!(rich_squares(&t, 0).is_err());
    }

    #[test]
    fn parallel_horizontal_tubes() {
        let s = Scale::new(6, 2).unwrap();
        let n = s.side();
        let t = Family::new(s, (0..n).map(|b| Tube::new(0, b))).unwrap();
        let st = st_ratio(&t);
        // every square except the top row meets two tubes
        let expected = (n * (n - 1)) as f64 * 8.0 / (n * n) as f64;
        assert_eq!(st.argmax_r, 2);
        assert!((st.max_ratio - expected).abs() < 1e-12);
        assert_eq!(st_ratio(&Family::empty(s)).max_ratio, 0.0);
    }

    #[test]
    fn incidence_examples() {
        let s = Scale::new(6, 2).unwrap();
        let p = Family::new(s, [Square::new(10, 10)]).unwrap();
        let one = Family::new(s, [Tube::new(0, 10)]).unwrap();
        assert_eq!(incidence_count(&p, &one).unwrap().incidences, 1);
        assert_eq!(incidence_count(&Family::empty(s), &one).unwrap().incidences, 0);
        // a bush of tubes through the center of square (10, 10)
        let bush: Vec<Tube> = (0..=64).step_by(4).map(|a| Tube::through_center(&s, Square::new(10, 10), a)).collect();
        let bush = Family::new(s, bush).unwrap();
        assert!(bush.iter().all(|&t| incident(&s, &bush.thickness(), Square::new(10, 10), t)));
        assert_eq!(incidence_count(&p, &bush).unwrap().incidences, bush.len() as u64);
        let other = Family::new(Scale::new(8, 2).unwrap(), [Tube::new(0, 0)]).unwrap();
        assert!(incidence_count(&p, &other).is_err());
    }
}
