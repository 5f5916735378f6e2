//! Dyadic grid model: scales, squares, tubes, intervals, families and the
//! exact incidence predicate.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};

use crate::error::{invalid, LabError, Result};
use crate::scalar::parse_rational;
use crate::Rational;

/// Dyadic resolution `δ = 2^-e` together with the uniformity block size `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scale {
    delta_exp: u32,
    block_exp: u32,
}

impl Scale {
    pub fn new(delta_exp: u32, block_exp: u32) -> Result<Self> {
        if delta_exp < 2 {
            return invalid(format!("delta exponent must be at least 2, got {delta_exp}"));
        }
        if delta_exp > 30 {
            return invalid(format!("delta exponent {delta_exp} exceeds the supported range"));
        }
        if block_exp == 0 || delta_exp % block_exp != 0 {
            return invalid(format!("block exponent {block_exp} must divide {delta_exp}"));
        }
        Ok(Scale { delta_exp, block_exp })
    }

    pub fn delta_exp(&self) -> u32 {
        self.delta_exp
    }

    pub fn block_exp(&self) -> u32 {
        self.block_exp
    }

    /// Number of block levels `m = e / T`.
    pub fn levels(&self) -> u32 {
        self.delta_exp / self.block_exp
    }

    /// Grid side `2^e`.
    pub fn side(&self) -> i64 {
        1i64 << self.delta_exp
    }

    pub fn delta(&self) -> f64 {
        (self.side() as f64).recip()
    }

    /// Dyadic exponent of block level `j`, i.e. `j T`.
    pub fn block_level_exp(&self, j: u32) -> Result<u32> {
        if j > self.levels() {
            return Err(LabError::LevelOutOfRange { level: j, max: self.levels() });
        }
        Ok(j * self.block_exp)
    }

    /// The ε a block size corresponds to, `log2(2T) / T`.
    pub fn eps_for_block(block_exp: u32) -> f64 {
        let t = block_exp as f64;
        (2.0 * t).log2() / t
    }

    /// The ε this scale's block size corresponds to.
    pub fn eps(&self) -> f64 {
        Self::eps_for_block(self.block_exp)
    }

    /// Smallest block size `T` dividing `e` whose ε does not exceed `eps`.
    pub fn block_for_eps(delta_exp: u32, eps: f64) -> Option<u32> {
        (1..=delta_exp)
            .filter(|t| delta_exp % t == 0)
            .find(|&t| Self::eps_for_block(t) <= eps)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e={} T={}", self.delta_exp, self.block_exp)
    }
}

/// What a family holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Intervals,
    Squares,
    Tubes,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Intervals => "intervals",
            Kind::Squares => "squares",
            Kind::Tubes => "tubes",
        }
    }

    pub fn dim(&self) -> u32 {
        match self {
            Kind::Intervals => 1,
            _ => 2,
        }
    }
}

impl FromStr for Kind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intervals" => Ok(Kind::Intervals),
            "squares" => Ok(Kind::Squares),
            "tubes" => Ok(Kind::Tubes),
            other => invalid(format!("unknown family kind {other:?}")),
        }
    }
}

/// A grid element addressed by up to two integer coordinates.
pub trait Cell: Copy + Ord + std::hash::Hash + fmt::Debug + Send + Sync + 'static {
    const KIND: Kind;
    const DIM: usize;

    fn coords(&self) -> [i64; 2];
    fn from_coords(c: [i64; 2]) -> Self;

    /// Whether the element index lies in the grid at `scale`.
    fn in_range(&self, scale: &Scale) -> bool;

    /// Ancestor key at dyadic level `k` (side `2^-k`), by floor division.
    fn ancestor(&self, scale: &Scale, k: u32) -> [i64; 2] {
        let shift = scale.delta_exp - k.min(scale.delta_exp);
        let c = self.coords();
        [c[0] >> shift, if Self::DIM == 2 { c[1] >> shift } else { 0 }]
    }
}

/// A δ-interval `[iδ, (i+1)δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval(pub i64);

/// An axis-parallel δ-square with lower-left corner `(col δ, row δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Square {
    pub col: i64,
    pub row: i64,
}

/// A δ-tube around the segment `y = a x + b`, `x ∈ [0,1]`, with
/// `a = slope δ` and `b = intercept δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tube {
    pub slope: i64,
    pub intercept: i64,
}

impl Square {
    pub fn new(col: i64, row: i64) -> Self {
        Square { col, row }
    }

    /// Dual tube with the same index pair.
    pub fn dual(&self) -> Tube {
        Tube { slope: self.col, intercept: self.row }
    }

    /// Block-level parent: the square of side `2^{-jT}` containing this one,
    /// in that level's index units.
    pub fn parent(&self, scale: &Scale, j: u32) -> Result<Square> {
        let k = scale.block_level_exp(j)?;
        let a = self.ancestor(scale, k);
        Ok(Square::new(a[0], a[1]))
    }
}

impl Tube {
    pub fn new(slope: i64, intercept: i64) -> Self {
        Tube { slope, intercept }
    }

    /// The tube of slope index `slope` whose center line passes closest to the
    /// center of `p`, intercept rounded half up.
    pub fn through_center(scale: &Scale, p: Square, slope: i64) -> Tube {
        let n = scale.side() as i128;
        // intercept in units of δ: (row + 1/2) - slope (col + 1/2) / n, scaled by 2n
        let num = (2 * p.row as i128 + 1) * n - slope as i128 * (2 * p.col as i128 + 1);
        let den = 2 * n;
        let b = (2 * num + den).div_euclid(2 * den);
        Tube::new(slope, b as i64)
    }

    /// Dual square; fails when the index pair is outside the square grid.
    pub fn dual(&self, scale: &Scale) -> Result<Square> {
        let sq = Square::new(self.slope, self.intercept);
        if sq.in_range(scale) {
            Ok(sq)
        } else {
            invalid(format!("tube {:?} has no dual square at {}", self, scale))
        }
    }
}

impl Cell for Interval {
    const KIND: Kind = Kind::Intervals;
    const DIM: usize = 1;
    fn coords(&self) -> [i64; 2] {
        [self.0, 0]
    }
    fn from_coords(c: [i64; 2]) -> Self {
        Interval(c[0])
    }
    fn in_range(&self, scale: &Scale) -> bool {
        (0..scale.side()).contains(&self.0)
    }
}

impl Cell for Square {
    const KIND: Kind = Kind::Squares;
    const DIM: usize = 2;
    fn coords(&self) -> [i64; 2] {
        [self.col, self.row]
    }
    fn from_coords(c: [i64; 2]) -> Self {
        Square::new(c[0], c[1])
    }
    fn in_range(&self, scale: &Scale) -> bool {
        let n = scale.side();
        (0..n).contains(&self.col) && (0..n).contains(&self.row)
    }
}

impl Cell for Tube {
    const KIND: Kind = Kind::Tubes;
    const DIM: usize = 2;
    fn coords(&self) -> [i64; 2] {
        [self.slope, self.intercept]
    }
    fn from_coords(c: [i64; 2]) -> Self {
        Tube::new(c[0], c[1])
    }
    fn in_range(&self, scale: &Scale) -> bool {
        let n = scale.side();
        (0..=n).contains(&self.slope) && (-n..n).contains(&self.intercept)
    }
}

/// Inclusive range of rows met by `tube` in column `col`, clipped to the grid.
///
/// Works in units of `δ²`: the tube's vertical extent over the column is
/// `[q(A col + B n) - p n, q(A(col+1) + B n) + p n] / (q n²)` for thickness
/// `c = p/q`, and row `j` covers `[j n q, (j+1) n q)` in the same units.
pub fn rows_in_column(scale: &Scale, thickness: &Rational, tube: Tube, col: i64) -> Option<(i64, i64)> {
    let n = scale.side() as i128;
    let p = *thickness.numer();
    let q = *thickness.denom();
    let a = tube.slope as i128;
    let b = tube.intercept as i128;
    let i = col as i128;
    let lo = q * (a * i + b * n) - p * n;
    let hi = q * (a * (i + 1) + b * n) + p * n;
    let unit = n * q;
    // rows j with j*unit < hi and lo < (j+1)*unit
    let first = lo.div_euclid(unit);
    let last = ceil_div(hi, unit) - 1;
    let first = first.max(0);
    let last = last.min(n - 1);
    if first > last {
        None
    } else {
        Some((first as i64, last as i64))
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

/// Whether square `p` meets the `c δ`-thickened tube `t`, exactly.
pub fn incident(scale: &Scale, thickness: &Rational, p: Square, t: Tube) -> bool {
    match rows_in_column(scale, thickness, t, p.col) {
        Some((lo, hi)) => (0..scale.side()).contains(&p.col) && lo <= p.row && p.row <= hi,
        None => false,
    }
}

/// Sorted deduplicated collection of grid elements at a common scale.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Family<E: Cell> {
    scale: Scale,
    thickness: Rational,
    elems: Vec<E>,
}

impl<E: Cell> Family<E> {
    /// Builds a family, sorting and deduplicating. Out-of-range elements are an error.
    pub fn new(scale: Scale, elems: impl IntoIterator<Item = E>) -> Result<Self> {
        let mut elems: Vec<E> = elems.into_iter().collect();
        if let Some(bad) = elems.iter().find(|e| !e.in_range(&scale)) {
            return invalid(format!("element {bad:?} outside the grid at {scale}"));
        }
        elems.sort_unstable();
        elems.dedup();
        Ok(Family { scale, thickness: Rational::one(), elems })
    }

    /// Builds a family from elements already known to be in range.
    pub(crate) fn from_trusted(scale: Scale, thickness: Rational, mut elems: Vec<E>) -> Self {
        elems.sort_unstable();
        elems.dedup();
        Family { scale, thickness, elems }
    }

    pub fn empty(scale: Scale) -> Self {
        Family { scale, thickness: Rational::one(), elems: Vec::new() }
    }

    pub fn with_thickness(mut self, thickness: Rational) -> Result<Self> {
        if !thickness.is_positive() {
            return invalid("thickness factor must be positive");
        }
        self.thickness = thickness;
        Ok(self)
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn thickness(&self) -> Rational {
        self.thickness
    }

    pub fn kind(&self) -> Kind {
        E::KIND
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elements(&self) -> &[E] {
        &self.elems
    }

    pub fn iter(&self) -> std::slice::Iter<'_, E> {
        self.elems.iter()
    }

    pub fn contains(&self, e: &E) -> bool {
        self.elems.binary_search(e).is_ok()
    }

    /// Same scale and thickness, new elements.
    pub fn derive(&self, elems: Vec<E>) -> Self {
        Family::from_trusted(self.scale, self.thickness, elems)
    }

    pub fn filter(&self, mut keep: impl FnMut(&E) -> bool) -> Self {
        Family {
            scale: self.scale,
            thickness: self.thickness,
            elems: self.elems.iter().copied().filter(|e| keep(e)).collect(),
        }
    }

    pub fn ensure_same_scale<F: Cell>(&self, other: &Family<F>) -> Result<()> {
        if self.scale != other.scale {
            return Err(LabError::ScaleMismatch(self.scale.to_string(), other.scale.to_string()));
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.ensure_same_scale(other)?;
        let mut v = self.elems.clone();
        v.extend_from_slice(&other.elems);
        Ok(self.derive(v))
    }

    /// Number of occupied ancestors at dyadic level `rho_exp` (side `2^-rho_exp`).
    pub fn covering_number(&self, rho_exp: u32) -> Result<usize> {
        if rho_exp > self.scale.delta_exp {
            return Err(LabError::LevelOutOfRange { level: rho_exp, max: self.scale.delta_exp });
        }
        let mut keys: Vec<[i64; 2]> = self.elems.iter().map(|e| e.ancestor(&self.scale, rho_exp)).collect();
        keys.sort_unstable();
        keys.dedup();
        Ok(keys.len())
    }

    /// Child counts per occupied ancestor at dyadic level `k`.
    pub fn ancestor_counts(&self, k: u32) -> BTreeMap<[i64; 2], usize> {
        let mut out = BTreeMap::new();
        for e in &self.elems {
            *out.entry(e.ancestor(&self.scale, k)).or_insert(0) += 1;
        }
        out
    }

    /// Elements lying under the dyadic ancestor `key` at level `k`.
    pub fn under(&self, k: u32, key: [i64; 2]) -> Self {
        self.filter(|e| e.ancestor(&self.scale, k) == key)
    }

    /// Elements under the block-level parent `parent` at block level `j`.
    pub fn children(&self, j: u32, parent: [i64; 2]) -> Result<Self> {
        let k = self.scale.block_level_exp(j)?;
        Ok(self.under(k, parent))
    }
}

impl<'a, E: Cell> IntoIterator for &'a Family<E> {
    type Item = &'a E;
    type IntoIter = std::slice::Iter<'a, E>;
    fn into_iter(self) -> Self::IntoIter {
        self.elems.iter()
    }
}

impl Family<Square> {
    pub fn dual(&self) -> Family<Tube> {
        Family {
            scale: self.scale,
            thickness: self.thickness,
            elems: self.elems.iter().map(Square::dual).collect(),
        }
    }

    /// Every square of the grid.
    pub fn full_grid(scale: Scale) -> Self {
        let n = scale.side();
        let elems = (0..n).flat_map(|c| (0..n).map(move |r| Square::new(c, r))).collect();
        Family { scale, thickness: Rational::one(), elems }
    }
}

impl Family<Tube> {
    pub fn dual(&self) -> Result<Family<Square>> {
        let elems = self.elems.iter().map(|t| t.dual(&self.scale)).collect::<Result<Vec<_>>>()?;
        Ok(Family { scale: self.scale, thickness: self.thickness, elems })
    }

    /// Slope indices used by the family, as an interval family.
    pub fn directions(&self) -> Family<Interval> {
        let n = self.scale.side();
        let elems = self.elems.iter().map(|t| Interval(t.slope.min(n - 1))).collect();
        Family::from_trusted(self.scale, self.thickness, elems)
    }
}

impl Family<Interval> {
    /// Every δ-interval of `[0,1)`.
    pub fn full_grid(scale: Scale) -> Self {
        Family { scale, thickness: Rational::one(), elems: (0..scale.side()).map(Interval).collect() }
    }
}

/// A family of any kind, as read from a family file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyFamily {
    Intervals(Family<Interval>),
    Squares(Family<Square>),
    Tubes(Family<Tube>),
}

impl AnyFamily {
    pub fn kind(&self) -> Kind {
        match self {
            AnyFamily::Intervals(_) => Kind::Intervals,
            AnyFamily::Squares(_) => Kind::Squares,
            AnyFamily::Tubes(_) => Kind::Tubes,
        }
    }

    pub fn scale(&self) -> Scale {
        match self {
            AnyFamily::Intervals(f) => f.scale(),
            AnyFamily::Squares(f) => f.scale(),
            AnyFamily::Tubes(f) => f.scale(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyFamily::Intervals(f) => f.len(),
            AnyFamily::Squares(f) => f.len(),
            AnyFamily::Tubes(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self) -> String {
        match self {
            AnyFamily::Intervals(f) => write_family(f),
            AnyFamily::Squares(f) => write_family(f),
            AnyFamily::Tubes(f) => write_family(f),
        }
    }
}

impl From<Family<Interval>> for AnyFamily {
    fn from(f: Family<Interval>) -> Self {
        AnyFamily::Intervals(f)
    }
}
impl From<Family<Square>> for AnyFamily {
    fn from(f: Family<Square>) -> Self {
        AnyFamily::Squares(f)
    }
}
impl From<Family<Tube>> for AnyFamily {
    fn from(f: Family<Tube>) -> Self {
        AnyFamily::Tubes(f)
    }
}

/// Serializes a family in the text family format.
pub fn write_family<E: Cell>(f: &Family<E>) -> String {
    let mut out = String::new();
    let c = f.thickness();
    let _ = writeln!(
        out,
        "#kind={} e={} T={} c={}/{}",
        E::KIND.name(),
        f.scale.delta_exp,
        f.scale.block_exp,
        c.numer(),
        c.denom()
    );
    for e in f.iter() {
        let k = e.coords();
        if E::DIM == 1 {
            let _ = writeln!(out, "{}", k[0]);
        } else {
            let _ = writeln!(out, "{},{}", k[0], k[1]);
        }
    }
    out
}

/// Parses the text family format.
pub fn read_family(text: &str) -> Result<AnyFamily> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(LabError::Parse { line: 1, msg: "missing header".into() })?;
    let header = header
        .strip_prefix('#')
        .ok_or(LabError::Parse { line: 1, msg: "header must start with '#'".into() })?;
    let mut kind = None;
    let mut e = None;
    let mut t = None;
    let mut c = Rational::one();
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or(LabError::Parse { line: 1, msg: format!("bad header token {tok:?}") })?;
        let perr = |msg: String| LabError::Parse { line: 1, msg };
        match k {
            "kind" => kind = Some(v.parse::<Kind>().map_err(|x| perr(x.to_string()))?),
            "e" => e = Some(v.parse::<u32>().map_err(|x| perr(x.to_string()))?),
            "T" => t = Some(v.parse::<u32>().map_err(|x| perr(x.to_string()))?),
            "c" => c = parse_rational(v).ok_or_else(|| perr(format!("bad thickness {v:?}")))?,
            other => return Err(perr(format!("unknown header key {other:?}"))),
        }
    }
    let kind = kind.ok_or(LabError::Parse { line: 1, msg: "missing kind".into() })?;
    let e = e.ok_or(LabError::Parse { line: 1, msg: "missing e".into() })?;
    let t = t.ok_or(LabError::Parse { line: 1, msg: "missing T".into() })?;
    let scale = Scale::new(e, t)?;
    if !c.is_positive() || c.is_zero() {
        return Err(LabError::Parse { line: 1, msg: "thickness must be positive".into() });
    }
    let mut coords: Vec<[i64; 2]> = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != kind.dim() as usize {
            return Err(LabError::Parse { line: idx + 1, msg: format!("expected {} indices", kind.dim()) });
        }
        let mut k = [0i64; 2];
        for (slot, p) in k.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| LabError::Parse { line: idx + 1, msg: format!("bad index {p:?}") })?;
        }
        coords.push(k);
    }
    fn build<E: Cell>(scale: Scale, c: Rational, coords: &[[i64; 2]]) -> Result<Family<E>> {
        Family::new(scale, coords.iter().map(|&k| E::from_coords(k)))?.with_thickness(c)
    }
    Ok(match kind {
        Kind::Intervals => AnyFamily::Intervals(build(scale, c, &coords)?),
        Kind::Squares => AnyFamily::Squares(build(scale, c, &coords)?),
        Kind::Tubes => AnyFamily::Tubes(build(scale, c, &coords)?),
    })
}
