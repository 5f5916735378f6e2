//! Two-ends non-concentration along tubes, the covering lower bound it
//! forces, the refinement of a tube-square system to two-ends segments, and
//! an empirical audit of the resulting dichotomy.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::exact::le_scaled_pow2;
use crate::grid::{incident, Family, Interval, Scale, Square, Tube};
use crate::multiscale::{good_intervals, LipschitzFn};
use crate::scalar::rational_to_f64;
use crate::sets::{branching, check_delta_set, uniformity_defect, BallCounter};
use crate::Rational;

/// Squares `P` together with a tube family `𝒯_p` through each of them.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeSquareSystem {
    scale: Scale,
    thickness: Rational,
    squares: Vec<Square>,
    tubes: Vec<Vec<Tube>>,
}

impl TubeSquareSystem {
    /// Validates that every listed tube is incident to its square.
    pub fn new(scale: Scale, thickness: Rational, entries: impl IntoIterator<Item = (Square, Vec<Tube>)>) -> Result<Self> {
        let mut map: BTreeMap<Square, BTreeSet<Tube>> = BTreeMap::new();
        for (p, ts) in entries {
            let slot = map.entry(p).or_default();
            for t in ts {
                if !incident(&scale, &thickness, p, t) {
                    return Err(LabError::InvalidParameter(format!("tube {t:?} does not meet square {p:?}")));
                }
                slot.insert(t);
            }
        }
        let (squares, tubes) = map.into_iter().map(|(p, ts)| (p, ts.into_iter().collect())).unzip();
        Ok(TubeSquareSystem { scale, thickness, squares, tubes })
    }

    /// `𝒯_p` = every tube of `tubes` incident to `p`.
    pub fn from_families(squares: &Family<Square>, tubes: &Family<Tube>) -> Result<Self> {
        squares.ensure_same_scale(tubes)?;
        let scale = tubes.scale();
        let c = tubes.thickness();
        let entries: Vec<(Square, Vec<Tube>)> = squares
            .elements()
            .par_iter()
            .map(|&p| (p, tubes.iter().copied().filter(|&t| incident(&scale, &c, p, t)).collect()))
            .collect();
        Ok(TubeSquareSystem { scale, thickness: c, squares: entries.iter().map(|e| e.0).collect(), tubes: entries.into_iter().map(|e| e.1).collect() })
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn thickness(&self) -> Rational {
        self.thickness
    }

    pub fn squares(&self) -> &[Square] {
        &self.squares
    }

    pub fn tubes_at(&self, i: usize) -> &[Tube] {
        &self.tubes[i]
    }

    pub fn len(&self) -> usize {
        self.squares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    /// `Σ_p |𝒯_p|`.
    pub fn incidences(&self) -> usize {
        self.tubes.iter().map(Vec::len).sum()
    }

    /// `∪_p 𝒯_p`.
    pub fn union(&self) -> BTreeSet<Tube> {
        self.tubes.iter().flatten().copied().collect()
    }

    /// `𝒫_T = {p : T ∈ 𝒯_p}` for every tube of the union.
    pub fn squares_along(&self) -> BTreeMap<Tube, Vec<Square>> {
        let mut out: BTreeMap<Tube, Vec<Square>> = BTreeMap::new();
        for (p, ts) in self.squares.iter().zip(&self.tubes) {
            for t in ts {
                out.entry(*t).or_default().push(*p);
            }
        }
        out
    }

    /// `(Σ_p |𝒯_p|, Σ_T |𝒫_T|)`, computed independently.
    pub fn double_count(&self) -> (usize, usize) {
        (self.incidences(), self.squares_along().values().map(Vec::len).sum())
    }
}

/// Worst witness of a two-ends scan.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoEndsReport {
    pub ok: bool,
    /// Ball radius `ρ = 2^{-level}` of the worst witness.
    pub worst_level: u32,
    pub worst_center: Square,
    /// `|P ∩ B| / (allowance · |P|)`, at most `c` when `ok`.
    pub worst_ratio: f64,
}

/// Scans balls `B(p, 2^{-i})`, `p ∈ P`, `top < i < e`, against the bound
/// `c (2^{-i}/2^{-top})^ε (2^{-top}/δ)^κ |P|`.
fn two_ends_scan(e: u32, squares: &[Square], top: u32, eps: &Rational, kappa: &Rational, c: &Rational) -> TwoEndsReport {
    let pts: Vec<[i64; 2]> = squares.iter().map(|p| [p.col, p.row]).collect();
    let counter = BallCounter::new(&pts, 2);
    let size = Rational::from_integer(squares.len() as i128);
    let mut report = TwoEndsReport { ok: true, worst_level: top, worst_center: squares[0], worst_ratio: 0.0 };
    for i in top + 1..e {
        let exponent = *eps * Rational::from_integer(top as i128 - i as i128) + *kappa * Rational::from_integer((e - top) as i128);
        let (z, mag) = if exponent < Rational::from_integer(0) { (-1, -exponent) } else { (1, exponent) };
        let allowance = rational_to_f64(&exponent).exp2() * squares.len() as f64;
        let radius = 1i64 << (e - i);
        for (p, q) in squares.iter().zip(&pts) {
            let count = counter.count(*q, radius);
            let ratio = count as f64 / allowance;
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_level = i;
                report.worst_center = *p;
            }
            if report.ok && !le_scaled_pow2(&Rational::from_integer(count as i128), &(*c * size), z, &mag) {
                report.ok = false;
            }
        }
    }
    report
}

/// Whether a tube is ε-two-ends with respect to the squares `P_T` along it:
/// `|P_T ∩ B_ρ| <= c ρ^ε δ^{-κ} |P_T|` for dyadic `ρ ∈ (δ, 1)` and balls
/// centred at elements of `P_T`.
pub fn is_two_ends(scale: &Scale, squares: &[Square], eps: &Rational, kappa: &Rational, c: &Rational) -> Result<TwoEndsReport> {
    if squares.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    Ok(two_ends_scan(scale.delta_exp(), squares, 0, eps, kappa, c))
}

/// The default two-ends loss exponent `5ε³`.
pub fn default_kappa(eps: &Rational) -> Rational {
    Rational::from_integer(5) * *eps * *eps * *eps
}

/// Covering numbers of `P` against `ρ^{-s}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringReport {
    /// `(level j, |P|_{2^{-j}}, |P|_{2^{-j}} / 2^{js})`.
    pub levels: Vec<(u32, usize, f64)>,
    pub min_ratio: f64,
    pub worst_level: u32,
    /// Smallest `a >= 0` with `|P|_ρ >= ρ^{-s} δ^{a}` at every level.
    pub slack_exponent: f64,
    /// `slack_exponent <= eps`.
    pub ok: bool,
}

pub fn covering_lower_check(p: &Family<Square>, s: &Rational, eps: &Rational) -> Result<CoveringReport> {
    if p.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    let e = p.scale().delta_exp();
    let sf = rational_to_f64(s);
    let mut levels = Vec::new();
    let (mut min_ratio, mut worst_level) = (f64::INFINITY, 0);
    for j in 0..=e {
        let cov = p.covering_number(j)?;
        let ratio = cov as f64 / (j as f64 * sf).exp2();
        if ratio < min_ratio {
            min_ratio = ratio;
            worst_level = j;
        }
        levels.push((j, cov, ratio));
    }
    let slack_exponent = (-min_ratio.log2()).max(0.0) / e as f64;
    Ok(CoveringReport { levels, min_ratio, worst_level, slack_exponent, ok: slack_exponent <= rational_to_f64(eps) + 1e-12 })
}

/// Knobs of the refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoEndsParams {
    /// Two-ends loss exponent; `5ε³` when `None`.
    pub kappa: Option<Rational>,
    /// Implicit constant for every postcondition.
    pub constant: Rational,
}

impl Default for TwoEndsParams {
    fn default() -> Self {
        TwoEndsParams { kappa: None, constant: Rational::from_integer(4) }
    }
}

/// Incidence bookkeeping after one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub name: &'static str,
    pub squares: usize,
    /// Tubes or segments, depending on the stage.
    pub others: usize,
    /// Incidences summed over squares.
    pub by_square: usize,
    /// Incidences summed over tubes or segments.
    pub by_other: usize,
    /// Incidences relative to the previous stage.
    pub ratio: f64,
}

impl StageRecord {
    pub fn double_count_ok(&self) -> bool {
        self.by_square == self.by_other
    }
}

/// A `δ × ρ̃` segment: a `δ/ρ̃`-tube cluster inside one `ρ̃`-square.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub tube_key: [i64; 2],
    pub square_key: [i64; 2],
    /// `𝒫_U`.
    pub squares: Vec<Square>,
}

/// Output of [`two_ends_refine`].
#[derive(Clone, Debug)]
pub struct TwoEndsRefinement {
    /// `ρ̃ = 2^{-rho_level}`.
    pub rho_level: u32,
    /// `ρ̃ >= δ^{1-ε}`.
    pub rho_ok: bool,
    /// Averaged branching function of the squares along surviving tubes, at `j/e`.
    pub branching: Vec<f64>,
    pub slopes: Vec<f64>,
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Largest two-ends ratio over kept segments.
    pub two_ends_constant: f64,
    pub two_ends_ok: bool,
    /// `Σ|𝒰_p| / ((δ/ρ̃)^{ε³} Σ|Ū_p|)`.
    pub mass_constant: f64,
    pub mass_ok: bool,
    /// `(Σ|𝒯_p| / |∪𝒯_p|) / (δ^{-ε} Σ|𝒰_p| / |Ū|)`.
    pub density_constant: f64,
    pub density_ok: bool,
    pub stages: Vec<StageRecord>,
    /// `Σ|𝒯_p| / |∪𝒯_p|` against `δ^{-2ε}`.
    pub hypothesis_ratio: f64,
    pub hypothesis_ok: bool,
    pub degenerate: bool,
}

impl TwoEndsRefinement {
    pub fn all_ok(&self) -> bool {
        self.rho_ok && self.two_ends_ok && self.mass_ok && self.density_ok
    }

    /// Product of stage ratios.
    pub fn total_ratio(&self) -> f64 {
        self.stages.iter().map(|s| s.ratio).product()
    }
}

fn direction_family(scale: Scale, tubes: &[Tube]) -> Result<Family<Interval>> {
    let n = scale.side();
    Family::new(scale, tubes.iter().map(|t| Interval(t.slope.min(n - 1))))
}

fn segment_keys(e: u32, j: u32, p: Square, t: Tube) -> ([i64; 2], [i64; 2]) {
    ([t.slope >> j, t.intercept >> j], [p.col >> (e - j), p.row >> (e - j)])
}

/// Refines a tube-square system to `δ × ρ̃` segments that are two-ends,
/// machine-checking the two-ends, mass and density postconditions.
pub fn two_ends_refine(sys: &TubeSquareSystem, eps: &Rational, params: &TwoEndsParams) -> Result<TwoEndsRefinement> {
    if sys.is_empty() || sys.incidences() == 0 {
        return Err(LabError::EmptyFamily);
    }
    let scale = sys.scale();
    let e = scale.delta_exp();
    let epsf = rational_to_f64(eps);
    let kappa = params.kappa.unwrap_or_else(|| default_kappa(eps));
    let c = params.constant;
    let union = sys.union();
    let total = sys.incidences();
    let hypothesis_ratio = total as f64 / union.len() as f64;
    let hypothesis_ok = le_scaled_pow2(
        &Rational::from_integer(union.len() as i128),
        &Rational::from_integer(total as i128),
        -(2 * e as i64),
        eps,
    );
    let first = StageRecord { name: "input", squares: sys.len(), others: union.len(), by_square: total, by_other: sys.double_count().1, ratio: 1.0 };
    let degenerate = sys.len() == 1 || union.len() == 1;
    if degenerate {
        let segments = sys
            .squares_along()
            .into_iter()
            .map(|(t, squares)| Segment { tube_key: [t.slope, t.intercept], square_key: [0, 0], squares })
            .collect();
        return Ok(TwoEndsRefinement {
            rho_level: 0,
            rho_ok: true,
            branching: vec![0.0; e as usize + 1],
            slopes: Vec::new(),
            breakpoints: vec![0.0, 1.0],
            segments,
            two_ends_constant: 0.0,
            two_ends_ok: true,
            mass_constant: 1.0,
            mass_ok: true,
            density_constant: 1.0,
            density_ok: true,
            stages: vec![first],
            hypothesis_ratio,
            hypothesis_ok,
            degenerate,
        });
    }
    if !hypothesis_ok {
        return Err(LabError::Hypothesis(format!(
            "average tube degree {hypothesis_ratio:.3} is below δ^(-2ε) = {:.3}",
            (2.0 * epsf * e as f64).exp2()
        )));
    }
    let mut profile = None;
    for (p, ts) in sys.squares.iter().zip(&sys.tubes) {
        let dirs = direction_family(scale, ts)?;
        if dirs.len() != ts.len() {
            return Err(LabError::Hypothesis(format!("square {p:?} has two tubes in one direction")));
        }
        if let Some((j, lo, hi)) = uniformity_defect(&dirs) {
            return Err(LabError::NotUniform(format!("directions at {p:?}: block level {j} has {lo}..{hi} children")));
        }
        let b = branching(&dirs).counts;
        match &profile {
            None => profile = Some(b),
            Some(prev) if *prev != b => {
                return Err(LabError::Hypothesis(format!("square {p:?} has a different branching profile")));
            }
            _ => {}
        }
    }

    // stage 1: degree regularization against the initial averages
    let along = sys.squares_along();
    let avg_p = total as f64 / sys.len() as f64;
    let avg_t = total as f64 / union.len() as f64;
    let mut alive_p: BTreeSet<Square> = sys.squares.iter().zip(&sys.tubes).filter(|(_, ts)| ts.len() as f64 * 4.0 >= avg_p).map(|(p, _)| *p).collect();
    let mut alive_t: BTreeSet<Tube> = along.iter().filter(|(_, ps)| ps.len() as f64 * 4.0 >= avg_t).map(|(t, _)| *t).collect();
    loop {
        let before = (alive_p.len(), alive_t.len());
        alive_p.retain(|p| {
            let i = sys.squares.binary_search(p).expect("square of the system");
            sys.tubes[i].iter().filter(|t| alive_t.contains(t)).count() as f64 * 4.0 >= avg_p
        });
        alive_t.retain(|t| along[t].iter().filter(|p| alive_p.contains(p)).count() as f64 * 4.0 >= avg_t);
        if (alive_p.len(), alive_t.len()) == before {
            break;
        }
    }
    let regular = TubeSquareSystem {
        scale,
        thickness: sys.thickness,
        squares: alive_p.iter().copied().collect(),
        tubes: alive_p
            .iter()
            .map(|p| {
                let i = sys.squares.binary_search(p).expect("square of the system");
                sys.tubes[i].iter().copied().filter(|t| alive_t.contains(t)).collect()
            })
            .collect(),
    };
    let (r_sq, r_tb) = regular.double_count();
    let mut stages = vec![first];
    stages.push(StageRecord {
        name: "regularized",
        squares: regular.len(),
        others: regular.union().len(),
        by_square: r_sq,
        by_other: r_tb,
        ratio: r_sq as f64 / total as f64,
    });
    if r_sq == 0 {
        return Err(LabError::Postcondition(format!("regularization removed every incidence; stages: {stages:?}")));
    }

    // stage 2: branching of the squares along each tube, measured along the tube
    let regular_along = regular.squares_along();
    let mut branching_fn = vec![0.0f64; e as usize + 1];
    for ps in regular_along.values() {
        for (j, slot) in branching_fn.iter_mut().enumerate() {
            let cols: BTreeSet<i64> = ps.iter().map(|p| p.col >> (e as usize - j)).collect();
            *slot += (cols.len() as f64).log2() / e as f64;
        }
    }
    let tubes_alive = regular_along.len() as f64;
    for v in &mut branching_fn {
        *v /= tubes_alive;
    }
    let q = ((4.0 / epsf).ceil() as usize).next_power_of_two();
    let n = e as usize * q;
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            let k = (i / q).min(e as usize - 1);
            let frac = (i - k * q) as f64 / q as f64;
            (branching_fn[k] + (branching_fn[k + 1] - branching_fn[k]) * frac).max(0.0)
        })
        .collect();
    let lip = LipschitzFn::new(values, 1.0)?;
    let eps0 = epsf.powi((2.0 / epsf).ceil() as i32).max(4.0 / n as f64).min(epsf);
    let part = good_intervals(&lip, &epsf, &eps0)?;
    let b_index = part.classes.iter().position(|&k| k >= 1).map(|l| part.breakpoints[l]).unwrap_or(n);
    let rho_level = (b_index / q) as u32;
    let rho_ok = Rational::from_integer(rho_level as i128) <= (Rational::from_integer(1) - eps) * Rational::from_integer(e as i128);

    // stage 3: segments at ρ̃, pruned to the two-ends ones
    let j = rho_level;
    let u_total: usize = sys
        .squares
        .iter()
        .zip(&sys.tubes)
        .map(|(p, ts)| ts.iter().map(|t| segment_keys(e, j, *p, *t).0).collect::<BTreeSet<_>>().len())
        .sum();
    let mut seg_map: BTreeMap<([i64; 2], [i64; 2]), BTreeSet<Square>> = BTreeMap::new();
    for (p, ts) in regular.squares.iter().zip(&regular.tubes) {
        for t in ts {
            seg_map.entry(segment_keys(e, j, *p, *t)).or_default().insert(*p);
        }
    }
    let seg_incidences: usize = seg_map.values().map(BTreeSet::len).sum();
    let (seg_sq, seg_ot) = {
        let mut by_sq: BTreeMap<Square, usize> = BTreeMap::new();
        for ps in seg_map.values() {
            for p in ps {
                *by_sq.entry(*p).or_insert(0) += 1;
            }
        }
        (by_sq.values().sum::<usize>(), seg_incidences)
    };
    stages.push(StageRecord {
        name: "segments",
        squares: regular.len(),
        others: seg_map.len(),
        by_square: seg_sq,
        by_other: seg_ot,
        ratio: seg_incidences as f64 / r_sq as f64,
    });
    let candidates: Vec<(([i64; 2], [i64; 2]), Vec<Square>)> =
        seg_map.into_iter().map(|(k, ps)| (k, ps.into_iter().collect())).collect();
    let scanned: Vec<(Segment, TwoEndsReport)> = candidates
        .into_par_iter()
        .map(|((tk, sk), squares)| {
            let rep = two_ends_scan(e, &squares, j, eps, &kappa, &c);
            (Segment { tube_key: tk, square_key: sk, squares }, rep)
        })
        .collect();
    let mut segments = Vec::new();
    let mut two_ends_constant = 0.0f64;
    for (seg, rep) in scanned {
        if rep.ok {
            two_ends_constant = two_ends_constant.max(rep.worst_ratio);
            segments.push(seg);
        }
    }
    let kept: usize = segments.iter().map(|s| s.squares.len()).sum();
    let kept_by_square = {
        let mut by_sq: BTreeMap<Square, usize> = BTreeMap::new();
        for s in &segments {
            for p in &s.squares {
                *by_sq.entry(*p).or_insert(0) += 1;
            }
        }
        by_sq
    };
    stages.push(StageRecord {
        name: "two-ends",
        squares: kept_by_square.len(),
        others: segments.len(),
        by_square: kept_by_square.values().sum(),
        by_other: kept,
        ratio: kept as f64 / seg_incidences.max(1) as f64,
    });
    if segments.is_empty() {
        return Err(LabError::Postcondition(format!("no two-ends segment survives at ρ̃ = 2^-{j}; stages: {stages:?}")));
    }
    let eps3 = *eps * *eps * *eps;
    let kept_r = Rational::from_integer(kept as i128);
    // Σ|𝒰_p| <= c Σ|Ū_p| (ρ̃/δ)^{ε³}
    let mass_ok = le_scaled_pow2(&Rational::from_integer(u_total as i128), &(c * kept_r), (e - j) as i64, &eps3);
    let mass_constant = u_total as f64 / (kept as f64 * ((e - j) as f64 * rational_to_f64(&eps3)).exp2());
    // (Σ|𝒯_p| / |∪𝒯_p|) <= c δ^{-ε} Σ|𝒰_p| / |Ū|
    let lhs = Rational::new(total as i128, union.len() as i128);
    let rhs = Rational::new(u_total as i128, segments.len() as i128);
    let density_ok = le_scaled_pow2(&lhs, &(c * rhs), e as i64, eps);
    let density_constant = rational_to_f64(&lhs) / (rational_to_f64(&rhs) * (e as f64 * epsf).exp2());
    Ok(TwoEndsRefinement {
        rho_level: j,
        rho_ok,
        branching: branching_fn,
        slopes: part.slopes.clone(),
        breakpoints: (0..part.breakpoints.len()).map(|l| part.breakpoint(l)).collect(),
        segments,
        two_ends_constant,
        two_ends_ok: two_ends_constant <= rational_to_f64(&c) + 1e-12,
        mass_constant,
        mass_ok,
        density_constant,
        density_ok,
        stages,
        hypothesis_ratio,
        hypothesis_ok,
        degenerate,
    })
}

/// Evidence for the two alternatives of the dichotomy.
#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyAudit {
    /// `|P| r² / (δ^s |𝒯̄|²)`.
    pub item1_ratio: f64,
    /// Allowance `c δ^{-(ε+η)}` the ratio is compared to.
    pub item1_allowed: f64,
    pub item1: bool,
    /// Best concentration scale: `(level, heavy squares, covered fraction)`.
    pub item2_witness: Option<(u32, usize, f64)>,
    /// Every level with a heavy family covering enough of `P`.
    pub item2_levels: Vec<u32>,
    pub item2: bool,
    pub r: f64,
    pub max_set_constant: f64,
    /// Violated hypotheses; the audit runs regardless.
    pub violations: Vec<String>,
}

impl DichotomyAudit {
    /// `1`, `2`, both (`3`) or neither (`0`).
    pub fn verdict(&self) -> u8 {
        self.item1 as u8 + 2 * self.item2 as u8
    }
}

/// Audits the dichotomy: is `|P|` small against `|𝒯̄|²/r²`, or does `P`
/// concentrate in squares of some side `Δ >= δ^{1-√ε}`?
pub fn dichotomy_audit(sys: &TubeSquareSystem, s: &Rational, eps: &Rational, eta: &Rational) -> Result<DichotomyAudit> {
    if sys.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    let scale = sys.scale();
    let e = scale.delta_exp();
    let (sf, epsf, etaf) = (rational_to_f64(s), rational_to_f64(eps), rational_to_f64(eta));
    let mut violations = Vec::new();
    let sizes: Vec<usize> = sys.tubes.iter().map(Vec::len).collect();
    let r = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    let (lo, hi) = (*sizes.iter().min().expect("nonempty"), *sizes.iter().max().expect("nonempty"));
    if lo == 0 || hi > 2 * lo {
        violations.push(format!("|𝒯_p| ranges over {lo}..{hi}, not comparable to r"));
    }
    let one = Rational::from_integer(1);
    let mut max_set_constant = 0.0f64;
    for ts in sys.tubes.iter().filter(|ts| !ts.is_empty()) {
        let fam = Family::from_trusted(scale, sys.thickness, ts.clone());
        max_set_constant = max_set_constant.max(check_delta_set(&fam, s, &one)?.achieved_constant);
    }
    let union = sys.union().len() as f64;
    let item1_ratio = sys.len() as f64 * r * r * (e as f64 * sf).exp2() / (union * union);
    let item1_allowed = 4.0 * (e as f64 * (epsf + etaf)).exp2();
    let fraction_needed = (-(e as f64) * (epsf + etaf)).exp2();
    let exponent = 2.0 - sf + epsf.powf(0.25);
    let top = ((1.0 - epsf.sqrt()) * e as f64 + 1e-9).floor().max(0.0) as u32;
    let fam = Family::from_trusted(scale, sys.thickness, sys.squares.clone());
    let mut item2_levels = Vec::new();
    let mut item2_witness: Option<(u32, usize, f64)> = None;
    for j in 0..=top.min(e) {
        let need = ((e - j) as f64 * exponent).exp2();
        let counts = fam.ancestor_counts(j);
        let heavy: Vec<usize> = counts.values().copied().filter(|&c| c as f64 >= need).collect();
        let covered = heavy.iter().sum::<usize>() as f64 / sys.len() as f64;
        if !heavy.is_empty() && covered >= fraction_needed {
            item2_levels.push(j);
            if item2_witness.map_or(true, |w| covered > w.2) {
                item2_witness = Some((j, heavy.len(), covered));
            }
        }
    }
    Ok(DichotomyAudit {
        item1_ratio,
        item1_allowed,
        item1: item1_ratio <= item1_allowed,
        item2: item2_witness.is_some(),
        item2_witness,
        item2_levels,
        r,
        max_set_constant,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter() -> Rational {
        Rational::new(1, 4)
    }

    fn along_row(cols: impl IntoIterator<Item = i64>) -> Vec<Square> {
        cols.into_iter().map(|c| Square::new(c, 0)).collect()
    }

    #[test]
    fn spread_squares_are_two_ends() {
        let scale = Scale::new(8, 2).unwrap();
        let sq = along_row((0..256).step_by(4));
        let rep = is_two_ends(&scale, &sq, &quarter(), &default_kappa(&quarter()), &Rational::from_integer(1)).unwrap();
        assert!(rep.ok, "{rep:?}");
        // oracle at ρ = 1/2: an open ball of radius 128 around square 0 holds columns 0..128, i.e. 32 of 64
        let allowed = (-0.25f64).exp2() * (8.0 * 5.0 / 64.0f64).exp2();
        assert!(32.0 / 64.0 <= allowed);
    }

    #[test]
    fn clustered_squares_fail() {
        let scale = Scale::new(8, 2).unwrap();
        let sq = along_row(0..16);
        let rep = is_two_ends(&scale, &sq, &quarter(), &default_kappa(&quarter()), &Rational::from_integer(1)).unwrap();
        assert!(!rep.ok);
        // every ball of radius ≥ 16 holds all 16 squares; the tightest allowance is at ρ = δ^{1/2}
        assert!(rep.worst_level >= 4);
    }

    #[test]
    fn singleton_depends_on_the_smallest_ball() {
        // the binding ball is ρ = 2δ: allowance c 2^{-7/4 + 5/8} = c 2^{-9/8}
        let scale = Scale::new(8, 2).unwrap();
        let k = default_kappa(&quarter());
        let p = [Square::new(3, 3)];
        assert!(!is_two_ends(&scale, &p, &quarter(), &k, &Rational::from_integer(2)).unwrap().ok);
        let rep = is_two_ends(&scale, &p, &quarter(), &k, &Rational::from_integer(4)).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.worst_level, 7);
        assert!(is_two_ends(&scale, &[], &quarter(), &quarter(), &Rational::from_integer(1)).is_err());
    }

    #[test]
    fn covering_of_full_grid() {
        let scale = Scale::new(6, 2).unwrap();
        let rep = covering_lower_check(&Family::<Square>::full_grid(scale), &Rational::from_integer(1), &quarter()).unwrap();
        assert!(rep.ok);
        assert!(rep.min_ratio >= 1.0);
        let one = Family::new(scale, [Square::new(0, 0)]).unwrap();
        let rep = covering_lower_check(&one, &Rational::new(1, 2), &quarter()).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.worst_level, 6);
    }

    #[test]
    fn singleton_system_is_degenerate() {
        let scale = Scale::new(6, 2).unwrap();
        let p = Square::new(5, 5);
        let t = Tube::through_center(&scale, p, 10);
        let sys = TubeSquareSystem::new(scale, Rational::from_integer(1), [(p, vec![t])]).unwrap();
        let out = two_ends_refine(&sys, &quarter(), &TwoEndsParams::default()).unwrap();
        assert!(out.degenerate && out.all_ok());
        assert_eq!(out.rho_level, 0);
    }

    #[test]
    fn rejects_wrong_incidence() {
        let scale = Scale::new(6, 2).unwrap();
        assert!(TubeSquareSystem::new(scale, Rational::from_integer(1), [(Square::new(0, 0), vec![Tube::new(0, 40)])]).is_err());
    }

    #[test]
    fn horizontal_lines_refine_to_themselves() {
        // every square of the grid, horizontal tubes: two-ends already, so ρ̃ = 1
        let scale = Scale::new(6, 2).unwrap();
        let entries: Vec<(Square, Vec<Tube>)> = (0..64)
            .flat_map(|c| (0..64).map(move |r| (Square::new(c, r), vec![Tube::new(0, r)])))
            .collect();
        let sys = TubeSquareSystem::new(scale, Rational::new(1, 2), entries).unwrap();
        let out = two_ends_refine(&sys, &quarter(), &TwoEndsParams::default()).unwrap();
        assert_eq!(out.rho_level, 0);
        assert!(out.all_ok(), "{out:?}");
        assert_eq!(out.segments.len(), 64);
        for s in &out.stages {
            assert!(s.double_count_ok());
        }
        assert!((out.total_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn audit_spread_and_concentrated() {
        let scale = Scale::new(8, 2).unwrap();
        let half = Rational::new(1, 2);
        let eps = Rational::new(1, 100);
        // one 16x16 block, each square with its horizontal tube
        let entries: Vec<(Square, Vec<Tube>)> = (0..16)
            .flat_map(|c| (0..16).map(move |r| (Square::new(c, r), vec![Tube::new(0, r)])))
            .collect();
        let sys = TubeSquareSystem::new(scale, Rational::new(1, 2), entries).unwrap();
        let audit = dichotomy_audit(&sys, &half, &eps, &eps).unwrap();
        assert!(audit.item2_levels.contains(&4));
        let empty = TubeSquareSystem::new(scale, Rational::new(1, 2), Vec::new()).unwrap();
        assert!(dichotomy_audit(&empty, &half, &eps, &eps).is_err());
    }
}
