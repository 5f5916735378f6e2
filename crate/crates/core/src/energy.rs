//! Additive energy of δ-separated points on curves, Fourier moments of
//! gridded Frostman measures, and log-log exponent fits.

use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::constructions::even_cantor;
use crate::error::{invalid, LabError, Result};
use crate::grid::{Interval, Scale};
use crate::scalar::rational_to_f64;
use crate::sets::generate_random_frostman;
use crate::Rational;

/// Largest number of triples `energy3` enumerates.
pub const TRIPLE_BUDGET: usize = 100_000_000;

/// A planar curve `γ : [0,1] → ℝ²` with nonvanishing curvature.
#[derive(Clone, Debug, PartialEq)]
pub enum Curve {
    /// `y = x²`.
    Parabola,
    /// `(sin 1.25t, 1 - cos 1.25t)`, a unit-circle arc; the angle is stretched
    /// so that parameters `δ` apart give points at least `δ` apart.
    CircleArc,
    /// `y = Σ c_i x^i` with a declared lower bound on `|y''|` over `[0,1]`.
    Polynomial { coeffs: Vec<f64>, min_curvature: f64 },
}

impl Curve {
    pub fn point(&self, t: f64) -> [f64; 2] {
        match self {
            Curve::Parabola => [t, t * t],
            Curve::CircleArc => [(1.25 * t).sin(), 1.0 - (1.25 * t).cos()],
            Curve::Polynomial { coeffs, .. } => [t, coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)],
        }
    }

    fn second_derivative(coeffs: &[f64], t: f64) -> f64 {
        coeffs.iter().enumerate().skip(2).map(|(i, c)| (i * (i - 1)) as f64 * c * t.powi(i as i32 - 2)).sum()
    }

    /// Checks the declared curvature bound on a fine sample of `[0,1]`.
    pub fn validate(&self) -> Result<()> {
        if let Curve::Polynomial { coeffs, min_curvature } = self {
            if !(*min_curvature > 0.0) {
                return invalid("declared curvature bound must be positive");
            }
            for k in 0..=4096 {
                let t = k as f64 / 4096.0;
                let d2 = Self::second_derivative(coeffs, t).abs();
                if d2 < *min_curvature {
                    return invalid(format!("|y''({t})| = {d2} is below the declared bound {min_curvature}"));
                }
            }
        }
        Ok(())
    }
}

/// How parameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Cantor,
    RandomFrostman,
}

/// Worst ball count `|S ∩ B(y, r)| / (r/δ)^s` over dyadic `r` and centres in `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrostmanReport {
    pub constant: f64,
    pub worst_level: u32,
    /// `constant <= 4`.
    pub ok: bool,
}

/// δ-separated points on a curve.
#[derive(Clone, Debug)]
pub struct CurveSet {
    pub curve: Curve,
    pub scale: Scale,
    /// Parameter indices `t = i δ`.
    pub params: Vec<i64>,
    pub points: Vec<[f64; 2]>,
    pub frostman: FrostmanReport,
}

fn frostman_report(points: &[[f64; 2]], e: u32, s: f64) -> FrostmanReport {
    let delta = (-(e as f64)).exp2();
    let (constant, worst_level) = (0..=e)
        .into_par_iter()
        .map(|k| {
            let r = (-(k as f64)).exp2();
            let worst = points
                .iter()
                .map(|p| points.iter().filter(|q| (p[0] - q[0]).hypot(p[1] - q[1]) < r).count())
                .max()
                .unwrap_or(0);
            (worst as f64 / (r / delta).powf(s), k)
        })
        .reduce(|| (0.0, 0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    FrostmanReport { constant, worst_level, ok: constant <= 4.0 }
}

/// Parameters from an evenly spaced Cantor set or a random Frostman set,
/// mapped to the curve, with the ball-count check attached.
pub fn sample_curve_set(curve: Curve, e: u32, s: &Rational, seed: u64, kind: SampleKind) -> Result<CurveSet> {
    curve.validate()?;
    let scale = Scale::new(e, 1)?;
    let params: Vec<i64> = match kind {
        SampleKind::Cantor => even_cantor(e, s)?,
        SampleKind::RandomFrostman => {
            let f = generate_random_frostman::<Interval>(scale, s, seed, &Rational::from_integer(1))?;
            f.iter().map(|i| i.0).collect()
        }
    };
    let delta = scale.delta();
    let points: Vec<[f64; 2]> = params.iter().map(|&i| curve.point(i as f64 * delta)).collect();
    let frostman = frostman_report(&points, e, rational_to_f64(s));
    Ok(CurveSet { curve, scale, params, points, frostman })
}

/// Bracket for the additive energy `E_{3,δ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnergyBracket {
    /// `Σ_cells n²` over cells of side `cδ`.
    pub lower: u64,
    /// `Σ_cells n · (n over the 3×3 neighbourhood)`.
    pub upper: u64,
}

/// Bins the `|S|³` triple sums into cells of side `cδ` and brackets the
/// number of six-tuples with `|s₁+s₂+s₃-s₄-s₅-s₆| <= cδ`.
pub fn energy3(set: &CurveSet, c: f64) -> Result<EnergyBracket> {
    let m = set.points.len();
    if m == 0 {
        return Err(LabError::EmptyFamily);
    }
    if m.checked_pow(3).map_or(true, |t| t > TRIPLE_BUDGET) {
        return Err(LabError::BudgetExceeded(format!("{m}³ triples exceed the budget of {TRIPLE_BUDGET}; lower e")));
    }
    if !(c > 0.0) {
        return invalid("cell factor c must be positive");
    }
    let side = c * set.scale.delta();
    let pts = &set.points;
    let mut keys: Vec<(i64, i64)> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..m).flat_map(move |j| {
                (0..m).map(move |k| {
                    let x = pts[i][0] + pts[j][0] + pts[k][0];
                    let y = pts[i][1] + pts[j][1] + pts[k][1];
                    ((x / side).floor() as i64, (y / side).floor() as i64)
                })
            })
        })
        .collect();
    keys.par_sort_unstable();
    let mut cells: Vec<((i64, i64), u64)> = Vec::new();
    for k in keys {
        match cells.last_mut() {
            Some((last, n)) if *last == k => *n += 1,
            _ => cells.push((k, 1)),
        }
    }
    let lookup = |k: (i64, i64)| cells.binary_search_by(|(c, _)| c.cmp(&k)).map(|i| cells[i].1).unwrap_or(0);
    let lower = cells.iter().map(|(_, n)| n * n).sum();
    let upper = cells
        .par_iter()
        .map(|&((x, y), n)| {
            let mut around = 0u64;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    around += lookup((x + dx, y + dy));
                }
            }
            n * around
        })
        .sum();
    Ok(EnergyBracket { lower, upper })
}

/// Nonnegative masses on the `R × R` grid of `[0,1)²`, indexed `[col][row]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    r_exp: u32,
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(r_exp: u32, masses: Vec<f64>) -> Result<Self> {
        let r = 1usize << r_exp;
        if masses.len() != r * r {
            return invalid(format!("{} masses for a {r} × {r} grid", masses.len()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid("masses must be finite and nonnegative");
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return invalid("total mass must be positive");
        }
        Ok(GridMeasure { r_exp, masses })
    }

    /// Unit masses at the listed cells.
    pub fn from_cells(r_exp: u32, cells: &[(usize, usize, f64)]) -> Result<Self> {
        let r = 1usize << r_exp;
        let mut masses = vec![0.0; r * r];
        for &(c, w, m) in cells {
            if c >= r || w >= r {
                return invalid(format!("cell ({c}, {w}) outside the {r} × {r} grid"));
            }
            masses[c * r + w] += m;
        }
        Self::new(r_exp, masses)
    }

    pub fn r_exp(&self) -> u32 {
        self.r_exp
    }

    pub fn side(&self) -> usize {
        1 << self.r_exp
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Worst `μ(B(y, r)) / (μ(ℝ²) r^s)` over dyadic `r` and occupied cell centres.
    pub fn frostman_constant(&self, s: f64) -> f64 {
        let r = self.side();
        let occupied: Vec<([f64; 2], f64)> = self
            .masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| ([((i / r) as f64 + 0.5) / r as f64, ((i % r) as f64 + 0.5) / r as f64], *m))
            .collect();
        let total = self.total();
        (0..=self.r_exp)
            .into_par_iter()
            .map(|k| {
                let rad = (-(k as f64)).exp2();
                occupied
                    .iter()
                    .map(|(p, _)| {
                        occupied.iter().filter(|(q, _)| (p[0] - q[0]).hypot(p[1] - q[1]) < rad).map(|(_, m)| m).sum::<f64>()
                            / (total * rad.powf(s))
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// A Cantor measure on the curve at resolution `1/R`: equal mass on each
/// surviving parameter cell, normalized to total mass 1.
pub fn cantor_measure(curve: &Curve, s: &Rational, r_exp: u32) -> Result<GridMeasure> {
    curve.validate()?;
    let params = even_cantor(r_exp, s)?;
    let r = 1usize << r_exp;
    let w = 1.0 / params.len() as f64;
    let mut cells = Vec::with_capacity(params.len());
    for i in params {
        let p = curve.point((i as f64 + 0.5) / r as f64);
        let (c, row) = ((p[0] * r as f64).floor(), (p[1] * r as f64).floor());
        if c < 0.0 || row < 0.0 || c >= r as f64 || row >= r as f64 {
            return invalid(format!("curve point {p:?} leaves the unit square"));
        }
        cells.push((c as usize, row as usize, w));
    }
    GridMeasure::from_cells(r_exp, &cells)
}

/// Moments of `μ̂` on the frequency lattice `[-R/2, R/2)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub p: u32,
    /// `Σ_k |μ̂(k)|^p`.
    pub moment: f64,
    /// `Σ_k |μ̂(k)|²`.
    pub l2: f64,
    /// `R² Σ_cells mass²`.
    pub parseval_rhs: f64,
    pub parseval_error: f64,
    /// `max_k |μ̂(k)|`, equal to `μ̂(0)` for positive measures.
    pub sup: f64,
}

/// Kahan-compensated running sum.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `μ̂(k) = Σ_x μ(x) e^{-2πi k·x}` over cell corners `x = cell/R`, by a
/// column-sparse 2-D DFT; returns the `p`-th moment and the Parseval check.
pub fn mu_hat_moments(mu: &GridMeasure, r_exp: u32, p: u32) -> Result<MomentReport> {
    if mu.r_exp != r_exp {
        return invalid(format!("measure resolution 2^-{} does not match R = 2^{r_exp}", mu.r_exp));
    }
    if !matches!(p, 2 | 4 | 6) {
        return invalid(format!("moment order p = {p} must be 2, 4 or 6"));
    }
    let r = mu.side();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(r);
    // transform along rows for occupied columns only
    let columns: Vec<(usize, Vec<Complex<f64>>)> = (0..r)
        .filter(|&c| mu.masses[c * r..(c + 1) * r].iter().any(|&m| m > 0.0))
        .map(|c| {
            let mut v: Vec<Complex<f64>> = mu.masses[c * r..(c + 1) * r].iter().map(|&m| Complex::new(m, 0.0)).collect();
            fft.process(&mut v);
            (c, v)
        })
        .collect();
    let per_k2: Vec<(Compensated, Compensated, f64)> = (0..r)
        .into_par_iter()
        .map(|k2| {
            let mut line = vec![Complex::new(0.0, 0.0); r];
            for (c, v) in &columns {
                line[*c] = v[k2];
            }
            fft.process(&mut line);
            let (mut mom, mut l2, mut sup) = (Compensated::default(), Compensated::default(), 0.0f64);
            for z in &line {
                let a = z.norm();
                l2.add(a * a);
                mom.add(a.powi(p as i32));
                sup = sup.max(a);
            }
            (mom, l2, sup)
        })
        .collect();
    let (mut mom, mut l2, mut sup) = (Compensated::default(), Compensated::default(), 0.0f64);
    for (m, l, s) in per_k2 {
        mom.add(m.sum);
        l2.add(l.sum);
        sup = sup.max(s);
    }
    let mut sq = Compensated::default();
    for m in &mu.masses {
        sq.add(m * m);
    }
    let parseval_rhs = (r * r) as f64 * sq.sum;
    Ok(MomentReport {
        p,
        moment: mom.sum,
        l2: l2.sum,
        parseval_rhs,
        parseval_error: (l2.sum - parseval_rhs).abs() / parseval_rhs,
        sup,
    })
}

/// Least-squares fit of `log₂ Y` against `log₂ X`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log₂ Y`.
    pub residual: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_error: f64,
}

pub fn exponent_fit(table: &[(f64, f64)]) -> Result<ExponentFit> {
    if table.len() < 2 {
        return invalid("need at least two points to fit an exponent");
    }
    if table.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return invalid("exponent fits need positive X and Y");
    }
    let pts: Vec<(f64, f64)> = table.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("all X values coincide");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_error = if pts.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(ExponentFit { slope, intercept, residual: (sse / n).sqrt(), slope_error })
}

/// `e(x) = e^{2πix}`, for closed-form checks.
pub fn character(x: f64) -> Complex<f64> {
    Complex::from_polar(1.0, 2.0 * PI * x)
}
