//! High-low frequency splitting of tube sums and the heavy-ball scale search.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex;
use num_traits::Float;
use rayon::prelude::*;
use rustfft::FftNum;

use crate::error::{invalid, LabError, Result};
use crate::fft::{fft2, signed_freq};
use crate::grid::{rows_in_column, Family, Square, Tube};
use crate::incidence::richness_map;
use crate::scalar::rational_to_f64;

/// Largest grid exponent the dense transforms accept.
pub const MAX_GRID_EXP: u32 = 12;

/// Samples of a function on the `2^e × 2^e` grid, indexed `[col][row]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<S = f64> {
    side: usize,
    values: Vec<S>,
}

impl<S: Float + Send + Sync> GridFunction<S> {
    pub fn zeros(side: usize) -> Self {
        GridFunction { side, values: vec![S::zero(); side * side] }
    }

    pub fn from_values(side: usize, values: Vec<S>) -> Result<Self> {
        if values.len() != side * side {
            return invalid(format!("{} samples for a {side} × {side} grid", values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("grid function has non-finite samples");
        }
        Ok(GridFunction { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn at(&self, col: usize, row: usize) -> S {
        self.values[col * self.side + row]
    }

    /// `δ² Σ f²`, the Riemann sum of `∫ |f|²`.
    pub fn l2_squared(&self) -> f64 {
        let d = 1.0 / self.side as f64;
        let sum: f64 = self.values.iter().map(|v| v.to_f64().expect("finite").powi(2)).sum();
        sum * d * d
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.to_f64().expect("finite").abs()))
    }
}

/// Raised-cosine step: `1` at `t <= 0`, `0` at `t >= 1`.
fn raised_cosine(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * t).cos())
    }
}

/// `f = Σ_T φ_T`: each bump is `1` on the squares incident to `T` and tapers
/// across the tube over one more band width.
pub fn tube_sum<S: Float + Send + Sync>(tubes: &Family<Tube>) -> GridFunction<S> {
    let scale = tubes.scale();
    let n = scale.side() as usize;
    let c = tubes.thickness();
    let mut values = vec![S::zero(); n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(col, column)| {
        for t in tubes.iter() {
            let Some((lo, hi)) = rows_in_column(&scale, &c, *t, col as i64) else { continue };
            for row in lo..=hi {
                column[row as usize] = column[row as usize] + S::one();
            }
            let width = (hi - lo + 1).max(1);
            for k in 1..=width {
                let v = S::from(raised_cosine(k as f64 / (width + 1) as f64)).expect("weight");
                if lo - k >= 0 {
                    column[(lo - k) as usize] = column[(lo - k) as usize] + v;
                }
                if hi + k < n as i64 {
                    column[(hi + k) as usize] = column[(hi + k) as usize] + v;
                }
            }
        }
    });
    GridFunction { side: n, values }
}

/// Output of [`fourier_split`].
#[derive(Clone, Debug)]
pub struct HighLowSplit<S = f64> {
    pub f: GridFunction<S>,
    pub low: GridFunction<S>,
    pub high: GridFunction<S>,
    /// Inner cutoff radius `δ^{-1+β/2}` in frequency units.
    pub cutoff: f64,
    pub total_energy: f64,
    pub low_energy: f64,
    pub high_energy: f64,
    /// `∫ f² - ∫ f_low² - ∫ f_high² = 2 ∫ f_low f_high`.
    pub cross_term: f64,
    /// Energy of `f̂` inside the transition annulus, an upper bound for the cross term.
    pub band_energy: f64,
    pub low_sup: f64,
    /// `‖f_high‖₂² / (δ^{1-β} |𝒯|)`.
    pub ratio: f64,
    /// `max |f - f_low - f_high| / max |f|`.
    pub linearity_defect: f64,
}

/// Splits `f = Σ φ_T` with a radial raised-cosine multiplier equal to `1`
/// below `δ^{-1+β/2}` and `0` above twice that.
pub fn fourier_split<S: FftNum + Float>(tubes: &Family<Tube>, beta: f64) -> Result<HighLowSplit<S>> {
    if !(beta > 0.0 && beta < 1.0) {
        return invalid(format!("beta = {beta} must lie in (0, 1)"));
    }
    let e = tubes.scale().delta_exp();
    if e > MAX_GRID_EXP {
        return Err(LabError::BudgetExceeded(format!("e = {e} exceeds the dense grid cap {MAX_GRID_EXP}")));
    }
    let n = tubes.scale().side() as usize;
    let f: GridFunction<S> = tube_sum(tubes);
    let cutoff = (e as f64 * (1.0 - beta / 2.0)).exp2();
    let mut spec: Vec<Complex<S>> = f.values.iter().map(|&v| Complex::new(v, S::zero())).collect();
    fft2(&mut spec, n, false);
    let multiplier = |k1: usize, k2: usize| {
        let r = ((signed_freq(k1, n).pow(2) + signed_freq(k2, n).pow(2)) as f64).sqrt();
        raised_cosine((r - cutoff) / cutoff)
    };
    let mut low_spec = spec.clone();
    let mut high_spec = spec.clone();
    let mut band = 0.0f64;
    for k1 in 0..n {
        for k2 in 0..n {
            let w = multiplier(k1, k2);
            let idx = k1 * n + k2;
            let ws = S::from(w).expect("weight");
            low_spec[idx] = spec[idx] * ws;
            high_spec[idx] = spec[idx] * (S::one() - ws);
            if w > 0.0 && w < 1.0 {
                band += spec[idx].norm_sqr().to_f64().expect("finite");
            }
        }
    }
    fft2(&mut low_spec, n, true);
    fft2(&mut high_spec, n, true);
    let low = GridFunction { side: n, values: low_spec.iter().map(|c| c.re).collect() };
    let high = GridFunction { side: n, values: high_spec.iter().map(|c| c.re).collect() };
    let fmax = f.sup().max(f64::MIN_POSITIVE);
    let linearity_defect = f
        .values
        .iter()
        .zip(low.values.iter().zip(&high.values))
        .map(|(a, (l, h))| (*a - *l - *h).to_f64().expect("finite").abs())
        .fold(0.0, f64::max)
        / fmax;
    let (total_energy, low_energy, high_energy) = (f.l2_squared(), low.l2_squared(), high.l2_squared());
    let delta = 1.0 / n as f64;
    // Parseval: δ² Σ |f|² = δ² n^{-2} Σ |f̂|²
    let band_energy = band * delta * delta / (n * n) as f64;
    let ratio = if tubes.is_empty() { 0.0 } else { high_energy / (delta.powf(1.0 - beta) * tubes.len() as f64) };
    Ok(HighLowSplit {
        low_sup: low.sup(),
        f,
        low,
        high,
        cutoff,
        total_energy,
        low_energy,
        high_energy,
        cross_term: total_energy - low_energy - high_energy,
        band_energy,
        ratio,
        linearity_defect,
    })
}

/// Result of [`heavy_ball_scale`].
#[derive(Clone, Debug, PartialEq)]
pub struct HeavyBall {
    /// `|𝒫_{≥r₀}| >= δ^{-2-β} / r₀`.
    pub hypothesis_ok: bool,
    pub rich_squares: usize,
    /// `(level j, fraction of rich squares that are heavy at δ̃ = 2^{-j})`, finest first.
    pub candidates: Vec<(u32, f64)>,
    /// Smallest `δ̃` at which at least half of the rich squares are heavy.
    pub level: Option<u32>,
    /// Heavy squares at the returned scale.
    pub witnesses: Vec<Square>,
}

impl HeavyBall {
    pub fn delta_tilde(&self) -> Option<f64> {
        self.level.map(|j| (-(j as f64)).exp2())
    }
}

/// Number of tubes whose centre line passes within `radius + c` (vertically,
/// in δ units) of the centre of `p`.
fn tubes_near(by_slope: &BTreeMap<i64, Vec<i64>>, n: i64, p: Square, reach: f64) -> usize {
    let (xc, yc) = (p.col as f64 + 0.5, p.row as f64 + 0.5);
    by_slope
        .iter()
        .map(|(&a, ints)| {
            let mid = yc - a as f64 * xc / n as f64;
            let lo = ints.partition_point(|&b| (b as f64) <= mid - reach);
            let hi = ints.partition_point(|&b| (b as f64) < mid + reach);
            hi - lo
        })
        .sum()
}

/// Searches dyadic `δ̃ ∈ [δ^{1-β/2}, 1]`, finest first, for the smallest one
/// at which at least half of the `r₀`-rich squares see `c r₀ δ̃/δ` tubes
/// through `B(centre, δ̃ δ^{-υ})`.
pub fn heavy_ball_scale(tubes: &Family<Tube>, r0: u64, beta: f64, upsilon: f64, c: f64) -> Result<HeavyBall> {
    if !(beta > 0.0 && beta < 1.0) {
        return invalid(format!("beta = {beta} must lie in (0, 1)"));
    }
    if r0 == 0 {
        return invalid("r0 must be positive");
    }
    let scale = tubes.scale();
    let e = scale.delta_exp();
    let n = scale.side();
    let map = richness_map(tubes);
    let rich: Vec<Square> = map.nonzero().filter(|&(_, r)| r as u64 >= r0).map(|(p, _)| p).collect();
    let hypothesis_ok = rich.len() as f64 >= (e as f64 * (2.0 + beta)).exp2() / r0 as f64;
    let mut by_slope: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for t in tubes.iter() {
        by_slope.entry(t.slope).or_default().push(t.intercept);
    }
    let thick = rational_to_f64(&tubes.thickness());
    let finest = (e as f64 * (1.0 - beta / 2.0) + 1e-9).floor() as u32;
    let mut candidates = Vec::new();
    let mut found: Option<(u32, Vec<Square>)> = None;
    if !rich.is_empty() {
        for j in (0..=finest).rev() {
            let radius = ((e - j) as f64 + e as f64 * upsilon).exp2();
            let need = c * r0 as f64 * ((e - j) as f64).exp2();
            let heavy: Vec<Square> = rich
                .par_iter()
                .copied()
                .filter(|&p| tubes_near(&by_slope, n, p, radius + thick) as f64 >= need)
                .collect();
            let frac = heavy.len() as f64 / rich.len() as f64;
            candidates.push((j, frac));
            if found.is_none() && 2 * heavy.len() >= rich.len() {
                found = Some((j, heavy));
            }
        }
    }
    let (level, witnesses) = match found {
        Some((j, w)) => (Some(j), w),
        None => (None, Vec::new()),
    };
    Ok(HeavyBall { hypothesis_ok, rich_squares: rich.len(), candidates, level, witnesses })
}

/// Tube counts `tubes_near` at every candidate radius for one square, for monotonicity checks.
pub fn ball_counts(tubes: &Family<Tube>, p: Square, upsilon: f64) -> Vec<usize> {
    let scale = tubes.scale();
    let e = scale.delta_exp();
    let mut by_slope: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for t in tubes.iter() {
        by_slope.entry(t.slope).or_default().push(t.intercept);
    }
    let thick = rational_to_f64(&tubes.thickness());
    (0..=e)
        .rev()
        .map(|j| tubes_near(&by_slope, scale.side(), p, ((e - j) as f64 + e as f64 * upsilon).exp2() + thick))
        .collect()
}
