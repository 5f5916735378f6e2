//! Random augmentation of Katz-Tao families: shared random translates, and
//! direction shifts followed by shared intercept translates.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, LabError, Result};
use crate::exact::le_scaled_pow2;
use crate::grid::{Family, Interval, Tube};
use crate::scalar::rational_to_f64;
use crate::sets::{check_katz_tao, is_uniform, katz_tao_report_raw, uniformity_defect};
use crate::Rational;

/// How the loss allowance grows as `δ → 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossMode {
    /// `δ^{-υ}`.
    Power(f64),
    /// `log2(1/δ)`.
    Log,
}

impl LossMode {
    pub fn factor(&self, e: u32) -> f64 {
        match self {
            LossMode::Power(u) => (e as f64 * u).exp2(),
            LossMode::Log => e as f64,
        }
    }
}

/// Knobs shared by both augmentations.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentParams {
    pub loss: LossMode,
    /// Implicit constant multiplying every allowance.
    pub constant: Rational,
    pub retries: u32,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams { loss: LossMode::Log, constant: Rational::from_integer(4), retries: 5 }
    }
}

/// Measured outcome of the three checks for one family.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentChecks {
    pub size: usize,
    pub size_window: (f64, f64),
    pub size_ok: bool,
    pub katz_tao_constant: f64,
    pub katz_tao_allowed: f64,
    pub katz_tao_ok: bool,
    pub max_multiplicity: usize,
    pub multiplicity_allowed: f64,
    pub multiplicity_ok: bool,
}

impl AugmentChecks {
    pub fn all_ok(&self) -> bool {
        self.size_ok && self.katz_tao_ok && self.multiplicity_ok
    }

    fn failures(&self) -> String {
        let mut v = Vec::new();
        if !self.size_ok {
            v.push("(a) size");
        }
        if !self.katz_tao_ok {
            v.push("(b) katz-tao");
        }
        if !self.multiplicity_ok {
            v.push("(c) multiplicity");
        }
        v.join(", ")
    }
}

/// Result of [`augment_translates`].
#[derive(Clone, Debug)]
pub struct TranslateAugmentation {
    pub family: Family<Interval>,
    /// Translates, the first always `0`.
    pub translates: Vec<i64>,
    pub checks: AugmentChecks,
    pub attempts: u32,
    pub loss: f64,
}

fn attempt_seed(seed: u64, attempt: u32) -> u64 {
    seed ^ (attempt as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Rational just below `x`, on a `2^-20` grid.
fn rational_floor(x: f64) -> Rational {
    let den = 1i128 << 20;
    Rational::new(((x * den as f64).floor() as i128).max(1), den)
}

/// `N` random translates (first one zero) on the circle of `2^e` cells.
fn pick_translates(n: i64, count: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut out = vec![0i64];
    if count > 1 {
        out.extend(sample(rng, (n - 1) as usize, count - 1).into_iter().map(|v| v as i64 + 1));
    }
    out
}

fn target_count(k: &Rational, top_exp: f64, size: usize) -> usize {
    ((rational_to_f64(k) * top_exp.exp2() / size as f64).floor() as usize).max(1)
}

/// Unions `N ~ K δ^{-s} / |S|` random translates of `S` and checks size,
/// Katz-Tao and multiplicity bounds, resampling on failure.
pub fn augment_translates(
    set: &Family<Interval>,
    s: &Rational,
    k: &Rational,
    params: &AugmentParams,
    seed: u64,
) -> Result<TranslateAugmentation> {
    if set.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    if let Some((j, min, max)) = uniformity_defect(set) {
        return Err(LabError::NotUniform(format!("block level {j} has child counts between {min} and {max}")));
    }
    if !check_katz_tao(set, s, k)?.ok {
        return Err(LabError::Hypothesis(format!("input is not a ({s}, {k}) Katz-Tao set")));
    }
    let scale = set.scale();
    let e = scale.delta_exp();
    let n = scale.side();
    let loss = params.loss.factor(e);
    let c = rational_to_f64(&params.constant);
    let sf = rational_to_f64(s);
    let count = target_count(k, e as f64 * sf, set.len()).min(n as usize);
    let ceiling = rational_to_f64(k) * (e as f64 * sf).exp2();
    let mut last = None;
    for attempt in 0..params.retries.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(seed, attempt));
        let translates = pick_translates(n, count, &mut rng);
        let mut mult: BTreeMap<i64, usize> = BTreeMap::new();
        for &t in &translates {
            for iv in set.iter() {
                *mult.entry((iv.0 + t).rem_euclid(n)).or_insert(0) += 1;
            }
        }
        let family = set.derive(mult.keys().map(|&i| Interval(i)).collect());
        let allowed_k = *k * rational_floor(c * loss);
        let kt = check_katz_tao(&family, s, &allowed_k)?;
        let max_mult = mult.values().copied().max().unwrap_or(0);
        let window = (ceiling / (c * loss), c * ceiling);
        let checks = AugmentChecks {
            size: family.len(),
            size_window: window,
            size_ok: (family.len() as f64) >= window.0 && (family.len() as f64) <= window.1,
            katz_tao_constant: kt.achieved_constant,
            katz_tao_allowed: rational_to_f64(&allowed_k),
            katz_tao_ok: kt.ok,
            max_multiplicity: max_mult,
            multiplicity_allowed: c * loss,
            multiplicity_ok: max_mult as f64 <= c * loss,
        };
        let ok = checks.all_ok();
        let result = TranslateAugmentation { family, translates, checks, attempts: attempt + 1, loss };
        if ok {
            return Ok(result);
        }
        last = Some(result);
    }
    let last = last.expect("at least one attempt");
    Err(LabError::RetriesExhausted { attempts: last.attempts, failed: last.checks.failures() })
}

/// Tubes grouped by direction: the direction set and the per-direction intercepts.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalFamily {
    pub tubes: Family<Tube>,
}

impl DirectionalFamily {
    pub fn new(tubes: Family<Tube>) -> Result<Self> {
        let n = tubes.scale().side();
        if tubes.iter().any(|t| t.slope >= n) {
            return invalid("direction shifts act on slopes in [0, 2^e); slope 2^e is not allowed");
        }
        Ok(DirectionalFamily { tubes })
    }

    pub fn directions(&self) -> Family<Interval> {
        self.tubes.directions()
    }

    /// Intercepts per slope index.
    pub fn fibers(&self) -> BTreeMap<i64, Vec<i64>> {
        let mut out: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for t in self.tubes.iter() {
            out.entry(t.slope).or_default().push(t.intercept);
        }
        out
    }
}

/// Result of [`augment_rigid`].
#[derive(Clone, Debug)]
pub struct RigidAugmentation {
    pub tubes: DirectionalFamily,
    pub direction_shifts: Vec<i64>,
    pub translates: Vec<i64>,
    pub directions: AugmentChecks,
    /// Worst per-direction outcome: smallest size, largest constant.
    pub fibers: AugmentChecks,
    /// Largest number of motions mapping some tube onto the same output tube.
    pub max_multiplicity: usize,
    pub attempts: u32,
    pub loss: f64,
}

impl RigidAugmentation {
    pub fn all_ok(&self) -> bool {
        self.directions.all_ok() && self.fibers.all_ok()
    }
}

/// Direction shifts (circular on the slope chart) followed by intercept translates
/// shared by every direction.
pub fn augment_rigid(
    family: &DirectionalFamily,
    s: &Rational,
    k1: &Rational,
    k2: &Rational,
    params: &AugmentParams,
    seed: u64,
) -> Result<RigidAugmentation> {
    if family.tubes.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    let scale = family.tubes.scale();
    let e = scale.delta_exp();
    let n = scale.side();
    let co_s = Rational::from_integer(1) - s;
    let lambda = family.directions();
    if !is_uniform(&lambda) {
        return Err(LabError::NotUniform("direction set".into()));
    }
    if !check_katz_tao(&lambda, s, k1)?.ok {
        return Err(LabError::Hypothesis(format!("direction set is not ({s}, {k1}) Katz-Tao")));
    }
    let fibers = family.fibers();
    for (theta, ints) in &fibers {
        let pts: Vec<[i64; 2]> = ints.iter().map(|&b| [b, 0]).collect();
        if co_s > Rational::from_integer(0) && !katz_tao_report_raw(&pts, 1, e, &co_s, k2)?.ok {
            return Err(LabError::Hypothesis(format!("direction {theta} fiber is not ({co_s}, {k2}) Katz-Tao")));
        }
    }
    let loss = params.loss.factor(e);
    let c = rational_to_f64(&params.constant);
    let sf = rational_to_f64(s);
    let max_fiber = fibers.values().map(|v| v.len()).max().expect("nonempty");
    let n1 = target_count(k1, e as f64 * sf, lambda.len()).min(n as usize);
    let n2 = target_count(k2, e as f64 * (1.0 - sf), max_fiber).min(2 * n as usize);
    let dir_ceiling = rational_to_f64(k1) * (e as f64 * sf).exp2();
    let fib_ceiling = rational_to_f64(k2) * (e as f64 * (1.0 - sf)).exp2();
    let allowed1 = *k1 * rational_floor(c * loss);
    let allowed2 = *k2 * rational_floor(c * loss);
    let mut last = None;
    for attempt in 0..params.retries.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(seed, attempt));
        let shifts = pick_translates(n, n1, &mut rng);
        let translates = pick_translates(2 * n, n2, &mut rng);
        // first source (in shift order) for every new direction
        let mut source: BTreeMap<i64, i64> = BTreeMap::new();
        let mut dir_mult: BTreeMap<i64, usize> = BTreeMap::new();
        for &r in &shifts {
            for theta in fibers.keys() {
                let new = (theta + r).rem_euclid(n);
                source.entry(new).or_insert(*theta);
                *dir_mult.entry(new).or_insert(0) += 1;
            }
        }
        let wrap = |b: i64| (b + n).rem_euclid(2 * n) - n;
        let mut tubes = Vec::new();
        let mut worst: Option<AugmentChecks> = None;
        for (&new_dir, &theta) in &source {
            let mut ints: BTreeSet<i64> = BTreeSet::new();
            let mut mult: BTreeMap<i64, usize> = BTreeMap::new();
            for &t in &translates {
                for &b in &fibers[&theta] {
                    let nb = wrap(b + t);
                    ints.insert(nb);
                    *mult.entry(nb).or_insert(0) += 1;
                }
            }
            let pts: Vec<[i64; 2]> = ints.iter().map(|&b| [b, 0]).collect();
            let (kt_c, kt_ok) = if co_s > Rational::from_integer(0) {
                let rep = katz_tao_report_raw(&pts, 1, e, &co_s, &allowed2)?;
                (rep.achieved_constant, rep.ok)
            } else {
                let ok = le_scaled_pow2(&Rational::from_integer(ints.len() as i128), &allowed2, 0, &co_s);
                (ints.len() as f64, ok)
            };
            let max_mult = mult.values().copied().max().unwrap_or(0);
            let size = ints.len();
            let window = (fib_ceiling / (c * loss), c * fib_ceiling);
            let chk = AugmentChecks {
                size,
                size_window: window,
                size_ok: size as f64 >= window.0 && size as f64 <= window.1,
                katz_tao_constant: kt_c,
                katz_tao_allowed: rational_to_f64(&allowed2),
                katz_tao_ok: kt_ok,
                max_multiplicity: max_mult,
                multiplicity_allowed: c * loss,
                multiplicity_ok: max_mult as f64 <= c * loss,
            };
            worst = Some(match worst {
                None => chk,
                Some(w) => merge_worst(w, chk),
            });
            tubes.extend(ints.into_iter().map(|b| Tube::new(new_dir, b)));
        }
        let lambda_new = Family::new(scale, source.keys().map(|&d| Interval(d)))?;
        let kt = check_katz_tao(&lambda_new, s, &allowed1)?;
        let dmax = dir_mult.values().copied().max().unwrap_or(0);
        let window = (dir_ceiling / (c * loss), c * dir_ceiling);
        let directions = AugmentChecks {
            size: lambda_new.len(),
            size_window: window,
            size_ok: lambda_new.len() as f64 >= window.0 && lambda_new.len() as f64 <= window.1,
            katz_tao_constant: kt.achieved_constant,
            katz_tao_allowed: rational_to_f64(&allowed1),
            katz_tao_ok: kt.ok,
            max_multiplicity: dmax,
            multiplicity_allowed: c * loss,
            multiplicity_ok: dmax as f64 <= c * loss,
        };
        let fibers_chk = worst.expect("at least one direction");
        let out = Family::from_trusted(scale, family.tubes.thickness(), tubes);
        // motions landing on the same output tube: direction and translate multiplicities combine
        let max_multiplicity = dmax * fibers_chk.max_multiplicity;
        let result = RigidAugmentation {
            tubes: DirectionalFamily { tubes: out },
            direction_shifts: shifts,
            translates,
            directions,
            fibers: fibers_chk,
            max_multiplicity,
            attempts: attempt + 1,
            loss,
        };
        if result.all_ok() {
            return Ok(result);
        }
        last = Some(result);
    }
    let last = last.expect("at least one attempt");
    let mut failed = Vec::new();
    if !last.directions.all_ok() {
        failed.push(format!("directions: {}", last.directions.failures()));
    }
    if !last.fibers.all_ok() {
        failed.push(format!("fibers: {}", last.fibers.failures()));
    }
    Err(LabError::RetriesExhausted { attempts: last.attempts, failed: failed.join("; ") })
}

fn merge_worst(a: AugmentChecks, b: AugmentChecks) -> AugmentChecks {
    AugmentChecks {
        size: a.size.min(b.size),
        size_window: a.size_window,
        size_ok: a.size_ok && b.size_ok,
        katz_tao_constant: a.katz_tao_constant.max(b.katz_tao_constant),
        katz_tao_allowed: a.katz_tao_allowed,
        katz_tao_ok: a.katz_tao_ok && b.katz_tao_ok,
        max_multiplicity: a.max_multiplicity.max(b.max_multiplicity),
        multiplicity_allowed: a.multiplicity_allowed,
        multiplicity_ok: a.multiplicity_ok && b.multiplicity_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Scale;

    fn half() -> Rational {
        Rational::new(1, 2)
    }

    #[test]
    fn single_interval_spreads() {
        let scale = Scale::new(10, 2).unwrap();
        let s = Family::new(scale, [Interval(100)]).unwrap();
        let one = Rational::from_integer(1);
        let out = augment_translates(&s, &half(), &one, &AugmentParams::default(), 3).unwrap();
        assert_eq!(out.translates.len(), 32);
        assert_eq!(out.translates[0], 0);
        assert!(out.checks.all_ok());
        assert!(out.family.contains(&Interval(100)));
    }

    #[test]
    fn full_size_input_is_unchanged() {
        let scale = Scale::new(8, 2).unwrap();
        let s = crate::sets::generate_ad_regular(scale, &half(), 1).unwrap();
        let k = Rational::from_integer(4);
        let out = augment_translates(&s, &half(), &Rational::from_integer(1), &AugmentParams::default(), 3);
        // at K = 1 the Cantor set is not always KT(1/2, 1); use its own constant
        let out = out.or_else(|_| augment_translates(&s, &half(), &k, &AugmentParams::default(), 3)).unwrap();
        assert!(out.translates.len() <= 4);
        assert!(out.family.len() >= s.len());
    }

    #[test]
    fn power_mode_and_determinism() {
        let scale = Scale::new(10, 2).unwrap();
        let s = Family::new(scale, [Interval(7)]).unwrap();
        let one = Rational::from_integer(1);
        let p = AugmentParams { loss: LossMode::Power(0.2), ..AugmentParams::default() };
        let a = augment_translates(&s, &half(), &one, &p, 11).unwrap();
        let b = augment_translates(&s, &half(), &one, &p, 11).unwrap();
        assert_eq!(a.family, b.family);
        assert_eq!(a.translates, b.translates);
    }

    #[test]
    fn rigid_from_single_tube() {
        let scale = Scale::new(10, 2).unwrap();
        let one = Rational::from_integer(1);
        let fam = DirectionalFamily::new(Family::new(scale, [Tube::new(300, 10)]).unwrap()).unwrap();
        let out = augment_rigid(&fam, &half(), &one, &one, &AugmentParams::default(), 5).unwrap();
        assert!(out.all_ok());
        assert_eq!(out.direction_shifts.len(), 32);
        assert_eq!(out.translates.len(), 32);
        assert_eq!(out.tubes.tubes.len(), 32 * 32);
    }

    #[test]
    fn rigid_identity_when_maximal() {
        let scale = Scale::new(4, 2).unwrap();
        // 4 directions spread out, 4 intercepts spread out: already full size for s = 1/2
        let tubes: Vec<Tube> = [0, 4, 8, 12].iter().flat_map(|&a| [-16, -4, 4, 12].map(|b| Tube::new(a, b))).collect();
        let fam = DirectionalFamily::new(Family::new(scale, tubes).unwrap()).unwrap();
        let k = Rational::new(3, 2);
        let out = augment_rigid(&fam, &half(), &k, &k, &AugmentParams::default(), 5).unwrap();
        assert_eq!(out.direction_shifts, vec![0]);
        assert_eq!(out.translates, vec![0]);
        assert_eq!(out.tubes.tubes, fam.tubes);
    }
}
