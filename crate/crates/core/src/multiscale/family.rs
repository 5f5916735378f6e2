use std::collections::{BTreeMap, BTreeSet};

use crate::error::{LabError, Result};
use crate::grid::{Cell, Family};
use crate::multiscale::{good_intervals, LipschitzFn, ScalePartition};
use crate::scalar::rational_to_f64;
use crate::sets::{delta_set_report_raw, uniformity_defect};
use crate::Rational;

/// Per-layer verification of a family decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    /// Dyadic levels `e A_l` and `e A_{l+1}`.
    pub from_level: u32,
    pub to_level: u32,
    /// Layer dimension `d t_l`.
    pub dimension: Rational,
    /// Largest achieved non-concentration constant over the rescaled child families.
    pub max_constant: f64,
    pub min_children: usize,
    pub max_children: usize,
    /// `2^{(to - from) d t_l}`.
    pub expected_children: f64,
    /// `log_{1/δ}(|S|_{to} / |S|_{from}) <= d (t_l + 3 eps)(A_{l+1} - A_l)`.
    pub growth_ok: bool,
}

/// Result of [`decompose_family`].
#[derive(Clone, Debug)]
pub struct FamilyDecomposition {
    pub partition: ScalePartition<f64>,
    /// Ambient dimension used to normalize the profile.
    pub dim: u32,
    /// Normalized profile `log_{1/δ}|S|_{2^{-k}} / d` at each dyadic level `k`.
    pub profile: Vec<f64>,
    pub layers: Vec<LayerReport>,
    /// `d t_1 <= log_{1/δ}|S| + d eps`.
    pub first_slope_ok: bool,
}

impl FamilyDecomposition {
    /// Layer slopes `t_l = eps k_l` as exact rationals.
    pub fn exact_slopes(&self, eps: &Rational) -> Vec<Rational> {
        self.partition.classes.iter().map(|&k| *eps * Rational::from_integer(k as i128)).collect()
    }
}

/// Splits the dyadic tree of an exactly uniform family into layers of good intervals.
///
/// The normalized covering profile is sampled at every dyadic level on a grid
/// of `q` points per level, with `q` a power of two no smaller than `4/eps`;
/// default `eps0 = max(eps^ceil(2/eps), 4/n)` then forces every breakpoint onto
/// a dyadic level.
pub fn decompose_family<E: Cell>(f: &Family<E>, eps: &Rational, eps0: Option<&Rational>) -> Result<FamilyDecomposition> {
    if f.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    if let Some((j, min, max)) = uniformity_defect(f) {
        return Err(LabError::NotUniform(format!("block level {j} has child counts between {min} and {max}")));
    }
    let scale = f.scale();
    let e = scale.delta_exp();
    let d = E::DIM as u32;
    let epsf = rational_to_f64(eps);
    let q = ((4.0 / epsf).ceil() as usize).next_power_of_two();
    let n = e as usize * q;
    let counts: Vec<usize> = (0..=e).map(|k| f.covering_number(k).expect("level")).collect();
    let profile: Vec<f64> = counts.iter().map(|&c| (c as f64).log2() / (d as f64 * e as f64)).collect();
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            let k = i / q;
            if k >= e as usize {
                return profile[e as usize];
            }
            let frac = (i % q) as f64 / q as f64;
            profile[k] + (profile[k + 1] - profile[k]) * frac
        })
        .collect();
    let lip = LipschitzFn::new(values, 1.0)?;
    let eps0 = match eps0 {
        Some(v) => rational_to_f64(v),
        None => {
            let power = (2.0 / epsf).ceil() as i32;
            epsf.powi(power).max(4.0 / n as f64)
        }
    };
    let partition = good_intervals(&lip, &epsf, &eps0)?;
    let mut layers = Vec::with_capacity(partition.len());
    for l in 0..partition.len() {
        let (a, b) = (partition.breakpoints[l], partition.breakpoints[l + 1]);
        let (ka, kb) = ((a / q) as u32, (b / q) as u32);
        let t = *eps * Rational::from_integer(partition.classes[l] as i128);
        let dimension = t * Rational::from_integer(d as i128);
        let mut tree: BTreeMap<[i64; 2], BTreeSet<[i64; 2]>> = BTreeMap::new();
        for el in f.iter() {
            tree.entry(el.ancestor(&scale, ka)).or_default().insert(el.ancestor(&scale, kb));
        }
        let span = kb - ka;
        let mut max_constant = 0.0f64;
        let mut min_children = usize::MAX;
        let mut max_children = 0usize;
        for (parent, kids) in &tree {
            min_children = min_children.min(kids.len());
            max_children = max_children.max(kids.len());
            let local: Vec<[i64; 2]> = kids
                .iter()
                .map(|c| [c[0] - (parent[0] << span), if d == 2 { c[1] - (parent[1] << span) } else { 0 }])
                .collect();
            let c = if dimension > Rational::from_integer(0) && span > 0 {
                delta_set_report_raw(&local, d as usize, span, &dimension, &Rational::from_integer(1))?.achieved_constant
            } else {
                1.0
            };
            max_constant = max_constant.max(c);
        }
        let growth = (counts[kb as usize] as f64 / counts[ka as usize] as f64).log2() / e as f64;
        let bound = d as f64 * (rational_to_f64(&t) + 3.0 * epsf) * span as f64 / e as f64;
        layers.push(LayerReport {
            from_level: ka,
            to_level: kb,
            dimension,
            max_constant,
            min_children,
            max_children,
            expected_children: (span as f64 * rational_to_f64(&dimension)).exp2(),
            growth_ok: growth <= bound + 1e-9,
        });
    }
    let top = (f.len() as f64).log2() / e as f64;
    let first_slope_ok = d as f64 * partition.slopes[0] <= top + d as f64 * epsf + 1e-9;
    Ok(FamilyDecomposition { partition, dim: d, profile, layers, first_slope_ok })
}
