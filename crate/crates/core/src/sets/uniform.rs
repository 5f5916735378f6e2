use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::exact::{floor_pow2, le_scaled_pow2};
use crate::grid::{Cell, Family};
use crate::sets::check::dyadic_katz_tao_constant;
use crate::Rational;

/// First block level at which child counts differ, as `(j, min, max)`.
pub fn uniformity_defect<E: Cell>(f: &Family<E>) -> Option<(u32, usize, usize)> {
    let scale = f.scale();
    for j in 0..=scale.levels() {
        let counts = f.ancestor_counts(j * scale.block_exp());
        let min = counts.values().copied().min().unwrap_or(0);
        let max = counts.values().copied().max().unwrap_or(0);
        if min != max {
            return Some((j, min, max));
        }
    }
    None
}

/// Exact uniformity: at every block level all occupied cells hold equally many elements.
pub fn is_uniform<E: Cell>(f: &Family<E>) -> bool {
    uniformity_defect(f).is_none()
}

/// Result of [`extract_uniform`].
#[derive(Clone, Debug)]
pub struct UniformExtraction<E: Cell> {
    pub family: Family<E>,
    /// `|output| / |input|`.
    pub ratio: f64,
    /// Guaranteed lower bound `Π_j (2 (dT+1))^-1` on the ratio.
    pub guaranteed: f64,
}

/// Extracts an exactly uniform subfamily.
///
/// Levels are processed from fine to coarse. At each level the parents are
/// bucketed by the dyadic class of their child count; the class retaining the
/// most mass is kept and every kept parent is trimmed to the class minimum.
/// Processing fine levels first means later trims only delete whole subtrees,
/// so equalities established earlier survive.
pub fn extract_uniform<E: Cell>(f: &Family<E>, seed: u64) -> UniformExtraction<E> {
    let scale = f.scale();
    let t = scale.block_exp();
    let classes = E::DIM as u32 * t + 1;
    let guaranteed = (2.0 * classes as f64).powi(-(scale.levels() as i32));
    if f.is_empty() {
        return UniformExtraction { family: f.clone(), ratio: 1.0, guaranteed };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current: Vec<E> = f.elements().to_vec();
    for j in (0..scale.levels()).rev() {
        let pk = j * t;
        let ck = (j + 1) * t;
        let mut tree: BTreeMap<[i64; 2], BTreeSet<[i64; 2]>> = BTreeMap::new();
        for e in &current {
            tree.entry(e.ancestor(&scale, pk)).or_default().insert(e.ancestor(&scale, ck));
        }
        let mut by_class: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for kids in tree.values() {
            let c = kids.len();
            let class = usize::BITS - 1 - c.leading_zeros();
            let slot = by_class.entry(class).or_insert((0, usize::MAX));
            slot.0 += 1;
            slot.1 = slot.1.min(c);
        }
        let (&class, &(_, min)) = by_class
            .iter()
            .max_by(|a, b| (a.1 .0 * a.1 .1).cmp(&(b.1 .0 * b.1 .1)).then(b.0.cmp(a.0)))
            .expect("nonempty");
        let mut keep: BTreeSet<[i64; 2]> = BTreeSet::new();
        for kids in tree.values() {
            let c = kids.len();
            if usize::BITS - 1 - c.leading_zeros() != class {
                continue;
            }
            let mut list: Vec<[i64; 2]> = kids.iter().copied().collect();
            list.shuffle(&mut rng);
            keep.extend(list.into_iter().take(min));
        }
        current.retain(|e| keep.contains(&e.ancestor(&scale, ck)));
    }
    let family = f.derive(current);
    UniformExtraction { ratio: family.len() as f64 / f.len() as f64, family, guaranteed }
}

/// Splits a family into exactly uniform parts by repeated extraction.
pub fn partition_uniform<E: Cell>(f: &Family<E>, seed: u64) -> Vec<Family<E>> {
    let mut parts = Vec::new();
    let mut rest = f.clone();
    let mut round = 0u64;
    while !rest.is_empty() {
        let ext = extract_uniform(&rest, seed.wrapping_add(round));
        let taken = ext.family;
        rest = rest.filter(|e| !taken.contains(e));
        parts.push(taken);
        round += 1;
    }
    parts
}

/// One selection stage of [`partition_katz_tao`].
#[derive(Clone, Debug, PartialEq)]
pub struct KatzTaoStage {
    /// Block level of the finer scale `ρ_{i-1}`.
    pub from_level: u32,
    /// Block level of the coarser scale `ρ_i`.
    pub to_level: u32,
    /// Occupied finer cells per occupied coarser cell.
    pub count: usize,
    /// `floor((ρ_i / ρ_{i-1})^s)`.
    pub cap: u64,
    pub groups: usize,
}

/// Result of [`partition_katz_tao`].
#[derive(Clone, Debug)]
pub struct KatzTaoPartition<E: Cell> {
    pub parts: Vec<Family<E>>,
    pub stages: Vec<KatzTaoStage>,
    /// Dyadic-cell Katz-Tao constant of the input.
    pub input_constant: f64,
    /// `K 2^m`.
    pub part_bound: f64,
}

/// Partitions an exactly uniform family into parts with at most
/// `2^{dT} (r/δ)^s` elements in every dyadic cell of side `r`.
///
/// Stages walk up the block levels. Whenever a coarser cell holds more finer
/// cells than `(ρ_i/ρ_{i-1})^s`, its finer cells are dealt round-robin into
/// `ceil(M / cap)` groups; a part is a choice of group at every stage.
pub fn partition_katz_tao<E: Cell>(f: &Family<E>, s: &Rational) -> Result<KatzTaoPartition<E>> {
    if let Some((j, min, max)) = uniformity_defect(f) {
        return Err(LabError::NotUniform(format!("block level {j} has child counts between {min} and {max}")));
    }
    let scale = f.scale();
    let t = scale.block_exp();
    let m = scale.levels();
    let (input_constant, _) = dyadic_katz_tao_constant(f, s);
    let part_bound = input_constant * (m as f64).exp2();
    let mut labels: Vec<Vec<u32>> = vec![Vec::new(); f.len()];
    let mut stages = Vec::new();
    let mut prev = m;
    while prev > 0 && !f.is_empty() {
        let mut found = None;
        for l in (0..prev).rev() {
            let first = f.elements()[0].ancestor(&scale, l * t);
            let count = f
                .iter()
                .filter(|e| e.ancestor(&scale, l * t) == first)
                .map(|e| e.ancestor(&scale, prev * t))
                .collect::<BTreeSet<_>>()
                .len();
            let gap = (prev - l) * t;
            if !le_scaled_pow2(&Rational::from_integer(count as i128), &Rational::from_integer(1), gap as i64, s) {
                found = Some((l, count, gap));
                break;
            }
        }
        let Some((l, count, gap)) = found else { break };
        let cap = floor_pow2(gap, s).max(1);
        let groups = count.div_ceil(cap as usize);
        let mut tree: BTreeMap<[i64; 2], BTreeSet<[i64; 2]>> = BTreeMap::new();
        for e in f.iter() {
            tree.entry(e.ancestor(&scale, l * t)).or_default().insert(e.ancestor(&scale, prev * t));
        }
        let mut group_of: BTreeMap<[i64; 2], u32> = BTreeMap::new();
        for kids in tree.values() {
            for (idx, kid) in kids.iter().enumerate() {
                group_of.insert(*kid, (idx % groups) as u32);
            }
        }
        for (label, e) in labels.iter_mut().zip(f.iter()) {
            label.push(group_of[&e.ancestor(&scale, prev * t)]);
        }
        stages.push(KatzTaoStage { from_level: prev, to_level: l, count, cap, groups });
        prev = l;
    }
    let mut buckets: BTreeMap<Vec<u32>, Vec<E>> = BTreeMap::new();
    for (label, e) in labels.into_iter().zip(f.iter()) {
        buckets.entry(label).or_default().push(*e);
    }
    let parts = buckets.into_values().map(|v| f.derive(v)).collect();
    Ok(KatzTaoPartition { parts, stages, input_constant, part_bound })
}

/// Covering counts and branching values `β(j) = log2 |F|_{2^{-jT}} / T`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchingProfile {
    pub block_exp: u32,
    pub dim: u32,
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
}

impl BranchingProfile {
    /// Whether `0 <= β(j+1) - β(j) <= d` for every `j`.
    pub fn is_lipschitz(&self) -> bool {
        self.values.windows(2).all(|w| {
            let d = w[1] - w[0];
            d >= -1e-12 && d <= self.dim as f64 + 1e-12
        })
    }
}

pub fn branching<E: Cell>(f: &Family<E>) -> BranchingProfile {
    let scale = f.scale();
    let t = scale.block_exp();
    let counts: Vec<usize> = (0..=scale.levels())
        .map(|j| f.covering_number(j * t).expect("level in range"))
        .collect();
    let values = counts.iter().map(|&c| if c == 0 { 0.0 } else { (c as f64).log2() / t as f64 }).collect();
    BranchingProfile { block_exp: t, dim: E::DIM as u32, counts, values }
}

/// For each dyadic level `k`, the max and min number of elements in occupied cells.
pub fn all_scales_spread<E: Cell>(f: &Family<E>) -> Vec<(u32, usize, usize)> {
    (0..=f.scale().delta_exp())
        .map(|k| {
            let c = f.ancestor_counts(k);
            (k, c.values().copied().max().unwrap_or(0), c.values().copied().min().unwrap_or(0))
        })
        .collect()
}

/// Occupied cells at dyadic level `k`, in that level's coordinates.
pub fn coarsen<E: Cell>(f: &Family<E>, k: u32) -> Vec<[i64; 2]> {
    f.ancestor_counts(k).into_keys().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Interval, Scale, Square};
    use crate::sets::check_dyadic_katz_tao;
    use rand::Rng;

    #[test]
    fn full_and_single_are_fixed_points() {
        let scale = Scale::new(6, 2).unwrap();
        let full = Family::<Square>::full_grid(scale);
        let ext = extract_uniform(&full, 1);
        assert_eq!(ext.family, full);
        assert_eq!(ext.ratio, 1.0);
        let one = Family::new(scale, [Square::new(4, 9)]).unwrap();
        assert_eq!(extract_uniform(&one, 1).family, one);
    }

    #[test]
    fn random_subset_becomes_uniform() {
        let scale = Scale::new(8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Square> = (0..1000).map(|_| Square::new(rng.gen_range(0..256), rng.gen_range(0..256))).collect();
        let f = Family::new(scale, pts).unwrap();
        let ext = extract_uniform(&f, 7);
        assert!(is_uniform(&ext.family));
        assert!(ext.ratio >= ext.guaranteed);
        assert!(ext.ratio >= 1.0 / 256.0);
    }

    #[test]
    fn katz_tao_partition_of_full_intervals() {
        let scale = Scale::new(6, 2).unwrap();
        let full = Family::<Interval>::full_grid(scale);
        let half = Rational::new(1, 2);
        let part = partition_katz_tao(&full, &half).unwrap();
        let total: usize = part.parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, 64);
        assert!(part.parts.len() as f64 <= 8.0 * 8.0);
        assert!(part.parts.len() as f64 <= part.part_bound);
        for p in &part.parts {
            assert!(check_dyadic_katz_tao(p, &half, &Rational::from_integer(16)));
        }
    }

    #[test]
    fn katz_tao_partition_trivial_and_errors() {
        let scale = Scale::new(6, 2).unwrap();
        let one = Family::new(scale, [Interval(3)]).unwrap();
        assert_eq!(partition_katz_tao(&one, &Rational::new(1, 2)).unwrap().parts.len(), 1);
        let uneven = Family::new(scale, [Interval(0), Interval(1), Interval(40)]).unwrap();
        assert!(matches!(partition_katz_tao(&uneven, &Rational::new(1, 2)), Err(LabError::NotUniform(_))));
    }

    #[test]
    fn branching_profiles() {
        let scale = Scale::new(6, 2).unwrap();
        let full = Family::<Interval>::full_grid(scale);
        let b = branching(&full);
        assert_eq!(b.values, vec![0.0, 1.0, 2.0, 3.0]);
        let one = Family::new(scale, [Interval(5)]).unwrap();
        assert!(branching(&one).values.iter().all(|&v| v == 0.0));
        let ad = crate::sets::generate_ad_regular(Scale::new(8, 2).unwrap(), &Rational::new(1, 2), 3).unwrap();
        assert_eq!(branching(&ad).values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(branching(&ad).is_lipschitz());
    }

    #[test]
    fn uniform_partition_covers() {
        let scale = Scale::new(6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = Family::new(scale, (0..30).map(|_| Interval(rng.gen_range(0..64)))).unwrap();
        let parts = partition_uniform(&f, 4);
        assert!(parts.iter().all(is_uniform));
        assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), f.len());
        let u = Family::<Interval>::full_grid(scale);
        assert_eq!(partition_uniform(&u, 0).len(), 1);
    }
}
