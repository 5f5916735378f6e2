use std::collections::BTreeMap;

use crate::error::{invalid, LabError, Result};
use crate::grid::{Family, Square, Tube};
use crate::incidence::richness::{richness_map, RichnessMap};

/// Result of [`pigeonhole_split`].
#[derive(Clone, Debug)]
pub struct PigeonholeSplit {
    /// Selected dyadic multiplicity `M`.
    pub m: u64,
    /// Squares of `P_r(∪ parts)` whose own best multiplicity is `M`.
    pub squares: Family<Square>,
    /// `|P_r(∪ parts)|`.
    pub band_size: usize,
    /// The logarithmic loss `L` used in both postconditions: `max(e, #dyadic M)`.
    pub log_loss: u32,
}

/// Dyadic pigeonholing over disjoint tube collections.
///
/// For each square `p` of richness in `[r, 2r)` in the union, and each dyadic
/// `M` up to the next power of two of `r`, count the parts in which `p` has
/// richness at least `r/M`; `M_p` maximizes that count divided by `M` (ties
/// to the smaller `M`). The most common `M_p` wins. Both postconditions,
/// `|P| >= |P_r| / (2L)` and `count_M(p) >= M / (2L)` for every kept `p`,
/// are checked before returning.
pub fn pigeonhole_split(parts: &[Family<Tube>], r: u64) -> Result<PigeonholeSplit> {
    if r < 1 {
        return invalid("richness threshold must be at least 1");
    }
    let Some(first) = parts.first() else {
        return Err(LabError::EmptyFamily);
    };
    for p in parts {
        first.ensure_same_scale(p)?;
        if p.thickness() != first.thickness() {
            return invalid("parts must share the thickness factor");
        }
    }
    let mut all: Vec<Tube> = Vec::new();
    for p in parts {
        all.extend_from_slice(p.elements());
    }
    let total = all.len();
    let union = first.derive(all);
    if union.len() != total {
        return invalid("parts are not pairwise disjoint");
    }
    let scale = first.scale();
    let maps: Vec<RichnessMap> = parts.iter().map(richness_map).collect();
    let union_map = richness_map(&union);
    let band: Vec<Square> = union_map
        .nonzero()
        .filter(|&(_, c)| (c as u64) >= r && (c as u64) < 2 * r)
        .map(|(p, _)| p)
        .collect();
    if band.is_empty() {
        return Err(LabError::EmptyFamily);
    }
    let top = r.next_power_of_two();
    let ms: Vec<u64> = std::iter::successors(Some(1u64), |&m| (m < top).then_some(m * 2)).collect();
    let log_loss = scale.delta_exp().max(ms.len() as u32);
    let count_at = |p: Square, m: u64| {
        let need = r.div_ceil(m);
        maps.iter().filter(|map| map.count(p) as u64 >= need).count() as u64
    };
    let mut best_m: Vec<(Square, u64, u64)> = Vec::with_capacity(band.len());
    for &p in &band {
        let mut best = (0u64, 1u64);
        for &m in &ms {
            let c = count_at(p, m);
            // c / m > best.0 / best.1
            if c * best.1 > best.0 * m {
                best = (c, m);
            }
        }
        best_m.push((p, best.1, best.0));
    }
    let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
    for &(_, m, _) in &best_m {
        *freq.entry(m).or_insert(0) += 1;
    }
    let m = freq.iter().fold((0u64, 0usize), |acc, (&m, &f)| if f > acc.1 { (m, f) } else { acc }).0;
    let squares: Vec<Square> = best_m.iter().filter(|x| x.1 == m).map(|x| x.0).collect();
    let two_l = 2 * log_loss as u64;
    if (squares.len() as u64) * two_l < band.len() as u64 {
        return Err(LabError::Postcondition(format!(
            "kept {} of {} rich squares, below 1/(2L)",
            squares.len(),
            band.len()
        )));
    }
    for &p in &squares {
        if count_at(p, m) * two_l < m {
            return Err(LabError::Postcondition(format!("square {p:?} has too few parts at M={m}")));
        }
    }
    Ok(PigeonholeSplit { m, squares: Family::from_trusted(scale, first.thickness(), squares), band_size: band.len(), log_loss })
}
