//! Richness maps, rich squares, incidence counts, Szemerédi–Trotter ratios and
//! the dyadic pigeonhole splitter.

mod richness;
mod split;

pub use richness::{
    incidence_count, rich_squares, richness_map, richness_map_sparse, st_ratio, IncidenceReport, RichSquares,
    RichnessHistogram, RichnessMap, StReport, DENSE_LIMIT_EXP, RICHNESS_CONVENTION,
};
pub use split::{pigeonhole_split, PigeonholeSplit};
