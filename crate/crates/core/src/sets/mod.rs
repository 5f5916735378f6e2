//! Non-concentration checkers, set generators and the uniformization tools.

mod check;
mod generate;
mod tolerance;
mod uniform;

pub use check::{
    check_delta_set, check_dyadic_katz_tao, check_katz_tao, delta_set_report_raw, dyadic_katz_tao_constant,
    katz_tao_report_raw, BallCounter, SetReport, QUANTIFIER_NOTE,
};
pub use generate::{generate_ad_regular, generate_random_frostman, GridCells};
pub use tolerance::ToleranceProfile;
pub use uniform::{
    all_scales_spread, branching, coarsen, extract_uniform, is_uniform, partition_katz_tao, partition_uniform,
    uniformity_defect, BranchingProfile, KatzTaoPartition, UniformExtraction,
};
