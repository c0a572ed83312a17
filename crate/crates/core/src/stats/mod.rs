//! Statistical engine for gradient-noise analysis.

mod berry_esseen;
mod describe;
mod moments;
mod normal;
mod shapiro;
mod tail;

pub use berry_esseen::{sup_cdf_distance, sup_cdf_distance_monte_carlo, DiscreteDistribution, MAX_ENUMERATED_ATOMS};
pub use describe::{histogram, quantile_sorted, spearman, Histogram};
pub use moments::{berry_esseen_bound, moment_summary, BerryEsseenBound, MomentSummary, BERRY_ESSEEN_A0};
pub use normal::{std_normal_cdf, std_normal_quantile};
pub use shapiro::{
    classify_gaussian, classify_gaussian_with, is_point_mass, shapiro_wilk, shapiro_wilk_at_level, Classification,
    SwOptions, SwResult, DEFAULT_ALPHA_LEVEL,
};
pub use tail::{symmetric_stable, tail_index, TailIndexEstimate, TAIL_INDEX_METHOD};
