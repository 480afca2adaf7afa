//! Score processing and the statistical analyses over scores and features.

mod mca;
mod ols;
mod poly;
mod scores;
mod significance;

pub use mca::{mca, IndicatorMatrix, McaResult};
pub use ols::{ols, OlsFit};
pub use poly::{
    derivative, elbow, poly_eval, poly_eval_and_derivatives, polyfit, polyfit_elbow, r_squared,
    stationary_points, PolyFit, DEFAULT_ELBOW_DELTA,
};
pub use scores::{
    binarize_sgl, correct_and_normalize, corrected_score, skewness, skewness_median,
    LiteracyScores, ScoredItem, SglLevel, SGL_ITEMS, SGL_MAX, SGL_MIN,
};
pub use significance::{bonferroni, paired_t_test, welch_t_test, TTest};

/// The published SGL-on-mini-VLAT cubic, constant term first.
pub const SGL_ON_VLAT_CUBIC: [f64; 4] = [0.598, 1.216, -2.619, 1.708];
/// The published CALVI-on-mini-VLAT quartic, constant term first.
pub const CALVI_ON_VLAT_QUARTIC: [f64; 5] = [0.112, 1.267, -4.852, 7.989, -4.046];
