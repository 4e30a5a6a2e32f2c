//! Peak-count and cluster-share histograms and the two-sample chi-square
//! comparison of real and synthetic corpora.

mod chi2;
mod histogram;
mod report;

pub use chi2::{chi2_sf, chi2_two_sample, gamma_q, ln_gamma, Chi2Result, DEFAULT_MIN_EXPECTED};
pub use histogram::Histogram;
pub use report::{
    compare_report, peak_count_histogram, ChiSummary, ClusterMode, ClusterReport, ClusterSettings, CompareConfig,
    ComparisonReport,
};
