use serde::{Deserialize, Serialize};

use super::{chi2_two_sample, Histogram, DEFAULT_MIN_EXPECTED};
use crate::cluster::{assign, kmeans_fit, select_k, share_distribution, KMeansOptions, KSelection, ProfileMatrix};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::morphology::{corpus_peaks, PeakParams};
use crate::raster::CityMap;

/// Histogram of peak counts over `maps`.
pub fn peak_count_histogram(maps: &[CityMap], params: &PeakParams) -> Result<Histogram> {
    if maps.is_empty() {
        return Err(Error::argument("cannot histogram an empty corpus"));
    }
    let peaks = corpus_peaks(maps, params)?;
    Ok(Histogram::from_observations(peaks.iter().map(|(_, p)| p.len())))
}

/// How the profile classes are obtained for a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// Fit on the real profiles and assign the synthetic ones.
    #[default]
    FitReal,
    /// Fit on both corpora together.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSettings {
    /// Fixed K; when absent K is chosen by the explained-variance rule over
    /// `k_min..=k_max`.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub explained_threshold: f64,
    pub mode: ClusterMode,
    /// Scale each profile to a unit maximum before clustering.
    pub normalize: bool,
    pub kmeans: KMeansOptions,
    pub seed: u64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            k: None,
            k_min: 1,
            k_max: 12,
            explained_threshold: crate::cluster::DEFAULT_EXPLAINED_THRESHOLD,
            mode: ClusterMode::FitReal,
            normalize: false,
            kmeans: KMeansOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub peaks: PeakParams,
    pub min_expected: f64,
    pub cluster: ClusterSettings,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            peaks: PeakParams::default(),
            min_expected: DEFAULT_MIN_EXPECTED,
            cluster: ClusterSettings::default(),
        }
    }
}

/// Chi-square outcome as written to reports.
///
/// When merging leaves a single bin the test has no degrees of freedom:
/// the summary then reads `stat 0, df 0, p 1` and `note` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSummary {
    pub stat: f64,
    pub df: usize,
    pub p: f64,
    pub merged_bins: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn chi_summary(a: &Histogram, b: &Histogram, min_expected: f64) -> Result<ChiSummary> {
    match chi2_two_sample(a, b, min_expected) {
        Ok(r) => Ok(ChiSummary {
            stat: r.statistic,
            df: r.df,
            p: r.p_value,
            merged_bins: r.merged_bins,
            note: None,
        }),
        Err(Error::Test(msg)) => Ok(ChiSummary {
            stat: 0.0,
            df: 0,
            p: 1.0,
            merged_bins: vec![a.labels().into_iter().chain(b.labels()).collect::<std::collections::BTreeSet<_>>().into_iter().collect()],
            note: Some(msg),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub shares_real: Histogram,
    pub shares_synth: Histogram,
    pub share_chi2: ChiSummary,
    pub mode: ClusterMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<KSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub peak_hist_real: Histogram,
    pub peak_hist_synth: Histogram,
    pub peak_chi2: ChiSummary,
    pub cluster: ClusterReport,
}

/// Peak-count histograms with their chi-square test, plus profile classes
/// with per-corpus shares and a chi-square test on the shares.
pub fn compare_report(real: &Corpus, synthetic: &Corpus, config: &CompareConfig) -> Result<ComparisonReport> {
    if real.width() != synthetic.width() || real.pixel_size() != synthetic.pixel_size() {
        return Err(Error::argument(format!(
            "corpora differ in geometry: {} px at {} m vs {} px at {} m",
            real.width(),
            real.pixel_size(),
            synthetic.width(),
            synthetic.pixel_size()
        )));
    }
    config.peaks.validate()?;
    let real_peaks = corpus_peaks(real.maps(), &config.peaks)?;
    let synth_peaks = corpus_peaks(synthetic.maps(), &config.peaks)?;
    let peak_hist_real = Histogram::from_observations(real_peaks.iter().map(|(_, p)| p.len()));
    let peak_hist_synth = Histogram::from_observations(synth_peaks.iter().map(|(_, p)| p.len()));
    let peak_chi2 = chi_summary(&peak_hist_real, &peak_hist_synth, config.min_expected)?;

    let rows = |peaks: &[(crate::morphology::RadialProfile, _)]| -> Vec<Vec<f64>> {
        peaks.iter().map(|(p, _)| p.values.clone()).collect()
    };
    let prepare = |m: ProfileMatrix<f64>| if config.cluster.normalize { m.normalized() } else { m };
    let real_m = prepare(ProfileMatrix::new(real.ids(), rows(&real_peaks))?);
    let synth_m = prepare(ProfileMatrix::new(synthetic.ids(), rows(&synth_peaks))?);
    if real_m.dim() != synth_m.dim() {
        return Err(Error::shape("compare profiles", &[real_m.dim()], &[synth_m.dim()]));
    }
    let fit_data = match config.cluster.mode {
        ClusterMode::FitReal => real_m.clone(),
        ClusterMode::Joint => {
            let ids = real_m.ids().iter().chain(synth_m.ids()).enumerate().map(|(i, id)| format!("{i}:{id}")).collect();
            let all = real_m.rows().chain(synth_m.rows()).map(<[f64]>::to_vec).collect();
            ProfileMatrix::new(ids, all)?
        }
    };
    let s = &config.cluster;
    let (k, selection) = match s.k {
        Some(k) => (k, None),
        None => {
            let hi = s.k_max.min(fit_data.len());
            if s.k_min == 0 || s.k_min > hi {
                return Err(Error::argument(format!("empty K range {}..={}", s.k_min, s.k_max)));
            }
            let sel = select_k(&fit_data, s.k_min..=hi, s.explained_threshold, s.seed, &s.kmeans)?;
            (sel.k, Some(sel))
        }
    };
    let model = kmeans_fit(&fit_data, k, s.seed, &s.kmeans)?;
    let classes = |m: &ProfileMatrix<f64>| m.rows().map(|r| assign(&model, r)).collect::<Result<Vec<_>>>();
    let shares_real = share_distribution(&classes(&real_m)?, k);
    let shares_synth = share_distribution(&classes(&synth_m)?, k);
    let share_chi2 = chi_summary(&shares_real, &shares_synth, config.min_expected)?;

    Ok(ComparisonReport {
        peak_hist_real,
        peak_hist_synth,
        peak_chi2,
        cluster: ClusterReport {
            k,
            centroids: model.centroids,
            shares_real,
            shares_synth,
            share_chi2,
            mode: s.mode,
            selection,
        },
    })
}
