//! The JSON run configuration: one flat section per subcommand. Every
//! command-line flag overrides the matching key.

use serde::{Deserialize, Serialize};
use urbangan::corpus::{Archetype, Pipeline, DEFAULT_NOISE_LEVEL, DEFAULT_SPREAD_KM};
use urbangan::gan::GanConfig;
use urbangan::morphology::PeakParams;
use urbangan::stats::{ClusterSettings, CompareConfig};
use urbangan::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCorpusConfig {
    pub count: usize,
    /// Archetypes cycled through in order.
    pub archetypes: Vec<Archetype>,
    /// Centers of polycentric and coastal cities.
    pub n_centers: usize,
    pub center_spread_km: f64,
    pub density_scale: f64,
    pub noise_level: f64,
    pub width: usize,
    pub pixel_size: f64,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        let desk = Pipeline::desk();
        SynthCorpusConfig {
            count: 200,
            archetypes: vec![Archetype::Monocentric, Archetype::Polycentric, Archetype::Coastal],
            n_centers: 3,
            center_spread_km: DEFAULT_SPREAD_KM,
            density_scale: 1.0,
            noise_level: DEFAULT_NOISE_LEVEL,
            width: desk.final_width,
            pixel_size: desk.agg_pixel_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub pipeline: Pipeline,
    pub source_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: u64,
    /// Width and pixel size are taken from the corpus; the seed from the
    /// run seed.
    pub gan: GanConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            gan: GanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub count: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { count: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Ring width in km; one pixel when absent.
    pub ring_width_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth_corpus: SynthCorpusConfig,
    pub ingest: IngestConfig,
    pub train: TrainConfig,
    pub generate: GenerateConfig,
    pub profile: ProfileConfig,
    pub peaks: PeakParams,
    pub cluster: ClusterSettings,
    pub compare: CompareConfig,
    pub render: PeakParams,
}


impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Argument(format!("invalid config {}: {e}", path.display())))
    }

    /// Fan the run seed out to every stage that consumes randomness.
    pub fn derive_seeds(&mut self) {
        self.train.gan.seed = seed::derive(self.seed, "train", 0);
        self.cluster.seed = seed::derive(self.seed, "cluster", 0);
        self.compare.cluster.seed = seed::derive(self.seed, "compare", 0);
    }

    pub fn corpus_seed(&self) -> u64 {
        seed::derive(self.seed, "synth-corpus", 0)
    }

    pub fn sample_seed(&self) -> u64 {
        seed::derive(self.seed, "generate", 0)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.synth_corpus;
        if s.count == 0 || s.archetypes.is_empty() {
            return Err(Error::Argument("synth_corpus needs count >= 1 and at least one archetype".into()));
        }
        Pipeline {
            side_km: s.width as f64 * s.pixel_size / 1000.0,
            agg_pixel_size: s.pixel_size,
            final_width: s.width,
        }
        .validate()?;
        self.ingest.pipeline.validate()?;
        self.train.gan.validate()?;
        if self.generate.count == 0 {
            return Err(Error::Argument("generate.count must be at least 1".into()));
        }
        if let Some(w) = self.profile.ring_width_km {
            if !(w > 0.0) {
                return Err(Error::Argument(format!("profile.ring_width_km must be positive, got {w}")));
            }
        }
        self.peaks.validate()?;
        self.render.validate()?;
        self.compare.peaks.validate()?;
        for c in [&self.cluster, &self.compare.cluster] {
            if c.k == Some(0) || c.k_min == 0 || c.k_min > c.k_max {
                return Err(Error::Argument(format!("invalid K settings {:?} / {}..={}", c.k, c.k_min, c.k_max)));
            }
            if !(c.explained_threshold > 0.0 && c.explained_threshold <= 1.0) {
                return Err(Error::Argument("explained_threshold must be in (0, 1]".into()));
            }
        }
        if !(self.compare.min_expected >= 0.0) {
            return Err(Error::Argument("compare.min_expected must be non-negative".into()));
        }
        Ok(())
    }
}
