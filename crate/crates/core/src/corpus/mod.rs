//! Training corpora: procedural toy cities and the window → aggregate →
//! resize pipeline over user rasters.

mod store;
mod toy;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::raster::{block_aggregate, extract_window, resize_to, CityMap, SourceRaster};
use crate::seed;

pub use store::{MANIFEST_FILE, QUANTIZATION_STEP};
pub use toy::{generate_toy_city, Archetype, ToyCitySpec, DEFAULT_NOISE_LEVEL, DEFAULT_SPREAD_KM};

/// Geometry of the preprocessing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pipeline {
    pub side_km: f64,
    pub agg_pixel_size: f64,
    pub final_width: usize,
}

impl Default for Pipeline {
    /// 100 km windows aggregated to 750 m and resized to 128 px.
    fn default() -> Self {
        Pipeline {
            side_km: 100.0,
            agg_pixel_size: 750.0,
            final_width: 128,
        }
    }
}

impl Pipeline {
    /// 32 px at 750 m: small enough to train in minutes.
    pub fn desk() -> Self {
        Pipeline {
            side_km: 24.0,
            agg_pixel_size: 750.0,
            final_width: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_km > 0.0) || !(self.agg_pixel_size > 0.0) || self.final_width < 2 {
            return Err(Error::argument(format!(
                "invalid pipeline: side {} km, {} m/px, {} px",
                self.side_km, self.agg_pixel_size, self.final_width
            )));
        }
        Ok(())
    }
}

/// A city center on a source raster, in global pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityCenter {
    pub id: String,
    pub row: i64,
    pub col: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

/// Where a map came from and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: String,
    pub params: serde_json::Value,
}

/// Non-empty ordered set of maps sharing width and pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    maps: Vec<CityMap>,
    manifest: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn new(maps: Vec<CityMap>, manifest: Vec<ManifestEntry>) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::argument("a corpus needs at least one map"))?;
        if manifest.len() != maps.len() {
            return Err(Error::argument(format!("{} manifest entries for {} maps", manifest.len(), maps.len())));
        }
        let (w, px) = (first.width(), first.pixel_size());
        for (m, e) in maps.iter().zip(&manifest) {
            if m.width() != w || m.pixel_size() != px {
                return Err(Error::argument(format!(
                    "map {} is {} px at {} m, corpus is {w} px at {px} m",
                    e.id,
                    m.width(),
                    m.pixel_size()
                )));
            }
        }
        let mut ids: Vec<&str> = manifest.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::argument(format!("duplicate map id {}", w[0])));
        }
        Ok(Corpus { maps, manifest })
    }

    /// Wrap maps with generated ids `{prefix}-00000`, ... and one shared
    /// provenance record.
    pub fn from_maps(maps: Vec<CityMap>, prefix: &str, source: &str, params: serde_json::Value) -> Result<Self> {
        let manifest = (0..maps.len())
            .map(|i| ManifestEntry {
                id: format!("{prefix}-{i:05}"),
                source: source.to_string(),
                params: params.clone(),
            })
            .collect();
        Self::new(maps, manifest)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[CityMap] {
        &self.maps
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn ids(&self) -> Vec<String> {
        self.manifest.iter().map(|e| e.id.clone()).collect()
    }

    pub fn width(&self) -> usize {
        self.maps[0].width()
    }

    pub fn pixel_size(&self) -> f64 {
        self.maps[0].pixel_size()
    }

    /// Stable content hash over geometry, manifest, metadata and 16-bit
    /// quantized values; unchanged by a save/load round trip.
    pub fn hash(&self) -> String {
        store::hash(self)
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        store::save(self, dir)
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        store::load(dir)
    }
}

/// `count` toy-city specs cycling through `templates`, each with its own
/// seed derived from `corpus_seed` and its index.
pub fn toy_specs(templates: &[ToyCitySpec], count: usize, corpus_seed: u64) -> Vec<ToyCitySpec> {
    if templates.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|i| templates[i % templates.len()].clone().with_seed(seed::derive(corpus_seed, "toy-map", i as u64)))
        .collect()
}

/// Generate one map per spec at the pipeline's final width and aggregation
/// pixel size.
pub fn build_toy_corpus(specs: &[ToyCitySpec], pipeline: &Pipeline) -> Result<Corpus> {
    pipeline.validate()?;
    if specs.is_empty() {
        return Err(Error::argument("no toy-city specs given"));
    }
    let maps = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            generate_toy_city(spec, pipeline.final_width, pipeline.agg_pixel_size)
                .map_err(|e| e.with_source(format!("toy-{i:05}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| ManifestEntry {
            id: format!("toy-{i:05}"),
            source: format!("toy:{}", spec.archetype.name()),
            params: json!({ "spec": spec, "pipeline": pipeline }),
        })
        .collect();
    let maps = maps
        .into_iter()
        .enumerate()
        .map(|(i, mut m)| {
            m.meta.city_id = Some(format!("toy-{i:05}"));
            m
        })
        .collect();
    Corpus::new(maps, manifest)
}

/// Cut, aggregate and resize a window around every center.
pub fn build_raster_corpus(
    raster: &SourceRaster,
    source_name: &str,
    centers: &[CityCenter],
    pipeline: &Pipeline,
) -> Result<Corpus> {
    pipeline.validate()?;
    if centers.is_empty() {
        return Err(Error::argument("no city centers given"));
    }
    let maps = centers
        .par_iter()
        .map(|c| {
            let stage = || -> Result<CityMap> {
                let window = extract_window(raster, (c.row, c.col), pipeline.side_km)?;
                let coarse = block_aggregate(&window, pipeline.agg_pixel_size)?;
                let mut m = resize_to(&coarse, pipeline.final_width)?;
                m.meta.city_id = Some(c.id.clone());
                m.meta.center_lat = c.lat;
                m.meta.center_lon = c.lon;
                m.meta.source = Some(source_name.to_string());
                Ok(m)
            };
            stage().map_err(|e| e.with_source(&c.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = centers
        .iter()
        .map(|c| ManifestEntry {
            id: c.id.clone(),
            source: source_name.to_string(),
            params: json!({ "center": c, "pipeline": pipeline }),
        })
        .collect();
    Corpus::new(maps, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_pipeline_defaults() {
        let p = Pipeline::default();
        assert_eq!((p.side_km, p.agg_pixel_size, p.final_width), (100.0, 750.0, 128));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(build_toy_corpus(&[], &Pipeline::desk()).is_err());
        let r = SourceRaster::new(4, 4, 10.0, vec![0.0; 16]).unwrap();
        assert!(build_raster_corpus(&r, "r", &[], &Pipeline::desk()).is_err());
        assert!(Corpus::new(vec![], vec![]).is_err());
    }

    #[test]
    fn mixed_widths_rejected() {
        let a = CityMap::constant(4, 10.0, 0.0).unwrap();
        let b = CityMap::constant(5, 10.0, 0.0).unwrap();
        assert!(Corpus::from_maps(vec![a, b], "m", "test", json!({})).is_err());
    }

    #[test]
    fn stage_errors_name_the_source() {
        let r = SourceRaster::new(4, 4, 10.0, vec![0.0; 16]).unwrap();
        let centers = [CityCenter { id: "nowhere".into(), row: 100, col: 100, lat: None, lon: None }];
        let err = build_raster_corpus(&r, "r", &centers, &Pipeline::desk()).unwrap_err();
        assert!(err.to_string().starts_with("nowhere:"), "{err}");
        assert!(matches!(err.root(), Error::Domain(_)));
    }
}
