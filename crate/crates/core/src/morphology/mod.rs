//! Ring-averaged radial profiles and the polycentricity peak search.

mod peaks;
mod profile;

pub use peaks::{find_peaks, peak_indices, Peak, PeakSet, DEFAULT_MIN_HEIGHT_FRACTION, DEFAULT_MIN_SEPARATION_KM};
pub use profile::{radial_profile, ring_index, smooth, RadialProfile};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::CityMap;

/// Profile and peak-search settings applied to every map of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakParams {
    /// Ring width in km; `None` uses one pixel.
    #[serde(default)]
    pub ring_width_km: Option<f64>,
    pub min_height_fraction: f64,
    pub min_separation_km: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            ring_width_km: None,
            min_height_fraction: DEFAULT_MIN_HEIGHT_FRACTION,
            min_separation_km: DEFAULT_MIN_SEPARATION_KM,
        }
    }
}

impl PeakParams {
    pub fn ring_width_for(&self, map: &CityMap) -> f64 {
        self.ring_width_km.unwrap_or(map.pixel_size() / 1000.0)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.ring_width_km {
            if !(w > 0.0) {
                return Err(Error::argument(format!("ring width must be positive, got {w} km")));
            }
        }
        if !(self.min_height_fraction > 0.0 && self.min_height_fraction <= 1.0) {
            return Err(Error::argument(format!(
                "peak height fraction must be in (0, 1], got {}",
                self.min_height_fraction
            )));
        }
        if !(self.min_separation_km >= 0.0) {
            return Err(Error::argument(format!(
                "peak separation must be non-negative, got {}",
                self.min_separation_km
            )));
        }
        Ok(())
    }
}

pub fn map_peaks(map: &CityMap, params: &PeakParams) -> Result<(RadialProfile, PeakSet)> {
    let profile = radial_profile(map, params.ring_width_for(map))?;
    let peaks = find_peaks(&profile, params.min_height_fraction, params.min_separation_km)?;
    Ok((profile, peaks))
}

/// Profiles and peak sets of many maps, in input order.
pub fn corpus_peaks(maps: &[CityMap], params: &PeakParams) -> Result<Vec<(RadialProfile, PeakSet)>> {
    params.validate()?;
    maps.par_iter().map(|m| map_peaks(m, params)).collect()
}
