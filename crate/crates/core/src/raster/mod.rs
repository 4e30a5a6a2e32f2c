//! City maps and the window / aggregate / resize preprocessing chain.

mod io;
mod ops;

pub use io::{
    decode_pgm, decode_pgm_raster, encode_pgm, read_map, read_source_raster, sidecar_path, write_map,
    write_source_raster, SIDECAR_EXT,
};
pub use ops::{
    aggregate_grid, binarize, block_aggregate, extract_window, from_symmetric_range, maps_from_symmetric_batch,
    resize_to, to_symmetric_range, window_side_px, SYMMETRIC_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance attached to a map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// A square raster of built-up fractions.
///
/// Values are row-major, `width * width` of them, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CityMap {
    width: usize,
    pixel_size: f64,
    values: Vec<f64>,
    pub meta: MapMeta,
}

impl CityMap {
    pub fn new(width: usize, pixel_size: f64, values: Vec<f64>) -> Result<Self> {
        if width < 2 {
            return Err(Error::argument(format!("map width must be >= 2, got {width}")));
        }
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::argument(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        if values.len() != width * width {
            return Err(Error::shape("CityMap::new", &[width * width], &[values.len()]));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "map value {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(CityMap {
            width,
            pixel_size,
            values,
            meta: MapMeta::default(),
        })
    }

    pub fn constant(width: usize, pixel_size: f64, value: f64) -> Result<Self> {
        Self::new(width, pixel_size, vec![value; width * width])
    }

    pub fn with_meta(mut self, meta: MapMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Meters per pixel.
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    /// Side length in meters.
    pub fn extent(&self) -> f64 {
        self.width as f64 * self.pixel_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A rectangular source raster from which city windows are cut.
///
/// `origin` is the global `(row, col)` of the top-left cell; window centers
/// are given in the same global coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRaster {
    width: usize,
    height: usize,
    pixel_size: f64,
    values: Vec<f64>,
    origin: (i64, i64),
}

impl SourceRaster {
    pub fn new(width: usize, height: usize, pixel_size: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "source raster must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::argument(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::shape("SourceRaster::new", &[height, width], &[values.len()]));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("raster value {v} is outside [0, 1]")));
        }
        Ok(SourceRaster {
            width,
            height,
            pixel_size,
            values,
            origin: (0, 0),
        })
    }

    pub fn with_origin(mut self, origin: (i64, i64)) -> Self {
        self.origin = origin;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a global coordinate, or `None` outside the raster.
    pub fn sample(&self, row: i64, col: i64) -> Option<f64> {
        let r = row - self.origin.0;
        let c = col - self.origin.1;
        if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
            return None;
        }
        Some(self.values[r as usize * self.width + c as usize])
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        self.sample(row, col).is_some()
    }
}

impl From<CityMap> for SourceRaster {
    fn from(map: CityMap) -> Self {
        SourceRaster {
            width: map.width,
            height: map.width,
            pixel_size: map.pixel_size,
            values: map.values,
            origin: (0, 0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_maps() {
        assert!(CityMap::new(1, 1.0, vec![0.0]).is_err());
        assert!(CityMap::new(2, 0.0, vec![0.0; 4]).is_err());
        assert!(CityMap::new(2, 1.0, vec![0.0; 3]).is_err());
        assert!(matches!(
            CityMap::new(2, 1.0, vec![0.0, 0.5, 1.5, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn extent_is_width_times_pixel_size() {
        let m = CityMap::constant(128, 750.0, 0.0).unwrap();
        assert_eq!(m.extent(), 96_000.0);
    }

    #[test]
    fn origin_shifts_sampling() {
        let r = SourceRaster::new(2, 2, 10.0, vec![0.1, 0.2, 0.3, 0.4])
            .unwrap()
            .with_origin((10, 20));
        assert_eq!(r.sample(10, 20), Some(0.1));
        assert_eq!(r.sample(11, 21), Some(0.4));
        assert_eq!(r.sample(0, 0), None);
    }
}
