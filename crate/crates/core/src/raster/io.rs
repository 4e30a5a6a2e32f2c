//! 16-bit binary PGM maps with a JSON sidecar.
//!
//! `<name>.pgm` holds a `P5` image with maxval 65535 and big-endian samples,
//! each `round(fraction * 65535)`. `<name>.json` holds `pixel_size_m` and the
//! optional provenance fields of [`MapMeta`].

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{CityMap, MapMeta, SourceRaster};
use crate::error::{Error, Result};

pub const SIDECAR_EXT: &str = "json";
const MAXVAL: u32 = 65535;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension(SIDECAR_EXT)
}

pub fn encode_pgm(map: &CityMap) -> Vec<u8> {
    let w = map.width();
    let mut out = format!("P5\n{w} {w}\n{MAXVAL}\n").into_bytes();
    out.reserve(2 * w * w);
    for &v in map.values() {
        let q = (v * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn encode_sidecar(map: &CityMap) -> Result<String> {
    let mut obj = Map::new();
    obj.insert("pixel_size_m".into(), Value::from(map.pixel_size()));
    if let Value::Object(meta) = serde_json::to_value(&map.meta)? {
        obj.extend(meta);
    }
    Ok(serde_json::to_string_pretty(&Value::Object(obj))? + "\n")
}

pub fn write_map(map: &CityMap, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(map))?;
    fs::write(sidecar_path(path), encode_sidecar(map)?)?;
    Ok(())
}

pub fn read_map(path: &Path) -> Result<CityMap> {
    let bytes = fs::read(path)?;
    let (width, values) = decode_pgm(&bytes)?;
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| {
        Error::parse("sidecar", format!("cannot read {}: {e}", sidecar.display()))
    })?;
    let (pixel_size, meta) = decode_sidecar(&text)?;
    Ok(CityMap::new(width, pixel_size, values)?.with_meta(meta))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(field, "expected a decimal integer"))
    }
}

/// Parse a `P5` 16-bit square image into `(width, fractions)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let (width, height, values) = decode_pgm_raster(bytes)?;
    if width != height {
        return Err(Error::parse("height", format!("map must be square, got {width}x{height}")));
    }
    if width < 2 {
        return Err(Error::parse("width", format!("map width must be >= 2, got {width}")));
    }
    Ok((width, values))
}

/// Parse a `P5` 16-bit image of any size into `(width, height, fractions)`.
pub fn decode_pgm_raster(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::parse("magic", "expected `P5`"));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval != MAXVAL {
        return Err(Error::parse("maxval", format!("expected {MAXVAL}, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse("width", format!("empty image {width}x{height}")));
    }
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::parse("maxval", "missing whitespace before raster data")),
    }
    let data = &bytes[h.pos..];
    let expected = 2 * width * height;
    if data.len() != expected {
        return Err(Error::parse(
            "data",
            format!("expected {expected} bytes of samples, found {}", data.len()),
        ));
    }
    let values = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / MAXVAL as f64)
        .collect();
    Ok((width, height, values))
}

/// Read a source raster (any aspect ratio) with its `pixel_size_m` sidecar.
pub fn read_source_raster(path: &Path) -> Result<SourceRaster> {
    let bytes = fs::read(path)?;
    let (width, height, values) = decode_pgm_raster(&bytes)?;
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| {
        Error::parse("sidecar", format!("cannot read {}: {e}", sidecar.display()))
    })?;
    let (pixel_size, _) = decode_sidecar(&text)?;
    SourceRaster::new(width, height, pixel_size, values)
}

/// Write a source raster as PGM plus a sidecar carrying only its pixel size.
pub fn write_source_raster(raster: &SourceRaster, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n{MAXVAL}\n", raster.width(), raster.height()).into_bytes();
    for &v in raster.values() {
        bytes.extend_from_slice(&((v * MAXVAL as f64).round() as u16).to_be_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), format!("{{\"pixel_size_m\": {}}}\n", raster.pixel_size()))?;
    Ok(())
}

fn optional<T>(obj: &Map<String, Value>, field: &str, get: impl Fn(&Value) -> Option<T>) -> Result<Option<T>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => get(v)
            .map(Some)
            .ok_or_else(|| Error::parse(field, format!("unexpected value {v}"))),
    }
}

pub fn decode_sidecar(text: &str) -> Result<(f64, MapMeta)> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("sidecar", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("sidecar", "expected a JSON object"))?;
    let pixel_size = obj
        .get("pixel_size_m")
        .ok_or_else(|| Error::parse("pixel_size_m", "missing"))?
        .as_f64()
        .ok_or_else(|| Error::parse("pixel_size_m", "expected a number"))?;
    if !(pixel_size > 0.0) || !pixel_size.is_finite() {
        return Err(Error::parse("pixel_size_m", format!("must be positive, got {pixel_size}")));
    }
    let text_field = |v: &Value| v.as_str().map(str::to_owned);
    let meta = MapMeta {
        city_id: optional(obj, "city_id", text_field)?,
        center_lat: optional(obj, "center_lat", Value::as_f64)?,
        center_lon: optional(obj, "center_lon", Value::as_f64)?,
        source: optional(obj, "source", text_field)?,
    };
    Ok((pixel_size, meta))
}
