use super::{CityMap, SourceRaster};
use crate::error::{Error, Result};
use crate::Tensor;

/// How far a generator output may overshoot `[-1, 1]` before it is treated
/// as out of range instead of rounding noise.
pub const SYMMETRIC_TOLERANCE: f64 = 1e-6;

// Slack for `ceil` on ratios that are integral in exact arithmetic.
const CEIL_SLACK: f64 = 1e-9;

/// Side in pixels of a `side_km` window at `pixel_size` meters per pixel.
pub fn window_side_px(side_km: f64, pixel_size: f64) -> Result<usize> {
    if !(side_km > 0.0) || !side_km.is_finite() {
        return Err(Error::argument(format!("window side must be positive, got {side_km} km")));
    }
    if !(pixel_size > 0.0) {
        return Err(Error::argument(format!("pixel size must be positive, got {pixel_size}")));
    }
    let side = (side_km * 1000.0 / pixel_size - CEIL_SLACK).ceil();
    Ok(side.max(1.0) as usize)
}

/// Cut a square window of `side_km` kilometers centered on `center`.
///
/// Cells outside the raster are unbuilt (0).
pub fn extract_window(raster: &SourceRaster, center: (i64, i64), side_km: f64) -> Result<CityMap> {
    let side = window_side_px(side_km, raster.pixel_size())?;
    if side < 2 {
        return Err(Error::argument(format!(
            "a {side_km} km window is narrower than two {} m pixels",
            raster.pixel_size()
        )));
    }
    if !raster.contains(center.0, center.1) {
        return Err(Error::domain(format!(
            "window center {center:?} lies outside the raster"
        )));
    }
    let half = (side / 2) as i64;
    let (r0, c0) = (center.0 - half, center.1 - half);
    let mut values = vec![0.0; side * side];
    for (r, row) in values.chunks_exact_mut(side).enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            if let Some(x) = raster.sample(r0 + r as i64, c0 + c as i64) {
                *v = x;
            }
        }
    }
    CityMap::new(side, raster.pixel_size(), values)
}

/// Sparse 1-D resampling weights: for every output cell, `(input index, weight)`.
type Weights = Vec<Vec<(usize, f64)>>;

/// Weights for input cells of length `src` onto output cells of length `dst`,
/// both anchored at 0. Output area past the input extent contributes nothing.
fn overlap_weights(n_in: usize, src: f64, n_out: usize, dst: f64) -> Weights {
    (0..n_out)
        .map(|i| {
            let (a, b) = (i as f64 * dst, (i + 1) as f64 * dst);
            let first = (a / src).floor() as usize;
            (first..n_in)
                .map_while(|j| {
                    let (c, d) = (j as f64 * src, (j + 1) as f64 * src);
                    (c < b).then(|| (j, (b.min(d) - a.max(c)).max(0.0) / dst))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Exact weights for an `n_in -> n_out` resample over the same extent.
///
/// Working in units of `1 / (n_in * n_out)` makes every overlap an integer.
fn resize_weights(n_in: usize, n_out: usize) -> Weights {
    (0..n_out)
        .map(|i| {
            let (a, b) = (i * n_in, (i + 1) * n_in);
            (a / n_out..n_in)
                .map_while(|j| {
                    let (c, d) = (j * n_out, (j + 1) * n_out);
                    (c < b).then(|| (j, (b.min(d) - a.max(c)) as f64 / n_in as f64))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect()
}

/// Separable application of the same weights along both axes.
fn apply_separable(values: &[f64], n_in: usize, weights: &Weights) -> Vec<f64> {
    let n_out = weights.len();
    let mut rows = vec![0.0; n_in * n_out];
    for r in 0..n_in {
        let src = &values[r * n_in..(r + 1) * n_in];
        let dst = &mut rows[r * n_out..(r + 1) * n_out];
        for (o, w) in dst.iter_mut().zip(weights) {
            *o = w.iter().map(|&(j, wj)| wj * src[j]).sum();
        }
    }
    let mut out = vec![0.0; n_out * n_out];
    for (i, w) in weights.iter().enumerate() {
        let dst = &mut out[i * n_out..(i + 1) * n_out];
        for &(j, wj) in w {
            let src = &rows[j * n_out..(j + 1) * n_out];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += wj * s;
            }
        }
    }
    // Rounding can push a cell a few ulps past the unit interval.
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

/// Area-weighted block means of a square `width x width` grid of
/// `pixel_size` cells onto `target_pixel_size` cells.
///
/// The output grid starts at the top-left corner and keeps the target pixel
/// size exactly; when the extent is not a whole number of target cells the
/// last row and column extend past the input and the uncovered part counts as
/// unbuilt. Built-up area is preserved in every case. Returns the output
/// width and values.
pub fn aggregate_grid(
    values: &[f64],
    width: usize,
    pixel_size: f64,
    target_pixel_size: f64,
) -> Result<(usize, Vec<f64>)> {
    if !(target_pixel_size >= pixel_size) || !target_pixel_size.is_finite() {
        return Err(Error::argument(format!(
            "target pixel size {target_pixel_size} m is finer than the source {pixel_size} m"
        )));
    }
    if values.len() != width * width {
        return Err(Error::shape("aggregate_grid", &[width, width], &[values.len()]));
    }
    let extent = width as f64 * pixel_size;
    let n_out = ((extent / target_pixel_size) - CEIL_SLACK).ceil().max(1.0) as usize;
    let weights = overlap_weights(width, pixel_size, n_out, target_pixel_size);
    Ok((n_out, apply_separable(values, width, &weights)))
}

/// [`aggregate_grid`] on a map. The result must still be at least 2 pixels wide.
pub fn block_aggregate(map: &CityMap, target_pixel_size: f64) -> Result<CityMap> {
    let (n_out, values) =
        aggregate_grid(map.values(), map.width(), map.pixel_size(), target_pixel_size)?;
    if n_out < 2 {
        return Err(Error::argument(format!(
            "aggregating a {} m map at {target_pixel_size} m leaves fewer than 2 pixels",
            map.extent()
        )));
    }
    Ok(CityMap::new(n_out, target_pixel_size, values)?.with_meta(map.meta.clone()))
}

/// Area-weighted resample onto a `side_px` grid over the same physical extent.
pub fn resize_to(map: &CityMap, side_px: usize) -> Result<CityMap> {
    if side_px < 2 {
        return Err(Error::argument(format!("target side must be >= 2, got {side_px}")));
    }
    if side_px == map.width() {
        return Ok(map.clone());
    }
    let weights = resize_weights(map.width(), side_px);
    let values = apply_separable(map.values(), map.width(), &weights);
    let pixel_size = map.extent() / side_px as f64;
    Ok(CityMap::new(side_px, pixel_size, values)?.with_meta(map.meta.clone()))
}

/// Threshold a fractional map into a strictly binary one.
pub fn binarize(map: &CityMap, threshold: f64) -> CityMap {
    let values = map
        .values()
        .iter()
        .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
        .collect();
    CityMap::new(map.width(), map.pixel_size(), values)
        .expect("binary values are in range")
        .with_meta(map.meta.clone())
}

/// Map fractions onto the generator's `[-1, 1]` output range, as a
/// `(1, 1, W, W)` tensor.
pub fn to_symmetric_range(map: &CityMap) -> Tensor {
    let w = map.width();
    let data = map.values().iter().map(|&v| 2.0 * v - 1.0).collect();
    Tensor::from_vec(vec![1, 1, w, w], data).expect("shape matches map")
}

fn check_symmetric(v: f64) -> Result<f64> {
    if !v.is_finite() || v.abs() > 1.0 + SYMMETRIC_TOLERANCE {
        return Err(Error::domain(format!("tensor value {v} is outside [-1, 1]")));
    }
    Ok(((v + 1.0) / 2.0).clamp(0.0, 1.0))
}

/// Inverse of [`to_symmetric_range`] for a single `W x W` image.
///
/// Accepts shapes `(W, W)`, `(1, W, W)` and `(1, 1, W, W)`.
pub fn from_symmetric_range(t: &Tensor, pixel_size: f64) -> Result<CityMap> {
    let shape = t.shape();
    let w = *shape.last().unwrap_or(&0);
    let square = shape.len() >= 2 && shape[shape.len() - 2] == w;
    let leading_ones = shape[..shape.len().saturating_sub(2)].iter().all(|&d| d == 1);
    if !square || !leading_ones || shape.len() > 4 {
        return Err(Error::shape("from_symmetric_range", &[1, 1, w, w], shape));
    }
    let values = t.data().iter().map(|&v| check_symmetric(v)).collect::<Result<_>>()?;
    CityMap::new(w, pixel_size, values)
}

/// Split a `(B, 1, W, W)` generator batch into maps.
pub fn maps_from_symmetric_batch(t: &Tensor, pixel_size: f64) -> Result<Vec<CityMap>> {
    let shape = t.shape();
    if shape.len() != 4 || shape[1] != 1 || shape[2] != shape[3] {
        return Err(Error::shape(
            "maps_from_symmetric_batch",
            &[shape.first().copied().unwrap_or(0), 1, 0, 0],
            shape,
        ));
    }
    let w = shape[3];
    t.data()
        .chunks_exact(w * w)
        .map(|chunk| {
            let values = chunk.iter().map(|&v| check_symmetric(v)).collect::<Result<_>>()?;
            CityMap::new(w, pixel_size, values)
        })
        .collect()
}
