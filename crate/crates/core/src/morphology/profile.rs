use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::CityMap;

/// Mean built-up fraction per ring around the map center.
///
/// Ring `k` holds the pixels at center distance `d` with
/// `k * ring_width < d <= (k + 1) * ring_width`; ring 0 also takes `d = 0`.
/// Only pixels inside the inscribed disk (`d <= width * pixel_size / 2`)
/// contribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub ring_width_km: f64,
    pub values: Vec<f64>,
    /// Pixels per ring.
    pub counts: Vec<usize>,
    pub max_distance_km: f64,
    /// `(row, col)` in fractional pixel coordinates.
    pub center: (f64, f64),
    pub pixel_size: f64,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inner radius of ring `k`, in km.
    pub fn distance_km(&self, k: usize) -> f64 {
        k as f64 * self.ring_width_km
    }

    pub fn distances_km(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.distance_km(k)).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `distance_km,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance_km,value\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.distance_km(k), v));
        }
        out
    }

    /// Parse the output of [`RadialProfile::to_csv`]. Ring counts and the
    /// source geometry are not part of the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "distance_km,value" => {}
            _ => return Err(Error::parse("header", "expected `distance_km,value`")),
        }
        let mut distances = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let (d, v) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("row {i}"), "expected two columns"))?;
            let parse = |s: &str, f: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(format!("row {i} {f}"), e.to_string()))
            };
            distances.push(parse(d, "distance_km")?);
            values.push(parse(v, "value")?);
        }
        let ring_width_km = match distances.as_slice() {
            [_, second, ..] => *second,
            _ => 1.0,
        };
        if !(ring_width_km > 0.0) {
            return Err(Error::parse("distance_km", "ring width must be positive"));
        }
        Ok(RadialProfile {
            ring_width_km,
            max_distance_km: ring_width_km * values.len() as f64,
            counts: vec![0; values.len()],
            values,
            center: (0.0, 0.0),
            pixel_size: 0.0,
        })
    }
}

/// Ring of a pixel at `dist` km, exactly per the half-open ring bounds.
pub fn ring_index(dist: f64, ring_width: f64) -> usize {
    if dist <= ring_width {
        return 0;
    }
    let mut k = ((dist / ring_width).ceil() as usize).saturating_sub(1);
    while k > 0 && dist <= k as f64 * ring_width {
        k -= 1;
    }
    while dist > (k + 1) as f64 * ring_width {
        k += 1;
    }
    k
}

pub fn radial_profile(map: &CityMap, ring_width_km: f64) -> Result<RadialProfile> {
    if !(ring_width_km > 0.0) || !ring_width_km.is_finite() {
        return Err(Error::argument(format!("ring width must be positive, got {ring_width_km} km")));
    }
    let w = map.width();
    let px_km = map.pixel_size() / 1000.0;
    let c = (w as f64 - 1.0) / 2.0;
    let max_distance = w as f64 * px_km / 2.0;
    let n_rings = (max_distance / ring_width_km).ceil() as usize;
    let mut sums = vec![0.0; n_rings];
    let mut counts = vec![0usize; n_rings];
    for u in 0..w {
        for v in 0..w {
            let (du, dv) = (u as f64 - c, v as f64 - c);
            let dist = (du * du + dv * dv).sqrt() * px_km;
            if dist > max_distance {
                continue;
            }
            let k = ring_index(dist, ring_width_km);
            sums[k] += map.get(u, v);
            counts[k] += 1;
        }
    }
    let last = counts.iter().rposition(|&n| n > 0).map_or(0, |i| i + 1);
    if let Some(k) = counts[..last].iter().position(|&n| n == 0) {
        return Err(Error::argument(format!(
            "ring {k} of width {ring_width_km} km contains no pixel centers; use a wider ring"
        )));
    }
    sums.truncate(last);
    counts.truncate(last);
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| (s / n as f64).clamp(0.0, 1.0))
        .collect();
    Ok(RadialProfile {
        ring_width_km,
        values,
        counts,
        max_distance_km: max_distance,
        center: (c, c),
        pixel_size: map.pixel_size(),
    })
}

/// Centered moving average over `window` rings (odd); the window shrinks at
/// the ends. Off by default in the pipeline.
pub fn smooth(profile: &RadialProfile, window: usize) -> Result<RadialProfile> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::argument(format!("smoothing window must be odd, got {window}")));
    }
    let half = window / 2;
    let n = profile.values.len();
    let values = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half + 1).min(n));
            profile.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    Ok(RadialProfile {
        values,
        ..profile.clone()
    })
}
