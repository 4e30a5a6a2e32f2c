use serde::{Deserialize, Serialize};

use super::RadialProfile;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MIN_HEIGHT_FRACTION: f64 = 0.5;
pub const DEFAULT_MIN_SEPARATION_KM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub distance_km: f64,
    pub height: f64,
    /// Ring index within the profile.
    pub ring: usize,
}

/// Accepted peaks ordered by distance, with the parameters that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub min_height_fraction: f64,
    pub min_separation_km: f64,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// `distance_km,height` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance_km,height\n");
        for p in &self.peaks {
            out.push_str(&format!("{},{}\n", p.distance_km, p.height));
        }
        out
    }
}

/// Leftmost index of every local maximum: a run of equal values whose
/// neighbours on both sides (where present) are not larger.
fn candidates<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] <= values[i];
        let right_ok = j + 1 == values.len() || values[j + 1] <= values[i];
        if left_ok && right_ok {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Indices of accepted peaks on a profile sampled every `spacing`.
///
/// Candidates are visited tallest first (ties: nearer first) and accepted
/// when they reach `min_fraction` of the global maximum and lie at least
/// `min_separation` from every peak accepted so far. Returned in index
/// order; empty when the maximum is not positive.
pub fn peak_indices<T: Scalar>(values: &[T], spacing: T, min_fraction: T, min_separation: T) -> Vec<usize> {
    let max = values.iter().copied().fold(T::zero(), T::max);
    if !(max > T::zero()) {
        return Vec::new();
    }
    let threshold = min_fraction * max;
    let mut cands = candidates(values);
    cands.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite profile").then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for i in cands {
        if values[i] < threshold {
            break;
        }
        let far = accepted
            .iter()
            .all(|&a| T::of_usize(a.abs_diff(i)) * spacing >= min_separation);
        if far {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
}

pub fn find_peaks(profile: &RadialProfile, min_height_fraction: f64, min_separation_km: f64) -> Result<PeakSet> {
    if !(min_height_fraction > 0.0 && min_height_fraction <= 1.0) {
        return Err(Error::argument(format!(
            "peak height fraction must be in (0, 1], got {min_height_fraction}"
        )));
    }
    if !(min_separation_km >= 0.0) {
        return Err(Error::argument(format!(
            "peak separation must be non-negative, got {min_separation_km}"
        )));
    }
    if profile.is_empty() {
        return Err(Error::argument("cannot search peaks on an empty profile"));
    }
    let peaks = peak_indices(
        &profile.values,
        profile.ring_width_km,
        min_height_fraction,
        min_separation_km,
    )
    .into_iter()
    .map(|k| Peak {
        distance_km: profile.distance_km(k),
        height: profile.values[k],
        ring: k,
    })
    .collect();
    Ok(PeakSet {
        peaks,
        min_height_fraction,
        min_separation_km,
    })
}
