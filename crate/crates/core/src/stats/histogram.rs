use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts per integer label (peak count or cluster id).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "HistogramRepr", into = "HistogramRepr")]
pub struct Histogram {
    bins: BTreeMap<usize, u64>,
}

#[derive(Serialize, Deserialize)]
struct HistogramRepr {
    labels: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl TryFrom<HistogramRepr> for Histogram {
    type Error = Error;

    fn try_from(r: HistogramRepr) -> Result<Self> {
        if r.labels.len() != r.counts.len() {
            return Err(Error::parse("counts", "labels and counts differ in length"));
        }
        let h = Histogram::from_pairs(r.labels.into_iter().zip(r.counts))?;
        if h.total() != r.total {
            return Err(Error::parse("total", format!("expected {}, got {}", h.total(), r.total)));
        }
        Ok(h)
    }
}

impl From<Histogram> for HistogramRepr {
    fn from(h: Histogram) -> Self {
        HistogramRepr {
            total: h.total(),
            labels: h.labels(),
            counts: h.counts(),
        }
    }
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels must be unique.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self> {
        let mut bins = BTreeMap::new();
        for (label, count) in pairs {
            if bins.insert(label, count).is_some() {
                return Err(Error::argument(format!("duplicate histogram label {label}")));
            }
        }
        Ok(Histogram { bins })
    }

    pub fn from_observations(labels: impl IntoIterator<Item = usize>) -> Self {
        let mut h = Histogram::new();
        for l in labels {
            h.add(l, 1);
        }
        h
    }

    pub fn add(&mut self, label: usize, count: u64) {
        *self.bins.entry(label).or_insert(0) += count;
    }

    /// Ensure `label` is present, with zero count if new.
    pub fn touch(&mut self, label: usize) {
        self.bins.entry(label).or_insert(0);
    }

    pub fn count(&self, label: usize) -> u64 {
        self.bins.get(&label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    /// Sorted labels.
    pub fn labels(&self) -> Vec<usize> {
        self.bins.keys().copied().collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.bins.values().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.bins.iter().map(|(&l, &c)| (l, c))
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn proportions(&self) -> Vec<(usize, f64)> {
        let total = self.total() as f64;
        self.iter().map(|(l, c)| (l, if total > 0.0 { c as f64 / total } else { 0.0 })).collect()
    }

    /// Apply a label permutation; `f` must be injective.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Result<Self> {
        Self::from_pairs(self.iter().map(|(l, c)| (f(l), c)))
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Histogram {
            bins: self.bins.iter().map(|(&l, &c)| (l, c * factor)).collect(),
        }
    }

    /// `label,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,count\n");
        for (l, c) in self.iter() {
            out.push_str(&format!("{l},{c}\n"));
        }
        out
    }
}
