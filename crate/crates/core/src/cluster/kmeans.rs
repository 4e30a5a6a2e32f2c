use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProfileMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::stats::Histogram;

pub const DEFAULT_EXPLAINED_THRESHOLD: f64 = 0.9;

// Below this many row-centroid distance terms, assignment stays serial.
const PARALLEL_WORK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once one Lloyd iteration improves inertia by less than this.
    pub tol: f64,
    /// Independent k-means++ starts; the lowest final inertia wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 300,
            tol: 1e-6,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel<T> {
    #[serde(rename = "K")]
    pub k: usize,
    pub centroids: Vec<Vec<T>>,
    pub inertia: T,
    pub seed: u64,
    #[serde(skip)]
    pub assignments: Vec<usize>,
    /// Inertia after each assignment pass of the winning run.
    #[serde(skip)]
    pub history: Vec<T>,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest id.
fn nearest<T: Scalar>(centroids: &[Vec<T>], row: &[T]) -> (usize, T) {
    let mut best = (0, sq_dist(&centroids[0], row));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(c, row);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all<T: Scalar>(data: &ProfileMatrix<T>, centroids: &[Vec<T>]) -> Vec<(usize, T)> {
    if data.len() * centroids.len() * data.dim() >= PARALLEL_WORK {
        (0..data.len()).into_par_iter().map(|i| nearest(centroids, data.row(i))).collect()
    } else {
        data.rows().map(|r| nearest(centroids, r)).collect()
    }
}

fn mean_row<T: Scalar>(data: &ProfileMatrix<T>) -> Vec<T> {
    let mut m = vec![T::zero(); data.dim()];
    for r in data.rows() {
        m.iter_mut().zip(r).for_each(|(a, &b)| *a += b);
    }
    let n = T::of_usize(data.len());
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Sum of squared deviations from the overall mean (the inertia at K = 1).
pub fn total_sum_of_squares<T: Scalar>(data: &ProfileMatrix<T>) -> T {
    let m = mean_row(data);
    data.rows().map(|r| sq_dist(r, &m)).sum()
}

fn plus_plus<T: Scalar, R: Rng>(data: &ProfileMatrix<T>, k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = data.len();
    let mut centroids = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.rows().map(|r| sq_dist(r, &centroids[0]).as_f64()).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            // Rounding can leave the walk past the last positive weight.
            if d2[idx] == 0.0 {
                idx = d2.iter().rposition(|&w| w > 0.0).unwrap_or(idx);
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, r) in data.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c).as_f64());
        }
        centroids.push(c);
    }
    centroids
}

/// Index of the row farthest from its assigned centroid, skipping `taken`.
fn farthest(labels: &[(usize, impl Scalar)], taken: &[usize]) -> usize {
    let mut best = None;
    for (i, &(_, d)) in labels.iter().enumerate() {
        if taken.contains(&i) {
            continue;
        }
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    best.map_or(0, |(i, _)| i)
}

struct Run<T> {
    centroids: Vec<Vec<T>>,
    assignments: Vec<usize>,
    inertia: T,
    history: Vec<T>,
}

fn lloyd<T: Scalar>(data: &ProfileMatrix<T>, mut centroids: Vec<Vec<T>>, opts: &KMeansOptions) -> Run<T> {
    let k = centroids.len();
    let dim = data.dim();
    let mut history: Vec<T> = Vec::new();
    let mut labels = assign_all(data, &centroids);
    loop {
        let inertia: T = labels.iter().map(|&(_, d)| d).sum();
        if let Some(&prev) = history.last() {
            debug_assert!(
                inertia <= prev + prev * T::of(1e-12),
                "inertia rose from {prev} to {inertia}"
            );
        }
        let improvement = history.last().map(|&prev| (prev - inertia).as_f64());
        history.push(inertia);
        if history.len() > opts.max_iter || improvement.is_some_and(|d| d < opts.tol) {
            break;
        }
        // Update step, reducing rows in index order.
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &(j, _)) in labels.iter().enumerate() {
            counts[j] += 1;
            sums[j].iter_mut().zip(data.row(i)).for_each(|(s, &v)| *s += v);
        }
        let mut reseeded = Vec::new();
        for j in 0..k {
            if counts[j] > 0 {
                let n = T::of_usize(counts[j]);
                centroids[j] = sums[j].iter().map(|&s| s / n).collect();
            } else {
                let i = farthest(&labels, &reseeded);
                reseeded.push(i);
                centroids[j] = data.row(i).to_vec();
            }
        }
        labels = assign_all(data, &centroids);
    }
    Run {
        inertia: *history.last().expect("at least one pass"),
        assignments: labels.into_iter().map(|(j, _)| j).collect(),
        centroids,
        history,
    }
}

fn validate<T: Scalar>(data: &ProfileMatrix<T>, k: usize, opts: &KMeansOptions) -> Result<()> {
    if k == 0 {
        return Err(Error::argument("K must be at least 1"));
    }
    if k > data.len() {
        return Err(Error::argument(format!("K = {k} exceeds the {} available rows", data.len())));
    }
    if opts.restarts == 0 || opts.max_iter == 0 || !(opts.tol >= 0.0) {
        return Err(Error::argument("K-Means needs restarts >= 1, max_iter >= 1 and tol >= 0"));
    }
    Ok(())
}

fn better<T: Scalar>(best: Option<Run<T>>, run: Run<T>) -> Option<Run<T>> {
    match best {
        Some(b) if b.inertia <= run.inertia => Some(b),
        _ => Some(run),
    }
}

fn into_model<T: Scalar>(run: Run<T>, k: usize, seed: u64) -> ClusterModel<T> {
    ClusterModel {
        k,
        centroids: run.centroids,
        inertia: run.inertia,
        seed,
        assignments: run.assignments,
        history: run.history,
    }
}

/// Lloyd's algorithm from `opts.restarts` seeded k-means++ starts.
pub fn kmeans_fit<T: Scalar>(data: &ProfileMatrix<T>, k: usize, seed: u64, opts: &KMeansOptions) -> Result<ClusterModel<T>> {
    validate(data, k, opts)?;
    let mut best = None;
    for r in 0..opts.restarts {
        let mut rng = seed::rng(seed, &format!("kmeans-k{k}"), r as u64);
        best = better(best, lloyd(data, plus_plus(data, k, &mut rng), opts));
    }
    Ok(into_model(best.expect("restarts >= 1"), k, seed))
}

/// Nearest-centroid class of `profile` (ties to the lowest id).
pub fn assign<T: Scalar>(model: &ClusterModel<T>, profile: &[T]) -> Result<usize> {
    let dim = model.centroids.first().map_or(0, Vec::len);
    if profile.len() != dim {
        return Err(Error::shape("assign", &[dim], &[profile.len()]));
    }
    Ok(nearest(&model.centroids, profile).0)
}

/// Rows per class, with every class `0..k` present.
pub fn share_distribution(assignments: &[usize], k: usize) -> Histogram {
    let mut h = Histogram::from_observations(assignments.iter().copied());
    (0..k).for_each(|j| h.touch(j));
    h
}

/// `map_id,cluster` rows with a header line.
pub fn assignments_csv(ids: &[String], assignments: &[usize]) -> String {
    let mut out = String::from("map_id,cluster\n");
    for (id, a) in ids.iter().zip(assignments) {
        out.push_str(&format!("{id},{a}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    pub inertia: f64,
    pub explained: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// Set when no k reached the threshold and the best one was taken.
    pub below_threshold: bool,
    pub threshold: f64,
    pub sweep: Vec<KSweepEntry>,
}

/// Smallest k whose explained fraction `1 - inertia(k) / total_SS` reaches
/// `threshold`.
///
/// Each k is fitted from fresh k-means++ starts and, in addition, from the
/// previous k's centroids extended by the farthest rows; the better run is
/// kept, which makes inertia non-increasing over the sweep.
pub fn select_k<T: Scalar>(
    data: &ProfileMatrix<T>,
    k_range: impl IntoIterator<Item = usize>,
    threshold: f64,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KSelection> {
    let mut ks: Vec<usize> = k_range.into_iter().collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::argument("empty K range"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::argument(format!("explained threshold must be in (0, 1], got {threshold}")));
    }
    for &k in &ks {
        validate(data, k, opts)?;
    }
    let total = total_sum_of_squares(data).as_f64();
    let mut sweep = Vec::with_capacity(ks.len());
    let mut prev: Option<Run<T>> = None;
    for &k in &ks {
        let model = kmeans_fit(data, k, seed, opts)?;
        let mut best = Some(Run {
            centroids: model.centroids,
            assignments: model.assignments,
            inertia: model.inertia,
            history: model.history,
        });
        if let Some(p) = prev.take() {
            let mut centroids = p.centroids;
            let labels: Vec<(usize, T)> = assign_all(data, &centroids);
            let mut taken = Vec::new();
            while centroids.len() < k {
                let i = farthest(&labels, &taken);
                taken.push(i);
                centroids.push(data.row(i).to_vec());
            }
            best = better(best, lloyd(data, centroids, opts));
        }
        let run = best.expect("fitted");
        let inertia = run.inertia.as_f64();
        // K = 1 explains nothing by definition; identical rows are fully
        // explained by any larger K.
        let explained = match (k, total > 0.0) {
            (1, _) => 0.0,
            (_, false) => 1.0,
            _ => 1.0 - inertia / total,
        };
        sweep.push(KSweepEntry { k, inertia, explained });
        prev = Some(run);
    }
    let hit = sweep.iter().find(|e| e.explained >= threshold);
    let (k, below_threshold) = match hit {
        Some(e) => (e.k, false),
        None => {
            let best = sweep
                .iter()
                .fold(&sweep[0], |b, e| if e.explained > b.explained { e } else { b });
            (best.k, true)
        }
    };
    Ok(KSelection {
        k,
        below_threshold,
        threshold,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> ProfileMatrix<f64> {
        ProfileMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn distinct_rows_give_zero_inertia() {
        let m = matrix(&[&[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.5]]);
        let model = kmeans_fit(&m, 3, 7, &KMeansOptions::default()).unwrap();
        assert_eq!(model.inertia, 0.0);
        for r in m.rows() {
            assert!(model.centroids.iter().any(|c| c == r));
        }
    }

    #[test]
    fn too_many_clusters() {
        let m = matrix(&[&[0.0], &[1.0]]);
        assert!(kmeans_fit(&m, 3, 0, &KMeansOptions::default()).is_err());
        assert!(kmeans_fit(&m, 0, 0, &KMeansOptions::default()).is_err());
    }

    #[test]
    fn assign_checks_length() {
        let m = matrix(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let model = kmeans_fit(&m, 2, 0, &KMeansOptions::default()).unwrap();
        assert!(matches!(assign(&model, &[0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn json_export_fields() {
        let m = matrix(&[&[0.0], &[1.0]]);
        let model = kmeans_fit(&m, 2, 3, &KMeansOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&model).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["seed"], 3);
        assert!(v["centroids"].is_array());
        assert_eq!(v["inertia"], 0.0);
        assert_eq!(assignments_csv(m.ids(), &model.assignments).lines().next(), Some("map_id,cluster"));
    }

    #[test]
    fn select_k_single_k() {
        let m = matrix(&[&[0.0], &[1.0], &[2.0]]);
        let s = select_k(&m, [1], 0.9, 0, &KMeansOptions::default()).unwrap();
        assert_eq!(s.sweep[0].explained, 0.0);
        assert!(s.below_threshold);
        assert!(select_k(&m, [], 0.9, 0, &KMeansOptions::default()).is_err());
        assert!(select_k(&m, [4], 0.9, 0, &KMeansOptions::default()).is_err());
    }
}
