mod common;

use common::exhaustive_kmeans_1d;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urbangan::cluster::{assign, kmeans_fit, select_k, share_distribution, total_sum_of_squares, KMeansOptions};
use urbangan::corpus::{build_toy_corpus, toy_specs, Pipeline, ToyCitySpec};
use urbangan::morphology::radial_profile;
use urbangan::ProfileMatrix;

fn column(points: &[f64]) -> ProfileMatrix {
    ProfileMatrix::from_rows(points.iter().map(|&p| vec![p]).collect()).unwrap()
}

fn blobs(seed: u64, n: usize, dim: usize, centers: usize) -> ProfileMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..centers).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let rows = (0..n)
        .map(|i| means[i % centers].iter().map(|m| m + rng.random_range(-1.0..1.0)).collect())
        .collect();
    ProfileMatrix::from_rows(rows).unwrap()
}

#[test]
fn six_point_instance_matches_exhaustive_oracle() {
    let points = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
    let (best, centres) = exhaustive_kmeans_1d(&points, 2);
    assert!((best - 0.04).abs() < 1e-12);
    assert!((centres[0] - 0.1).abs() < 1e-12 && (centres[1] - 10.1).abs() < 1e-12);

    let model = kmeans_fit(&column(&points), 2, 0, &KMeansOptions::default()).unwrap();
    let mut got: Vec<f64> = model.centroids.iter().map(|c| c[0]).collect();
    got.sort_by(f64::total_cmp);
    assert!((got[0] - 0.1).abs() < 1e-12 && (got[1] - 10.1).abs() < 1e-12, "{got:?}");
    assert!((model.inertia - best).abs() < 1e-12);
}

#[test]
fn small_instances_reach_the_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..30 {
        let n = rng.random_range(3..9);
        let points: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        for k in 1..=3.min(n) {
            let (best, _) = exhaustive_kmeans_1d(&points, k);
            let model = kmeans_fit(&column(&points), k, trial, &KMeansOptions::default()).unwrap();
            assert!(model.inertia >= best - 1e-9);
            assert!(model.inertia <= best * (1.0 + 1e-6) + 1e-9, "k {k} {points:?}: {} vs {best}", model.inertia);
        }
    }
}

#[test]
fn inertia_history_never_increases() {
    for seed in 0..10 {
        let data = blobs(seed, 120, 6, 4);
        for k in 1..=6 {
            let model = kmeans_fit(&data, k, seed, &KMeansOptions::default()).unwrap();
            assert!(!model.history.is_empty());
            for w in model.history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed} k {k}: {:?}", model.history);
            }
            assert_eq!(*model.history.last().unwrap(), model.inertia);
        }
    }
}

#[test]
fn assignments_are_nearest_centroids() {
    let data = blobs(11, 200, 5, 3);
    let model = kmeans_fit(&data, 3, 1, &KMeansOptions::default()).unwrap();
    let mut inertia = 0.0;
    for (i, row) in data.rows().enumerate() {
        let dists: Vec<f64> = model
            .centroids
            .iter()
            .map(|c| c.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let best = (0..3).fold(0, |b, j| if dists[j] < dists[b] { j } else { b });
        assert_eq!(model.assignments[i], best);
        assert_eq!(assign(&model, row).unwrap(), best);
        inertia += dists[best];
    }
    assert!((inertia - model.inertia).abs() < 1e-9 * inertia.max(1.0));
    let shares = share_distribution(&model.assignments, 3);
    assert_eq!(shares.total(), 200);
    assert_eq!(shares.labels(), vec![0, 1, 2]);
    assert!(assign(&model, &[0.0; 4]).is_err());
}

#[test]
fn fit_is_deterministic_and_seed_sensitive_only_through_restarts() {
    let data = blobs(5, 90, 4, 3);
    let a = kmeans_fit(&data, 3, 42, &KMeansOptions::default()).unwrap();
    let b = kmeans_fit(&data, 3, 42, &KMeansOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.assignments, b.assignments);
}

#[test]
fn select_k_finds_three_distinct_profiles() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 4.0, 1.0 - (i % 3) as f64]).collect();
    let data = ProfileMatrix::from_rows(rows).unwrap();
    let sel = select_k(&data, 1..=8, 0.9, 0, &KMeansOptions::default()).unwrap();
    assert_eq!(sel.k, 3);
    assert!(!sel.below_threshold);
    assert_eq!(sel.sweep[2].explained, 1.0);
}

#[test]
fn sweep_is_monotone_and_consistent() {
    let data = blobs(9, 150, 8, 5);
    let total = total_sum_of_squares(&data);
    let sel = select_k(&data, 1..=10, 0.95, 3, &KMeansOptions::default()).unwrap();
    assert_eq!(sel.sweep[0].explained, 0.0);
    assert!((sel.sweep[0].inertia - total).abs() < 1e-9 * total);
    for w in sel.sweep.windows(2) {
        assert!(w[1].inertia <= w[0].inertia);
    }
    let first = sel.sweep.iter().find(|e| e.explained >= 0.95).map(|e| e.k);
    assert_eq!(Some(sel.k), first);
}

#[test]
fn select_k_on_toy_archetypes() {
    let templates = [
        ToyCitySpec::monocentric(0),
        ToyCitySpec::polycentric(3, 20.0, 0),
        ToyCitySpec::coastal(2, 20.0, 0),
    ];
    let corpus = build_toy_corpus(&toy_specs(&templates, 150, 17), &Pipeline::desk()).unwrap();
    let profiles: Vec<_> = corpus.maps().iter().map(|m| radial_profile(m, 0.75).unwrap()).collect();
    let data = ProfileMatrix::from_profiles(corpus.ids(), &profiles).unwrap();
    let sel = select_k(&data, 1..=12, 0.9, 17, &KMeansOptions::default()).unwrap();
    // Pinned from the seeded run; three archetypes need at least three classes.
    assert_eq!(sel.k, 3, "{:?}", sel.sweep);
}

#[test]
fn invalid_requests() {
    let data = column(&[1.0, 2.0]);
    let opts = KMeansOptions::default();
    assert!(kmeans_fit(&data, 0, 0, &opts).is_err());
    assert!(kmeans_fit(&data, 3, 0, &opts).is_err());
    assert!(select_k(&data, 1..=2, 0.0, 0, &opts).is_err());
    assert!(select_k(&data, Vec::<usize>::new(), 0.9, 0, &opts).is_err());
    assert!(ProfileMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
}
