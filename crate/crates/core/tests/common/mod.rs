//! Reference implementations shared by the integration tests. Each one is
//! written from the definitions, independently of the library code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urbangan::morphology::RadialProfile;
use urbangan::CityMap;

pub fn random_map(width: usize, pixel_size: f64, seed: u64) -> CityMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CityMap::new(width, pixel_size, (0..width * width).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn in_ring(k: usize, dist: f64, dd: f64) -> bool {
    if k == 0 {
        dist <= dd
    } else {
        k as f64 * dd < dist && dist <= (k + 1) as f64 * dd
    }
}

pub fn pixel_distance(w: usize, u: usize, v: usize, px_km: f64) -> f64 {
    let c = (w as f64 - 1.0) / 2.0;
    let (du, dv) = (u as f64 - c, v as f64 - c);
    (du * du + dv * dv).sqrt() * px_km
}

/// Per-pixel ring membership by linear search, then ring means.
pub fn profile_oracle(map: &CityMap, dd: f64) -> (Vec<f64>, Vec<usize>) {
    let w = map.width();
    let px = map.pixel_size() / 1000.0;
    let max = w as f64 * px / 2.0;
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for u in 0..w {
        for v in 0..w {
            let dist = pixel_distance(w, u, v, px);
            if dist > max {
                continue;
            }
            let mut k = 0;
            while !in_ring(k, dist, dd) {
                k += 1;
            }
            if sums.len() <= k {
                sums.resize(k + 1, 0.0);
                counts.resize(k + 1, 0);
            }
            sums[k] += map.get(u, v);
            counts[k] += 1;
        }
    }
    (sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect(), counts)
}

/// Sum of the map over the inscribed disk.
pub fn disk_mass(map: &CityMap) -> f64 {
    let w = map.width();
    let px = map.pixel_size() / 1000.0;
    let mut total = 0.0;
    for u in 0..w {
        for v in 0..w {
            if pixel_distance(w, u, v, px) <= w as f64 * px / 2.0 {
                total += map.get(u, v);
            }
        }
    }
    total
}

/// Leftmost plateau indices that are at least both neighbours, greedily
/// accepted tallest first.
pub fn peak_oracle(values: &[f64], dd: f64, h: f64, delta: f64) -> Vec<(f64, f64)> {
    let n = values.len();
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![];
    }
    let mut cands = vec![];
    for i in 0..n {
        if i > 0 && values[i - 1] == values[i] {
            continue;
        }
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if (i == 0 || values[i - 1] < values[i]) && (j == n - 1 || values[j + 1] < values[i]) {
            cands.push(i);
        }
    }
    cands.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut kept: Vec<usize> = vec![];
    for i in cands {
        let ok_height = values[i] >= h * max;
        let ok_gap = kept.iter().all(|&k| (i as f64 * dd - k as f64 * dd).abs() >= delta);
        if ok_height && ok_gap {
            kept.push(i);
        }
    }
    kept.sort();
    kept.into_iter().map(|i| (i as f64 * dd, values[i])).collect()
}

pub fn profile(values: Vec<f64>, dd: f64) -> RadialProfile {
    RadialProfile {
        ring_width_km: dd,
        counts: vec![1; values.len()],
        max_distance_km: dd * values.len() as f64,
        values,
        center: (0.0, 0.0),
        pixel_size: 750.0,
    }
}

/// Short profiles, half of them on a coarse grid of levels so that
/// plateaus and exact ties are common.
pub fn random_profile(rng: &mut ChaCha8Rng) -> RadialProfile {
    let n = rng.random_range(1..60);
    let dd = [0.5, 0.75, 1.0][rng.random_range(0..3)];
    let values = if rng.random_bool(0.5) {
        (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect()
    } else {
        (0..n).map(|_| rng.random::<f64>()).collect()
    };
    profile(values, dd)
}

/// Gamma at positive half-integers by the recurrence Γ(x + 1) = xΓ(x).
pub fn gamma_half_integer(twice: usize) -> f64 {
    let (mut x, mut g) = if twice.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, std::f64::consts::PI.sqrt()) };
    while 2.0 * x < twice as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Chi-square upper tail by integrating the density from `x` out to where
/// it is negligible.
pub fn chi2_sf_oracle(x: f64, df: usize) -> f64 {
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half_integer(df);
    let density = move |t: f64| t.powf(k / 2.0 - 1.0) * (-t / 2.0).exp() / norm;
    let end = x + 200.0 + 20.0 * k;
    adaptive_simpson(&density, x, end, 1e-13)
}

/// Minimum inertia over every assignment of `points` to `k` labels.
pub fn exhaustive_kmeans_1d(points: &[f64], k: usize) -> (f64, Vec<f64>) {
    let n = points.len();
    let mut best = (f64::INFINITY, vec![]);
    for code in 0..k.pow(n as u32) {
        let labels: Vec<usize> = (0..n).map(|i| code / k.pow(i as u32) % k).collect();
        let mut centroids = vec![];
        let mut inertia = 0.0;
        let mut ok = true;
        for c in 0..k {
            let members: Vec<f64> = (0..n).filter(|&i| labels[i] == c).map(|i| points[i]).collect();
            if members.is_empty() {
                ok = false;
                break;
            }
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            inertia += members.iter().map(|p| (p - mean).powi(2)).sum::<f64>();
            centroids.push(mean);
        }
        if ok && inertia < best.0 {
            centroids.sort_by(f64::total_cmp);
            best = (inertia, centroids);
        }
    }
    best
}

/// Smallest |input| seen by any ReLU or leaky ReLU during a train-mode
/// forward pass. Finite differences with a step well below this never cross
/// a kink.
pub fn kink_margin(net: &urbangan::Sequential, input: &urbangan::Tensor) -> (f64, urbangan::Tensor) {
    use urbangan::nn::{LayerSpec, Mode};
    let mut net = net.clone();
    let mut x = input.clone();
    let mut margin = f64::INFINITY;
    for layer in net.layers_mut() {
        if matches!(layer.spec(), LayerSpec::Relu | LayerSpec::LeakyRelu { .. }) {
            margin = x.data().iter().fold(margin, |m, v| m.min(v.abs()));
        }
        x = layer.forward(&x, Mode::Train).unwrap().0;
    }
    (margin, x)
}
