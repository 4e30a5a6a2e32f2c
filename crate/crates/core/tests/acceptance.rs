//! Acceptance criteria. Each test prints one `[PASS]` / `[FAIL]` line to the
//! real stderr (bypassing test-output capture) and then asserts.
//!
//! The criteria run one at a time so that the timed ones are not measured
//! while sharing the CPU with the others.

mod common;

use std::io::Write;
use std::ops::ControlFlow;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urbangan::cluster::{kmeans_fit, select_k, KMeansOptions};
use urbangan::corpus::{build_toy_corpus, generate_toy_city, toy_specs, Pipeline, ToyCitySpec};
use urbangan::gan::{
    build, d_loss, discriminator_loss, g_loss, generator_loss, read_checkpoint, sample, train, write_checkpoint,
    GanConfig, GanModel, LossVariant,
};
use urbangan::morphology::{find_peaks, radial_profile, PeakParams};
use urbangan::nn::{grad_check, layer_grad_check, GradCheckOptions, Layer, LayerSpec, Mode};
use urbangan::render::{profile_scene, report_scene};
use urbangan::stats::{chi2_sf, chi2_two_sample, compare_report, peak_count_histogram, CompareConfig, Histogram};
use urbangan::{Corpus, ProfileMatrix, Sequential, Tensor};

static SERIAL: Mutex<()> = Mutex::new(());

/// Collects sub-checks of one criterion.
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { failed: vec![], notes: vec![] }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failed.push(what.clone());
        }
        self.notes.push(what);
    }

    fn finish(self, id: u32, name: &str, elapsed: Duration) {
        let ok = self.failed.is_empty();
        let detail = if ok { self.notes.join("; ") } else { format!("failed: {}", self.failed.join("; ")) };
        let line = format!(
            "[{}] criterion {id:>2} {name}: {detail} ({:.1} s)\n",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        let _ = std::io::stderr().lock().write_all(line.as_bytes());
        assert!(ok, "{line}");
    }
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn uniform(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn randn(shape: Vec<usize>, seed: u64) -> Tensor {
    Tensor::randn(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn tiny_gan(variant: LossVariant) -> GanModel {
    build(&GanConfig {
        z_dim: 4,
        output_width: 8,
        base_channels: 8,
        min_channels: 4,
        batch_size: 4,
        init_std: 0.5,
        loss_variant: variant,
        ..GanConfig::default()
    })
    .unwrap()
}

// Ten times the finite-difference step; see `kink_margin`.
const FD_MARGIN: f64 = 1e-4;

fn smooth_latent(model: &GanModel) -> Tensor {
    (0..)
        .map(|s| randn(vec![4, model.config.z_dim], 1000 + s))
        .find(|z| {
            let (g, fake) = kink_margin(&model.generator, z);
            g.min(kink_margin(&model.discriminator, &fake).0) > FD_MARGIN
        })
        .unwrap()
}

#[test]
fn c01_gradient_fidelity() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let opts = GradCheckOptions::default();
    assert_eq!(opts.step, 1e-5);

    let cases: Vec<(LayerSpec, Vec<usize>, Mode)> = vec![
        (LayerSpec::conv(2, 3), vec![2, 2, 6, 6], Mode::Train),
        (LayerSpec::transposed_conv(3, 2), vec![2, 3, 3, 3], Mode::Train),
        (LayerSpec::batchnorm(3), vec![3, 3, 2, 2], Mode::Train),
        (LayerSpec::batchnorm(3), vec![3, 3, 2, 2], Mode::Eval),
        (LayerSpec::Relu, vec![2, 7], Mode::Train),
        (LayerSpec::leaky_relu(), vec![2, 7], Mode::Train),
        (LayerSpec::Tanh, vec![2, 7], Mode::Train),
        (LayerSpec::Sigmoid, vec![2, 7], Mode::Train),
        (LayerSpec::linear(12, 5), vec![3, 3, 2, 2], Mode::Train),
    ];
    let mut worst_layer: f64 = 0.0;
    for (i, (spec, shape, mode)) in cases.into_iter().enumerate() {
        let mut layer: Layer<f64> = Layer::new(spec.clone(), 0.5, &mut ChaCha8Rng::seed_from_u64(i as u64)).unwrap();
        let x = uniform(shape, 50 + i as u64);
        let err = layer_grad_check(&mut layer, &x, mode, &opts).unwrap().max_relative_error;
        worst_layer = worst_layer.max(err);
        if err >= 1e-4 {
            c.check(false, format!("{} ({mode:?}) {err:.2e}", spec.kind()));
        }
    }
    c.check(worst_layer < 1e-4, format!("layers max rel err {worst_layer:.2e}"));

    let mut model = tiny_gan(LossVariant::NonSaturating);
    let real = (0..)
        .map(|s| uniform(vec![4, 1, 8, 8], 2000 + s))
        .find(|x| kink_margin(&model.discriminator, x).0 > FD_MARGIN)
        .unwrap();
    let fake = model.generator.forward(&smooth_latent(&model), Mode::Train).unwrap();
    let d_err = grad_check(&mut model.discriminator, |d: &mut Sequential| Ok(discriminator_loss(d, &real, &fake)?.loss), &opts)
        .unwrap()
        .max_relative_error;
    c.check(d_err < 1e-4, format!("L_D {d_err:.2e}"));

    for variant in [LossVariant::PaperSaturating, LossVariant::NonSaturating] {
        let mut model = tiny_gan(variant);
        let z = smooth_latent(&model);
        let d = &mut model.discriminator;
        let err = grad_check(&mut model.generator, |g: &mut Sequential| Ok(generator_loss(g, d, &z, variant)?.loss), &opts)
            .unwrap()
            .max_relative_error;
        c.check(err < 1e-4, format!("L_G {variant:?} {err:.2e}"));
    }
    let elapsed = start.elapsed();
    c.check(elapsed.as_secs_f64() < 60.0, "under 60 s");
    c.finish(1, "gradient fidelity", elapsed);
}

#[test]
fn c02_loss_fixed_point() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let ln2 = std::f64::consts::LN_2;
    let mut model = tiny_gan(LossVariant::PaperSaturating);
    // Zero the final linear layer: D(x) = sigmoid(0) = 1/2 for every input.
    let layers = model.discriminator.layers_mut();
    let n = layers.len();
    for p in layers[n - 2].params_mut() {
        p.tensor.data_mut().fill(0.0);
    }
    let real = uniform(vec![4, 1, 8, 8], 1);
    let z = randn(vec![4, 4], 2);
    let ld = d_loss(&mut model, &real, &z).unwrap().loss;
    let lg = g_loss(&mut model, &z).unwrap().loss;
    c.check((ld - 2.0 * ln2).abs() < 1e-12, format!("L_D - 2 ln 2 = {:.1e}", ld - 2.0 * ln2));
    c.check((lg + ln2).abs() < 1e-12, format!("L_G + ln 2 = {:.1e}", lg + ln2));
    c.finish(2, "loss fixed point", start.elapsed());
}

#[test]
fn c03_radial_profile_oracle() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut exact, mut worst_mass) = (0, 0.0f64);
    for i in 0..100u64 {
        let w = rng.random_range(8..=64);
        let px = [250.0, 500.0, 750.0, 1000.0][rng.random_range(0..4)];
        let map = random_map(w, px, i);
        let dd = px / 1000.0;
        let p = radial_profile(&map, dd).unwrap();
        let (values, counts) = profile_oracle(&map, dd);
        if p.values == values && p.counts == counts {
            exact += 1;
        }
        let rebuilt: f64 = p.values.iter().zip(&p.counts).map(|(v, &n)| v * n as f64).sum();
        worst_mass = worst_mass.max((rebuilt - disk_mass(&map)).abs());
    }
    c.check(exact == 100, format!("{exact}/100 exact"));
    c.check(worst_mass < 1e-9, format!("mass error {worst_mass:.1e}"));
    let elapsed = start.elapsed();
    c.check(elapsed.as_secs_f64() < 30.0, "under 30 s");
    c.finish(3, "radial-profile oracle", elapsed);
}

#[test]
fn c04_peak_search_contract() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut matched, mut invariant, mut monotone) = (0, 0, 0);
    for _ in 0..1000 {
        let p = random_profile(&mut rng);
        let got: Vec<(f64, f64)> =
            find_peaks(&p, 0.5, 5.0).unwrap().peaks.iter().map(|q| (q.distance_km, q.height)).collect();
        if got == peak_oracle(&p.values, p.ring_width_km, 0.5, 5.0) {
            matched += 1;
        }
        let alpha = rng.random_range(0.01..100.0);
        let scaled = profile(p.values.iter().map(|v| v * alpha).collect(), p.ring_width_km);
        let loc = |q: &urbangan::morphology::RadialProfile| -> Vec<f64> {
            find_peaks(q, 0.5, 5.0).unwrap().peaks.iter().map(|x| x.distance_km).collect()
        };
        if loc(&scaled) == loc(&p) {
            invariant += 1;
        }
        let count = |h: f64, d: f64| find_peaks(&p, h, d).unwrap().len();
        let hs: Vec<usize> = (1..=20).map(|i| count(i as f64 / 20.0, 5.0)).collect();
        let ds: Vec<usize> = (0..=30).map(|i| count(0.5, i as f64 * 0.5)).collect();
        if hs.windows(2).all(|w| w[1] <= w[0]) && ds.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    c.check(matched == 1000, format!("reference {matched}/1000"));
    c.check(invariant == 1000, format!("scale invariance {invariant}/1000"));
    c.check(monotone == 1000, format!("monotone in h and delta {monotone}/1000"));
    c.finish(4, "peak-search contract", start.elapsed());
}

#[test]
fn c05_kmeans() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let opts = KMeansOptions::default();

    let points = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
    let data = ProfileMatrix::from_rows(points.iter().map(|&p| vec![p]).collect()).unwrap();
    let (best, centres) = exhaustive_kmeans_1d(&points, 2);
    let model = kmeans_fit(&data, 2, 0, &opts).unwrap();
    let mut got: Vec<f64> = model.centroids.iter().map(|r| r[0]).collect();
    got.sort_by(f64::total_cmp);
    let close = got.iter().zip(&centres).all(|(a, b)| (a - b).abs() < 1e-12);
    c.check(close && (centres[0] - 0.1).abs() < 1e-12 && (centres[1] - 10.1).abs() < 1e-12, format!("centroids {got:?}"));
    c.check((model.inertia - 0.04).abs() < 1e-12 && (best - 0.04).abs() < 1e-12, format!("inertia {:.4}", model.inertia));

    let templates = [
        ToyCitySpec::monocentric(0),
        ToyCitySpec::polycentric(3, 20.0, 0),
        ToyCitySpec::coastal(2, 20.0, 0),
    ];
    let corpus = build_toy_corpus(&toy_specs(&templates, 150, 17), &Pipeline::desk()).unwrap();
    let profiles: Vec<_> = corpus.maps().iter().map(|m| radial_profile(m, 0.75).unwrap()).collect();
    let data = ProfileMatrix::from_profiles(corpus.ids(), &profiles).unwrap();

    // Per-iteration monotonicity is also asserted inside every Lloyd run.
    let mut histories_ok = true;
    for k in 1..=8 {
        let m = kmeans_fit(&data, k, 17, &opts).unwrap();
        histories_ok &= m.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    }
    c.check(histories_ok, "inertia non-increasing");
    let sel = select_k(&data, 1..=12, 0.9, 17, &opts).unwrap();
    c.check(sel.k == 3, format!("select_k = {} (pinned 3)", sel.k));
    c.finish(5, "k-means", start.elapsed());
}

#[test]
fn c06_chi_square() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let h = Histogram::from_pairs([(1, 40), (2, 25), (3, 9)]).unwrap();
    let same = chi2_two_sample(&h, &h, 5.0).unwrap();
    c.check(same.statistic == 0.0 && same.p_value == 1.0, "identical -> 0, p = 1");

    let closed = (0..200).map(|i| i as f64 * 0.25).map(|x| (chi2_sf(x, 2).unwrap() - (-x / 2.0).exp()).abs()).fold(0.0, f64::max);
    c.check(closed < 1e-12, format!("df=2 closed form {closed:.1e}"));

    let probes = [
        (0.1, 1), (1.0, 1), (3.841, 1), (10.0, 1), (0.5, 2), (2.0, 3), (7.815, 3), (0.3, 4), (4.0, 4), (12.0, 4),
        (1.0, 5), (11.07, 5), (5.0, 6), (3.0, 7), (20.0, 7), (8.0, 9), (15.0, 10), (30.0, 12), (25.0, 20), (60.0, 40),
    ];
    let integ = probes.iter().map(|&(x, df)| (chi2_sf(x, df).unwrap() - chi2_sf_oracle(x, df)).abs()).fold(0.0, f64::max);
    c.check(integ < 1e-6, format!("integration oracle {integ:.1e} at {} points", probes.len()));

    let a = Histogram::from_pairs([(0, 30), (1, 10)]).unwrap();
    let b = Histogram::from_pairs([(0, 10), (1, 30)]).unwrap();
    let pooled = chi2_two_sample(&a, &b, 1.0).unwrap();
    c.check(pooled.statistic == 20.0 && pooled.df == 1, format!("pooled example {} (df {})", pooled.statistic, pooled.df));
    c.finish(6, "chi-square", start.elapsed());
}

fn min_mse(model: &GanModel, target: &[f64]) -> f64 {
    sample(model, 64, 99)
        .unwrap()
        .maps()
        .iter()
        .map(|m| m.values().iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / target.len() as f64)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn c07_overfit_single_map() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let target = generate_toy_city(&ToyCitySpec::polycentric(3, 10.0, 7).with_noise(0.0), 16, 1500.0).unwrap();
    let corpus = Corpus::from_maps(vec![target.clone()], "target", "toy", serde_json::Value::Null).unwrap();
    let config = GanConfig { output_width: 16, pixel_size: 1500.0, ..GanConfig::default() };
    let mut model = build(&config).unwrap();
    let mut best = f64::INFINITY;
    let mut steps = 0;
    train(&mut model, &corpus, 2000, |m, _| {
        steps = m.step;
        if m.step % 100 == 0 {
            best = best.min(min_mse(m, target.values()));
            if best < 0.05 {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    let elapsed = start.elapsed();
    c.check(best < 0.05, format!("min MSE {best:.4} after {steps} steps"));
    c.check(elapsed.as_secs_f64() < 300.0, "under 5 min");
    c.finish(7, "overfit a single map", elapsed);
}

fn peak_p(a: &Corpus, b: &Corpus) -> f64 {
    let params = PeakParams::default();
    let ha = peak_count_histogram(a.maps(), &params).unwrap();
    let hb = peak_count_histogram(b.maps(), &params).unwrap();
    chi2_two_sample(&ha, &hb, 5.0).unwrap().p_value
}

#[test]
fn c08_validation_discriminates() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let mix = [
        ToyCitySpec::monocentric(0),
        ToyCitySpec::polycentric(3, 20.0, 0),
        ToyCitySpec::coastal(3, 20.0, 0),
    ];
    let desk = Pipeline::desk();
    let a = build_toy_corpus(&toy_specs(&mix, 500, 801), &desk).unwrap();
    let b = build_toy_corpus(&toy_specs(&mix, 500, 802), &desk).unwrap();
    let p_same = peak_p(&a, &b);
    c.check(p_same > 0.01, format!("same mix p = {p_same:.3}"));

    let mono = build_toy_corpus(&toy_specs(&[ToyCitySpec::monocentric(0)], 200, 803), &desk).unwrap();
    let poly = build_toy_corpus(&toy_specs(&[ToyCitySpec::polycentric(3, 20.0, 0)], 200, 804), &desk).unwrap();
    let p_diff = peak_p(&mono, &poly);
    c.check(p_diff < 1e-3, format!("mono vs poly p = {p_diff:.2e}"));
    c.finish(8, "validation discriminates", start.elapsed());
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn c09_determinism_and_persistence() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let tmp = tempfile::tempdir().unwrap();
    let mix = [ToyCitySpec::monocentric(0), ToyCitySpec::polycentric(3, 20.0, 0)];
    let make = || build_toy_corpus(&toy_specs(&mix, 40, 9), &Pipeline::desk()).unwrap();
    let (ca, cb) = (make(), make());
    ca.save(&tmp.path().join("a")).unwrap();
    cb.save(&tmp.path().join("b")).unwrap();
    c.check(dir_bytes(&tmp.path().join("a")) == dir_bytes(&tmp.path().join("b")), "corpora");

    let config = GanConfig { base_channels: 16, batch_size: 8, seed: 9, ..GanConfig::default() };
    let run = |steps: u64| {
        let mut m = build(&config).unwrap();
        let log = train(&mut m, &ca, steps, |_, _| ControlFlow::Continue(())).unwrap();
        (m, log)
    };
    let (m1, l1) = run(6);
    let (m2, l2) = run(6);
    c.check(l1.to_csv() == l2.to_csv(), "training logs");
    let ck1 = write_checkpoint(&m1).unwrap();
    c.check(ck1 == write_checkpoint(&m2).unwrap(), "checkpoints");

    let (half, head) = run(3);
    let mut resumed = read_checkpoint(&write_checkpoint(&half).unwrap()).unwrap();
    let tail = train(&mut resumed, &ca, 3, |_, _| ControlFlow::Continue(())).unwrap();
    let joined: Vec<_> = head.records.iter().chain(&tail.records).cloned().collect();
    c.check(joined == l1.records && write_checkpoint(&resumed).unwrap() == ck1, "resume bit-equivalent");

    let synth = sample(&m1, 40, 3).unwrap();
    let report = |s: &Corpus| serde_json::to_string(&compare_report(&ca, s, &CompareConfig::default()).unwrap()).unwrap();
    let ra = report(&synth);
    c.check(ra == report(&sample(&m2, 40, 3).unwrap()), "reports");
    let r = compare_report(&ca, &synth, &CompareConfig::default()).unwrap();
    let p = radial_profile(&ca.maps()[1], 0.75).unwrap();
    let peaks = find_peaks(&p, 0.5, 5.0).unwrap();
    c.check(
        report_scene(&r).to_svg() == report_scene(&r).to_svg()
            && profile_scene(&p, Some(&peaks)).to_svg() == profile_scene(&p, Some(&peaks)).to_svg(),
        "SVGs",
    );
    c.finish(9, "determinism and persistence", start.elapsed());
}

#[test]
fn c10_sampling_scale() {
    let _guard = serial();
    let start = Instant::now();
    let mut c = Checks::new();
    let model = build(&GanConfig::default()).unwrap();
    let t0 = Instant::now();
    let corpus = sample(&model, 30_000, 10).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    c.check(corpus.len() == 30_000 && corpus.width() == 32, format!("{} maps at W={}", corpus.len(), corpus.width()));
    c.check(secs < 60.0, format!("sample took {secs:.1} s"));
    c.finish(10, "sampling scale", start.elapsed());
}
