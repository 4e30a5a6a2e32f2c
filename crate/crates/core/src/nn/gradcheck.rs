//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, Mode};
use super::sequential::HasParams;
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Entries probed per parameter tensor; all entries when the tensor is
    /// smaller.
    pub max_entries: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_entries: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub worst: Option<Probe>,
    /// Frozen parameters, left out of the report.
    pub excluded: Vec<String>,
}

impl GradCheckReport {
    fn record(&mut self, probe: Probe) {
        self.checked += 1;
        if probe.relative_error > self.max_relative_error || self.worst.is_none() {
            self.max_relative_error = self.max_relative_error.max(probe.relative_error);
            self.worst = Some(probe);
        }
    }

    pub fn merge(mut self, other: GradCheckReport) -> Self {
        self.checked += other.checked;
        self.excluded.extend(other.excluded);
        if other.max_relative_error > self.max_relative_error || self.worst.is_none() {
            self.max_relative_error = other.max_relative_error;
            self.worst = other.worst;
        }
        self
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn probe_indices(len: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        let mut idx = sample(rng, len, max).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Compare analytic parameter gradients with central differences.
///
/// `loss_fn` must evaluate the scalar loss and accumulate its gradient into
/// the parameters of `net`; gradients are zeroed before every call.
pub fn grad_check<T, N, F>(net: &mut N, mut loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    T: Scalar,
    N: HasParams<T>,
    F: FnMut(&mut N) -> Result<T>,
{
    net.zero_grad();
    loss_fn(net)?;
    let analytic: Vec<(String, bool, Vec<T>)> = net
        .named_params_mut()
        .into_iter()
        .map(|(n, p)| (n, p.frozen, p.grad().to_vec()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    let h = T::of(opts.step);
    for (pi, (name, frozen, grad)) in analytic.iter().enumerate() {
        if *frozen {
            report.excluded.push(name.clone());
            continue;
        }
        for i in probe_indices(grad.len(), opts.max_entries, &mut rng) {
            let original = net.params_mut()[pi].tensor.data()[i];
            net.params_mut()[pi].tensor.data_mut()[i] = original + h;
            net.zero_grad();
            let plus = loss_fn(net)?;
            net.params_mut()[pi].tensor.data_mut()[i] = original - h;
            net.zero_grad();
            let minus = loss_fn(net)?;
            net.params_mut()[pi].tensor.data_mut()[i] = original;
            let numeric = ((plus - minus) / (h + h)).as_f64();
            let a = grad[i].as_f64();
            report.record(Probe {
                param: name.clone(),
                index: i,
                analytic: a,
                numeric,
                relative_error: relative_error(a, numeric),
            });
        }
    }
    net.zero_grad();
    Ok(report)
}

/// Check one layer's input and parameter gradients under the scalar loss
/// `sum(r * layer(x))` for a fixed random weighting `r`.
pub fn layer_grad_check<T: Scalar>(
    layer: &mut Layer<T>,
    input: &Tensor<T>,
    mode: Mode,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let out_shape = layer.spec().output_shape(input.shape())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let weights: Vec<T> = (0..out_shape.iter().product::<usize>())
        .map(|_| T::of(rng.random_range(-1.0..1.0)))
        .collect();
    let weighting = Tensor::from_vec(out_shape, weights)?;
    let dot = |y: &Tensor<T>| y.data().iter().zip(weighting.data()).map(|(&a, &b)| a * b).sum::<T>();

    let (_, ctx) = layer.forward(input, mode)?;
    let (dx, _) = layer.backward(&ctx, &weighting)?;

    let mut report = grad_check(
        layer,
        |l: &mut Layer<T>| {
            let (y, ctx) = l.forward(input, mode)?;
            let (_, pgrads) = l.backward(&ctx, &weighting)?;
            for (p, g) in l.params_mut().iter_mut().zip(pgrads) {
                p.grad_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            Ok(dot(&y))
        },
        opts,
    )?;

    let h = T::of(opts.step);
    let mut x = input.clone();
    for i in probe_indices(x.len(), opts.max_entries, &mut rng) {
        let original = x.data()[i];
        x.data_mut()[i] = original + h;
        let plus = dot(&layer.forward(&x, mode)?.0);
        x.data_mut()[i] = original - h;
        let minus = dot(&layer.forward(&x, mode)?.0);
        x.data_mut()[i] = original;
        let numeric = ((plus - minus) / (h + h)).as_f64();
        let a = dx.data()[i].as_f64();
        report.record(Probe {
            param: "input".into(),
            index: i,
            analytic: a,
            numeric,
            relative_error: relative_error(a, numeric),
        });
    }
    Ok(report)
}
