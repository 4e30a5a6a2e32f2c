use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{col2im, conv2d_direct, conv_transpose2d_direct, im2col, Geometry};
use super::gemm::{gemm, gemm_a_bt, gemm_at_b};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_KERNEL: usize = 4;
pub const DEFAULT_STRIDE: usize = 2;
pub const DEFAULT_PAD: usize = 1;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;
pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;
pub const DEFAULT_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Which kernel the convolution layers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvAlgo {
    Direct,
    #[default]
    Im2col,
}

/// Architecture of a single layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    },
    TransposedConv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    },
    Batchnorm {
        channels: usize,
        eps: f64,
        momentum: f64,
    },
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Tanh,
    Sigmoid,
    /// Flattens all non-batch axes; the output is `(batch, out_features)`
    /// or `(batch, out_shape...)` when a view shape is given.
    Linear {
        in_features: usize,
        out_features: usize,
        bias: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out_shape: Option<Vec<usize>>,
    },
}

impl LayerSpec {
    pub fn conv(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel: DEFAULT_KERNEL,
            stride: DEFAULT_STRIDE,
            pad: DEFAULT_PAD,
            bias: true,
        }
    }

    pub fn transposed_conv(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::TransposedConv {
            in_channels,
            out_channels,
            kernel: DEFAULT_KERNEL,
            stride: DEFAULT_STRIDE,
            pad: DEFAULT_PAD,
            bias: true,
        }
    }

    pub fn batchnorm(channels: usize) -> Self {
        LayerSpec::Batchnorm {
            channels,
            eps: DEFAULT_BN_EPS,
            momentum: DEFAULT_BN_MOMENTUM,
        }
    }

    pub fn leaky_relu() -> Self {
        LayerSpec::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn linear(in_features: usize, out_features: usize) -> Self {
        LayerSpec::Linear {
            in_features,
            out_features,
            bias: true,
            out_shape: None,
        }
    }

    /// Drop the additive bias (used in front of batch normalization).
    pub fn without_bias(mut self) -> Self {
        match &mut self {
            LayerSpec::Conv { bias, .. }
            | LayerSpec::TransposedConv { bias, .. }
            | LayerSpec::Linear { bias, .. } => *bias = false,
            _ => {}
        }
        self
    }

    pub fn with_out_shape(mut self, shape: Vec<usize>) -> Self {
        if let LayerSpec::Linear { out_shape, .. } = &mut self {
            *out_shape = Some(shape);
        }
        self
    }

    pub fn with_geometry(mut self, kernel_: usize, stride_: usize, pad_: usize) -> Self {
        match &mut self {
            LayerSpec::Conv { kernel, stride, pad, .. }
            | LayerSpec::TransposedConv { kernel, stride, pad, .. } => {
                *kernel = kernel_;
                *stride = stride_;
                *pad = pad_;
            }
            _ => {}
        }
        self
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::TransposedConv { .. } => "transposed_conv",
            LayerSpec::Batchnorm { .. } => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Linear { .. } => "linear",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::argument(format!("{} layer: {what}", self.kind())));
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel, stride, .. }
            | LayerSpec::TransposedConv { in_channels, out_channels, kernel, stride, .. } => {
                if in_channels == 0 || out_channels == 0 {
                    return bad("channel counts must be positive");
                }
                if kernel == 0 || stride == 0 {
                    return bad("kernel and stride must be >= 1");
                }
            }
            LayerSpec::Batchnorm { channels, eps, momentum } => {
                if channels == 0 {
                    return bad("channel count must be positive");
                }
                if !(eps > 0.0) || !(0.0..=1.0).contains(&momentum) {
                    return bad("eps must be positive and momentum in [0, 1]");
                }
            }
            LayerSpec::LeakyRelu { slope } if !slope.is_finite() => return bad("slope must be finite"),
            LayerSpec::Linear { in_features, out_features, ref out_shape, .. } => {
                if in_features == 0 || out_features == 0 {
                    return bad("feature counts must be positive");
                }
                if let Some(s) = out_shape {
                    if s.iter().product::<usize>() != out_features {
                        return bad("out_shape must hold exactly out_features elements");
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn geometry(&self) -> Option<Geometry> {
        match *self {
            LayerSpec::Conv { kernel, stride, pad, .. }
            | LayerSpec::TransposedConv { kernel, stride, pad, .. } => {
                Some(Geometry { kernel, stride, pad })
            }
            _ => None,
        }
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::shape(self.kind(), &expected, input);
        match *self {
            LayerSpec::Conv { in_channels, out_channels, .. }
            | LayerSpec::TransposedConv { in_channels, out_channels, .. } => {
                if input.len() != 4 || input[1] != in_channels {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), in_channels, 0, 0]));
                }
                let g = self.geometry().expect("conv geometry");
                let out = |n: usize| match self {
                    LayerSpec::Conv { .. } => g.conv_out(n),
                    _ => g.transposed_out(n),
                };
                match (out(input[2]), out(input[3])) {
                    (Some(h), Some(w)) => Ok(vec![input[0], out_channels, h, w]),
                    _ => Err(mismatch(vec![input[0], in_channels, g.kernel, g.kernel])),
                }
            }
            LayerSpec::Batchnorm { channels, .. } => {
                if input.len() < 2 || input[1] != channels {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), channels]));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Linear { in_features, out_features, ref out_shape, .. } => {
                let flat: usize = input.iter().skip(1).product();
                if input.len() < 2 || flat != in_features {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), in_features]));
                }
                let mut shape = vec![input[0]];
                match out_shape {
                    Some(s) => shape.extend_from_slice(s),
                    None => shape.push(out_features),
                }
                Ok(shape)
            }
            _ => Ok(input.to_vec()),
        }
    }
}

/// A trainable tensor. Frozen parameters are skipped by the optimizer and
/// by gradient checking.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub tensor: Tensor<T>,
    pub frozen: bool,
}

impl<T: Scalar> Param<T> {
    pub fn new(tensor: Tensor<T>) -> Self {
        Param {
            tensor: tensor.with_grad(),
            frozen: false,
        }
    }

    pub fn grad(&self) -> &[T] {
        self.tensor.grad().expect("parameters always carry a gradient buffer")
    }

    pub fn grad_mut(&mut self) -> &mut [T] {
        self.tensor.grad_mut().expect("parameters always carry a gradient buffer")
    }
}

/// What a forward pass saved for its backward pass.
#[derive(Debug, Clone)]
pub struct Context<T> {
    kind: &'static str,
    saved: Saved<T>,
}

#[derive(Debug, Clone)]
enum Saved<T> {
    Input(Tensor<T>),
    Output(Tensor<T>),
    Normalized {
        xhat: Tensor<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
}

impl<T> Context<T> {
    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

/// A layer: its architecture, parameters and (for batch normalization)
/// running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    spec: LayerSpec,
    params: Vec<Param<T>>,
    buffers: Vec<Tensor<T>>,
    pub conv_algo: ConvAlgo,
}

impl<T: Scalar> Layer<T> {
    /// Build with Gaussian weights of standard deviation `init_std` and
    /// zero biases; batch normalization starts at the identity.
    pub fn new<R: Rng + ?Sized>(spec: LayerSpec, init_std: f64, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::new();
        let mut buffers = Vec::new();
        match spec {
            LayerSpec::Conv { in_channels, out_channels, kernel, bias, .. } => {
                let shape = vec![out_channels, in_channels, kernel, kernel];
                params.push(Param::new(Tensor::randn(shape, init_std, rng)));
                if bias {
                    params.push(Param::new(Tensor::zeros(vec![out_channels])));
                }
            }
            LayerSpec::TransposedConv { in_channels, out_channels, kernel, bias, .. } => {
                let shape = vec![in_channels, out_channels, kernel, kernel];
                params.push(Param::new(Tensor::randn(shape, init_std, rng)));
                if bias {
                    params.push(Param::new(Tensor::zeros(vec![out_channels])));
                }
            }
            LayerSpec::Linear { in_features, out_features, bias, .. } => {
                let shape = vec![out_features, in_features];
                params.push(Param::new(Tensor::randn(shape, init_std, rng)));
                if bias {
                    params.push(Param::new(Tensor::zeros(vec![out_features])));
                }
            }
            LayerSpec::Batchnorm { channels, .. } => {
                params.push(Param::new(Tensor::full(vec![channels], T::one())));
                params.push(Param::new(Tensor::zeros(vec![channels])));
                buffers.push(Tensor::zeros(vec![channels]));
                buffers.push(Tensor::full(vec![channels], T::one()));
            }
            _ => {}
        }
        Ok(Layer {
            spec,
            params,
            buffers,
            conv_algo: ConvAlgo::default(),
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    /// Non-trainable state (batch-norm running mean and variance).
    pub fn buffers(&self) -> &[Tensor<T>] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.buffers
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self.spec {
            LayerSpec::Batchnorm { .. } => &["gamma", "beta"],
            _ if self.params.len() == 2 => &["weight", "bias"],
            _ if self.params.len() == 1 => &["weight"],
            _ => &[],
        }
    }

    pub fn buffer_names(&self) -> &'static [&'static str] {
        if self.buffers.is_empty() {
            &[]
        } else {
            &["running_mean", "running_var"]
        }
    }

    fn bias(&self) -> Option<&[T]> {
        self.params.get(1).map(|p| p.tensor.data())
    }

    /// Forward pass. In train mode batch normalization normalizes with batch
    /// statistics and updates its running statistics.
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Context<T>)> {
        let (out, saved, stats) = self.run(input, mode, true)?;
        if let Some((mean, var)) = stats {
            let LayerSpec::Batchnorm { momentum, .. } = self.spec else {
                unreachable!("only batch normalization reports statistics")
            };
            let m = T::of(momentum);
            let (rm, rv) = self.buffers.split_at_mut(1);
            for (r, &b) in rm[0].data_mut().iter_mut().zip(&mean) {
                *r = (T::one() - m) * *r + m * b;
            }
            for (r, &b) in rv[0].data_mut().iter_mut().zip(&var) {
                *r = (T::one() - m) * *r + m * b;
            }
        }
        let ctx = Context {
            kind: self.spec.kind(),
            saved: saved.expect("context requested"),
        };
        Ok((out, ctx))
    }

    /// Eval-mode forward pass that keeps no context and mutates nothing.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(input, Mode::Eval, false)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        keep: bool,
    ) -> Result<(Tensor<T>, Option<Saved<T>>, Option<(Vec<T>, Vec<T>)>)> {
        let out_shape = self.spec.output_shape(input.shape())?;
        let keep_input = || keep.then(|| Saved::Input(input.clone()));
        match self.spec {
            LayerSpec::Conv { in_channels, out_channels, .. } => {
                let y = self.conv_forward(input, in_channels, out_channels, out_shape)?;
                Ok((y, keep_input(), None))
            }
            LayerSpec::TransposedConv { in_channels, out_channels, .. } => {
                let y = self.tconv_forward(input, in_channels, out_channels, out_shape)?;
                Ok((y, keep_input(), None))
            }
            LayerSpec::Linear { in_features, out_features, .. } => {
                let batch = input.batch();
                let mut y = vec![T::zero(); batch * out_features];
                let w = self.params[0].tensor.data();
                gemm_a_bt(batch, in_features, out_features, input.data(), w, &mut y);
                if let Some(b) = self.bias() {
                    for row in y.chunks_exact_mut(out_features) {
                        row.iter_mut().zip(b).for_each(|(v, &bj)| *v += bj);
                    }
                }
                Ok((Tensor::from_vec(out_shape, y)?, keep_input(), None))
            }
            LayerSpec::Batchnorm { channels, eps, .. } => {
                self.batchnorm_forward(input, channels, eps, mode, keep)
            }
            LayerSpec::Relu => Ok((input.map(|v| v.max(T::zero())), keep_input(), None)),
            LayerSpec::LeakyRelu { slope } => {
                let s = T::of(slope);
                let y = input.map(|v| if v > T::zero() { v } else { s * v });
                Ok((y, keep_input(), None))
            }
            LayerSpec::Tanh => {
                let y = input.map(T::tanh);
                let saved = keep.then(|| Saved::Output(y.clone()));
                Ok((y, saved, None))
            }
            LayerSpec::Sigmoid => {
                let y = input.map(sigmoid);
                let saved = keep.then(|| Saved::Output(y.clone()));
                Ok((y, saved, None))
            }
        }
    }

    fn conv_forward(&self, x: &Tensor<T>, cin: usize, cout: usize, out_shape: Vec<usize>) -> Result<Tensor<T>> {
        let g = self.spec.geometry().expect("conv geometry");
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let (oh, ow) = (out_shape[2], out_shape[3]);
        let weight = self.params[0].tensor.data();
        let mut y = Tensor::zeros(out_shape);
        let out_len = cout * oh * ow;
        let patch = cin * g.kernel * g.kernel;
        let mut cols = vec![T::zero(); patch * oh * ow];
        for (xb, yb) in x.data().chunks_exact(cin * h * w).zip(y.data_mut().chunks_exact_mut(out_len)) {
            match self.conv_algo {
                ConvAlgo::Direct => {
                    let direct = conv2d_direct(xb, weight, self.bias(), cin, cout, (h, w), (oh, ow), g);
                    yb.copy_from_slice(&direct);
                }
                ConvAlgo::Im2col => {
                    im2col(xb, cin, (h, w), (oh, ow), g, &mut cols);
                    gemm(cout, patch, oh * ow, weight, &cols, yb);
                    if let Some(b) = self.bias() {
                        for (plane, &bc) in yb.chunks_exact_mut(oh * ow).zip(b) {
                            plane.iter_mut().for_each(|v| *v += bc);
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    fn tconv_forward(&self, x: &Tensor<T>, cin: usize, cout: usize, out_shape: Vec<usize>) -> Result<Tensor<T>> {
        let g = self.spec.geometry().expect("conv geometry");
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let (oh, ow) = (out_shape[2], out_shape[3]);
        let weight = self.params[0].tensor.data();
        let mut y = Tensor::zeros(out_shape);
        let out_len = cout * oh * ow;
        let patch = cout * g.kernel * g.kernel;
        let mut cols = vec![T::zero(); patch * h * w];
        for (xb, yb) in x.data().chunks_exact(cin * h * w).zip(y.data_mut().chunks_exact_mut(out_len)) {
            match self.conv_algo {
                ConvAlgo::Direct => {
                    let direct =
                        conv_transpose2d_direct(xb, weight, self.bias(), cin, cout, (h, w), (oh, ow), g);
                    yb.copy_from_slice(&direct);
                }
                ConvAlgo::Im2col => {
                    cols.iter_mut().for_each(|v| *v = T::zero());
                    gemm_at_b(patch, cin, h * w, weight, xb, &mut cols);
                    col2im(&cols, cout, (oh, ow), (h, w), g, yb);
                    if let Some(b) = self.bias() {
                        for (plane, &bc) in yb.chunks_exact_mut(oh * ow).zip(b) {
                            plane.iter_mut().for_each(|v| *v += bc);
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    #[allow(clippy::type_complexity)]
    fn batchnorm_forward(
        &self,
        x: &Tensor<T>,
        channels: usize,
        eps: f64,
        mode: Mode,
        keep: bool,
    ) -> Result<(Tensor<T>, Option<Saved<T>>, Option<(Vec<T>, Vec<T>)>)> {
        let batch = x.batch();
        let spatial = x.item_len() / channels;
        let n = batch * spatial;
        let eps = T::of(eps);
        let gamma = self.params[0].tensor.data();
        let beta = self.params[1].tensor.data();
        let idx = |b: usize, c: usize| (b * channels + c) * spatial;

        let (mean, var, stats) = match mode {
            Mode::Train => {
                if n == 0 {
                    return Err(Error::shape("batchnorm", &[1, channels], x.shape()));
                }
                let nn = T::of_usize(n);
                let mut mean = vec![T::zero(); channels];
                let mut var = vec![T::zero(); channels];
                for c in 0..channels {
                    let mut s = T::zero();
                    for b in 0..batch {
                        s += x.data()[idx(b, c)..idx(b, c) + spatial].iter().copied().sum::<T>();
                    }
                    mean[c] = s / nn;
                    let mut q = T::zero();
                    for b in 0..batch {
                        for &v in &x.data()[idx(b, c)..idx(b, c) + spatial] {
                            q += (v - mean[c]) * (v - mean[c]);
                        }
                    }
                    var[c] = q / nn;
                }
                let unbiased = if n > 1 {
                    var.iter().map(|&v| v * nn / T::of_usize(n - 1)).collect()
                } else {
                    var.clone()
                };
                let stats = Some((mean.clone(), unbiased));
                (mean, var, stats)
            }
            Mode::Eval => (
                self.buffers[0].data().to_vec(),
                self.buffers[1].data().to_vec(),
                None,
            ),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Tensor::zeros(x.shape().to_vec());
        let mut y = Tensor::zeros(x.shape().to_vec());
        for b in 0..batch {
            for c in 0..channels {
                let r = idx(b, c)..idx(b, c) + spatial;
                let xs = &x.data()[r.clone()];
                for ((h, o), &v) in xhat.data_mut()[r.clone()]
                    .iter_mut()
                    .zip(&mut y.data_mut()[r.clone()])
                    .zip(xs)
                {
                    *h = (v - mean[c]) * inv_std[c];
                    *o = gamma[c] * *h + beta[c];
                }
            }
        }
        let saved = keep.then(|| Saved::Normalized {
            xhat,
            inv_std,
            batch_stats: mode == Mode::Train,
        });
        Ok((y, saved, stats))
    }

    /// Backward pass: the gradient with respect to the input and one
    /// gradient per parameter, in [`Layer::params`] order.
    pub fn backward(&self, ctx: &Context<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Vec<Vec<T>>)> {
        if ctx.kind != self.spec.kind() {
            return Err(Error::State(format!(
                "{} layer received a context produced by a {} layer",
                self.spec.kind(),
                ctx.kind
            )));
        }
        let expect_input = || match &ctx.saved {
            Saved::Input(x) => Ok(x),
            _ => Err(Error::State(format!("{} context lacks its input", ctx.kind))),
        };
        let expect_output = || match &ctx.saved {
            Saved::Output(y) => Ok(y),
            _ => Err(Error::State(format!("{} context lacks its output", ctx.kind))),
        };
        let check = |expected: &[usize]| {
            if grad_out.shape() != expected {
                Err(Error::shape(
                    format!("{} backward", self.spec.kind()),
                    expected,
                    grad_out.shape(),
                ))
            } else {
                Ok(())
            }
        };
        match self.spec {
            LayerSpec::Conv { in_channels, out_channels, .. } => {
                let x = expect_input()?;
                check(&self.spec.output_shape(x.shape())?)?;
                self.conv_backward(x, grad_out, in_channels, out_channels)
            }
            LayerSpec::TransposedConv { in_channels, out_channels, .. } => {
                let x = expect_input()?;
                check(&self.spec.output_shape(x.shape())?)?;
                self.tconv_backward(x, grad_out, in_channels, out_channels)
            }
            LayerSpec::Linear { in_features, out_features, .. } => {
                let x = expect_input()?;
                check(&self.spec.output_shape(x.shape())?)?;
                let batch = x.batch();
                let dy = grad_out.data();
                let mut dw = vec![T::zero(); out_features * in_features];
                gemm_at_b(out_features, batch, in_features, dy, x.data(), &mut dw);
                let mut dx = vec![T::zero(); batch * in_features];
                gemm(batch, out_features, in_features, dy, self.params[0].tensor.data(), &mut dx);
                let mut grads = vec![dw];
                if self.params.len() > 1 {
                    let mut db = vec![T::zero(); out_features];
                    for row in dy.chunks_exact(out_features) {
                        db.iter_mut().zip(row).for_each(|(d, &g)| *d += g);
                    }
                    grads.push(db);
                }
                Ok((Tensor::from_vec(x.shape().to_vec(), dx)?, grads))
            }
            LayerSpec::Batchnorm { channels, .. } => {
                let Saved::Normalized { xhat, inv_std, batch_stats } = &ctx.saved else {
                    return Err(Error::State("batchnorm context lacks normalized input".into()));
                };
                check(xhat.shape())?;
                Ok(self.batchnorm_backward(xhat, inv_std, *batch_stats, grad_out, channels))
            }
            LayerSpec::Relu => {
                let x = expect_input()?;
                check(x.shape())?;
                Ok((zip_map(x, grad_out, |v, g| if v > T::zero() { g } else { T::zero() }), vec![]))
            }
            LayerSpec::LeakyRelu { slope } => {
                let x = expect_input()?;
                check(x.shape())?;
                let s = T::of(slope);
                Ok((zip_map(x, grad_out, |v, g| if v > T::zero() { g } else { s * g }), vec![]))
            }
            LayerSpec::Tanh => {
                let y = expect_output()?;
                check(y.shape())?;
                Ok((zip_map(y, grad_out, |v, g| g * (T::one() - v * v)), vec![]))
            }
            LayerSpec::Sigmoid => {
                let y = expect_output()?;
                check(y.shape())?;
                Ok((zip_map(y, grad_out, |v, g| g * v * (T::one() - v)), vec![]))
            }
        }
    }

    fn conv_backward(&self, x: &Tensor<T>, dy: &Tensor<T>, cin: usize, cout: usize) -> Result<(Tensor<T>, Vec<Vec<T>>)> {
        let g = self.spec.geometry().expect("conv geometry");
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let (oh, ow) = (dy.shape()[2], dy.shape()[3]);
        let patch = cin * g.kernel * g.kernel;
        let weight = self.params[0].tensor.data();
        let mut dw = vec![T::zero(); cout * patch];
        let mut db = vec![T::zero(); cout];
        let mut dx = Tensor::zeros(x.shape().to_vec());
        let mut cols = vec![T::zero(); patch * oh * ow];
        let mut dcols = vec![T::zero(); patch * oh * ow];
        for ((xb, dyb), dxb) in x
            .data()
            .chunks_exact(cin * h * w)
            .zip(dy.data().chunks_exact(cout * oh * ow))
            .zip(dx.data_mut().chunks_exact_mut(cin * h * w))
        {
            im2col(xb, cin, (h, w), (oh, ow), g, &mut cols);
            gemm_a_bt(cout, oh * ow, patch, dyb, &cols, &mut dw);
            dcols.iter_mut().for_each(|v| *v = T::zero());
            gemm_at_b(patch, cout, oh * ow, weight, dyb, &mut dcols);
            col2im(&dcols, cin, (h, w), (oh, ow), g, dxb);
            for (d, plane) in db.iter_mut().zip(dyb.chunks_exact(oh * ow)) {
                *d += plane.iter().copied().sum::<T>();
            }
        }
        let mut grads = vec![dw];
        if self.params.len() > 1 {
            grads.push(db);
        }
        Ok((dx, grads))
    }

    fn tconv_backward(&self, x: &Tensor<T>, dy: &Tensor<T>, cin: usize, cout: usize) -> Result<(Tensor<T>, Vec<Vec<T>>)> {
        let g = self.spec.geometry().expect("conv geometry");
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let (oh, ow) = (dy.shape()[2], dy.shape()[3]);
        let patch = cout * g.kernel * g.kernel;
        let weight = self.params[0].tensor.data();
        let mut dw = vec![T::zero(); cin * patch];
        let mut db = vec![T::zero(); cout];
        let mut dx = Tensor::zeros(x.shape().to_vec());
        let mut cols = vec![T::zero(); patch * h * w];
        for ((xb, dyb), dxb) in x
            .data()
            .chunks_exact(cin * h * w)
            .zip(dy.data().chunks_exact(cout * oh * ow))
            .zip(dx.data_mut().chunks_exact_mut(cin * h * w))
        {
            im2col(dyb, cout, (oh, ow), (h, w), g, &mut cols);
            gemm_a_bt(cin, h * w, patch, xb, &cols, &mut dw);
            gemm(cin, patch, h * w, weight, &cols, dxb);
            for (d, plane) in db.iter_mut().zip(dyb.chunks_exact(oh * ow)) {
                *d += plane.iter().copied().sum::<T>();
            }
        }
        let mut grads = vec![dw];
        if self.params.len() > 1 {
            grads.push(db);
        }
        Ok((dx, grads))
    }

    fn batchnorm_backward(
        &self,
        xhat: &Tensor<T>,
        inv_std: &[T],
        batch_stats: bool,
        dy: &Tensor<T>,
        channels: usize,
    ) -> (Tensor<T>, Vec<Vec<T>>) {
        let batch = xhat.batch();
        let spatial = xhat.item_len() / channels;
        let nn = T::of_usize(batch * spatial);
        let gamma = self.params[0].tensor.data();
        let idx = |b: usize, c: usize| (b * channels + c) * spatial;
        let mut dgamma = vec![T::zero(); channels];
        let mut dbeta = vec![T::zero(); channels];
        for c in 0..channels {
            for b in 0..batch {
                let r = idx(b, c)..idx(b, c) + spatial;
                for (&g, &h) in dy.data()[r.clone()].iter().zip(&xhat.data()[r]) {
                    dgamma[c] += g * h;
                    dbeta[c] += g;
                }
            }
        }
        let mut dx = Tensor::zeros(xhat.shape().to_vec());
        for c in 0..channels {
            // With batch statistics the mean and variance depend on every
            // input, which adds the two centering terms.
            let (sum_d, sum_dh) = if batch_stats {
                (gamma[c] * dbeta[c], gamma[c] * dgamma[c])
            } else {
                (T::zero(), T::zero())
            };
            for b in 0..batch {
                let r = idx(b, c)..idx(b, c) + spatial;
                for ((o, &g), &h) in dx.data_mut()[r.clone()]
                    .iter_mut()
                    .zip(&dy.data()[r.clone()])
                    .zip(&xhat.data()[r])
                {
                    let dh = g * gamma[c];
                    *o = if batch_stats {
                        inv_std[c] / nn * (nn * dh - sum_d - h * sum_dh)
                    } else {
                        dh * inv_std[c]
                    };
                }
            }
        }
        (dx, vec![dgamma, dbeta])
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn zip_map<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &g)| f(x, g)).collect();
    Tensor::from_vec(a.shape().to_vec(), data).expect("same shape")
}
