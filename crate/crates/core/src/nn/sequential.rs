use rand::Rng;

use super::layers::{ConvAlgo, Context, Layer, LayerSpec, Mode, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anything that exposes trainable parameters in a fixed order.
pub trait HasParams<T> {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)>;

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.named_params_mut().into_iter().map(|(_, p)| p).collect()
    }

    fn zero_grad(&mut self)
    where
        T: Scalar,
    {
        for p in self.params_mut() {
            p.tensor.zero_grad();
        }
    }
}

/// A fixed chain of layers with the contexts of the last forward pass.
#[derive(Debug, Clone)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
    cache: Vec<Option<Context<T>>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], init_std: f64, rng: &mut R) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|s| Layer::new(s.clone(), init_std, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_layers(layers))
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Self {
        let cache = vec![None; layers.len()];
        Sequential { layers, cache }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec().clone()).collect()
    }

    pub fn set_conv_algo(&mut self, algo: ConvAlgo) {
        self.layers.iter_mut().for_each(|l| l.conv_algo = algo);
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .try_fold(input.to_vec(), |shape, l| l.spec().output_shape(&shape))
    }

    /// Forward pass, caching each layer's context for [`Sequential::backward`].
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for (layer, slot) in self.layers.iter_mut().zip(self.cache.iter_mut()) {
            let (y, ctx) = layer.forward(&x, mode)?;
            *slot = Some(ctx);
            x = y;
        }
        Ok(x)
    }

    /// Eval-mode forward pass; touches neither the cache nor running stats.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.layers.iter().try_fold(input.clone(), |x, l| l.infer(&x))
    }

    /// Back-propagate `grad` through the cached forward pass, consuming the
    /// cache. Parameter gradients are added to each parameter's buffer only
    /// when `accumulate` is set; the input gradient is always returned.
    pub fn backward(&mut self, grad: &Tensor<T>, accumulate: bool) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let ctx = self.cache[i].take().ok_or_else(|| {
                Error::State(format!("layer {i} ({}) has no cached forward context", layer.spec().kind()))
            })?;
            let (gx, pgrads) = layer.backward(&ctx, &g)?;
            if accumulate {
                for (p, pg) in layer.params_mut().iter_mut().zip(pgrads) {
                    p.grad_mut().iter_mut().zip(pg).for_each(|(a, b)| *a += b);
                }
            }
            g = gx;
        }
        Ok(g)
    }

    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.param_names()
                    .iter()
                    .zip(l.params())
                    .map(move |(n, p)| (format!("{i}.{}.{n}", l.spec().kind()), p))
            })
            .collect()
    }

    pub fn named_buffers(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.buffer_names()
                    .iter()
                    .zip(l.buffers())
                    .map(move |(n, b)| (format!("{i}.{}.{n}", l.spec().kind()), b))
            })
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.buffers_mut().iter_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|p| p.tensor.len()).sum()
    }
}

impl<T: Scalar> HasParams<T> for Sequential<T> {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                let kind = l.spec().kind();
                let names = l.param_names();
                names
                    .iter()
                    .zip(l.params_mut().iter_mut())
                    .map(move |(n, p)| (format!("{i}.{kind}.{n}"), p))
            })
            .collect()
    }
}

impl<T: Scalar> HasParams<T> for Layer<T> {
    fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let names = self.param_names();
        names
            .iter()
            .zip(self.params_mut().iter_mut())
            .map(|(n, p)| (n.to_string(), p))
            .collect()
    }
}
