//! Convolution geometry, patch unfolding, and the direct (naive) kernels.
//!
//! The direct kernels are the reference every other path is checked
//! against; layers default to the unfolded (im2col + GEMM) path.

use crate::scalar::Scalar;

/// Square-kernel geometry shared by convolution and its transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Geometry {
    /// `floor((in + 2 pad - kernel) / stride) + 1`, or `None` when the
    /// kernel does not fit.
    pub fn conv_out(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.pad;
        (padded >= self.kernel && self.stride > 0).then(|| (padded - self.kernel) / self.stride + 1)
    }

    /// `(in - 1) stride - 2 pad + kernel`, or `None` when non-positive.
    pub fn transposed_out(&self, input: usize) -> Option<usize> {
        let full = input.checked_sub(1)? * self.stride + self.kernel;
        full.checked_sub(2 * self.pad).filter(|&o| o > 0)
    }
}

/// Unfold a `(channels, h, w)` image into a `(channels * k * k, oh * ow)`
/// patch matrix.
pub fn im2col<T: Scalar>(
    x: &[T],
    channels: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    g: Geometry,
    cols: &mut [T],
) {
    let k = g.kernel;
    let plane = oh * ow;
    debug_assert_eq!(cols.len(), channels * k * k * plane);
    for c in 0..channels {
        let img = &x[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((c * k + ki) * k + kj) * plane..][..plane];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &img[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add a patch matrix back onto an image.
pub fn col2im<T: Scalar>(
    cols: &[T],
    channels: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    g: Geometry,
    x: &mut [T],
) {
    let k = g.kernel;
    let plane = oh * ow;
    for c in 0..channels {
        let img = &mut x[c * h * w..(c + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((c * k + ki) * k + kj) * plane..][..plane];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut img[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in row[oy * ow..(oy + 1) * ow].iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Direct convolution of one `(cin, h, w)` image with weights
/// `(cout, cin, k, k)`; returns `(cout, oh, ow)`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_direct<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    cin: usize,
    cout: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    g: Geometry,
) -> Vec<T> {
    let k = g.kernel;
    let mut y = vec![T::zero(); cout * oh * ow];
    for co in 0..cout {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias.map_or(T::zero(), |b| b[co]);
                for ci in 0..cin {
                    for ki in 0..k {
                        for kj in 0..k {
                            let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                            let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            acc += weight[((co * cin + ci) * k + ki) * k + kj]
                                * x[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                y[(co * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y
}

/// Direct transposed convolution of one `(cin, h, w)` image with weights
/// `(cin, cout, k, k)`; returns `(cout, oh, ow)`.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_direct<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: Option<&[T]>,
    cin: usize,
    cout: usize,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    g: Geometry,
) -> Vec<T> {
    let k = g.kernel;
    let mut y = vec![T::zero(); cout * oh * ow];
    for ci in 0..cin {
        for iy in 0..h {
            for ix in 0..w {
                let v = x[(ci * h + iy) * w + ix];
                for co in 0..cout {
                    for ki in 0..k {
                        for kj in 0..k {
                            let oy = (iy * g.stride + ki) as isize - g.pad as isize;
                            let ox = (ix * g.stride + kj) as isize - g.pad as isize;
                            if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                continue;
                            }
                            y[(co * oh + oy as usize) * ow + ox as usize] +=
                                v * weight[((ci * cout + co) * k + ki) * k + kj];
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = bias {
        for (co, plane) in y.chunks_exact_mut(oh * ow).enumerate() {
            plane.iter_mut().for_each(|v| *v += b[co]);
        }
    }
    y
}
