use super::store::{BufferId, Grads, ParamId, ParamStore, StatUpdate};
use super::{gemm, Tensor};

fn out_side(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - k) / stride + 1
}

/// Square-kernel 2D convolution without bias (every convolution in the model
/// is followed by batch normalization).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct ConvCache {
    in_shape: [usize; 4],
    /// im2col matrix, `[cin·k·k, n·oh·ow]` row-major.
    cols: Vec<f64>,
}

impl Conv2d {
    pub fn output_side(&self, side: usize) -> Option<usize> {
        (side + 2 * self.pad >= self.k).then(|| out_side(side, self.k, self.stride, self.pad))
    }

    fn im2col(&self, x: &Tensor, oh: usize, ow: usize) -> Vec<f64> {
        let [n, c, h, w] = x.shape;
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let p = oh * ow;
        let np = n * p;
        let mut cols = vec![0.0; c * k * k * np];
        for ci in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let dst_row = &mut cols[row * np..(row + 1) * np];
                    for ni in 0..n {
                        let src = &x.data[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w];
                        let dst = &mut dst_row[ni * p..(ni + 1) * p];
                        for oy in 0..oh {
                            let iy = (oy * s) as isize - pad + ki as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
                            let dst_r = &mut dst[oy * ow..(oy + 1) * ow];
                            for (ox, d) in dst_r.iter_mut().enumerate() {
                                let ix = (ox * s) as isize - pad + kj as isize;
                                if ix >= 0 && ix < w as isize {
                                    *d = src_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[f64], in_shape: [usize; 4], oh: usize, ow: usize) -> Tensor {
        let [n, c, h, w] = in_shape;
        let (k, s, pad) = (self.k, self.stride, self.pad as isize);
        let p = oh * ow;
        let np = n * p;
        let mut dx = Tensor::zeros(in_shape);
        for ci in 0..c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (ci * k + ki) * k + kj;
                    let src_row = &dcols[row * np..(row + 1) * np];
                    for ni in 0..n {
                        let dst = &mut dx.data[(ni * c + ci) * h * w..(ni * c + ci + 1) * h * w];
                        let src = &src_row[ni * p..(ni + 1) * p];
                        for oy in 0..oh {
                            let iy = (oy * s) as isize - pad + ki as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let dst_r = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                            for ox in 0..ow {
                                let ix = (ox * s) as isize - pad + kj as isize;
                                if ix >= 0 && ix < w as isize {
                                    dst_r[ix as usize] += src[oy * ow + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> (Tensor, ConvCache) {
        let [n, c, h, w] = x.shape;
        assert_eq!(c, self.cin, "conv input channels");
        let oh = out_side(h, self.k, self.stride, self.pad);
        let ow = out_side(w, self.k, self.stride, self.pad);
        let p = oh * ow;
        let kk = self.cin * self.k * self.k;
        let cols = self.im2col(x, oh, ow);
        let mut ymat = vec![0.0; self.cout * n * p];
        gemm(
            self.cout,
            kk,
            n * p,
            store.get(self.weight),
            (kk, 1),
            &cols,
            (n * p, 1),
            0.0,
            &mut ymat,
            (n * p, 1),
        );
        let mut y = Tensor::zeros([n, self.cout, oh, ow]);
        for co in 0..self.cout {
            for ni in 0..n {
                let src = &ymat[co * n * p + ni * p..co * n * p + (ni + 1) * p];
                y.data[(ni * self.cout + co) * p..(ni * self.cout + co + 1) * p].copy_from_slice(src);
            }
        }
        (
            y,
            ConvCache {
                in_shape: x.shape,
                cols,
            },
        )
    }

    /// Accumulates the weight gradient when `grads` is given; returns the input
    /// gradient when `need_dx`.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &ConvCache,
        dy: &Tensor,
        grads: Option<&mut Grads>,
        need_dx: bool,
    ) -> Option<Tensor> {
        let [n, _, oh, ow] = dy.shape;
        let p = oh * ow;
        let np = n * p;
        let kk = self.cin * self.k * self.k;
        let mut dymat = vec![0.0; self.cout * np];
        for co in 0..self.cout {
            for ni in 0..n {
                dymat[co * np + ni * p..co * np + (ni + 1) * p]
                    .copy_from_slice(&dy.data[(ni * self.cout + co) * p..(ni * self.cout + co + 1) * p]);
            }
        }
        if let Some(grads) = grads {
            let gw = grads.acc(self.weight, self.cout * kk);
            gemm(self.cout, np, kk, &dymat, (np, 1), &cache.cols, (1, np), 1.0, gw, (kk, 1));
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0; kk * np];
        gemm(
            kk,
            self.cout,
            np,
            store.get(self.weight),
            (1, kk),
            &dymat,
            (np, 1),
            0.0,
            &mut dcols,
            (np, 1),
        );
        Some(self.col2im(&dcols, cache.in_shape, oh, ow))
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

pub struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
}

impl BatchNorm2d {
    /// Training mode normalizes with batch statistics and reports a running
    /// statistic update; inference mode uses the stored running statistics.
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        train: bool,
        stats: &mut Vec<StatUpdate>,
    ) -> (Tensor, BnCache) {
        let [n, c, h, w] = x.shape;
        assert_eq!(c, self.channels, "batch-norm channels");
        let hw = h * w;
        let count = n * hw;
        let gamma = store.get(self.gamma);
        let beta = store.get(self.beta);
        let (mean, var) = if train {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ci in 0..c {
                let mut s = 0.0;
                for ni in 0..n {
                    s += x.data[(ni * c + ci) * hw..(ni * c + ci + 1) * hw].iter().sum::<f64>();
                }
                let m = s / count as f64;
                let mut v = 0.0;
                for ni in 0..n {
                    v += x.data[(ni * c + ci) * hw..(ni * c + ci + 1) * hw]
                        .iter()
                        .map(|t| (t - m) * (t - m))
                        .sum::<f64>();
                }
                mean[ci] = m;
                var[ci] = v / count as f64;
            }
            let unbiased = if count > 1 {
                var.iter().map(|v| v * count as f64 / (count - 1) as f64).collect()
            } else {
                var.clone()
            };
            stats.push(StatUpdate {
                mean: self.running_mean,
                var: self.running_var,
                momentum: self.momentum,
                batch_mean: mean.clone(),
                batch_var: unbiased,
            });
            (mean, var)
        } else {
            (
                store.buffer(self.running_mean).to_vec(),
                store.buffer(self.running_var).to_vec(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = vec![0.0; x.data.len()];
        let mut y = Tensor::zeros(x.shape);
        for ni in 0..n {
            for ci in 0..c {
                let off = (ni * c + ci) * hw;
                for i in off..off + hw {
                    let xh = (x.data[i] - mean[ci]) * inv_std[ci];
                    xhat[i] = xh;
                    y.data[i] = gamma[ci] * xh + beta[ci];
                }
            }
        }
        (y, BnCache { xhat, inv_std, train })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &BnCache,
        dy: &Tensor,
        grads: Option<&mut Grads>,
        need_dx: bool,
    ) -> Option<Tensor> {
        let [n, c, h, w] = dy.shape;
        let hw = h * w;
        let count = (n * hw) as f64;
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for ni in 0..n {
            for ci in 0..c {
                let off = (ni * c + ci) * hw;
                for i in off..off + hw {
                    dgamma[ci] += dy.data[i] * cache.xhat[i];
                    dbeta[ci] += dy.data[i];
                }
            }
        }
        if let Some(grads) = grads {
            for (g, d) in grads.acc(self.gamma, c).iter_mut().zip(&dgamma) {
                *g += d;
            }
            for (g, d) in grads.acc(self.beta, c).iter_mut().zip(&dbeta) {
                *g += d;
            }
        }
        if !need_dx {
            return None;
        }
        let gamma = store.get(self.gamma);
        let mut dx = Tensor::zeros(dy.shape);
        for ni in 0..n {
            for ci in 0..c {
                let off = (ni * c + ci) * hw;
                let scale = gamma[ci] * cache.inv_std[ci];
                for i in off..off + hw {
                    dx.data[i] = if cache.train {
                        scale / count * (count * dy.data[i] - dbeta[ci] - cache.xhat[i] * dgamma[ci])
                    } else {
                        scale * dy.data[i]
                    };
                }
            }
        }
        Some(dx)
    }
}

/// Fully connected layer on `[n, features]` matrices.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

pub struct LinearCache {
    x: Tensor,
}

impl Linear {
    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> (Tensor, LinearCache) {
        let n = x.n();
        assert_eq!(x.item_len(), self.fan_in, "linear input width");
        let (i, o) = (self.fan_in, self.fan_out);
        let mut y = vec![0.0; n * o];
        for row in y.chunks_mut(o) {
            row.copy_from_slice(store.get(self.bias));
        }
        gemm(n, i, o, &x.data, (i, 1), store.get(self.weight), (1, i), 1.0, &mut y, (o, 1));
        (Tensor::matrix(n, o, y), LinearCache { x: x.clone() })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LinearCache,
        dy: &Tensor,
        grads: Option<&mut Grads>,
        need_dx: bool,
    ) -> Option<Tensor> {
        let n = dy.n();
        let (i, o) = (self.fan_in, self.fan_out);
        if let Some(grads) = grads {
            let gw = grads.acc(self.weight, o * i);
            gemm(o, n, i, &dy.data, (1, o), &cache.x.data, (i, 1), 1.0, gw, (i, 1));
            let gb = grads.acc(self.bias, o);
            for row in dy.data.chunks(o) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
        }
        if !need_dx {
            return None;
        }
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, &dy.data, (o, 1), store.get(self.weight), (i, 1), 0.0, &mut dx, (i, 1));
        Some(Tensor::matrix(n, i, dx))
    }
}

#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

pub struct PoolCache {
    in_shape: [usize; 4],
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn output_side(&self, side: usize) -> usize {
        out_side(side, self.k, self.stride, self.pad)
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, PoolCache) {
        let [n, c, h, w] = x.shape;
        let oh = self.output_side(h);
        let ow = self.output_side(w);
        let mut y = Tensor::zeros([n, c, oh, ow]);
        let mut argmax = vec![0; y.data.len()];
        for plane in 0..n * c {
            let src = &x.data[plane * h * w..(plane + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for ki in 0..self.k {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..self.k {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = iy as usize * w + ix as usize;
                            if src[idx] > best {
                                best = src[idx];
                                best_i = idx;
                            }
                        }
                    }
                    let o = plane * oh * ow + oy * ow + ox;
                    y.data[o] = best;
                    argmax[o] = plane * h * w + best_i;
                }
            }
        }
        (
            y,
            PoolCache {
                in_shape: x.shape,
                argmax,
            },
        )
    }

    pub fn backward(&self, cache: &PoolCache, dy: &Tensor) -> Tensor {
        let mut dx = Tensor::zeros(cache.in_shape);
        for (g, &i) in dy.data.iter().zip(&cache.argmax) {
            dx.data[i] += g;
        }
        dx
    }
}

pub fn relu_inplace(x: &mut Tensor) {
    for v in &mut x.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Gradient through a ReLU given its output.
pub fn relu_backward(y: &Tensor, dy: &mut Tensor) {
    for (g, v) in dy.data.iter_mut().zip(&y.data) {
        if *v <= 0.0 {
            *g = 0.0;
        }
    }
}
