use rand::Rng;

use crate::nn::{
    relu_backward, relu_inplace, BatchNorm2d, BnCache, Conv2d, ConvCache, Grads, Group, MaxPool2d,
    ParamStore, PoolCache, StatUpdate, Tensor,
};

/// Allocates named parameters for blocks in one group.
pub(crate) struct Builder<'a, R: Rng> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut R,
    pub group: Group,
}

impl<R: Rng> Builder<'_, R> {
    pub fn conv_bn(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        relu: bool,
    ) -> ConvBnRelu {
        let weight = self.store.add_kaiming(
            format!("{name}.conv.weight"),
            self.group,
            vec![cout, cin, k, k],
            cin * k * k,
            self.rng,
        );
        let gamma = self
            .store
            .add_const(format!("{name}.bn.weight"), self.group, vec![cout], 1.0);
        let beta = self
            .store
            .add_const(format!("{name}.bn.bias"), self.group, vec![cout], 0.0);
        let running_mean = self
            .store
            .add_buffer(format!("{name}.bn.running_mean"), self.group, cout, 0.0);
        let running_var = self
            .store
            .add_buffer(format!("{name}.bn.running_var"), self.group, cout, 1.0);
        ConvBnRelu {
            conv: Conv2d {
                weight,
                cin,
                cout,
                k,
                stride,
                pad,
            },
            bn: BatchNorm2d {
                gamma,
                beta,
                running_mean,
                running_var,
                channels: cout,
                eps: 1e-5,
                momentum: 0.1,
            },
            relu,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvBnRelu {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
    pub relu: bool,
}

pub(crate) struct CbrCache {
    conv: ConvCache,
    bn: BnCache,
    y: Option<Tensor>,
}

impl ConvBnRelu {
    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        train: bool,
        stats: &mut Vec<StatUpdate>,
    ) -> (Tensor, CbrCache) {
        let (z, conv) = self.conv.forward(store, x);
        let (mut y, bn) = self.bn.forward(store, &z, train, stats);
        let kept = if self.relu {
            relu_inplace(&mut y);
            Some(y.clone())
        } else {
            None
        };
        (y, CbrCache { conv, bn, y: kept })
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &CbrCache,
        mut dy: Tensor,
        mut grads: Option<&mut Grads>,
        need_dx: bool,
    ) -> Option<Tensor> {
        if let Some(y) = &cache.y {
            relu_backward(y, &mut dy);
        }
        let dz = self
            .bn
            .backward(store, &cache.bn, &dy, grads.as_deref_mut(), true)
            .expect("bn dx");
        self.conv.backward(store, &cache.conv, &dz, grads, need_dx)
    }

    #[cfg(test)]
    pub fn output_side(&self, side: usize) -> Option<usize> {
        self.conv.output_side(side)
    }
}

/// ResNet bottleneck: 1×1 → 3×3 (strided) → 1×1 plus identity or projection shortcut.
#[derive(Debug, Clone)]
pub(crate) struct Bottleneck {
    c1: ConvBnRelu,
    c2: ConvBnRelu,
    c3: ConvBnRelu,
    down: Option<ConvBnRelu>,
}

pub(crate) struct BottleneckCache {
    c1: CbrCache,
    c2: CbrCache,
    c3: CbrCache,
    down: Option<CbrCache>,
    y: Tensor,
}

impl Bottleneck {
    fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        train: bool,
        stats: &mut Vec<StatUpdate>,
    ) -> (Tensor, BottleneckCache) {
        let (h1, c1) = self.c1.forward(store, x, train, stats);
        let (h2, c2) = self.c2.forward(store, &h1, train, stats);
        let (mut y, c3) = self.c3.forward(store, &h2, train, stats);
        let down = match &self.down {
            Some(d) => {
                let (s, dc) = d.forward(store, x, train, stats);
                y.add_assign(&s);
                Some(dc)
            }
            None => {
                y.add_assign(x);
                None
            }
        };
        relu_inplace(&mut y);
        let cache = BottleneckCache {
            c1,
            c2,
            c3,
            down,
            y: y.clone(),
        };
        (y, cache)
    }

    fn backward(
        &self,
        store: &ParamStore,
        cache: &BottleneckCache,
        mut dy: Tensor,
        mut grads: Option<&mut Grads>,
        need_dx: bool,
    ) -> Option<Tensor> {
        relu_backward(&cache.y, &mut dy);
        let d2 = self
            .c3
            .backward(store, &cache.c3, dy.clone(), grads.as_deref_mut(), true)?;
        let d1 = self
            .c2
            .backward(store, &cache.c2, d2, grads.as_deref_mut(), true)?;
        let dx_main = self
            .c1
            .backward(store, &cache.c1, d1, grads.as_deref_mut(), need_dx);
        let dx_short = match (&self.down, &cache.down) {
            (Some(d), Some(dc)) => d.backward(store, dc, dy, grads, need_dx),
            _ => need_dx.then_some(dy),
        };
        match (dx_main, dx_short) {
            (Some(mut a), Some(b)) => {
                a.add_assign(&b);
                Some(a)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Backbone {
    Toy(Vec<ConvBnRelu>),
    Resnet {
        stem: ConvBnRelu,
        pool: MaxPool2d,
        blocks: Vec<Bottleneck>,
    },
}

pub(crate) enum BackboneCache {
    Toy(Vec<CbrCache>),
    Resnet {
        stem: CbrCache,
        pool: PoolCache,
        blocks: Vec<BottleneckCache>,
    },
}

pub(crate) const TOY_CHANNELS: [usize; 4] = [16, 32, 64, 64];

impl Backbone {
    pub fn toy<R: Rng>(b: &mut Builder<'_, R>, prefix: &str) -> Self {
        let mut cin = 3;
        let blocks = TOY_CHANNELS
            .iter()
            .enumerate()
            .map(|(i, &cout)| {
                let blk = b.conv_bn(&format!("{prefix}.block{}", i + 1), cin, cout, 3, 2, 1, true);
                cin = cout;
                blk
            })
            .collect();
        Backbone::Toy(blocks)
    }

    /// 50-layer bottleneck ResNet trunk (stages of 3, 4, 6, 3 blocks).
    pub fn resnet50<R: Rng>(b: &mut Builder<'_, R>, prefix: &str) -> Self {
        let stem = b.conv_bn(&format!("{prefix}.stem"), 3, 64, 7, 2, 3, true);
        let mut blocks = Vec::new();
        let mut cin = 64;
        for (stage, &(width, count, stride)) in [(64, 3, 1), (128, 4, 2), (256, 6, 2), (512, 3, 2)]
            .iter()
            .enumerate()
        {
            let cout = width * 4;
            for i in 0..count {
                let s = if i == 0 { stride } else { 1 };
                let name = format!("{prefix}.layer{}.{}", stage + 1, i);
                let c1 = b.conv_bn(&format!("{name}.c1"), cin, width, 1, 1, 0, true);
                let c2 = b.conv_bn(&format!("{name}.c2"), width, width, 3, s, 1, true);
                let c3 = b.conv_bn(&format!("{name}.c3"), width, cout, 1, 1, 0, false);
                let down = (i == 0).then(|| b.conv_bn(&format!("{name}.down"), cin, cout, 1, s, 0, false));
                blocks.push(Bottleneck { c1, c2, c3, down });
                cin = cout;
            }
        }
        Backbone::Resnet {
            stem,
            pool: MaxPool2d {
                k: 3,
                stride: 2,
                pad: 1,
            },
            blocks,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            Backbone::Toy(blocks) => blocks.last().map_or(3, |b| b.conv.cout),
            Backbone::Resnet { blocks, .. } => blocks.last().map_or(64, |b| b.c3.conv.cout),
        }
    }

    #[cfg(test)]
    pub fn output_side(&self, side: usize) -> Option<usize> {
        match self {
            Backbone::Toy(blocks) => blocks.iter().try_fold(side, |s, b| b.output_side(s)),
            Backbone::Resnet { stem, pool, blocks } => {
                let s = pool.output_side(stem.output_side(side)?);
                blocks.iter().try_fold(s, |s, b| b.c2.output_side(s))
            }
        }
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        x: &Tensor,
        train: bool,
        stats: &mut Vec<StatUpdate>,
    ) -> (Tensor, BackboneCache) {
        match self {
            Backbone::Toy(blocks) => {
                let (y, caches) = run_chain(blocks, store, x, train, stats);
                (y, BackboneCache::Toy(caches))
            }
            Backbone::Resnet { stem, pool, blocks } => {
                let (h, sc) = stem.forward(store, x, train, stats);
                let (mut y, pc) = pool.forward(&h);
                let mut caches = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let (next, c) = b.forward(store, &y, train, stats);
                    caches.push(c);
                    y = next;
                }
                (
                    y,
                    BackboneCache::Resnet {
                        stem: sc,
                        pool: pc,
                        blocks: caches,
                    },
                )
            }
        }
    }

    /// Backpropagates into the backbone parameters; the image gradient is never needed.
    pub fn backward(&self, store: &ParamStore, cache: &BackboneCache, dy: Tensor, grads: &mut Grads) {
        match (self, cache) {
            (Backbone::Toy(blocks), BackboneCache::Toy(caches)) => {
                backward_chain(blocks, store, caches, dy, Some(grads), false);
            }
            (
                Backbone::Resnet { stem, pool, blocks },
                BackboneCache::Resnet {
                    stem: sc,
                    pool: pc,
                    blocks: bcs,
                },
            ) => {
                let mut d = dy;
                for (b, c) in blocks.iter().zip(bcs).rev() {
                    d = b.backward(store, c, d, Some(grads), true).expect("block dx");
                }
                let d = pool.backward(pc, &d);
                stem.backward(store, sc, d, Some(grads), false);
            }
            _ => unreachable!("backbone cache mismatch"),
        }
    }
}

pub(crate) fn run_chain(
    blocks: &[ConvBnRelu],
    store: &ParamStore,
    x: &Tensor,
    train: bool,
    stats: &mut Vec<StatUpdate>,
) -> (Tensor, Vec<CbrCache>) {
    let mut caches = Vec::with_capacity(blocks.len());
    let mut y: Option<Tensor> = None;
    for b in blocks {
        let (next, c) = b.forward(store, y.as_ref().unwrap_or(x), train, stats);
        caches.push(c);
        y = Some(next);
    }
    (y.unwrap_or_else(|| x.clone()), caches)
}

pub(crate) fn backward_chain(
    blocks: &[ConvBnRelu],
    store: &ParamStore,
    caches: &[CbrCache],
    dy: Tensor,
    mut grads: Option<&mut Grads>,
    need_dx: bool,
) -> Option<Tensor> {
    let mut d = dy;
    for (i, (b, c)) in blocks.iter().zip(caches).enumerate().rev() {
        let want = i > 0 || need_dx;
        match b.backward(store, c, d, grads.as_deref_mut(), want) {
            Some(next) => d = next,
            None => return None,
        }
    }
    Some(d)
}
