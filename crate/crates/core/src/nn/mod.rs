//! Minimal dense-tensor network engine: NCHW `f64` tensors, a named parameter
//! store partitioned into groups, and layers with hand-written backward passes.
//!
//! Layers never mutate parameters during `forward`; batch-norm running
//! statistics are returned as [`StatUpdate`]s and applied by the owner, so a
//! frozen model can be shared across threads for inference.

mod layers;
mod store;
mod tensor;

pub use layers::{
    relu_backward, relu_inplace, BatchNorm2d, BnCache, Conv2d, ConvCache, Linear, LinearCache,
    MaxPool2d, PoolCache,
};
pub use store::{BufferId, Grads, Group, GroupSet, Param, ParamId, ParamStore, StatUpdate};
pub use tensor::Tensor;

/// `C = A·B + beta·C` with arbitrary strides, on top of `matrixmultiply`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || a.len() >= (m - 1) * rsa + (k - 1) * csa + 1);
    debug_assert!(k == 0 || b.len() >= (k - 1) * rsb + (n - 1) * csb + 1);
    debug_assert!(c.len() >= (m - 1) * rsc + (n - 1) * csc + 1);
    // SAFETY: the slice bounds above cover every element addressed by the
    // given shapes and strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
