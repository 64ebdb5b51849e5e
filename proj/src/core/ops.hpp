#pragma once

#include <utility>
#include <vector>

#include "tensor.hpp"

namespace unist {

// Differentiable primitives. Every op builds a tape node when any input
// requires grad; backward lambdas work on raw buffers and never re-enter
// the op layer. All math is float64 and single-threaded, so a fixed seed
// plus a fixed op sequence reproduces results bit for bit.

// Elementwise, same shape required.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor sqrt_elem(const Tensor& a);
Tensor abs_elem(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// y = x + v broadcast over the last axis; v has shape [K] with K = last dim.
Tensor add_rowvec(const Tensor& x, const Tensor& v);

// Layout transforms (always materialized copies).
Tensor reshape(const Tensor& x, const std::vector<int>& new_shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor narrow(const Tensor& x, int axis, int start, int length);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Reductions.
Tensor sum_all(const Tensor& x);                     // -> rank-0 scalar
Tensor sum_lastdim(const Tensor& x);                 // [..., K] -> [...]
Tensor spatial_mean(const Tensor& x);                // [B,C,H,W] -> [B,C]
Tensor broadcast_spatial(const Tensor& m, int h, int w);  // [B,C] -> [B,C,H,W]

// Batched matrix product with numpy-style broadcasting over batch dims:
// [..., M, K] x [..., K, N] -> [..., M, N].
Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically stabilized softmax along the given axis; outputs along the
// axis are positive and sum to 1 within 1e-12.
Tensor softmax(const Tensor& x, int axis);

// Per-position normalization over the last dim D: (x - mean)/sqrt(var + eps)
// * gamma + beta, population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Cross-correlation (no kernel flip), kernels 1x1 or 3x3, explicit padding.
// x: [B,C,H,W], w: [O,C,kh,kw], b: [O]. Output dims must come out integral.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1, int pad = 0);

Tensor avg_pool2(const Tensor& x);          // [B,C,H,W] -> [B,C,H/2,W/2], dims must be even
Tensor upsample_nearest2(const Tensor& x);  // [B,C,H,W] -> [B,C,2H,2W]

// Per-(batch, channel) spatial mean and population standard deviation,
// sigma = sqrt(mean of squared deviations + eps).
std::pair<Tensor, Tensor> instance_stats(const Tensor& x, double eps = 1e-5);

// Leaf copy cut off from the tape.
Tensor detach(const Tensor& x);

// sqrt(sum(x*x)) over all elements, as a tape op.
Tensor l2_norm(const Tensor& x);

}  // namespace unist
