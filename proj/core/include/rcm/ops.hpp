#pragma once

#include <span>

#include "rcm/tensor.hpp"

// Differentiable tensor operations. Broadcasting is limited to bias-add and
// per-channel / per-sample scaling; everything else requires equal shapes.
namespace rcm {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor silu(const Tensor& x);

/// Multiplies sample b of a batch-major tensor by factors[b] (constants, not differentiated).
Tensor scale_batch(const Tensor& x, std::span<const double> factors);

/// Per-sample mean of squared error scaled by weights[b], averaged over the batch.
Tensor weighted_mse(const Tensor& pred, const Tensor& target, std::span<const double> weights);

/// Cross-correlation of [B,Cin,H,W] with [Cout,Cin,k,k] plus bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride, int padding);

/// Normalizes each (sample, channel group) to zero mean and unit variance.
Tensor group_norm(const Tensor& input, int groups, double eps);

/// y[b,c,:,:] = x[b,c,:,:] * scale[b,c] + shift[b,c].
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift);

/// y = x W^T + b for x [B,Din], W [Dout,Din], b [Dout].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Channel concatenation of [B,Ca,H,W] and [B,Cb,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Nearest-neighbour 2x spatial upsampling of [B,C,H,W].
Tensor upsample_nearest2x(const Tensor& x);

}  // namespace rcm
