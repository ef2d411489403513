#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "scaseg/tensor.hpp"

// Pure forward kernels and their analytic vector-Jacobian products. Each
// `*_backward` takes the forward operands plus the upstream gradient `g`
// and returns gradients shaped like the operands. Reductions run in a fixed
// sequential order so results are bitwise reproducible.
namespace scaseg::kernels {

/// Batched matrix product [.., m, k] x [.., k, n] -> [.., m, n]. Leading batch
/// extents must match or be 1 (shorter ranks are left-padded with 1).
Tensor matmul(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> matmul_backward(const Tensor& a, const Tensor& b, const Tensor& g);

/// x . weight^T + bias over the trailing axis.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias);
struct LinearGrads {
  Tensor x, weight, bias;
};
LinearGrads linear_backward(const Tensor& x, const Tensor& weight, bool has_bias, const Tensor& g);

Tensor softmax_lastdim(const Tensor& x);
/// Uses the forward output `y`.
Tensor softmax_lastdim_backward(const Tensor& y, const Tensor& g);

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
struct LayerNormGrads {
  Tensor x, gamma, beta;
};
LayerNormGrads layernorm_backward(const Tensor& x, const Tensor& gamma, double eps,
                                  const Tensor& g);

/// Per-channel cross-correlation with zero same-padding. kernel is [C, kh, kw]
/// with kh, kw in {1, 3}.
Tensor depthwise_conv(const Tensor& x, const Tensor& kernel, const Tensor* bias);
struct ConvGrads {
  Tensor x, kernel, bias;
};
ConvGrads depthwise_conv_backward(const Tensor& x, const Tensor& kernel, bool has_bias,
                                  const Tensor& g);

Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Shape& x_shape, const Tensor& g);

Tensor adaptive_avg_pool(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor adaptive_avg_pool_backward(const Shape& x_shape, const Tensor& g);

/// Half-pixel-centre bilinear interpolation with edge clamping.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor bilinear_resize_backward(const Shape& x_shape, const Tensor& g);

/// out[...] = x[...] with axes reordered so that out axis i is x axis perm[i].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm);

Tensor concat(const std::vector<const Tensor*>& xs, std::size_t axis);
/// Slices `g` back into pieces with the given extents along `axis`.
std::vector<Tensor> split(const Tensor& g, std::size_t axis, const std::vector<std::size_t>& extents);

/// x[b, c, ...] * w[b, c], broadcast over the trailing axes.
Tensor channel_scale(const Tensor& x, const Tensor& w);
std::pair<Tensor, Tensor> channel_scale_backward(const Tensor& x, const Tensor& w, const Tensor& g);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& g);
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& g);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& g);
double sum(const Tensor& x);

}  // namespace scaseg::kernels
