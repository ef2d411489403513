#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scaseg/tape.hpp"

// Differentiable operations on tape values. Each op runs the matching
// kernel forward and records its analytic backward.
namespace scaseg {

/// Fully-connected layer parameters, weight [out, in] and optional bias [out].
/// T is Tensor for stored parameters and Var once bound to a tape.
template <class T>
struct LinearT {
  T weight;
  std::optional<T> bias;
};
using LinearParams = LinearT<Tensor>;
using LinearVars = LinearT<Var>;

template <class U, class T, class F>
LinearT<U> map_leaves(const LinearT<T>& p, F&& f, const std::string& prefix) {
  LinearT<U> out{f(prefix + ".weight", p.weight), std::nullopt};
  if (p.bias) out.bias = f(prefix + ".bias", *p.bias);
  return out;
}

/// Checks the weight is 2-D and the bias matches the output extent.
void validate(const LinearParams& p, const std::string& name);

Var matmul(Var a, Var b);
Var linear(Var x, const LinearVars& p);
Var softmax_lastdim(Var x);
Var layernorm(Var x, Var gamma, Var beta, double eps);
Var depthwise_conv(Var x, Var kernel, std::optional<Var> bias);
Var global_avg_pool(Var x);
Var adaptive_avg_pool(Var x, std::size_t out_h, std::size_t out_w);
Var bilinear_resize(Var x, std::size_t out_h, std::size_t out_w);

Var reshape(Var x, Shape shape);
Var permute(Var x, std::vector<std::size_t> perm);
/// Swaps the last two axes.
Var transpose_last2(Var x);
Var concat(const std::vector<Var>& xs, std::size_t axis);
Var channel_scale(Var x, Var w);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double s);
Var relu(Var x);
Var gelu(Var x);
Var sigmoid(Var x);
/// Sum of all elements, as a [1] tensor.
Var sum(Var x);

/// [B, N, C] tokens to a [B, C, h, w] map and back.
Var tokens_to_map(Var x, std::size_t h, std::size_t w);
Var map_to_tokens(Var x);

}  // namespace scaseg
