#include "scaseg/ops.hpp"

#include "scaseg/kernels.hpp"

namespace scaseg {

namespace k = kernels;

using Grads = std::vector<Tensor>;

void validate(const LinearParams& p, const std::string& name) {
  if (p.weight.rank() != 2) {
    throw ShapeError(name + ": weight must be 2-D, got " + to_string(p.weight.shape()));
  }
  if (p.bias && p.bias->shape() != Shape{p.weight.dim(0)}) {
    throw ShapeError(name + ": bias " + to_string(p.bias->shape()) + " does not match weight " +
                     to_string(p.weight.shape()));
  }
}

Var matmul(Var a, Var b) {
  return a.tape->emit(k::matmul(a.value(), b.value()), {a, b},
                      [a, b](const Tensor& g, const Tensor&) {
                        auto [ga, gb] = k::matmul_backward(a.value(), b.value(), g);
                        return Grads{std::move(ga), std::move(gb)};
                      });
}

Var linear(Var x, const LinearVars& p) {
  const Tensor* bias = p.bias ? &p.bias->value() : nullptr;
  std::vector<Var> inputs{x, p.weight};
  if (p.bias) inputs.push_back(*p.bias);
  const bool has_bias = p.bias.has_value();
  return x.tape->emit(k::linear(x.value(), p.weight.value(), bias), inputs,
                      [x, w = p.weight, has_bias](const Tensor& g, const Tensor&) {
                        auto r = k::linear_backward(x.value(), w.value(), has_bias, g);
                        Grads out{std::move(r.x), std::move(r.weight)};
                        if (has_bias) out.push_back(std::move(r.bias));
                        return out;
                      });
}

Var softmax_lastdim(Var x) {
  return x.tape->emit(k::softmax_lastdim(x.value()), {x}, [](const Tensor& g, const Tensor& y) {
    return Grads{k::softmax_lastdim_backward(y, g)};
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  return x.tape->emit(k::layernorm(x.value(), gamma.value(), beta.value(), eps), {x, gamma, beta},
                      [x, gamma, eps](const Tensor& g, const Tensor&) {
                        auto r = k::layernorm_backward(x.value(), gamma.value(), eps, g);
                        return Grads{std::move(r.x), std::move(r.gamma), std::move(r.beta)};
                      });
}

Var depthwise_conv(Var x, Var kernel, std::optional<Var> bias) {
  std::vector<Var> inputs{x, kernel};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return x.tape->emit(
      k::depthwise_conv(x.value(), kernel.value(), bias ? &bias->value() : nullptr), inputs,
      [x, kernel, has_bias](const Tensor& g, const Tensor&) {
        auto r = k::depthwise_conv_backward(x.value(), kernel.value(), has_bias, g);
        Grads out{std::move(r.x), std::move(r.kernel)};
        if (has_bias) out.push_back(std::move(r.bias));
        return out;
      });
}

Var global_avg_pool(Var x) {
  return x.tape->emit(k::global_avg_pool(x.value()), {x}, [x](const Tensor& g, const Tensor&) {
    return Grads{k::global_avg_pool_backward(x.shape(), g)};
  });
}

Var adaptive_avg_pool(Var x, std::size_t out_h, std::size_t out_w) {
  return x.tape->emit(k::adaptive_avg_pool(x.value(), out_h, out_w), {x},
                      [x](const Tensor& g, const Tensor&) {
                        return Grads{k::adaptive_avg_pool_backward(x.shape(), g)};
                      });
}

Var bilinear_resize(Var x, std::size_t out_h, std::size_t out_w) {
  return x.tape->emit(k::bilinear_resize(x.value(), out_h, out_w), {x},
                      [x](const Tensor& g, const Tensor&) {
                        return Grads{k::bilinear_resize_backward(x.shape(), g)};
                      });
}

Var reshape(Var x, Shape shape) {
  return x.tape->emit(x.value().reshaped(std::move(shape)), {x},
                      [x](const Tensor& g, const Tensor&) { return Grads{g.reshaped(x.shape())}; });
}

Var permute(Var x, std::vector<std::size_t> perm) {
  Tensor out = k::permute(x.value(), perm);
  return x.tape->emit(std::move(out), {x},
                      [inv = k::inverse_permutation(perm)](const Tensor& g, const Tensor&) {
                        return Grads{k::permute(g, inv)};
                      });
}

Var transpose_last2(Var x) {
  std::vector<std::size_t> perm(x.value().rank());
  if (perm.size() < 2) throw ShapeError("transpose_last2: rank < 2 for " + to_string(x.shape()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(x, std::move(perm));
}

Var concat(const std::vector<Var>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  std::vector<const Tensor*> values;
  std::vector<std::size_t> extents;
  for (const Var& v : xs) {
    values.push_back(&v.value());
    if (axis >= v.value().rank()) throw ShapeError("concat: axis out of range for " + to_string(v.shape()));
    extents.push_back(v.shape()[axis]);
  }
  return xs.front().tape->emit(k::concat(values, axis), xs,
                               [axis, extents](const Tensor& g, const Tensor&) {
                                 return k::split(g, axis, extents);
                               });
}

Var channel_scale(Var x, Var w) {
  return x.tape->emit(k::channel_scale(x.value(), w.value()), {x, w},
                      [x, w](const Tensor& g, const Tensor&) {
                        auto [gx, gw] = k::channel_scale_backward(x.value(), w.value(), g);
                        return Grads{std::move(gx), std::move(gw)};
                      });
}

Var add(Var a, Var b) {
  return a.tape->emit(k::add(a.value(), b.value()), {a, b},
                      [](const Tensor& g, const Tensor&) { return Grads{g, g}; });
}

Var mul(Var a, Var b) {
  return a.tape->emit(k::mul(a.value(), b.value()), {a, b}, [a, b](const Tensor& g, const Tensor&) {
    return Grads{k::mul(g, b.value()), k::mul(g, a.value())};
  });
}

Var scale(Var x, double s) {
  return x.tape->emit(k::scale(x.value(), s), {x},
                      [s](const Tensor& g, const Tensor&) { return Grads{k::scale(g, s)}; });
}

Var relu(Var x) {
  return x.tape->emit(k::relu(x.value()), {x}, [x](const Tensor& g, const Tensor&) {
    return Grads{k::relu_backward(x.value(), g)};
  });
}

Var gelu(Var x) {
  return x.tape->emit(k::gelu(x.value()), {x}, [x](const Tensor& g, const Tensor&) {
    return Grads{k::gelu_backward(x.value(), g)};
  });
}

Var sigmoid(Var x) {
  return x.tape->emit(k::sigmoid(x.value()), {x}, [](const Tensor& g, const Tensor& y) {
    return Grads{k::sigmoid_backward(y, g)};
  });
}

Var sum(Var x) {
  return x.tape->emit(Tensor::scalar(k::sum(x.value())), {x}, [x](const Tensor& g, const Tensor&) {
    return Grads{Tensor(x.shape(), g[0])};
  });
}

Var tokens_to_map(Var x, std::size_t h, std::size_t w) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != h * w) {
    throw ShapeError("tokens_to_map: " + to_string(s) + " is not a token tensor for a " +
                     std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  return reshape(transpose_last2(x), {s[0], s[2], h, w});
}

Var map_to_tokens(Var x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("map_to_tokens: expected [B, C, H, W], got " + to_string(s));
  return transpose_last2(reshape(x, {s[0], s[1], s[2] * s[3]}));
}

}  // namespace scaseg
