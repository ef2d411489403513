#pragma once

#include <string>

#include "scaseg/ops.hpp"
#include "scaseg/synth.hpp"

namespace scaseg {

// Strip cross-attention parameters. wq/wk project each token to one scalar
// per head (the "strip"); wv/wo keep full width. Head h owns wq/wk output
// channel h and wv output channels [h*dim_head, (h+1)*dim_head).
template <class T>
struct SCAParamsT {
  LinearT<T> wq, wk, wv, wo;
  std::size_t heads = 1;
  std::size_t dim_head = 1;
  double scale = 1.0;
};
using SCAParams = SCAParamsT<Tensor>;
using SCAVars = SCAParamsT<Var>;

// Vanilla multi-head attention parameters (self- and cross-attention).
template <class T>
struct VanillaAttnParamsT {
  LinearT<T> wq, wk, wv, wo;
  std::size_t heads = 1;
  std::size_t dim_head = 1;
  double scale = 1.0;
};
using VanillaAttnParams = VanillaAttnParamsT<Tensor>;
using VanillaAttnVars = VanillaAttnParamsT<Var>;

template <class U, template <class> class P, class T, class F>
P<U> map_attn_leaves(const P<T>& p, F&& f, const std::string& prefix) {
  P<U> out;
  out.wq = map_leaves<U>(p.wq, f, prefix + ".wq");
  out.wk = map_leaves<U>(p.wk, f, prefix + ".wk");
  out.wv = map_leaves<U>(p.wv, f, prefix + ".wv");
  out.wo = map_leaves<U>(p.wo, f, prefix + ".wo");
  out.heads = p.heads;
  out.dim_head = p.dim_head;
  out.scale = p.scale;
  return out;
}

template <class U, class T, class F>
SCAParamsT<U> map_leaves(const SCAParamsT<T>& p, F&& f, const std::string& prefix) {
  return map_attn_leaves<U, SCAParamsT>(p, f, prefix);
}

template <class U, class T, class F>
VanillaAttnParamsT<U> map_leaves(const VanillaAttnParamsT<T>& p, F&& f, const std::string& prefix) {
  return map_attn_leaves<U, VanillaAttnParamsT>(p, f, prefix);
}

/// Registers every parameter tensor of `p` as a tape leaf.
template <class P>
auto bind(Tape& tape, const P& p, const std::string& prefix = "p") {
  return map_leaves<Var>(p, [&](const std::string&, const Tensor& t) { return tape.parameter(t); },
                         prefix);
}

struct AttnOutput {
  Tensor out;   // [B, N_q, C_q]
  Tensor attn;  // [B, heads, N_q, N_kv]
};

struct AttnVars {
  Var out;
  Var attn;
};

/// Weights iid N(0, std^2), biases zero. SCA scale defaults to 1 (unit key
/// width); vanilla scale to 1/sqrt(dim_head).
SCAParams make_sca_params(std::size_t c_q, std::size_t c_kv, std::size_t heads,
                          std::size_t dim_head, synth::NormalStream& rng, double std = 0.02);
VanillaAttnParams make_vanilla_params(std::size_t c_q, std::size_t c_kv, std::size_t heads,
                                      std::size_t dim_head, synth::NormalStream& rng,
                                      double std = 0.02);

/// Throws ShapeError if `p` does not map C_q/C_kv inputs as its kind requires.
void validate(const SCAParams& p, std::size_t c_q, std::size_t c_kv);
void validate(const VanillaAttnParams& p, std::size_t c_q, std::size_t c_kv);

AttnVars self_attention(Var x, const VanillaAttnVars& p);
AttnVars cross_attention(Var xq, Var xkv, const VanillaAttnVars& p);
AttnVars strip_cross_attention(Var xq, Var xkv, const SCAVars& p);

// Inference conveniences on a throwaway, non-recording tape.
AttnOutput self_attention(const Tensor& x, const VanillaAttnParams& p);
AttnOutput cross_attention(const Tensor& xq, const Tensor& xkv, const VanillaAttnParams& p);
AttnOutput strip_cross_attention(const Tensor& xq, const Tensor& xkv, const SCAParams& p);

}  // namespace scaseg
