#pragma once

#include <array>
#include <optional>
#include <string>

#include "scaseg/attention.hpp"
#include "scaseg/synth.hpp"

namespace scaseg {

enum class MixerKind { kSA, kCA, kSCA };

std::string to_string(MixerKind kind);
/// Accepts "SA", "CA", "SCA" (case-sensitive). Throws std::invalid_argument.
MixerKind parse_mixer(const std::string& name);

template <class T>
struct LayerNormT {
  T gamma, beta;
};

// Local perception: x_d = dw3(relu(dw1(x))), SE gate
// w = sigmoid(fc2(relu(fc1(avgpool(x_d))))), y = x + dw_out(w * x_d).
template <class T>
struct LPMParamsT {
  T dw1_kernel, dw1_bias;        // [C, 1, 1], [C]
  T dw3_kernel, dw3_bias;        // [C, 3, 3], [C]
  LinearT<T> fc1, fc2;           // C -> C/r -> C
  T dw_out_kernel, dw_out_bias;  // [C, 1, 1], [C]
  std::size_t reduction = 4;
};

// Cross-layer block. Exactly one of `sca` / `attn` is set, matching the
// mixer kind; `ln1_kv` is absent for self-attention; `lpm` is absent when the
// local perception branch is disabled.
template <class T>
struct CLBParamsT {
  LayerNormT<T> ln1;
  std::optional<LayerNormT<T>> ln1_kv;
  std::optional<SCAParamsT<T>> sca;
  std::optional<VanillaAttnParamsT<T>> attn;
  LayerNormT<T> ln2;
  std::optional<LPMParamsT<T>> lpm;
  LayerNormT<T> ln3;
  LinearT<T> mlp1, mlp2;  // C -> e*C -> C
};

// clb[i] serves encoder stage i + 1. Stages run 4 -> 1.
template <class T>
struct DecoderParamsT {
  std::array<CLBParamsT<T>, 4> clb;
  LinearT<T> fuse_mlp;  // sum(C) -> num_classes
  std::size_t num_classes = 19;
  std::array<bool, 4> cross_layer_enabled{true, true, true, true};
  MixerKind mixer_kind = MixerKind::kSCA;
  bool lpm_enabled = true;
  double eps = 1e-6;
};

using LPMParams = LPMParamsT<Tensor>;
using CLBParams = CLBParamsT<Tensor>;
using DecoderParams = DecoderParamsT<Tensor>;
using LPMVars = LPMParamsT<Var>;
using CLBVars = CLBParamsT<Var>;
using DecoderVars = DecoderParamsT<Var>;

template <class U, class T, class F>
LayerNormT<U> map_leaves(const LayerNormT<T>& p, F&& f, const std::string& prefix) {
  return {f(prefix + ".gamma", p.gamma), f(prefix + ".beta", p.beta)};
}

template <class U, class T, class F>
LPMParamsT<U> map_leaves(const LPMParamsT<T>& p, F&& f, const std::string& prefix) {
  LPMParamsT<U> out{f(prefix + ".dw1.kernel", p.dw1_kernel),
                    f(prefix + ".dw1.bias", p.dw1_bias),
                    f(prefix + ".dw3.kernel", p.dw3_kernel),
                    f(prefix + ".dw3.bias", p.dw3_bias),
                    map_leaves<U>(p.fc1, f, prefix + ".fc1"),
                    map_leaves<U>(p.fc2, f, prefix + ".fc2"),
                    f(prefix + ".dw_out.kernel", p.dw_out_kernel),
                    f(prefix + ".dw_out.bias", p.dw_out_bias),
                    p.reduction};
  return out;
}

template <class U, class T, class F>
CLBParamsT<U> map_leaves(const CLBParamsT<T>& p, F&& f, const std::string& prefix) {
  CLBParamsT<U> out;
  out.ln1 = map_leaves<U>(p.ln1, f, prefix + ".ln1");
  if (p.ln1_kv) out.ln1_kv = map_leaves<U>(*p.ln1_kv, f, prefix + ".ln1_kv");
  if (p.sca) out.sca = map_leaves<U>(*p.sca, f, prefix + ".sca");
  if (p.attn) out.attn = map_leaves<U>(*p.attn, f, prefix + ".attn");
  out.ln2 = map_leaves<U>(p.ln2, f, prefix + ".ln2");
  if (p.lpm) out.lpm = map_leaves<U>(*p.lpm, f, prefix + ".lpm");
  out.ln3 = map_leaves<U>(p.ln3, f, prefix + ".ln3");
  out.mlp1 = map_leaves<U>(p.mlp1, f, prefix + ".mlp1");
  out.mlp2 = map_leaves<U>(p.mlp2, f, prefix + ".mlp2");
  return out;
}

template <class U, class T, class F>
DecoderParamsT<U> map_leaves(const DecoderParamsT<T>& p, F&& f, const std::string& prefix) {
  DecoderParamsT<U> out;
  const std::string dot = prefix.empty() ? "" : prefix + ".";
  for (int s = 3; s >= 0; --s) {
    out.clb[s] = map_leaves<U>(p.clb[s], f, dot + "clb" + std::to_string(s + 1));
  }
  out.fuse_mlp = map_leaves<U>(p.fuse_mlp, f, dot + "fuse_mlp");
  out.num_classes = p.num_classes;
  out.cross_layer_enabled = p.cross_layer_enabled;
  out.mixer_kind = p.mixer_kind;
  out.lpm_enabled = p.lpm_enabled;
  out.eps = p.eps;
  return out;
}

/// Calls f(name, tensor) for every parameter leaf of a Tensor bundle.
template <class P, class F>
void for_each_leaf(const P& p, F&& f, const std::string& prefix = "") {
  (void)map_leaves<int>(p, [&](const std::string& name, const Tensor& t) {
    f(name, t);
    return 0;
  }, prefix);
}

/// Hyper-parameters for building a DecoderParams.
struct DecoderConfig {
  MixerKind mixer = MixerKind::kSCA;
  std::size_t num_classes = 19;
  std::array<std::size_t, 4> heads{1, 2, 4, 8};
  std::size_t dim_head = 8;
  std::size_t mlp_expansion = 4;
  bool lpm_enabled = true;
  std::size_t lpm_reduction = 4;
  std::array<bool, 4> cross_layer_enabled{true, true, true, true};
  double eps = 1e-6;
  double sca_scale = 1.0;
  /// Unset means 1/sqrt(dim_head).
  std::optional<double> vanilla_scale;
  double init_std = 0.02;
  /// Std of the bias draws; 0 keeps every bias at zero.
  double bias_std = 0.0;
  /// Zero the final projection of every residual branch (wo, dw_out,
  /// second MLP linear) so each block starts as the identity.
  bool identity_init = false;
};

/// Seeded construction. Weights ~ N(0, init_std^2), biases ~ N(0, bias_std^2)
/// from a separate stream, layernorm gamma 1 / beta 0. Under identity_init the
/// biases of the zeroed projections stay zero.
DecoderParams make_decoder_params(const std::array<std::size_t, 4>& channels,
                                  const DecoderConfig& cfg, std::uint64_t seed);

/// Throws ShapeError if `p` does not fit a pyramid with these channels.
void validate(const DecoderParams& p, const std::array<std::size_t, 4>& channels);

struct Grid {
  std::size_t h = 1, w = 1;
  std::size_t tokens() const { return h * w; }
};

/// Mixed key/value source for `stage` (1..4): pooled F_1..F_stage then
/// D_{stage+1}..D_4, each pooled to `kv_grid`, concatenated along channels.
/// Maps are [B, C, h, w]; returns tokens [B, kv_grid.tokens(), sum(C)].
Var build_mixed_kv(const std::array<Var, 4>& f_maps, const std::array<std::optional<Var>, 4>& d_maps,
                   int stage, Grid kv_grid);
Tensor build_mixed_kv(const synth::FeaturePyramid& pyramid,
                      const std::array<std::optional<Tensor>, 4>& d_maps, int stage);

/// The gated depthwise branch alone: dw_out(w * x_d) on tokens [B, N, C].
Var lpm_branch(Var x, Grid grid, const LPMVars& p);
/// x + lpm_branch(x).
Var lpm(Var x, Grid grid, const LPMVars& p);
Tensor lpm(const Tensor& x, Grid grid, const LPMParams& p);

struct ClbOutput {
  Var out;   // [B, N_i, C_i]
  Var attn;  // [B, heads, N_i, N_kv]
};

/// One cross-layer block:
///   Z_G  = mixer(LN1(f), LN1_kv(m)) + f
///   Z_GL = Z_G + lpm_branch(LN2(Z_G))     (if enabled, else Z_G)
///   D    = mlp2(gelu(mlp1(LN3(Z_GL)))) + Z_GL
ClbOutput clb(Var f, Var m, Grid grid, const CLBVars& p, MixerKind mixer, bool lpm_enabled,
              double eps);

struct DecodeVars {
  std::array<Var, 4> m, d, attn;  // d in map form [B, C_i, h_i, w_i]
  Var mask;                       // [B, num_classes, H/4, W/4]
};

struct DecodeTrace {
  std::array<Tensor, 4> m, d, attn;
  Tensor mask;
};

DecodeVars decode(const std::array<Var, 4>& f_maps, const DecoderVars& p);
DecodeTrace decode(const synth::FeaturePyramid& pyramid, const DecoderParams& p);

}  // namespace scaseg
