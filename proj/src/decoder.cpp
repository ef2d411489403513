#include "scaseg/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace scaseg {

std::string to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::kSA: return "SA";
    case MixerKind::kCA: return "CA";
    case MixerKind::kSCA: return "SCA";
  }
  return "?";
}

MixerKind parse_mixer(const std::string& name) {
  if (name == "SA") return MixerKind::kSA;
  if (name == "CA") return MixerKind::kCA;
  if (name == "SCA") return MixerKind::kSCA;
  throw std::invalid_argument("unknown mixer '" + name + "' (expected SA, CA or SCA)");
}

namespace {

LinearParams make_linear(std::size_t in, std::size_t out, synth::NormalStream& rng, double std,
                         bool zero) {
  LinearParams p{Tensor({out, in}), Tensor({out}, 0.0)};
  if (!zero) synth::fill_normal(p.weight, rng, std);
  return p;
}

LayerNormT<Tensor> make_layernorm(std::size_t c) { return {Tensor({c}, 1.0), Tensor({c}, 0.0)}; }

Tensor make_kernel(std::size_t c, std::size_t k, synth::NormalStream& rng, double std, bool zero) {
  Tensor t({c, k, k}, 0.0);
  if (!zero) synth::fill_normal(t, rng, std);
  return t;
}

LPMParams make_lpm(std::size_t c, std::size_t r, synth::NormalStream& rng, double std,
                   bool identity) {
  if (r == 0 || c % r != 0) {
    throw std::invalid_argument("lpm: channel count " + std::to_string(c) +
                                " is not divisible by reduction " + std::to_string(r));
  }
  LPMParams p;
  p.dw1_kernel = make_kernel(c, 1, rng, std, false);
  p.dw1_bias = Tensor({c}, 0.0);
  p.dw3_kernel = make_kernel(c, 3, rng, std, false);
  p.dw3_bias = Tensor({c}, 0.0);
  p.fc1 = make_linear(c, c / r, rng, std, false);
  p.fc2 = make_linear(c / r, c, rng, std, false);
  p.dw_out_kernel = make_kernel(c, 1, rng, std, identity);
  p.dw_out_bias = Tensor({c}, 0.0);
  p.reduction = r;
  return p;
}

void expect_shape(const Tensor& t, const Shape& s, const std::string& name) {
  if (t.shape() != s) {
    throw ShapeError(name + ": expected " + to_string(s) + ", got " + to_string(t.shape()));
  }
}

void stage_check(int stage) {
  if (stage < 1 || stage > 4) throw std::invalid_argument("stage must be in 1..4");
}

}  // namespace

DecoderParams make_decoder_params(const std::array<std::size_t, 4>& channels,
                                  const DecoderConfig& cfg, std::uint64_t seed) {
  if (cfg.num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");
  if (cfg.dim_head == 0) throw std::invalid_argument("dim_head must be >= 1");
  if (cfg.mlp_expansion == 0) throw std::invalid_argument("mlp_expansion must be >= 1");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (!(cfg.bias_std >= 0.0)) throw std::invalid_argument("bias_std must be >= 0");
  synth::NormalStream rng(synth::splitmix64_next(seed ^ 0x5CA5E6DECULL).first);
  const double std = cfg.init_std;
  const bool zero = cfg.identity_init;
  std::size_t total = 0;
  for (auto c : channels) total += c;

  DecoderParams p;
  p.num_classes = cfg.num_classes;
  p.cross_layer_enabled = cfg.cross_layer_enabled;
  p.mixer_kind = cfg.mixer;
  p.lpm_enabled = cfg.lpm_enabled;
  p.eps = cfg.eps;
  for (int s = 3; s >= 0; --s) {
    const std::size_t c = channels[s];
    const std::size_t c_kv = cfg.cross_layer_enabled[s] ? total : c;
    const std::size_t heads = cfg.heads[s];
    if (heads == 0) throw std::invalid_argument("heads must be >= 1");
    CLBParams& b = p.clb[s];
    b.ln1 = make_layernorm(c);
    if (cfg.mixer == MixerKind::kSCA) {
      b.ln1_kv = make_layernorm(c_kv);
      b.sca = make_sca_params(c, c_kv, heads, cfg.dim_head, rng, std);
      b.sca->scale = cfg.sca_scale;
      if (zero) b.sca->wo.weight = Tensor::zeros_like(b.sca->wo.weight);
    } else {
      const std::size_t kv = cfg.mixer == MixerKind::kSA ? c : c_kv;
      if (cfg.mixer == MixerKind::kCA) b.ln1_kv = make_layernorm(c_kv);
      b.attn = make_vanilla_params(c, kv, heads, cfg.dim_head, rng, std);
      if (cfg.vanilla_scale) b.attn->scale = *cfg.vanilla_scale;
      if (zero) b.attn->wo.weight = Tensor::zeros_like(b.attn->wo.weight);
    }
    b.ln2 = make_layernorm(c);
    if (cfg.lpm_enabled) b.lpm = make_lpm(c, cfg.lpm_reduction, rng, std, zero);
    b.ln3 = make_layernorm(c);
    b.mlp1 = make_linear(c, cfg.mlp_expansion * c, rng, std, false);
    b.mlp2 = make_linear(cfg.mlp_expansion * c, c, rng, std, zero);
  }
  p.fuse_mlp = make_linear(total, cfg.num_classes, rng, std, false);
  if (cfg.bias_std > 0.0) {
    synth::NormalStream bias_rng(synth::splitmix64_next(seed ^ 0xB1A5B1A5ULL).first);
    auto ends_with = [](const std::string& s, const std::string& tail) {
      return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
    };
    p = map_leaves<Tensor>(p, [&](const std::string& name, const Tensor& t) {
      const bool zeroed = zero && (ends_with(name, ".wo.bias") || ends_with(name, ".dw_out.bias") ||
                                   ends_with(name, ".mlp2.bias"));
      if (!ends_with(name, ".bias") || zeroed) return t;
      Tensor b(t.shape());
      synth::fill_normal(b, bias_rng, cfg.bias_std);
      return b;
    }, "");
  }
  return p;
}

void validate(const DecoderParams& p, const std::array<std::size_t, 4>& channels) {
  std::size_t total = 0;
  for (auto c : channels) total += c;
  for (int s = 0; s < 4; ++s) {
    const CLBParams& b = p.clb[s];
    const std::size_t c = channels[s];
    const std::size_t c_kv = p.cross_layer_enabled[s] ? total : c;
    const std::string name = "clb" + std::to_string(s + 1);
    expect_shape(b.ln1.gamma, {c}, name + ".ln1.gamma");
    expect_shape(b.ln2.gamma, {c}, name + ".ln2.gamma");
    expect_shape(b.ln3.gamma, {c}, name + ".ln3.gamma");
    switch (p.mixer_kind) {
      case MixerKind::kSCA:
        if (!b.sca || !b.ln1_kv) throw ShapeError(name + ": SCA mixer parameters missing");
        expect_shape(b.ln1_kv->gamma, {c_kv}, name + ".ln1_kv.gamma");
        validate(*b.sca, c, c_kv);
        break;
      case MixerKind::kCA:
        if (!b.attn || !b.ln1_kv) throw ShapeError(name + ": CA mixer parameters missing");
        expect_shape(b.ln1_kv->gamma, {c_kv}, name + ".ln1_kv.gamma");
        validate(*b.attn, c, c_kv);
        break;
      case MixerKind::kSA:
        if (!b.attn) throw ShapeError(name + ": SA mixer parameters missing");
        validate(*b.attn, c, c);
        break;
    }
    if (p.lpm_enabled) {
      if (!b.lpm) throw ShapeError(name + ": LPM parameters missing");
      expect_shape(b.lpm->dw1_kernel, {c, 1, 1}, name + ".lpm.dw1.kernel");
      expect_shape(b.lpm->dw3_kernel, {c, 3, 3}, name + ".lpm.dw3.kernel");
      expect_shape(b.lpm->dw_out_kernel, {c, 1, 1}, name + ".lpm.dw_out.kernel");
      if (b.lpm->reduction == 0 || c % b.lpm->reduction) {
        throw ShapeError(name + ".lpm: channels not divisible by the reduction ratio");
      }
    }
    validate(b.mlp1, name + ".mlp1");
    validate(b.mlp2, name + ".mlp2");
    if (b.mlp1.weight.dim(1) != c || b.mlp2.weight.dim(0) != c ||
        b.mlp2.weight.dim(1) != b.mlp1.weight.dim(0)) {
      throw ShapeError(name + ": MLP widths do not chain " + to_string(b.mlp1.weight.shape()) +
                       " -> " + to_string(b.mlp2.weight.shape()));
    }
  }
  validate(p.fuse_mlp, "fuse_mlp");
  expect_shape(p.fuse_mlp.weight, {p.num_classes, total}, "fuse_mlp.weight");
}

Var build_mixed_kv(const std::array<Var, 4>& f_maps,
                   const std::array<std::optional<Var>, 4>& d_maps, int stage, Grid kv_grid) {
  stage_check(stage);
  std::vector<Var> parts;
  for (int j = 1; j <= 4; ++j) {
    Var src;
    if (j <= stage) {
      src = f_maps[j - 1];
    } else {
      if (!d_maps[j - 1]) {
        throw std::invalid_argument("build_mixed_kv: stage " + std::to_string(stage) +
                                    " needs decoder output D" + std::to_string(j));
      }
      src = *d_maps[j - 1];
    }
    parts.push_back(map_to_tokens(adaptive_avg_pool(src, kv_grid.h, kv_grid.w)));
  }
  return concat(parts, 2);
}

Tensor build_mixed_kv(const synth::FeaturePyramid& pyramid,
                      const std::array<std::optional<Tensor>, 4>& d_maps, int stage) {
  Tape tape(false);
  std::array<Var, 4> f;
  std::array<std::optional<Var>, 4> d;
  for (int i = 0; i < 4; ++i) {
    f[i] = tape.constant(pyramid.f[i]);
    if (d_maps[i]) d[i] = tape.constant(*d_maps[i]);
  }
  const Grid grid{pyramid.f[3].dim(2), pyramid.f[3].dim(3)};
  return build_mixed_kv(f, d, stage, grid).value();
}

Var lpm_branch(Var x, Grid grid, const LPMVars& p) {
  Var map = tokens_to_map(x, grid.h, grid.w);
  Var xd = depthwise_conv(relu(depthwise_conv(map, p.dw1_kernel, p.dw1_bias)), p.dw3_kernel,
                          p.dw3_bias);
  Var s = global_avg_pool(xd);
  Var gate = sigmoid(linear(relu(linear(s, p.fc1)), p.fc2));
  Var y = depthwise_conv(channel_scale(xd, gate), p.dw_out_kernel, p.dw_out_bias);
  return map_to_tokens(y);
}

Var lpm(Var x, Grid grid, const LPMVars& p) { return add(x, lpm_branch(x, grid, p)); }

Tensor lpm(const Tensor& x, Grid grid, const LPMParams& p) {
  if (x.rank() != 3 || x.dim(1) != grid.tokens()) {
    throw ShapeError("lpm: " + to_string(x.shape()) + " does not factor as a " +
                     std::to_string(grid.h) + "x" + std::to_string(grid.w) + " grid");
  }
  Tape tape(false);
  return lpm(tape.constant(x), grid, bind(tape, p)).value();
}

ClbOutput clb(Var f, Var m, Grid grid, const CLBVars& p, MixerKind mixer, bool lpm_enabled,
              double eps) {
  Var q = layernorm(f, p.ln1.gamma, p.ln1.beta, eps);
  AttnVars mixed;
  switch (mixer) {
    case MixerKind::kSA:
      mixed = self_attention(q, *p.attn);
      break;
    case MixerKind::kCA:
      mixed = cross_attention(q, layernorm(m, p.ln1_kv->gamma, p.ln1_kv->beta, eps), *p.attn);
      break;
    case MixerKind::kSCA:
      mixed = strip_cross_attention(q, layernorm(m, p.ln1_kv->gamma, p.ln1_kv->beta, eps), *p.sca);
      break;
  }
  Var zg = add(mixed.out, f);
  Var zgl = zg;
  if (lpm_enabled) {
    zgl = add(zg, lpm_branch(layernorm(zg, p.ln2.gamma, p.ln2.beta, eps), grid, *p.lpm));
  }
  Var hidden = gelu(linear(layernorm(zgl, p.ln3.gamma, p.ln3.beta, eps), p.mlp1));
  return {add(linear(hidden, p.mlp2), zgl), mixed.attn};
}

DecodeVars decode(const std::array<Var, 4>& f_maps, const DecoderVars& p) {
  DecodeVars out;
  const Grid kv_grid{f_maps[3].shape()[2], f_maps[3].shape()[3]};
  std::array<std::optional<Var>, 4> d_maps;
  for (int stage = 4; stage >= 1; --stage) {
    const int s = stage - 1;
    try {
      const Shape& fs = f_maps[s].shape();
      const Grid grid{fs[2], fs[3]};
      Var m = p.cross_layer_enabled[s]
                  ? build_mixed_kv(f_maps, d_maps, stage, kv_grid)
                  : map_to_tokens(adaptive_avg_pool(f_maps[s], kv_grid.h, kv_grid.w));
      ClbOutput r = clb(map_to_tokens(f_maps[s]), m, grid, p.clb[s], p.mixer_kind, p.lpm_enabled,
                        p.eps);
      out.m[s] = m;
      out.d[s] = tokens_to_map(r.out, grid.h, grid.w);
      out.attn[s] = r.attn;
      d_maps[s] = out.d[s];
    } catch (const ShapeError& e) {
      throw ShapeError("decoder stage " + std::to_string(stage) + ": " + e.what());
    }
  }
  const std::size_t h1 = f_maps[0].shape()[2], w1 = f_maps[0].shape()[3];
  std::vector<Var> ups;
  for (int s = 0; s < 4; ++s) ups.push_back(bilinear_resize(out.d[s], h1, w1));
  Var logits = linear(map_to_tokens(concat(ups, 1)), p.fuse_mlp);
  out.mask = tokens_to_map(logits, h1, w1);
  return out;
}

DecodeTrace decode(const synth::FeaturePyramid& pyramid, const DecoderParams& p) {
  std::array<std::size_t, 4> channels{};
  for (int i = 0; i < 4; ++i) channels[i] = pyramid.f[i].dim(1);
  validate(p, channels);
  Tape tape(false);
  std::array<Var, 4> f;
  for (int i = 0; i < 4; ++i) f[i] = tape.constant(pyramid.f[i]);
  DecodeVars v = decode(f, bind(tape, p, ""));
  DecodeTrace t;
  for (int i = 0; i < 4; ++i) {
    t.m[i] = v.m[i].value();
    t.d[i] = v.d[i].value();
    t.attn[i] = v.attn[i].value();
  }
  t.mask = v.mask.value();
  return t;
}

}  // namespace scaseg
