#include <cmath>
#include <set>

#include "doctest.h"
#include "scaseg/analysis.hpp"
#include "scaseg/config.hpp"
#include "scaseg/decoder.hpp"
#include "scaseg/gradcheck.hpp"
#include "scaseg/kernels.hpp"
#include "scaseg/oracle.hpp"
#include "test_util.hpp"

using namespace scaseg;
namespace k = scaseg::kernels;
using scaseg::test::normal;

namespace {

// Scalar-loop building blocks for the composed oracles below. Tokens are
// [B, N, C] with N = h * w in row-major grid order.

Tensor loop_linear(const Tensor& x, const LinearParams& p) {
  const std::size_t in = p.weight.dim(1), out = p.weight.dim(0), rows = x.size() / in;
  Shape s = x.shape();
  s.back() = out;
  Tensor y(s);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = p.bias ? (*p.bias)[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * p.weight[o * in + i];
      y[r * out + o] = acc;
    }
  return y;
}

Tensor loop_layernorm(const Tensor& x, const LayerNormT<Tensor>& p, double eps) {
  const std::size_t c = x.dim(-1);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.size() / c; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < c; ++i) mean += x[r * c + i];
    mean /= c;
    for (std::size_t i = 0; i < c; ++i) var += (x[r * c + i] - mean) * (x[r * c + i] - mean);
    var /= c;
    for (std::size_t i = 0; i < c; ++i)
      y[r * c + i] = (x[r * c + i] - mean) / std::sqrt(var + eps) * p.gamma[i] + p.beta[i];
  }
  return y;
}

Tensor loop_lpm_branch(const Tensor& x, std::size_t h, std::size_t w, const LPMParams& p) {
  const std::size_t B = x.dim(0), C = x.dim(2), N = h * w;
  auto at = [&](const Tensor& t, std::size_t b, std::size_t y, std::size_t xx, std::size_t c) {
    return t[(b * N + y * w + xx) * C + c];
  };
  Tensor a(x.shape()), xd(x.shape()), out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const double v = p.dw1_kernel[c] * x[(b * N + n) * C + c] + p.dw1_bias[c];
        a[(b * N + n) * C + c] = v > 0.0 ? v : 0.0;
      }
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = p.dw3_bias[c];
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const long sy = long(y) + dy, sx = long(xx) + dx;
              if (sy < 0 || sx < 0 || sy >= long(h) || sx >= long(w)) continue;
              acc += p.dw3_kernel[c * 9 + std::size_t(dy + 1) * 3 + std::size_t(dx + 1)] *
                     at(a, b, std::size_t(sy), std::size_t(sx), c);
            }
          xd[(b * N + y * w + xx) * C + c] = acc;
        }
  for (std::size_t b = 0; b < B; ++b) {
    Tensor s({1, C}, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t n = 0; n < N; ++n) s[c] += xd[(b * N + n) * C + c];
      s[c] /= double(N);
    }
    Tensor hidden = loop_linear(s, p.fc1);
    for (double& v : hidden.data()) v = v > 0.0 ? v : 0.0;
    Tensor gate = loop_linear(hidden, p.fc2);
    for (double& v : gate.data()) v = 1.0 / (1.0 + std::exp(-v));
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t i = (b * N + n) * C + c;
        out[i] = p.dw_out_kernel[c] * gate[c] * xd[i] + p.dw_out_bias[c];
      }
  }
  return out;
}

Tensor plus(Tensor a, const Tensor& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor loop_clb(const Tensor& f, const Tensor& m, std::size_t h, std::size_t w, const CLBParams& p,
                MixerKind mixer, bool lpm_enabled, double eps) {
  const Tensor q = loop_layernorm(f, p.ln1, eps);
  Tensor mixed;
  if (mixer == MixerKind::kSCA) {
    mixed = oracle::oracle_strip_attention(q, loop_layernorm(m, *p.ln1_kv, eps), *p.sca).out;
  } else if (mixer == MixerKind::kCA) {
    mixed = oracle::oracle_attention(q, loop_layernorm(m, *p.ln1_kv, eps), *p.attn).out;
  } else {
    mixed = oracle::oracle_attention(q, q, *p.attn).out;
  }
  const Tensor zg = plus(mixed, f);
  const Tensor zgl = lpm_enabled ? plus(zg, loop_lpm_branch(loop_layernorm(zg, p.ln2, eps), h, w, *p.lpm)) : zg;
  Tensor hidden = loop_linear(loop_layernorm(zgl, p.ln3, eps), p.mlp1);
  for (double& v : hidden.data()) v = 0.5 * v * std::erfc(-v / std::sqrt(2.0));
  return plus(loop_linear(hidden, p.mlp2), zgl);
}

// Fills every leaf (biases included) with fresh values so no code path is
// hidden behind a zero.
template <class P>
P scrambled(const P& p, std::uint64_t seed, double std) {
  synth::NormalStream rng(seed);
  return map_leaves<Tensor>(p, [&](const std::string& name, const Tensor& t) {
    Tensor out(t.shape());
    synth::fill_normal(out, rng, std);
    if (name.find("gamma") != std::string::npos)
      for (double& v : out.data()) v += 1.0;
    return out;
  }, "p");
}

LPMParams random_lpm(std::size_t c, std::size_t r, std::uint64_t seed) {
  DecoderConfig cfg;
  cfg.lpm_reduction = r;
  auto params = make_decoder_params({c, c, c, c}, cfg, seed);
  return scrambled(*params.clb[0].lpm, seed + 1, 0.7);
}

Tensor run_clb(const Tensor& f, const Tensor& m, Grid grid, const CLBParams& p, MixerKind mixer,
               bool lpm_enabled, double eps) {
  Tape tape(false);
  return clb(tape.constant(f), tape.constant(m), grid, bind(tape, p), mixer, lpm_enabled, eps)
      .out.value();
}

synth::PyramidSpec small_spec(std::uint64_t seed = 3) {
  synth::PyramidSpec s;
  s.height = 32;
  s.width = 64;
  s.channels = {4, 8, 8, 16};
  s.seed = seed;
  return s;
}

DecoderConfig small_config(MixerKind mixer) {
  DecoderConfig cfg;
  cfg.mixer = mixer;
  cfg.num_classes = 3;
  cfg.heads = {1, 2, 2, 4};
  cfg.dim_head = 4;
  cfg.mlp_expansion = 2;
  return cfg;
}

}  // namespace

TEST_CASE("mixer names parse and print") {
  for (MixerKind m : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) CHECK(parse_mixer(to_string(m)) == m);
  CHECK_THROWS_AS(parse_mixer("sca"), std::invalid_argument);
}

TEST_CASE("parameter bundle layout") {
  DecoderConfig cfg;
  DecoderParams p = make_decoder_params({8, 16, 32, 64}, cfg, 0);
  CHECK_NOTHROW(validate(p, {8, 16, 32, 64}));
  CHECK(p.clb[0].ln1_kv->gamma.shape() == Shape{120});
  CHECK(p.clb[3].sca->wq.weight.shape() == Shape{8, 64});
  CHECK(p.clb[0].lpm->fc1.weight.shape() == Shape{2, 8});
  CHECK(p.fuse_mlp.weight.shape() == Shape{19, 120});

  std::set<std::string> names;
  std::size_t leaves = 0;
  for_each_leaf(p, [&](const std::string& n, const Tensor&) {
    names.insert(n);
    ++leaves;
  });
  CHECK(names.size() == leaves);
  CHECK(names.count("clb1.sca.wq.weight") == 1);
  CHECK(names.count("clb4.lpm.dw_out.kernel") == 1);
  CHECK(names.count("fuse_mlp.bias") == 1);

  cfg.lpm_reduction = 3;
  CHECK_THROWS_AS(make_decoder_params({8, 16, 32, 64}, cfg, 0), std::invalid_argument);
  CHECK_THROWS_AS(validate(p, {8, 16, 32, 32}), ShapeError);
}

TEST_CASE("parameter construction is seeded") {
  DecoderConfig cfg;
  const auto a = make_decoder_params({8, 16, 32, 64}, cfg, 5);
  const auto b = make_decoder_params({8, 16, 32, 64}, cfg, 5);
  const auto c = make_decoder_params({8, 16, 32, 64}, cfg, 6);
  CHECK(a.fuse_mlp.weight == b.fuse_mlp.weight);
  CHECK_FALSE(a.fuse_mlp.weight == c.fuse_mlp.weight);
}

TEST_CASE("mixed key/value construction") {
  const synth::PyramidSpec spec;
  const auto pyramid = synth::generate_pyramid(spec);
  const Tensor m4 = build_mixed_kv(pyramid, {}, 4);
  CHECK(m4.shape() == Shape{1, 4, 120});
  CHECK_THROWS_AS(build_mixed_kv(pyramid, {}, 3), std::invalid_argument);

  // Column block j of M_4 is F_j pooled to the 2x2 grid.
  const Tensor f1 = k::adaptive_avg_pool(pyramid.f[0], 2, 2);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 8; ++c) CHECK(m4.at({0, t, c}) == f1[c * 4 + t]);

  std::array<std::optional<Tensor>, 4> d;
  d[3] = Tensor({1, 64, 2, 2}, 0.5);
  d[2] = Tensor({1, 32, 4, 4}, -1.0);
  d[1] = Tensor({1, 16, 8, 8}, 2.0);
  for (int stage = 1; stage <= 3; ++stage) CHECK(build_mixed_kv(pyramid, d, stage).shape() == Shape{1, 4, 120});
  const Tensor m1 = build_mixed_kv(pyramid, d, 1);
  CHECK(m1.at({0, 3, 8}) == 2.0);
  CHECK(m1.at({0, 0, 119}) == 0.5);
}

TEST_CASE("mixed key/value preserves per-stage constants") {
  synth::FeaturePyramid pyramid;
  const double consts[] = {1.5, -2.0, 0.25, 7.0};
  const std::size_t ch[] = {8, 16, 32, 64};
  for (int i = 0; i < 4; ++i) pyramid.f[i] = Tensor({2, ch[i], 32u >> i, 32u >> i}, consts[i]);
  const Tensor m = build_mixed_kv(pyramid, {}, 4);
  REQUIRE(m.shape() == Shape{2, 16, 120});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 16; ++t) {
      std::size_t offset = 0;
      for (int i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < ch[i]; ++c) CHECK(m.at({b, t, offset + c}) == consts[i]);
        offset += ch[i];
      }
    }
}

TEST_CASE("local perception module examples") {
  LPMParams p = random_lpm(4, 2, 1);
  LPMParams zero = p;
  for (Tensor* t : {&zero.dw1_kernel, &zero.dw3_kernel, &zero.fc1.weight, &zero.fc2.weight,
                    &zero.dw_out_kernel, &zero.dw1_bias, &zero.dw3_bias, &zero.dw_out_bias,
                    &*zero.fc1.bias, &*zero.fc2.bias})
    *t = Tensor::zeros_like(*t);
  const Tensor x = normal({1, 8, 4}, 2);
  CHECK(lpm(x, {2, 4}, zero) == x);

  LPMParams no_bias = p;
  for (Tensor* t : {&no_bias.dw1_bias, &no_bias.dw3_bias, &no_bias.dw_out_bias}) *t = Tensor::zeros_like(*t);
  CHECK(max_abs(lpm(Tensor({1, 8, 4}, 0.0), {2, 4}, no_bias)) == 0.0);

  const Tensor expected = plus(x, loop_lpm_branch(x, 2, 4, p));
  CHECK(max_abs_diff(lpm(x, {2, 4}, p), expected) < 1e-10);
  CHECK_THROWS_AS(lpm(x, {3, 3}, p), ShapeError);
}

TEST_CASE("local perception module gradients") {
  const LPMParams p = random_lpm(8, 4, 3);
  std::vector<Tensor> inputs{normal({2, 12, 8}, 4)};
  std::vector<std::string> names{"x"};
  for_each_leaf(p, [&](const std::string& n, const Tensor& t) {
    inputs.push_back(t);
    names.push_back(n);
  }, "lpm");
  gradcheck::LossFn loss = [&](Tape& tape, const std::vector<Var>& v) {
    std::size_t next = 1;
    auto bound = map_leaves<Var>(p, [&](const std::string&, const Tensor&) { return v[next++]; }, "lpm");
    Var y = lpm(v[0], {3, 4}, bound);
    Tensor w(y.shape());
    synth::SplitMix64 probe(6);
    synth::fill_uniform(w, probe, -1.0, 1.0);
    return sum(mul(y, tape.constant(std::move(w))));
  };
  const auto groups = gradcheck::check(loss, inputs, names);
  for (const auto& g : groups) {
    CAPTURE(g.name);
    CHECK(g.max_rel_err < 1e-4);
  }
}

TEST_CASE("cross-layer block matches the composed oracle") {
  const std::size_t c = 8, ckv = 20, h = 2, w = 3;
  const Tensor f = normal({1, h * w, c}, 10), m = normal({1, 4, ckv}, 11);
  for (MixerKind mixer : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    for (bool lpm_on : {true, false}) {
      CAPTURE(to_string(mixer));
      CAPTURE(lpm_on);
      DecoderConfig cfg = small_config(mixer);
      cfg.lpm_enabled = lpm_on;
      cfg.heads = {2, 2, 2, 2};
      cfg.dim_head = 3;
      // Stage 1 has c channels; the others only pad the KV width to ckv.
      auto wide = make_decoder_params({c, 4, 4, ckv - c - 8}, cfg, 12);
      const CLBParams p = scrambled(wide.clb[0], 13, 0.4);
      const Tensor got = run_clb(f, m, {h, w}, p, mixer, lpm_on, 1e-6);
      const Tensor want = loop_clb(f, m, h, w, p, mixer, lpm_on, 1e-6);
      CHECK(max_abs_diff(got, want) < 1e-9);
    }
  }
}

TEST_CASE("zero-branch cross-layer block is the identity") {
  const Tensor f = normal({2, 6, 8}, 20), m = normal({2, 4, 120}, 21);
  for (MixerKind mixer : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    CAPTURE(to_string(mixer));
    DecoderConfig cfg;
    cfg.mixer = mixer;
    cfg.identity_init = true;
    const auto p = make_decoder_params({8, 16, 32, 64}, cfg, 22);
    CHECK(run_clb(f, m, {2, 3}, p.clb[0], mixer, true, cfg.eps) == f);
    CHECK(run_clb(f, m, {2, 3}, p.clb[0], mixer, false, cfg.eps) == f);
  }
}

TEST_CASE("self-attention blocks ignore the mixed key/value source") {
  DecoderConfig cfg;
  cfg.mixer = MixerKind::kSA;
  const auto p = make_decoder_params({8, 16, 32, 64}, cfg, 30);
  const CLBParams b = scrambled(p.clb[0], 31, 0.3);
  const Tensor f = normal({1, 6, 8}, 32);
  const Tensor a = run_clb(f, normal({1, 4, 120}, 33), {2, 3}, b, MixerKind::kSA, true, cfg.eps);
  const Tensor c = run_clb(f, normal({1, 4, 120}, 34), {2, 3}, b, MixerKind::kSA, true, cfg.eps);
  CHECK(a == c);
  CHECK_FALSE(b.ln1_kv.has_value());
}

TEST_CASE("decode produces the documented shapes") {
  const synth::PyramidSpec spec;
  const auto pyramid = synth::generate_pyramid(spec);
  const auto trace = decode(pyramid, make_decoder_params(spec.channels, DecoderConfig{}, 0));
  CHECK(trace.mask.shape() == Shape{1, 19, 16, 16});
  for (int i = 0; i < 4; ++i) {
    CHECK(trace.d[i].shape() == pyramid.f[i].shape());
    CHECK(trace.m[i].shape() == Shape{1, 4, 120});
  }
  CHECK(trace.attn[0].shape() == Shape{1, 1, 256, 4});
  CHECK(trace.attn[3].shape() == Shape{1, 8, 4, 4});
  CHECK(trace.mask.all_finite());

  const auto rect = small_spec();
  for (MixerKind mixer : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    const auto t = decode(synth::generate_pyramid(rect), make_decoder_params(rect.channels, small_config(mixer), 1));
    CHECK(t.mask.shape() == Shape{1, 3, 8, 16});
  }
}

TEST_CASE("decode is deterministic") {
  const auto spec = small_spec(9);
  const auto params = make_decoder_params(spec.channels, small_config(MixerKind::kSCA), 4);
  const auto a = decode(synth::generate_pyramid(spec), params);
  const auto b = decode(synth::generate_pyramid(spec), params);
  CHECK(a.mask == b.mask);
  for (int i = 0; i < 4; ++i) {
    CHECK(a.m[i] == b.m[i]);
    CHECK(a.d[i] == b.d[i]);
    CHECK(a.attn[i] == b.attn[i]);
  }
}

TEST_CASE("zero-init decoder passes features straight to the fusion layer") {
  const synth::PyramidSpec spec;
  const auto pyramid = synth::generate_pyramid(spec);
  DecoderConfig cfg;
  cfg.identity_init = true;
  for (MixerKind mixer : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    cfg.mixer = mixer;
    const auto params = make_decoder_params(spec.channels, cfg, 7);
    const auto trace = decode(pyramid, params);
    for (int i = 0; i < 4; ++i) CHECK(trace.d[i] == pyramid.f[i]);

    std::vector<Tensor> ups;
    for (int i = 0; i < 4; ++i) ups.push_back(k::bilinear_resize(pyramid.f[i], 16, 16));
    const Tensor cat = k::concat({&ups[0], &ups[1], &ups[2], &ups[3]}, 1);
    const Tensor logits = k::linear(k::permute(cat, {0, 2, 3, 1}), params.fuse_mlp.weight, &*params.fuse_mlp.bias);
    CHECK(max_abs_diff(trace.mask, k::permute(logits, {0, 3, 1, 2})) < 1e-12);
  }
}

TEST_CASE("disabling cross-layer mixing changes the mask") {
  const synth::PyramidSpec spec;
  const auto pyramid = synth::generate_pyramid(spec);
  DecoderConfig full;
  full.init_std = 0.2;
  DecoderConfig top_only = full;
  top_only.cross_layer_enabled = {false, false, false, true};
  const auto a = decode(pyramid, make_decoder_params(spec.channels, full, 1));
  const auto b = decode(pyramid, make_decoder_params(spec.channels, top_only, 1));
  CHECK(max_abs_diff(a.mask, b.mask) > 1e-6);
  CHECK(b.m[0].shape() == Shape{1, 4, 8});
}

TEST_CASE("stage errors carry stage context") {
  const synth::PyramidSpec spec;
  auto params = make_decoder_params(spec.channels, DecoderConfig{}, 0);
  params.clb[1].mlp2.weight = Tensor({16, 63});
  try {
    decode(synth::generate_pyramid(spec), params);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("clb2") != std::string::npos);
  }

  synth::PyramidSpec other = spec;
  other.channels = {8, 16, 32, 32};
  CHECK_THROWS_AS(decode(synth::generate_pyramid(other), params), ShapeError);
}

TEST_CASE("end-to-end decoder gradients") {
  const RunConfig cfg = RunConfig::gradcheck_defaults();
  CHECK(cfg.pyramid.height == 32);
  CHECK(cfg.decoder.num_classes == 2);
  const auto groups = gradcheck::check_decoder(cfg.pyramid, cfg.decoder, cfg.seed);
  CHECK(groups.size() > 100);
  for (const auto& g : groups) {
    CAPTURE(g.name);
    CHECK(g.checked > 0);
    CHECK(g.max_rel_err < 1e-3);
  }
}

TEST_CASE("fusion-layer gradient of the zero-init decoder") {
  // With D_i = F_i the mask is linear in fuse_mlp, so d sum(mask) / d W[k, c]
  // is the spatial sum of upsampled channel c and d / d b[k] the pixel count.
  RunConfig cfg = RunConfig::gradcheck_defaults();
  cfg.decoder.identity_init = true;
  const auto pyramid = synth::generate_pyramid(cfg.pyramid);
  const auto params = make_decoder_params(cfg.pyramid.channels, cfg.decoder, cfg.seed);

  Tape tape;
  std::array<Var, 4> f;
  for (int i = 0; i < 4; ++i) f[i] = tape.constant(pyramid.f[i]);
  const DecoderVars bound = bind(tape, params, "");
  const GradientMap grads = backward(tape, sum(decode(f, bound).mask));
  const Tensor gw = grads.of(bound.fuse_mlp.weight), gb = grads.of(*bound.fuse_mlp.bias);

  const std::size_t h1 = pyramid.f[0].dim(2), w1 = pyramid.f[0].dim(3);
  std::vector<double> channel_sums;
  for (int i = 0; i < 4; ++i) {
    const Tensor up = k::bilinear_resize(pyramid.f[i], h1, w1);
    for (std::size_t c = 0; c < up.dim(1); ++c) {
      double s = 0.0;
      for (std::size_t p = 0; p < h1 * w1; ++p) s += up[c * h1 * w1 + p];
      channel_sums.push_back(s);
    }
  }
  const std::size_t total = channel_sums.size();
  REQUIRE(gw.shape() == Shape{cfg.decoder.num_classes, total});
  for (std::size_t kk = 0; kk < cfg.decoder.num_classes; ++kk) {
    CHECK(gb[kk] == double(h1 * w1));
    for (std::size_t c = 0; c < total; ++c) CHECK(std::abs(gw[kk * total + c] - channel_sums[c]) < 1e-10);
  }
}

TEST_CASE("cost grows with every stage that mixes across layers") {
  const synth::PyramidSpec spec;
  std::uint64_t previous = 0;
  const std::array<std::array<bool, 4>, 4> ladders{{{false, false, false, true},
                                                    {false, false, true, true},
                                                    {false, true, true, true},
                                                    {true, true, true, true}}};
  for (const auto& enabled : ladders) {
    DecoderConfig cfg;
    cfg.cross_layer_enabled = enabled;
    const auto counts = analysis::decoder_counts(spec, cfg, 0);
    CHECK(counts.total_macs() > previous);
    previous = counts.total_macs();
  }
}

TEST_CASE("bias draws leave weights and the zero-init identity alone") {
  const synth::PyramidSpec spec;
  DecoderConfig plain;
  DecoderConfig biased = plain;
  biased.bias_std = 0.02;
  const auto a = make_decoder_params(spec.channels, plain, 4);
  const auto b = make_decoder_params(spec.channels, biased, 4);
  CHECK(a.clb[2].sca->wv.weight == b.clb[2].sca->wv.weight);
  CHECK(max_abs(*a.clb[2].sca->wv.bias) == 0.0);
  CHECK(max_abs(*b.clb[2].sca->wv.bias) > 0.0);
  CHECK(max_abs(b.clb[0].lpm->dw1_bias) > 0.0);

  biased.identity_init = true;
  const auto id = make_decoder_params(spec.channels, biased, 4);
  CHECK(max_abs(*id.clb[0].sca->wo.bias) == 0.0);
  CHECK(max_abs(id.clb[0].lpm->dw_out_bias) == 0.0);
  CHECK(max_abs(*id.clb[0].mlp2.bias) == 0.0);
  const auto pyramid = synth::generate_pyramid(spec);
  const auto trace = decode(pyramid, id);
  for (int i = 0; i < 4; ++i) CHECK(trace.d[i] == pyramid.f[i]);
}
