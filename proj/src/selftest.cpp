#include "scaseg/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scaseg/analysis.hpp"
#include "scaseg/config.hpp"
#include "scaseg/gradcheck.hpp"
#include "scaseg/kernels.hpp"
#include "scaseg/oracle.hpp"

namespace scaseg::selftest {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Tensor random_tokens(std::size_t b, std::size_t n, std::size_t c, synth::NormalStream& rng) {
  Tensor t({b, n, c});
  synth::fill_normal(t, rng);
  return t;
}

SuiteResult oracle_suite() {
  double worst = 0.0;
  int cases = 0;
  synth::SplitMix64 pick(2024);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    synth::NormalStream rng(seed + 1);
    const std::size_t heads = std::array<std::size_t, 3>{1, 2, 4}[seed % 3];
    const std::size_t nq = 1 + pick() % 16, nkv = 1 + pick() % 16;
    const std::size_t d = 1 + pick() % 4, cq = 2 + pick() % 6, ckv = 2 + pick() % 6;
    Tensor xq = random_tokens(1, nq, cq, rng), xkv = random_tokens(1, nkv, ckv, rng);
    auto sca = make_sca_params(cq, ckv, heads, d, rng, 0.5);
    auto van = make_vanilla_params(cq, ckv, heads, d, rng, 0.5);
    auto vsa = make_vanilla_params(cq, cq, heads, d, rng, 0.5);
    worst = std::max(worst, max_abs_diff(strip_cross_attention(xq, xkv, sca).out,
                                         oracle::oracle_strip_attention(xq, xkv, sca).out));
    worst = std::max(worst, max_abs_diff(cross_attention(xq, xkv, van).out,
                                         oracle::oracle_attention(xq, xkv, van).out));
    worst = std::max(worst, max_abs_diff(self_attention(xq, vsa).out,
                                         oracle::oracle_attention(xq, xq, vsa).out));
    cases += 3;
  }
  return {"oracle equivalence", worst <= 1e-10,
          std::to_string(cases) + " cases, max abs diff " + fmt(worst)};
}

SuiteResult invariant_suite() {
  synth::NormalStream rng(7);
  const std::size_t nq = 5, nkv = 7;
  Tensor xq = random_tokens(1, nq, 6, rng), xkv = random_tokens(1, nkv, 9, rng);
  auto sca = make_sca_params(6, 9, 2, 3, rng, 0.5);
  const AttnOutput base = strip_cross_attention(xq, xkv, sca);

  double row_err = 0.0;
  const std::size_t rows = base.attn.size() / nkv;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < nkv; ++j) s += base.attn[r * nkv + j];
    row_err = std::max(row_err, std::abs(s - 1.0));
  }

  Tensor perm = xkv;
  for (std::size_t j = 0; j < nkv; ++j)
    for (std::size_t c = 0; c < 9; ++c) perm.at({0, j, c}) = xkv.at({0, nkv - 1 - j, c});
  const double perm_err = max_abs_diff(strip_cross_attention(xq, perm, sca).out, base.out);

  // A constant added to every key strip shifts each logit row by q_i * c,
  // which softmax cancels.
  auto shifted = sca;
  for (double& b : shifted.wk.bias->data()) b += 3.0;
  const double shift_err =
      max_abs_diff(strip_cross_attention(xq, xkv, shifted).attn, base.attn);

  const bool ok = row_err <= 1e-10 && perm_err <= 1e-10 && shift_err <= 1e-10;
  return {"attention invariants", ok,
          "row-sum " + fmt(row_err) + ", key-permutation " + fmt(perm_err) + ", shift " +
              fmt(shift_err)};
}

SuiteResult identity_suite() {
  RunConfig cfg;
  cfg.decoder.identity_init = true;
  const auto pyramid = synth::generate_pyramid(cfg.pyramid);
  bool ok = true;
  for (MixerKind kind : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    cfg.decoder.mixer = kind;
    const auto params = make_decoder_params(cfg.pyramid.channels, cfg.decoder, cfg.seed);
    const DecodeTrace t = decode(pyramid, params);
    for (int i = 0; i < 4; ++i) ok = ok && t.d[i] == pyramid.f[i];
  }
  return {"zero-init identity", ok, ok ? "D_i == F_i bit-exactly for SA, CA, SCA" : "mismatch"};
}

SuiteResult kernel_gradient_suite() {
  synth::SplitMix64 bits(99);
  auto uniform = [&](Shape s) {
    Tensor t(std::move(s));
    synth::fill_uniform(t, bits, -2.0, 2.0);
    return t;
  };
  double worst = 0.0;
  auto run = [&](auto body, std::vector<Tensor> in) {
    // Fixed random linear functional of the output so no gradient is trivially zero.
    gradcheck::LossFn fn = [body](Tape& t, const std::vector<Var>& v) {
      Var out = body(v);
      Tensor w(out.shape());
      synth::SplitMix64 probe(5);
      synth::fill_uniform(w, probe, -1.0, 1.0);
      return sum(mul(out, t.constant(std::move(w))));
    };
    std::vector<std::string> names(in.size(), "x");
    worst = std::max(worst, gradcheck::worst(gradcheck::check(fn, in, names)));
  };
  using V = const std::vector<Var>&;
  run([](V v) { return matmul(v[0], v[1]); }, {uniform({2, 3, 4}), uniform({2, 4, 5})});
  run([](V v) { return softmax_lastdim(v[0]); }, {uniform({3, 6})});
  run([](V v) { return layernorm(v[0], v[1], v[2], 1e-6); },
      {uniform({4, 5}), uniform({5}), uniform({5})});
  run([](V v) { return depthwise_conv(v[0], v[1], v[2]); },
      {uniform({1, 2, 4, 5}), uniform({2, 3, 3}), uniform({2})});
  run([](V v) { return bilinear_resize(v[0], 7, 5); }, {uniform({1, 2, 3, 4})});
  return {"kernel gradients", worst < 1e-4, "max rel err " + fmt(worst)};
}

SuiteResult decoder_gradient_suite() {
  const RunConfig cfg = RunConfig::gradcheck_defaults();
  const auto groups = gradcheck::check_decoder(cfg.pyramid, cfg.decoder, cfg.seed, 4);
  const double w = gradcheck::worst(groups);
  return {"decoder gradients", w < 1e-3,
          std::to_string(groups.size()) + " parameter groups, max rel err " + fmt(w)};
}

SuiteResult flop_suite() {
  bool ok = true;
  for (const auto& s : analysis::default_grid()) {
    for (MixerKind kind : {MixerKind::kSA, MixerKind::kSCA}) {
      const auto r = analysis::count_flops(kind, s);
      ok = ok && r.counted_attn_flops == analysis::closed_form_flops(kind, s.n_q, s.inner());
    }
  }
  return {"cost model", ok, "counted attention MACs vs closed forms over the default grid"};
}

}  // namespace

std::vector<SuiteResult> run_all() {
  return {oracle_suite(),          invariant_suite(),        identity_suite(),
          kernel_gradient_suite(), decoder_gradient_suite(), flop_suite()};
}

}  // namespace scaseg::selftest
