#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "scaseg/analysis.hpp"

using namespace scaseg;
using namespace scaseg::analysis;

namespace {

MixerShape square(std::size_t n, std::size_t heads, std::size_t dim_head) {
  return {n, n, heads * dim_head, heads * dim_head, heads, dim_head};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("closed forms instantiated") {
  CHECK(closed_form_flops(MixerKind::kSA, 64, 32) == 262144);
  CHECK(closed_form_flops(MixerKind::kSCA, 64, 32) == 135168);
  CHECK(closed_form_flops(MixerKind::kCA, 64, 32) == 262144);
  for (std::uint64_t n : {1, 7, 100}) CHECK(closed_form_flops(MixerKind::kSA, n, 1) == closed_form_flops(MixerKind::kSCA, n, 1));
}

TEST_CASE("rectangular and multi-head closed forms") {
  const MixerShape rect{6, 10, 4, 9, 2, 3};
  CHECK(closed_form_flops(MixerKind::kCA, rect) == 2 * 6 * 10 * 6);
  CHECK(closed_form_flops(MixerKind::kSCA, rect) == 2 * 6 * 10 + 6 * 10 * 6);
  CHECK(closed_form_flops(MixerKind::kSA, rect) == 2 * 6 * 6 * 6);
  for (MixerKind m : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    CHECK(closed_form_flops(m, square(64, 1, 32)) == closed_form_flops(m, 64, 32));
  }
}

TEST_CASE("SCA is strictly cheaper for every width above one") {
  for (const auto& s : default_grid()) {
    const auto sa = closed_form_flops(MixerKind::kSA, s.n_q, s.inner());
    const auto sc = closed_form_flops(MixerKind::kSCA, s.n_q, s.inner());
    if (s.inner() > 1) {
      CHECK(sc < sa);
    } else {
      CHECK(sc == sa);
    }
  }
}

TEST_CASE("closed-form SCA/SA ratio depends only on width") {
  const std::uint64_t c = 64;
  const double expected = double(1 + c) / double(2 * c);
  for (std::uint64_t n : {256, 1024, 4096}) {
    const double ratio = double(closed_form_flops(MixerKind::kSCA, n, c)) / double(closed_form_flops(MixerKind::kSA, n, c));
    CHECK(ratio == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK(expected == doctest::Approx(0.5078125));
}

TEST_CASE("instrumented counts equal the closed forms") {
  const FlopReport sa = count_flops(MixerKind::kSA, square(16, 2, 4));
  CHECK(sa.counted_attn_flops == 4096);
  CHECK(sa.closed_form_attn_flops == 4096);

  // One strip product per head: 2 * 16^2 score MACs plus 16^2 * 8 for the sum.
  const FlopReport sca2 = count_flops(MixerKind::kSCA, square(16, 2, 4));
  CHECK(sca2.counted_attn_flops == 2560);
  CHECK(sca2.closed_form_attn_flops == 2560);

  const FlopReport sca1 = count_flops(MixerKind::kSCA, square(16, 1, 8));
  CHECK(sca1.counted_attn_flops == 16 * 16 + 16 * 16 * 8);

  const MixerShape one = square(1, 1, 8);
  CHECK(count_flops(MixerKind::kSA, one).counted_attn_flops == 8 + 8);
  CHECK(count_flops(MixerKind::kSCA, one).counted_attn_flops == 1 + 8);

  const MixerShape rect{5, 9, 6, 10, 3, 2};
  for (MixerKind m : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    const FlopReport r = count_flops(m, rect);
    CHECK(r.counted_attn_flops == r.closed_form_attn_flops);
    CHECK(r.counted_total_flops >= r.counted_attn_flops);
  }
}

TEST_CASE("counts match over the whole default grid") {
  for (const auto& s : default_grid()) {
    for (MixerKind m : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
      const FlopReport r = count_flops(m, s);
      CHECK(r.counted_attn_flops == r.closed_form_attn_flops);
      CHECK(r.counted_attn_flops == closed_form_flops(m, s.n_q, s.inner()));
    }
  }
}

TEST_CASE("projections are included in the total") {
  const MixerShape s{4, 6, 3, 5, 2, 2};
  const FlopReport r = count_flops(MixerKind::kSCA, s);
  const std::uint64_t proj = 4 * 3 * 2 + 6 * 5 * 2 + 6 * 5 * 4 + 4 * 4 * 3;
  CHECK(r.counted_total_flops == r.counted_attn_flops + proj);
  CHECK(r.peak_activation_elems >= 2 * 4 * 6);
  CHECK(r.query_key_elems == 2 * (4 + 6));
}

TEST_CASE("counting needs instrumentation") {
  instrument::set_enabled(false);
  CHECK_THROWS_AS(count_flops(MixerKind::kSA, square(4, 1, 2)), std::logic_error);
  instrument::set_enabled(true);
}

TEST_CASE("sweep ordering and determinism") {
  CHECK_THROWS_AS(sweep({}), std::invalid_argument);
  const MixerShape s = square(8, 2, 2);
  const auto rows = sweep({s, s});
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].flops.mixer == MixerKind::kSA);
  CHECK(rows[1].flops.mixer == MixerKind::kCA);
  CHECK(rows[2].flops.mixer == MixerKind::kSCA);
  for (int i = 0; i < 3; ++i) {
    CHECK(rows[i].flops.counted_total_flops == rows[i + 3].flops.counted_total_flops);
    CHECK(rows[i].flops.peak_activation_elems == rows[i + 3].flops.peak_activation_elems);
    CHECK_FALSE(rows[i].wall_ns_median.has_value());
  }
  std::ostringstream a, b;
  write_csv(a, sweep({s}));
  write_csv(b, sweep({s}));
  CHECK(a.str() == b.str());
}

TEST_CASE("CSV layout") {
  std::ostringstream os;
  write_csv(os, sweep({{64, 64, 32, 32, 1, 32}}));
  const std::string text = os.str();
  CHECK(text.find('\r') == std::string::npos);
  const auto rows = lines(text);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "mixer,N_q,N_kv,C_q,C_kv,heads,dim_head,closed_form_flops,counted_attn_flops,"
                   "total_flops,peak_activation_elems,wall_ns_median");
  CHECK(rows[1].rfind("SA,64,64,32,32,1,32,262144,262144,", 0) == 0);
  CHECK(rows[3].rfind("SCA,64,64,32,32,1,32,135168,135168,", 0) == 0);
  CHECK(rows[1].back() == ',');

  std::vector<SweepRow> timed = sweep({square(2, 1, 2)});
  timed[0].wall_ns_median = 1234.4;
  std::ostringstream t;
  write_csv(t, timed);
  CHECK(lines(t.str())[1].substr(lines(t.str())[1].rfind(',') + 1) == "1234");
}

TEST_CASE("CSV write failures name the path") {
  const std::filesystem::path bad = "/nonexistent-dir/sub/flops.csv";
  try {
    write_csv(bad, sweep({square(1, 1, 1)}));
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
  }
}

TEST_CASE("benchmark harness") {
  BenchOptions opts;
  const BenchResult r = bench(MixerKind::kSCA, square(32, 2, 4), opts);
  CHECK(r.wall_ns_median > 0.0);
  CHECK(r.flops_per_sec > 0.0);
  opts.repetitions = 3;
  CHECK_THROWS_AS(bench(MixerKind::kSCA, square(4, 1, 2), opts), std::invalid_argument);

  const auto rows = sweep({square(16, 2, 4)}, true);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) CHECK(row.wall_ns_median.value_or(0.0) > 0.0);
}

TEST_CASE("decoder mixer shapes") {
  const synth::PyramidSpec spec;
  DecoderConfig cfg;
  const auto shapes = decoder_mixer_shapes(spec, cfg);
  REQUIRE(shapes.size() == 4);
  CHECK(shapes[0] == MixerShape{4, 4, 64, 120, 8, 8});
  CHECK(shapes[3] == MixerShape{256, 4, 8, 120, 1, 8});
  cfg.mixer = MixerKind::kSA;
  CHECK(decoder_mixer_shapes(spec, cfg)[3] == MixerShape{256, 256, 8, 8, 1, 8});
  cfg.mixer = MixerKind::kSCA;
  cfg.cross_layer_enabled = {false, true, true, true};
  CHECK(decoder_mixer_shapes(spec, cfg)[3].c_kv == 8);
}

TEST_CASE("decoder attention counts agree with the per-stage closed forms") {
  const synth::PyramidSpec spec;
  for (MixerKind m : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
    DecoderConfig cfg;
    cfg.mixer = m;
    std::uint64_t expected = 0;
    for (const auto& s : decoder_mixer_shapes(spec, cfg)) expected += closed_form_flops(m, s);
    CHECK(decoder_counts(spec, cfg, 0).attention_macs() == expected);
  }
}
