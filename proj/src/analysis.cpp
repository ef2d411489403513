#include "scaseg/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <locale>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "scaseg/attention.hpp"

namespace scaseg::analysis {

const char* const kCsvHeader =
    "mixer,N_q,N_kv,C_q,C_kv,heads,dim_head,closed_form_flops,counted_attn_flops,total_flops,"
    "peak_activation_elems,wall_ns_median";

std::uint64_t closed_form_flops(MixerKind kind, std::uint64_t n, std::uint64_t c) {
  const std::uint64_t n2 = n * n;
  switch (kind) {
    case MixerKind::kSA:
    case MixerKind::kCA: return n2 * c + n2 * c;
    case MixerKind::kSCA: return n2 * 1 + n2 * c;
  }
  return 0;
}

std::uint64_t closed_form_flops(MixerKind kind, const MixerShape& s) {
  const std::uint64_t c = s.inner();
  switch (kind) {
    case MixerKind::kSA: {
      const std::uint64_t nn = static_cast<std::uint64_t>(s.n_q) * s.n_q;
      return nn * c + nn * c;
    }
    case MixerKind::kCA: {
      const std::uint64_t nn = static_cast<std::uint64_t>(s.n_q) * s.n_kv;
      return nn * c + nn * c;
    }
    case MixerKind::kSCA: {
      const std::uint64_t nn = static_cast<std::uint64_t>(s.n_q) * s.n_kv;
      return nn * s.heads + nn * c;
    }
  }
  return 0;
}

namespace {

MixerShape effective(MixerKind kind, MixerShape s) {
  if (kind == MixerKind::kSA) {
    s.n_kv = s.n_q;
    s.c_kv = s.c_q;
  }
  return s;
}

// Seeded inputs and parameters for one mixer invocation.
struct MixerCase {
  MixerKind kind;
  MixerShape shape;
  Tensor xq, xkv;
  std::optional<SCAParams> sca;
  std::optional<VanillaAttnParams> vanilla;

  MixerCase(MixerKind k, const MixerShape& s, std::uint64_t seed) : kind(k), shape(effective(k, s)) {
    synth::NormalStream rng(seed);
    xq = Tensor({1, shape.n_q, shape.c_q});
    xkv = Tensor({1, shape.n_kv, shape.c_kv});
    synth::fill_normal(xq, rng);
    synth::fill_normal(xkv, rng);
    if (kind == MixerKind::kSCA) {
      sca = make_sca_params(shape.c_q, shape.c_kv, shape.heads, shape.dim_head, rng);
    } else {
      vanilla = make_vanilla_params(shape.c_q, shape.c_kv, shape.heads, shape.dim_head, rng);
    }
  }

  void run() const {
    Tape tape(false);
    Var q = tape.constant(xq);
    switch (kind) {
      case MixerKind::kSA: self_attention(q, bind(tape, *vanilla)); break;
      case MixerKind::kCA: cross_attention(q, tape.constant(xkv), bind(tape, *vanilla)); break;
      case MixerKind::kSCA: strip_cross_attention(q, tape.constant(xkv), bind(tape, *sca)); break;
    }
  }
};

FlopReport count_case(const MixerCase& c) {
  FlopReport r;
  r.mixer = c.kind;
  r.config = c.shape;
  r.closed_form_attn_flops = closed_form_flops(c.kind, c.shape);
  instrument::CountingScope scope;
  c.run();
  const auto& k = scope.counts();
  r.counted_attn_flops = k.attention_macs();
  r.counted_total_flops = k.total_macs();
  r.peak_activation_elems = k.peak_activation_elems;
  r.query_key_elems = k.query_key_elems;
  return r;
}

double median_ns(const MixerCase& c, const BenchOptions& opts) {
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < opts.warmup; ++i) c.run();
  std::vector<double> samples;
  for (int i = 0; i < opts.repetitions; ++i) {
    const auto t0 = Clock::now();
    c.run();
    const auto t1 = Clock::now();
    samples.push_back(static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

}  // namespace

FlopReport count_flops(MixerKind kind, const MixerShape& shape, std::uint64_t seed) {
  if (!instrument::enabled()) throw std::logic_error("count_flops: instrumentation is disabled");
  return count_case(MixerCase(kind, shape, seed));
}

BenchResult bench(MixerKind kind, const MixerShape& shape, const BenchOptions& opts) {
  if (opts.repetitions < 9 || opts.warmup < 2) {
    throw std::invalid_argument("bench: need at least 9 repetitions and 2 warm-up runs");
  }
  MixerCase c(kind, shape, opts.seed);
  BenchResult r;
  r.mixer = kind;
  r.config = c.shape;
  r.wall_ns_median = median_ns(c, opts);
  const FlopReport f = count_case(c);
  r.flops_per_sec = static_cast<double>(f.counted_total_flops) / (r.wall_ns_median * 1e-9);
  return r;
}

std::vector<SweepRow> sweep(const std::vector<MixerShape>& configs, bool timing,
                            const BenchOptions& opts) {
  if (configs.empty()) throw std::invalid_argument("sweep: empty config list");
  std::vector<SweepRow> rows;
  for (const auto& cfg : configs) {
    for (MixerKind kind : {MixerKind::kSA, MixerKind::kCA, MixerKind::kSCA}) {
      SweepRow row;
      row.flops = count_flops(kind, cfg, opts.seed);
      if (timing) row.wall_ns_median = bench(kind, cfg, opts).wall_ns_median;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<MixerShape> default_grid() {
  std::vector<MixerShape> grid;
  for (std::size_t n : {1, 4, 16, 64, 256}) {
    for (std::size_t c : {1, 8, 32, 128}) grid.push_back({n, n, c, c, 1, c});
  }
  return grid;
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& row : rows) {
    const auto& f = row.flops;
    const auto& s = f.config;
    os << to_string(f.mixer) << ',' << s.n_q << ',' << s.n_kv << ',' << s.c_q << ',' << s.c_kv
       << ',' << s.heads << ',' << s.dim_head << ',' << f.closed_form_attn_flops << ','
       << f.counted_attn_flops << ',' << f.counted_total_flops << ',' << f.peak_activation_elems
       << ',';
    if (row.wall_ns_median) {
      std::ostringstream v;
      v.imbue(std::locale::classic());
      v.setf(std::ios::fixed);
      v.precision(0);
      v << *row.wall_ns_median;
      os << v.str();
    }
    os << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_csv(out, rows);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

instrument::OpCounts decoder_counts(const synth::PyramidSpec& spec, const DecoderConfig& cfg,
                                    std::uint64_t seed) {
  const auto pyramid = synth::generate_pyramid(spec);
  const auto params = make_decoder_params(spec.channels, cfg, seed);
  instrument::CountingScope scope;
  decode(pyramid, params);
  return scope.counts();
}

std::vector<MixerShape> decoder_mixer_shapes(const synth::PyramidSpec& spec,
                                             const DecoderConfig& cfg) {
  spec.validate();
  const std::size_t n_kv = spec.stage_height(4) * spec.stage_width(4);
  std::vector<MixerShape> shapes;
  for (int stage = 4; stage >= 1; --stage) {
    const std::size_t c = spec.channels[stage - 1];
    MixerShape s;
    s.n_q = spec.stage_height(stage) * spec.stage_width(stage);
    s.c_q = c;
    s.n_kv = cfg.mixer == MixerKind::kSA ? s.n_q : n_kv;
    s.c_kv = cfg.mixer == MixerKind::kSA ? c
             : cfg.cross_layer_enabled[stage - 1] ? spec.channel_sum()
                                                   : c;
    s.heads = cfg.heads[stage - 1];
    s.dim_head = cfg.dim_head;
    shapes.push_back(s);
  }
  return shapes;
}

}  // namespace scaseg::analysis
