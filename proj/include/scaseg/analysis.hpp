#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "scaseg/decoder.hpp"
#include "scaseg/instrument.hpp"

namespace scaseg::analysis {

/// Sizes of one token-mixer invocation. C = heads * dim_head is the width the
/// cost model uses.
struct MixerShape {
  std::size_t n_q = 1, n_kv = 1;
  std::size_t c_q = 1, c_kv = 1;
  std::size_t heads = 1, dim_head = 1;

  std::size_t inner() const { return heads * dim_head; }
  friend bool operator==(const MixerShape&, const MixerShape&) = default;
};

/// Attention-stage multiply-accumulates for N tokens of width C:
///   SA  : N^2*C + N^2*C
///   CA  : same as SA (square case)
///   SCA : N^2*1 + N^2*C
std::uint64_t closed_form_flops(MixerKind kind, std::uint64_t n, std::uint64_t c);

/// Rectangular / multi-head form: CA uses N_q*N_kv in place of N^2, SA uses
/// N_q^2, and each SCA head contributes its own N_q*N_kv strip product, so the
/// SCA score term is heads*N_q*N_kv (the single-head case is the formula above).
std::uint64_t closed_form_flops(MixerKind kind, const MixerShape& s);

struct FlopReport {
  MixerKind mixer = MixerKind::kSCA;
  MixerShape config;
  std::uint64_t closed_form_attn_flops = 0;
  std::uint64_t counted_attn_flops = 0;   // score + weighted-sum MACs
  std::uint64_t counted_total_flops = 0;  // including the four projections
  std::uint64_t peak_activation_elems = 0;
  std::uint64_t query_key_elems = 0;
};

/// Runs one instrumented forward on seeded random inputs. Throws
/// std::logic_error if instrumentation is disabled. For SA the key/value
/// extents are taken from the query side.
FlopReport count_flops(MixerKind kind, const MixerShape& shape, std::uint64_t seed = 0);

struct BenchOptions {
  int repetitions = 9;
  int warmup = 2;
  std::uint64_t seed = 0;
};

struct BenchResult {
  MixerKind mixer = MixerKind::kSCA;
  MixerShape config;
  double wall_ns_median = 0.0;
  double flops_per_sec = 0.0;  // counted total MACs per second
};

BenchResult bench(MixerKind kind, const MixerShape& shape, const BenchOptions& opts = {});

struct SweepRow {
  FlopReport flops;
  std::optional<double> wall_ns_median;
};

/// One row per config per mixer, in config order then SA, CA, SCA.
/// Throws std::invalid_argument for an empty list.
std::vector<SweepRow> sweep(const std::vector<MixerShape>& configs, bool timing = false,
                            const BenchOptions& opts = {});

/// N in {1, 4, 16, 64, 256} x C in {1, 8, 32, 128}, single head.
std::vector<MixerShape> default_grid();

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
/// Throws std::runtime_error naming `path` on I/O failure.
void write_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
extern const char* const kCsvHeader;

/// Instrumented counts of a full decode on a generated pyramid.
instrument::OpCounts decoder_counts(const synth::PyramidSpec& spec, const DecoderConfig& cfg,
                                    std::uint64_t seed);

/// Per-stage mixer shapes used by a decoder configuration.
std::vector<MixerShape> decoder_mixer_shapes(const synth::PyramidSpec& spec,
                                             const DecoderConfig& cfg);

}  // namespace scaseg::analysis
