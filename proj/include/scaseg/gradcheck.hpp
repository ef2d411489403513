#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scaseg/decoder.hpp"

namespace scaseg::gradcheck {

/// Central-difference step used throughout.
inline constexpr double kStep = 1e-5;
/// Denominator floor of the relative error, so entries whose true gradient is
/// ~0 are judged on absolute error instead.
inline constexpr double kRelFloor = 1e-6;

/// |a - n| / max(|a|, |n|, kRelFloor)
double relative_error(double analytic, double numeric);

struct GroupResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes whose +/- step landed on different ReLU pieces
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

/// Builds a scalar loss from tape leaves (one per input, same order).
using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares the tape gradient of `loss` against central differences for every
/// input. At most `max_entries` entries per input are probed (0 = all),
/// picked deterministically from `seed`. A probe whose two evaluations cross
/// a ReLU kink is skipped and the next candidate entry is tried instead.
std::vector<GroupResult> check(const LossFn& loss, const std::vector<Tensor>& inputs,
                               const std::vector<std::string>& names,
                               std::size_t max_entries = 0, std::uint64_t seed = 0);

/// Gradient of sum(mask) with respect to every DecoderParams leaf.
std::vector<GroupResult> check_decoder(const synth::PyramidSpec& spec, const DecoderConfig& cfg,
                                       std::uint64_t seed, std::size_t max_entries = 8);

double worst(const std::vector<GroupResult>& groups);

}  // namespace scaseg::gradcheck
