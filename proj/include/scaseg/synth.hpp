#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "scaseg/tensor.hpp"

namespace scaseg::synth {

/// One splitmix64 step: returns (output, next state).
std::pair<std::uint64_t, std::uint64_t> splitmix64_next(std::uint64_t state);

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t operator()();

 private:
  std::uint64_t state_;
};

/// Box-Muller normals from pairs of splitmix64 outputs. Each pair yields two
/// draws (cosine branch first).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : bits_(seed) {}
  double operator()();

 private:
  SplitMix64 bits_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double standard_normal(NormalStream& stream);

struct PyramidSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, 4> channels{8, 16, 32, 64};
  std::size_t batch = 1;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  /// Spatial extent of stage i in 1..4: H / 2^(i+1).
  std::size_t stage_height(int stage) const { return height >> (stage + 1); }
  std::size_t stage_width(int stage) const { return width >> (stage + 1); }
  std::size_t channel_sum() const;
};

/// Encoder features F1..F4, f[i] of shape [B, C_{i+1}, H/2^{i+2}, W/2^{i+2}].
struct FeaturePyramid {
  std::array<Tensor, 4> f;
};

/// Seed of the stage-`stage` sub-stream.
std::uint64_t stage_seed(std::uint64_t seed, int stage);

FeaturePyramid generate_pyramid(const PyramidSpec& spec);

/// Fills `t` with iid uniform draws in [lo, hi) (top 53 bits of each output).
void fill_uniform(Tensor& t, SplitMix64& bits, double lo, double hi);

/// Fills `t` with iid normal draws of standard deviation `std` from `stream`.
void fill_normal(Tensor& t, NormalStream& stream, double std = 1.0);

}  // namespace scaseg::synth
