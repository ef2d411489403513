#include "scaseg/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace scaseg::synth {

std::pair<std::uint64_t, std::uint64_t> splitmix64_next(std::uint64_t state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return {z ^ (z >> 31), state};
}

std::uint64_t SplitMix64::operator()() {
  auto [out, next] = splitmix64_next(state_);
  state_ = next;
  return out;
}

double NormalStream::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  constexpr double kScale = 0x1.0p-53;
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((bits_() >> 11) + 1) * kScale;
  const double u2 = static_cast<double>(bits_() >> 11) * kScale;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double standard_normal(NormalStream& stream) { return stream(); }

void PyramidSpec::validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw std::invalid_argument("pyramid: H and W must be positive multiples of 32 (got H=" +
                                std::to_string(height) + ", W=" + std::to_string(width) + ")");
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == 0) {
      throw std::invalid_argument("pyramid: channels[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (batch == 0) throw std::invalid_argument("pyramid: batch must be >= 1");
}

std::size_t PyramidSpec::channel_sum() const {
  return channels[0] + channels[1] + channels[2] + channels[3];
}

std::uint64_t stage_seed(std::uint64_t seed, int stage) {
  return splitmix64_next(seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(stage))).first;
}

void fill_normal(Tensor& t, NormalStream& stream, double std) {
  for (double& v : t.data()) v = std * stream();
}

void fill_uniform(Tensor& t, SplitMix64& bits, double lo, double hi) {
  for (double& v : t.data()) v = lo + (hi - lo) * static_cast<double>(bits() >> 11) * 0x1.0p-53;
}

FeaturePyramid generate_pyramid(const PyramidSpec& spec) {
  spec.validate();
  FeaturePyramid p;
  for (int i = 1; i <= 4; ++i) {
    Tensor t({spec.batch, spec.channels[i - 1], spec.stage_height(i), spec.stage_width(i)});
    NormalStream stream(stage_seed(spec.seed, i));
    fill_normal(t, stream);
    p.f[i - 1] = std::move(t);
  }
  return p;
}

}  // namespace scaseg::synth
