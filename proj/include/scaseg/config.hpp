#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scaseg/analysis.hpp"
#include "scaseg/decoder.hpp"
#include "scaseg/synth.hpp"

namespace scaseg {

/// Invalid or unknown configuration field. The message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchConfig {
  std::vector<std::size_t> tokens{1024};
  std::size_t channels = 64;
  std::size_t heads = 8;
  int repetitions = 9;
  int warmup = 2;
};

struct RunConfig {
  synth::PyramidSpec pyramid;
  DecoderConfig decoder;
  BenchConfig bench;
  std::uint64_t seed = 0;  // parameter initialisation
  std::string output_dir = "out";

  /// Small defaults used by gradient checking (H = W = 32, two classes,
  /// nonzero biases).
  static RunConfig gradcheck_defaults();
};

using Json = nlohmann::ordered_json;

/// Missing keys take defaults; unknown keys are an error.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Every field, defaults included.
Json to_json(const RunConfig& cfg);

/// `{"sweep": [{"N_q":..,"N_kv":..,"C_q":..,"C_kv":..,"heads":..,"dim_head":..}, ...]}`.
/// N_kv and C_kv default to N_q and C_q, heads to 1, dim_head to C_q / heads.
std::vector<analysis::MixerShape> parse_sweep(const Json& j);
bool is_sweep(const Json& j);

Json read_json(const std::filesystem::path& path);

}  // namespace scaseg
