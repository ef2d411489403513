#include "scaseg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace scaseg {

namespace {

void reject_unknown(const Json& j, const std::string& where, const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const Json& j, const std::string& key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  const std::string field = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!j.at(key).is_number_unsigned()) throw ConfigError(field + ": expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, int>) {
      if (!j.at(key).is_number_integer()) throw ConfigError(field + ": expected an integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.at(key).is_number()) throw ConfigError(field + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.at(key).is_boolean()) throw ConfigError(field + ": expected a boolean");
    }
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

template <class T, std::size_t N>
void read_array(const Json& j, const std::string& key, const std::string& where,
                std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const std::string field = where + "." + key;
  const Json& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw ConfigError(field + ": expected an array of " + std::to_string(N) + " values");
  }
  for (std::size_t i = 0; i < N; ++i) {
    Json wrap = Json::object();
    wrap["v"] = a[i];
    read(wrap, "v", field + "[" + std::to_string(i) + "]", out[i]);
  }
}

}  // namespace

RunConfig RunConfig::gradcheck_defaults() {
  RunConfig c;
  c.pyramid.height = 32;
  c.pyramid.width = 32;
  c.pyramid.channels = {8, 8, 16, 16};
  c.decoder.num_classes = 2;
  c.decoder.heads = {1, 2, 2, 4};
  c.decoder.dim_head = 4;
  c.decoder.mlp_expansion = 2;
  // Zero biases put the gate's ReLU inputs within one probe step of the kink.
  c.decoder.bias_std = 0.02;
  return c;
}

RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  reject_unknown(j, "", {"pyramid", "decoder", "bench", "seed", "output_dir"});
  read(j, "seed", "", c.seed);
  read(j, "output_dir", "", c.output_dir);

  if (j.contains("pyramid")) {
    const Json& p = j.at("pyramid");
    reject_unknown(p, "pyramid", {"H", "W", "channels", "batch", "seed"});
    read(p, "H", "pyramid", c.pyramid.height);
    read(p, "W", "pyramid", c.pyramid.width);
    read_array(p, "channels", "pyramid", c.pyramid.channels);
    read(p, "batch", "pyramid", c.pyramid.batch);
    read(p, "seed", "pyramid", c.pyramid.seed);
  }
  try {
    c.pyramid.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("decoder")) {
    const Json& d = j.at("decoder");
    reject_unknown(d, "decoder",
                   {"mixer", "num_classes", "heads", "dim_head", "mlp_expansion", "lpm_enabled",
                    "lpm_reduction", "cross_layer_enabled", "eps", "sca_scale", "vanilla_scale",
                    "init_std", "bias_std", "init"});
    auto& dc = c.decoder;
    if (d.contains("mixer")) {
      std::string name;
      read(d, "mixer", "decoder", name);
      try {
        dc.mixer = parse_mixer(name);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("decoder.mixer: ") + e.what());
      }
    }
    read(d, "num_classes", "decoder", dc.num_classes);
    read_array(d, "heads", "decoder", dc.heads);
    read(d, "dim_head", "decoder", dc.dim_head);
    read(d, "mlp_expansion", "decoder", dc.mlp_expansion);
    read(d, "lpm_enabled", "decoder", dc.lpm_enabled);
    read(d, "lpm_reduction", "decoder", dc.lpm_reduction);
    read_array(d, "cross_layer_enabled", "decoder", dc.cross_layer_enabled);
    read(d, "eps", "decoder", dc.eps);
    read(d, "sca_scale", "decoder", dc.sca_scale);
    if (d.contains("vanilla_scale")) {
      double v = 0.0;
      read(d, "vanilla_scale", "decoder", v);
      dc.vanilla_scale = v;
    }
    read(d, "init_std", "decoder", dc.init_std);
    read(d, "bias_std", "decoder", dc.bias_std);
    if (d.contains("init")) {
      std::string mode;
      read(d, "init", "decoder", mode);
      if (mode != "random" && mode != "identity") {
        throw ConfigError("decoder.init: expected \"random\" or \"identity\", got \"" + mode + "\"");
      }
      dc.identity_init = mode == "identity";
    }
  }
  const auto& dc = c.decoder;
  if (dc.num_classes == 0) throw ConfigError("decoder.num_classes: must be >= 1");
  if (dc.dim_head == 0) throw ConfigError("decoder.dim_head: must be >= 1");
  if (dc.mlp_expansion == 0) throw ConfigError("decoder.mlp_expansion: must be >= 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (dc.heads[i] == 0) throw ConfigError("decoder.heads[" + std::to_string(i) + "]: must be >= 1");
  }
  if (!(dc.eps > 0.0)) throw ConfigError("decoder.eps: must be > 0");
  if (!(dc.sca_scale > 0.0)) throw ConfigError("decoder.sca_scale: must be > 0");
  if (dc.vanilla_scale && !(*dc.vanilla_scale > 0.0)) {
    throw ConfigError("decoder.vanilla_scale: must be > 0");
  }
  if (!(dc.init_std >= 0.0)) throw ConfigError("decoder.init_std: must be >= 0");
  if (!(dc.bias_std >= 0.0)) throw ConfigError("decoder.bias_std: must be >= 0");
  if (dc.lpm_enabled) {
    if (dc.lpm_reduction == 0) throw ConfigError("decoder.lpm_reduction: must be >= 1");
    for (std::size_t i = 0; i < 4; ++i) {
      if (c.pyramid.channels[i] % dc.lpm_reduction) {
        throw ConfigError("decoder.lpm_reduction: pyramid.channels[" + std::to_string(i) + "] = " +
                          std::to_string(c.pyramid.channels[i]) + " is not divisible by " +
                          std::to_string(dc.lpm_reduction));
      }
    }
  }

  if (j.contains("bench")) {
    const Json& b = j.at("bench");
    reject_unknown(b, "bench", {"tokens", "channels", "heads", "repetitions", "warmup"});
    if (b.contains("tokens")) {
      const Json& n = b.at("tokens");
      if (!n.is_array() || n.empty()) throw ConfigError("bench.tokens: expected a non-empty array");
      c.bench.tokens.clear();
      for (std::size_t i = 0; i < n.size(); ++i) {
        std::size_t v = 0;
        Json wrap = Json::object();
        wrap["v"] = n[i];
        read(wrap, "v", "bench.tokens[" + std::to_string(i) + "]", v);
        if (v == 0) throw ConfigError("bench.tokens: entries must be >= 1");
        c.bench.tokens.push_back(v);
      }
    }
    read(b, "channels", "bench", c.bench.channels);
    read(b, "heads", "bench", c.bench.heads);
    read(b, "repetitions", "bench", c.bench.repetitions);
    read(b, "warmup", "bench", c.bench.warmup);
  }
  if (c.bench.heads == 0 || c.bench.channels % c.bench.heads) {
    throw ConfigError("bench.channels: must be a positive multiple of bench.heads");
  }
  if (c.bench.repetitions < 9) throw ConfigError("bench.repetitions: must be >= 9");
  if (c.bench.warmup < 2) throw ConfigError("bench.warmup: must be >= 2");
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["pyramid"] = {{"H", c.pyramid.height},
                  {"W", c.pyramid.width},
                  {"channels", c.pyramid.channels},
                  {"batch", c.pyramid.batch},
                  {"seed", c.pyramid.seed}};
  const auto& d = c.decoder;
  j["decoder"] = {{"mixer", to_string(d.mixer)},
                  {"num_classes", d.num_classes},
                  {"heads", d.heads},
                  {"dim_head", d.dim_head},
                  {"mlp_expansion", d.mlp_expansion},
                  {"lpm_enabled", d.lpm_enabled},
                  {"lpm_reduction", d.lpm_reduction},
                  {"cross_layer_enabled", d.cross_layer_enabled},
                  {"eps", d.eps},
                  {"sca_scale", d.sca_scale},
                  {"vanilla_scale", d.vanilla_scale.value_or(
                                        1.0 / std::sqrt(static_cast<double>(d.dim_head)))},
                  {"init_std", d.init_std},
                  {"bias_std", d.bias_std},
                  {"init", d.identity_init ? "identity" : "random"}};
  j["bench"] = {{"tokens", c.bench.tokens},
                {"channels", c.bench.channels},
                {"heads", c.bench.heads},
                {"repetitions", c.bench.repetitions},
                {"warmup", c.bench.warmup}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json(path));
}

bool is_sweep(const Json& j) { return j.is_object() && j.contains("sweep"); }

std::vector<analysis::MixerShape> parse_sweep(const Json& j) {
  reject_unknown(j, "", {"sweep"});
  const Json& list = j.at("sweep");
  if (!list.is_array() || list.empty()) throw ConfigError("sweep: expected a non-empty array");
  std::vector<analysis::MixerShape> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "sweep[" + std::to_string(i) + "]";
    const Json& e = list[i];
    reject_unknown(e, where, {"N_q", "N_kv", "C_q", "C_kv", "heads", "dim_head"});
    if (!e.contains("N_q") || !e.contains("C_q")) throw ConfigError(where + ": N_q and C_q are required");
    analysis::MixerShape s;
    read(e, "N_q", where, s.n_q);
    read(e, "C_q", where, s.c_q);
    s.n_kv = s.n_q;
    s.c_kv = s.c_q;
    read(e, "N_kv", where, s.n_kv);
    read(e, "C_kv", where, s.c_kv);
    read(e, "heads", where, s.heads);
    if (s.heads == 0) throw ConfigError(where + ".heads: must be >= 1");
    s.dim_head = s.c_q / s.heads;
    read(e, "dim_head", where, s.dim_head);
    if (s.n_q == 0 || s.n_kv == 0 || s.c_q == 0 || s.c_kv == 0 || s.dim_head == 0) {
      throw ConfigError(where + ": extents must be >= 1");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace scaseg
