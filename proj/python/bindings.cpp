#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scaseg/analysis.hpp"
#include "scaseg/cli.hpp"
#include "scaseg/config.hpp"
#include "scaseg/decoder.hpp"
#include "scaseg/oracle.hpp"
#include "scaseg/scat.hpp"
#include "scaseg/selftest.hpp"

namespace py = pybind11;
using namespace scaseg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  Array a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

Tensor from_numpy(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::list to_list(const std::array<Tensor, 4>& ts) {
  py::list out;
  for (const auto& t : ts) out.append(to_numpy(t));
  return out;
}

analysis::MixerShape shape_of(std::size_t n_q, std::size_t n_kv, std::size_t c_q, std::size_t c_kv,
                              std::size_t heads, std::size_t dim_head) {
  return {n_q, n_kv, c_q, c_kv, heads, dim_head};
}

RunConfig config_from(const std::string& json_text) {
  return parse_run_config(json_text.empty() ? Json::object() : Json::parse(json_text));
}

// Largest |fast - oracle| over out and attn for one seeded mixer case.
double oracle_gap(const std::string& mixer, std::size_t n_q, std::size_t n_kv, std::size_t c_q,
                  std::size_t c_kv, std::size_t heads, std::size_t dim_head, std::uint64_t seed) {
  synth::NormalStream rng(seed);
  Tensor xq({1, n_q, c_q}), xkv({1, n_kv, c_kv});
  synth::fill_normal(xq, rng);
  synth::fill_normal(xkv, rng);
  AttnOutput fast, ref;
  switch (parse_mixer(mixer)) {
    case MixerKind::kSCA: {
      const auto p = make_sca_params(c_q, c_kv, heads, dim_head, rng, 0.5);
      fast = strip_cross_attention(xq, xkv, p);
      ref = oracle::oracle_strip_attention(xq, xkv, p);
      break;
    }
    case MixerKind::kCA: {
      const auto p = make_vanilla_params(c_q, c_kv, heads, dim_head, rng, 0.5);
      fast = cross_attention(xq, xkv, p);
      ref = oracle::oracle_attention(xq, xkv, p);
      break;
    }
    case MixerKind::kSA: {
      const auto p = make_vanilla_params(c_q, c_q, heads, dim_head, rng, 0.5);
      fast = self_attention(xq, p);
      ref = oracle::oracle_attention(xq, xq, p);
      break;
    }
  }
  return std::max(max_abs_diff(fast.out, ref.out), max_abs_diff(fast.attn, ref.attn));
}

}  // namespace

PYBIND11_MODULE(_scaseg, m) {
  m.doc() = "Strip cross-attention segmentation decoder (fp64 reference implementation)";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<io::FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("splitmix64_next", &synth::splitmix64_next, py::arg("state"),
        "One splitmix64 step, returns (output, next_state).");

  m.def(
      "generate_pyramid",
      [](std::size_t height, std::size_t width, std::array<std::size_t, 4> channels,
         std::size_t batch, std::uint64_t seed) {
        synth::PyramidSpec spec{height, width, channels, batch, seed};
        return to_list(synth::generate_pyramid(spec).f);
      },
      py::arg("height") = 64, py::arg("width") = 64,
      py::arg("channels") = std::array<std::size_t, 4>{8, 16, 32, 64}, py::arg("batch") = 1,
      py::arg("seed") = 0);

  m.def(
      "forward",
      [](const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        const auto trace = decode(synth::generate_pyramid(cfg.pyramid),
                                  make_decoder_params(cfg.pyramid.channels, cfg.decoder, cfg.seed));
        py::dict out;
        out["mask"] = to_numpy(trace.mask);
        out["m"] = to_list(trace.m);
        out["d"] = to_list(trace.d);
        out["attn"] = to_list(trace.attn);
        return out;
      },
      py::arg("config_json") = "", "Decode the configured synthetic pyramid.");

  m.def("resolve_config", [](const std::string& config_json) { return to_json(config_from(config_json)).dump(); },
        py::arg("config_json") = "");

  m.def(
      "closed_form_flops",
      [](const std::string& mixer, std::uint64_t n, std::uint64_t c) {
        return analysis::closed_form_flops(parse_mixer(mixer), n, c);
      },
      py::arg("mixer"), py::arg("n"), py::arg("c"));

  m.def(
      "count_flops",
      [](const std::string& mixer, std::size_t n_q, std::size_t n_kv, std::size_t c_q,
         std::size_t c_kv, std::size_t heads, std::size_t dim_head, std::uint64_t seed) {
        const auto r = analysis::count_flops(parse_mixer(mixer),
                                             shape_of(n_q, n_kv, c_q, c_kv, heads, dim_head), seed);
        py::dict d;
        d["closed_form_attn_flops"] = r.closed_form_attn_flops;
        d["counted_attn_flops"] = r.counted_attn_flops;
        d["counted_total_flops"] = r.counted_total_flops;
        d["peak_activation_elems"] = r.peak_activation_elems;
        d["query_key_elems"] = r.query_key_elems;
        return d;
      },
      py::arg("mixer"), py::arg("n_q"), py::arg("n_kv"), py::arg("c_q"), py::arg("c_kv"),
      py::arg("heads"), py::arg("dim_head"), py::arg("seed") = 0);

  m.def("oracle_gap", &oracle_gap, py::arg("mixer"), py::arg("n_q"), py::arg("n_kv"), py::arg("c_q"),
        py::arg("c_kv"), py::arg("heads"), py::arg("dim_head"), py::arg("seed") = 0);

  m.def("read_scat", [](const std::string& path) { return to_numpy(io::read_scat(std::filesystem::path(path))); },
        py::arg("path"));
  m.def(
      "write_scat",
      [](const std::string& path, const Array& a) { io::write_scat(std::filesystem::path(path), from_numpy(a)); },
      py::arg("path"), py::arg("array"));

  m.def("selftest", [] {
    py::list out;
    for (const auto& r : selftest::run_all()) out.append(py::make_tuple(r.name, r.passed, r.detail));
    return out;
  });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "scaseg");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
