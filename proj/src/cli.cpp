#include "scaseg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "scaseg/analysis.hpp"
#include "scaseg/config.hpp"
#include "scaseg/gradcheck.hpp"
#include "scaseg/scat.hpp"
#include "scaseg/selftest.hpp"

namespace scaseg::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  bool dump_trace = false;
  bool check = false;
  bool corrupt_backward = false;
};

RunConfig resolve(const Options& o, RunConfig defaults = {}) {
  RunConfig cfg = o.config.empty() ? std::move(defaults) : load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

int cmd_forward(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const auto pyramid = synth::generate_pyramid(cfg.pyramid);
  const auto params = make_decoder_params(cfg.pyramid.channels, cfg.decoder, cfg.seed);
  const DecodeTrace trace = decode(pyramid, params);

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  io::write_scat(dir / "mask.scat", trace.mask);
  if (o.dump_trace) {
    for (int i = 0; i < 4; ++i) {
      const std::string k = std::to_string(i + 1);
      io::write_scat(dir / ("M" + k + ".scat"), trace.m[i]);
      io::write_scat(dir / ("D" + k + ".scat"), trace.d[i]);
      io::write_scat(dir / ("attn" + k + ".scat"), trace.attn[i]);
    }
  }
  write_text(dir / "run.json", to_json(cfg).dump(2) + "\n");
  out << "mask " << to_string(trace.mask.shape()) << " -> " << (dir / "mask.scat").string() << '\n';
  return kOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o, RunConfig::gradcheck_defaults());
  if (cfg.pyramid.height > 32 || cfg.pyramid.width > 32) {
    throw ConfigError("pyramid: gradcheck requires H, W <= 32 (got H=" +
                      std::to_string(cfg.pyramid.height) + ", W=" +
                      std::to_string(cfg.pyramid.width) + ")");
  }
  const auto groups = gradcheck::check_decoder(cfg.pyramid, cfg.decoder, cfg.seed);
  constexpr double kTolerance = 1e-3;
  bool ok = true;
  out << std::left << std::setw(36) << "group" << std::setw(10) << "entries" << std::setw(10) << "skipped"
      << "max_rel_err\n";
  for (const auto& g : groups) {
    const bool pass = g.max_rel_err < kTolerance;
    ok = ok && pass;
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << g.max_rel_err;
    out << std::left << std::setw(36) << g.name << std::setw(10) << g.checked << std::setw(10)
        << g.skipped << err.str()
        << (pass ? "" : "  FAIL") << '\n';
  }
  out << (ok ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << kTolerance << ")\n";
  return ok ? kOk : kTestFailure;
}

void emit_csv(const Options& o, const std::string& file, const std::vector<analysis::SweepRow>& rows,
              std::ostream& out) {
  if (o.out.empty()) {
    analysis::write_csv(out, rows);
  } else {
    fs::create_directories(o.out);
    analysis::write_csv(fs::path(o.out) / file, rows);
  }
}

int cmd_flops(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<analysis::MixerShape> shapes;
  if (o.config.empty()) {
    shapes = analysis::default_grid();
  } else {
    const Json j = read_json(o.config);
    if (is_sweep(j)) {
      shapes = parse_sweep(j);
    } else {
      const RunConfig cfg = parse_run_config(j);
      shapes = analysis::decoder_mixer_shapes(cfg.pyramid, cfg.decoder);
    }
  }
  const auto rows = analysis::sweep(shapes);
  emit_csv(o, "flops.csv", rows, out);
  if (o.check) {
    int mismatches = 0;
    for (const auto& r : rows) {
      if (r.flops.counted_attn_flops != r.flops.closed_form_attn_flops) {
        ++mismatches;
        err << "mismatch: " << to_string(r.flops.mixer) << " N_q=" << r.flops.config.n_q
            << " N_kv=" << r.flops.config.n_kv << " C=" << r.flops.config.inner()
            << " counted=" << r.flops.counted_attn_flops
            << " closed_form=" << r.flops.closed_form_attn_flops << '\n';
      }
    }
    if (mismatches) return kTestFailure;
    err << "check passed: " << rows.size() << " rows, counted == closed form\n";
  }
  return kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  analysis::BenchOptions opts;
  opts.repetitions = cfg.bench.repetitions;
  opts.warmup = cfg.bench.warmup;
  opts.seed = cfg.seed;
  std::vector<analysis::MixerShape> shapes;
  for (std::size_t n : cfg.bench.tokens) {
    const std::size_t c = cfg.bench.channels, h = cfg.bench.heads;
    shapes.push_back({n, n, c, c, h, c / h});
  }
  emit_csv(o, "bench.csv", analysis::sweep(shapes, true, opts), out);
  return kOk;
}

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const auto& r : selftest::run_all()) {
    ok = ok && r.passed;
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
  }
  return ok ? kOk : kTestFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SCASeg decoder toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--out", o.out, "output directory");
    sub->add_flag("--corrupt-backward", o.corrupt_backward,
                  "test hook: perturb parameter gradients (negative control)")
        ->group("");
  };
  auto* forward = app.add_subcommand("forward", "decode a synthetic pyramid, write mask.scat");
  add_common(forward);
  forward->add_flag("--dump-trace", o.dump_trace, "also write M1..4, D1..4, attn1..4");
  auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  add_common(gradcheck);
  auto* flops = app.add_subcommand("flops", "attention cost model CSV");
  add_common(flops);
  flops->add_flag("--check", o.check, "fail unless counted == closed form");
  auto* bench = app.add_subcommand("bench", "wall-clock SA/CA/SCA benchmark CSV");
  add_common(bench);
  auto* selftest = app.add_subcommand("selftest", "run the built-in verification suites");
  selftest->add_flag("--corrupt-backward", o.corrupt_backward, "test hook")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  struct CorruptionGuard {
    explicit CorruptionGuard(bool on) { Tape::set_corruption(on ? 1e-2 : 0.0); }
    ~CorruptionGuard() { Tape::set_corruption(0.0); }
  } guard(o.corrupt_backward);

  try {
    if (*forward) return cmd_forward(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
    if (*flops) return cmd_flops(o, out, err);
    if (*bench) return cmd_bench(o, out);
    if (*selftest) return cmd_selftest(out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace scaseg::cli
