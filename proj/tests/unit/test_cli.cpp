#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "scaseg/cli.hpp"
#include "scaseg/config.hpp"
#include "scaseg/scat.hpp"

using namespace scaseg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "scaseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("scaseg_cli_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("forward writes the mask and the resolved config") {
  TempDir dir;
  const Result r = run({"forward", "--out", dir / "a"});
  REQUIRE(r.code == cli::kOk);
  const Tensor mask = io::read_scat(fs::path(dir / "a") / "mask.scat");
  CHECK(mask.shape() == Shape{1, 19, 16, 16});
  const Json echo = read_json(fs::path(dir / "a") / "run.json");
  CHECK(echo["decoder"]["eps"] == 1e-6);
  CHECK(echo["decoder"]["lpm_reduction"] == 4);
  CHECK(echo["output_dir"] == dir / "a");
}

TEST_CASE("forward is byte-reproducible, also from its own echo") {
  TempDir dir;
  REQUIRE(run({"forward", "--out", dir / "a", "--dump-trace"}).code == cli::kOk);
  REQUIRE(run({"forward", "--out", dir / "b", "--dump-trace"}).code == cli::kOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const std::string name = entry.path().filename().string();
    if (name == "run.json") continue;
    ++files;
    CHECK(slurp(entry.path()) == slurp(fs::path(dir / "b") / name));
  }
  CHECK(files == 13);
  CHECK(io::read_scat(fs::path(dir / "a") / "M2.scat").shape() == Shape{1, 4, 120});
  CHECK(io::read_scat(fs::path(dir / "a") / "D4.scat").shape() == Shape{1, 64, 2, 2});

  // Re-feeding the echo (with a fresh output directory) reproduces the mask.
  Json echo = read_json(fs::path(dir / "a") / "run.json");
  echo["output_dir"] = dir / "c";
  write_file(dir.path() / "echo.json", echo.dump());
  REQUIRE(run({"forward", "--config", dir / "echo.json"}).code == cli::kOk);
  CHECK(slurp(fs::path(dir / "c") / "mask.scat") == slurp(fs::path(dir / "a") / "mask.scat"));
  CHECK(slurp(fs::path(dir / "c") / "run.json") == echo.dump(2) + "\n");
}

TEST_CASE("config errors exit with code 2 and name the problem") {
  TempDir dir;
  write_file(dir.path() / "h60.json", R"({"pyramid": {"H": 60}})");
  Result r = run({"forward", "--config", dir / "h60.json", "--out", dir / "o"});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("32") != std::string::npos);
  CHECK(r.err.find("H=60") != std::string::npos);

  write_file(dir.path() / "typo.json", R"({"decoder": {"num_clases": 3}})");
  r = run({"forward", "--config", dir / "typo.json"});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("decoder.num_clases") != std::string::npos);

  CHECK(run({"forward", "--config", dir / "missing.json"}).code == cli::kConfigError);
  CHECK(run({"frobnicate"}).code == cli::kConfigError);
  CHECK(run({}).code == cli::kConfigError);
}

TEST_CASE("runtime failures exit with code 3") {
  TempDir dir;
  write_file(dir.path() / "blocker", "not a directory");
  const Result r = run({"forward", "--out", dir / "blocker/sub"});
  CHECK(r.code == cli::kRuntimeError);
}

TEST_CASE("flops on the default grid passes its self-check") {
  const Result r = run({"flops", "--check"});
  CHECK(r.code == cli::kOk);
  CHECK(count_lines(r.out) == 1 + 20 * 3);
  CHECK(r.out.find("SA,64,64,32,32,1,32,262144,262144,") != std::string::npos);
  CHECK(r.out.find("SCA,64,64,32,32,1,32,135168,135168,") != std::string::npos);
}

TEST_CASE("flops accepts sweep files and decoder configs") {
  TempDir dir;
  write_file(dir.path() / "sweep.json", R"({"sweep": [{"N_q": 16, "C_q": 8, "heads": 2}]})");
  Result r = run({"flops", "--config", dir / "sweep.json", "--out", dir / "o", "--check"});
  CHECK(r.code == cli::kOk);
  const std::string csv = slurp(fs::path(dir / "o") / "flops.csv");
  CHECK(count_lines(csv) == 4);
  CHECK(csv.find("SA,16,16,8,8,2,4,4096,4096,") != std::string::npos);

  write_file(dir.path() / "run.json", R"({"decoder": {"mixer": "SA"}})");
  r = run({"flops", "--config", dir / "run.json"});
  CHECK(r.code == cli::kOk);
  CHECK(count_lines(r.out) == 1 + 4 * 3);

  write_file(dir.path() / "broken.json", R"({"sweep": [{"N_q": 16, )");
  CHECK(run({"flops", "--config", dir / "broken.json"}).code == cli::kConfigError);
  write_file(dir.path() / "bad.json", R"({"sweep": [{"N_q": "many", "C_q": 8}]})");
  CHECK(run({"flops", "--config", dir / "bad.json"}).code == cli::kConfigError);
}

TEST_CASE("gradcheck passes and its negative control fails") {
  Result r = run({"gradcheck"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("clb1.sca.wq.weight") != std::string::npos);
  CHECK(r.out.find("gradcheck passed") != std::string::npos);

  r = run({"gradcheck", "--corrupt-backward"});
  CHECK(r.code == cli::kTestFailure);
  CHECK(r.out.find("FAIL") != std::string::npos);

  TempDir dir;
  write_file(dir.path() / "big.json", R"({"pyramid": {"H": 64, "W": 32}})");
  r = run({"gradcheck", "--config", dir / "big.json"});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("32") != std::string::npos);
}

TEST_CASE("bench emits one row per mixer") {
  TempDir dir;
  write_file(dir.path() / "bench.json", R"({"bench": {"tokens": [64], "channels": 16, "heads": 2}})");
  const Result r = run({"bench", "--config", dir / "bench.json"});
  REQUIRE(r.code == cli::kOk);
  CHECK(count_lines(r.out) == 4);
  std::istringstream rows(r.out);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) CHECK(line.back() != ',');
}

TEST_CASE("selftest exit codes") {
  CHECK(run({"selftest"}).code == cli::kOk);
  const Result tampered = run({"selftest", "--corrupt-backward"});
  CHECK(tampered.code == cli::kTestFailure);
  CHECK(tampered.out.find("FAIL") != std::string::npos);
  CHECK(run({"selftest"}).code == cli::kOk);
}

TEST_CASE("the installed binary reports the same exit codes") {
  TempDir dir;
  write_file(dir.path() / "h60.json", R"({"pyramid": {"H": 60}})");
  const std::string bin = SCASEG_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(bin + " forward --out " + (dir / "o")) == 0);
  CHECK(status(bin + " forward --config " + (dir / "h60.json")) == 2);
  CHECK(status(bin + " --help") == 0);
}
