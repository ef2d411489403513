#include "scaseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "scaseg/instrument.hpp"

namespace scaseg::gradcheck {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Every index once, in a seeded order (identity order when all are probed).
std::vector<std::size_t> probe_order(std::size_t n, std::size_t max_entries,
                                     synth::SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (max_entries == 0 || n <= max_entries) return idx;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

struct Evaluation {
  double value;
  std::uint64_t branches;
};

Evaluation evaluate(const LossFn& loss, const std::vector<Tensor>& inputs) {
  instrument::BranchRecorder recorder;
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const Tensor& v = loss(tape, vars).value();
  if (v.size() != 1) throw ShapeError("gradcheck: loss must be scalar, got " + to_string(v.shape()));
  return {v[0], recorder.signature()};
}

}  // namespace

std::vector<GroupResult> check(const LossFn& loss, const std::vector<Tensor>& inputs,
                               const std::vector<std::string>& names, std::size_t max_entries,
                               std::uint64_t seed) {
  if (names.size() != inputs.size()) throw std::invalid_argument("gradcheck: one name per input");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    GradientMap grads = tape.backward(loss(tape, vars));
    for (const Var& v : vars) analytic.push_back(grads.of(v));
  }

  synth::SplitMix64 rng(seed);
  std::vector<Tensor> work = inputs;
  std::vector<GroupResult> results;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    GroupResult r{names[k], 0, 0, 0.0, 0.0};
    const std::size_t want = max_entries == 0 ? inputs[k].size() : max_entries;
    for (std::size_t e : probe_order(inputs[k].size(), max_entries, rng)) {
      if (r.checked == want) break;
      const double orig = work[k][e];
      work[k][e] = orig + kStep;
      const Evaluation plus = evaluate(loss, work);
      work[k][e] = orig - kStep;
      const Evaluation minus = evaluate(loss, work);
      work[k][e] = orig;
      if (plus.branches != minus.branches) {
        ++r.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * kStep);
      const double a = analytic[k][e];
      r.max_rel_err = std::max(r.max_rel_err, relative_error(a, numeric));
      r.max_abs_err = std::max(r.max_abs_err, std::abs(a - numeric));
      ++r.checked;
    }
    results.push_back(r);
  }
  return results;
}

std::vector<GroupResult> check_decoder(const synth::PyramidSpec& spec, const DecoderConfig& cfg,
                                       std::uint64_t seed, std::size_t max_entries) {
  const auto pyramid = synth::generate_pyramid(spec);
  const DecoderParams params = make_decoder_params(spec.channels, cfg, seed);

  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for_each_leaf(params, [&](const std::string& name, const Tensor& t) {
    names.push_back(name);
    leaves.push_back(t);
  });

  LossFn loss = [&](Tape& tape, const std::vector<Var>& vars) {
    std::size_t next = 0;
    DecoderVars bound =
        map_leaves<Var>(params, [&](const std::string&, const Tensor&) { return vars[next++]; }, "");
    std::array<Var, 4> f;
    for (int i = 0; i < 4; ++i) f[i] = tape.constant(pyramid.f[i]);
    return sum(decode(f, bound).mask);
  };
  return check(loss, leaves, names, max_entries, seed);
}

double worst(const std::vector<GroupResult>& groups) {
  double w = 0.0;
  for (const auto& g : groups) w = std::max(w, g.max_rel_err);
  return w;
}

}  // namespace scaseg::gradcheck
