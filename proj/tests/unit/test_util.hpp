#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scaseg/gradcheck.hpp"
#include "scaseg/ops.hpp"
#include "scaseg/synth.hpp"

namespace scaseg::test {

inline Tensor uniform(Shape shape, synth::SplitMix64& bits, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  synth::fill_uniform(t, bits, lo, hi);
  return t;
}

inline Tensor normal(Shape shape, std::uint64_t seed, double std = 1.0) {
  Tensor t(std::move(shape));
  synth::NormalStream rng(seed);
  synth::fill_normal(t, rng, std);
  return t;
}

/// Max relative gradient error of sum(w * op(inputs)) for a fixed random w.
inline double grad_error(std::function<Var(const std::vector<Var>&)> op,
                         const std::vector<Tensor>& inputs, std::uint64_t probe_seed = 17) {
  gradcheck::LossFn fn = [op, probe_seed](Tape& t, const std::vector<Var>& v) {
    Var out = op(v);
    Tensor w(out.shape());
    synth::SplitMix64 probe(probe_seed);
    synth::fill_uniform(w, probe, -1.0, 1.0);
    return sum(mul(out, t.constant(std::move(w))));
  };
  std::vector<std::string> names(inputs.size(), "input");
  return gradcheck::worst(gradcheck::check(fn, inputs, names));
}

}  // namespace scaseg::test
