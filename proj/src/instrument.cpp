#include "scaseg/instrument.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

namespace scaseg::instrument {

namespace {

std::atomic<bool> g_enabled{true};
thread_local OpCounts* t_counts = nullptr;
thread_local Stage t_stage = Stage::kDefault;
thread_local bool t_paused = false;
thread_local std::uint64_t* t_branches = nullptr;

OpCounts* active() { return t_paused ? nullptr : t_counts; }

}  // namespace

void set_enabled(bool enabled) { g_enabled = enabled; }
bool enabled() { return g_enabled; }

CountingScope::CountingScope() : previous_(t_counts) {
  if (!g_enabled) throw std::logic_error("instrumentation is disabled");
  t_counts = &counts_;
}

CountingScope::~CountingScope() { t_counts = previous_; }

StageScope::StageScope(Stage stage) : previous_(t_stage) { t_stage = stage; }
StageScope::~StageScope() { t_stage = previous_; }

PauseScope::PauseScope() : previous_(t_paused) { t_paused = true; }
PauseScope::~PauseScope() { t_paused = previous_; }

BranchRecorder::BranchRecorder() : previous_(t_branches) { t_branches = &hash_; }
BranchRecorder::~BranchRecorder() { t_branches = previous_; }

void note_branches(const double* x, std::size_t n) {
  if (!t_branches || t_paused) return;
  std::uint64_t h = *t_branches;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= x[i] > 0.0 ? 1u : 0u;
    h *= 0x100000001b3ULL;
  }
  *t_branches = h;
}

void add_matmul_macs(std::uint64_t macs) {
  auto* c = active();
  if (!c) return;
  switch (t_stage) {
    case Stage::kScore: c->score_macs += macs; break;
    case Stage::kWeightedSum: c->weighted_sum_macs += macs; break;
    case Stage::kDefault: c->projection_macs += macs; break;
  }
}

void add_linear_macs(std::uint64_t macs) {
  if (auto* c = active()) c->projection_macs += macs;
}

void add_conv_macs(std::uint64_t macs) {
  if (auto* c = active()) c->conv_macs += macs;
}

void note_activation(std::uint64_t elems) {
  if (auto* c = active()) c->peak_activation_elems = std::max(c->peak_activation_elems, elems);
}

void note_query_key(std::uint64_t elems) {
  if (auto* c = active()) c->query_key_elems += elems;
}

}  // namespace scaseg::instrument
