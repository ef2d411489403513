#pragma once

#include <cstddef>
#include <cstdint>

namespace scaseg::instrument {

// Which part of a forward pass the kernels are currently serving. Mixers tag
// the attention-score product and the attention-weighted value sum; all
// other multiply-accumulates land in the remaining buckets by kernel kind.
enum class Stage { kDefault, kScore, kWeightedSum };

struct OpCounts {
  std::uint64_t score_macs = 0;
  std::uint64_t weighted_sum_macs = 0;
  std::uint64_t projection_macs = 0;  // linear layers and untagged matmuls
  std::uint64_t conv_macs = 0;
  std::uint64_t peak_activation_elems = 0;
  std::uint64_t query_key_elems = 0;  // query + key activations of the mixers

  std::uint64_t attention_macs() const { return score_macs + weighted_sum_macs; }
  std::uint64_t total_macs() const {
    return score_macs + weighted_sum_macs + projection_macs + conv_macs;
  }
};

/// Global switch. Counting scopes refuse to open while disabled.
void set_enabled(bool enabled);
bool enabled();

/// Collects counts for every kernel run on this thread while alive.
/// Scopes nest; the innermost one receives the counts.
class CountingScope {
 public:
  CountingScope();
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

  const OpCounts& counts() const { return counts_; }

 private:
  OpCounts counts_;
  OpCounts* previous_;
};

class StageScope {
 public:
  explicit StageScope(Stage stage);
  ~StageScope();
  StageScope(const StageScope&) = delete;
  StageScope& operator=(const StageScope&) = delete;

 private:
  Stage previous_;
};

/// Suspends counting (backward passes use the forward kernels).
class PauseScope {
 public:
  PauseScope();
  ~PauseScope();
  PauseScope(const PauseScope&) = delete;
  PauseScope& operator=(const PauseScope&) = delete;

 private:
  bool previous_;
};

/// Hashes the sign pattern of every ReLU input seen on this thread while
/// alive. Two evaluations with equal signatures took the same linear pieces.
class BranchRecorder {
 public:
  BranchRecorder();
  ~BranchRecorder();
  BranchRecorder(const BranchRecorder&) = delete;
  BranchRecorder& operator=(const BranchRecorder&) = delete;

  std::uint64_t signature() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::uint64_t* previous_;
};

void note_branches(const double* x, std::size_t n);

void add_matmul_macs(std::uint64_t macs);
void add_linear_macs(std::uint64_t macs);
void add_conv_macs(std::uint64_t macs);
void note_activation(std::uint64_t elems);
void note_query_key(std::uint64_t elems);

}  // namespace scaseg::instrument
