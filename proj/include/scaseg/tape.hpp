#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "scaseg/tensor.hpp"

namespace scaseg {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Maps the output gradient (and the forward output) onto one gradient per
/// input. An empty Tensor means "no contribution".
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const Tensor& out)>;

class GradientMap {
 public:
  bool contains(Var v) const { return grads_.count(v.id) != 0; }
  /// Gradient of `v`, or zeros of its shape if it was unreachable.
  Tensor of(Var v) const;

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
};

/// Reverse-mode differentiation record. Single-owner; not thread-safe.
class Tape {
 public:
  /// With `record == false` values are still stored but no backward nodes are
  /// kept, which is what inference runs use.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Stores `out` and, if any input needs a gradient, a node that maps the
  /// output gradient onto the inputs.
  Var emit(Tensor out, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return values_.at(id); }
  bool requires_grad(Var v) const { return requires_grad_.at(v.id); }
  bool recording() const { return record_; }

  std::size_t node_count() const { return nodes_.size(); }
  /// Output ids of the recorded nodes, in recording order.
  std::vector<std::size_t> node_outputs() const;

  /// Reverse sweep from a scalar loss. Visits nodes in strict reverse
  /// recording order. Throws ShapeError for a non-scalar loss.
  GradientMap backward(Var loss) const;

  /// Test hook: when set, every parameter gradient is scaled by (1 + factor).
  /// Used as a negative control for gradient checking.
  static void set_corruption(double factor);

 private:
  struct Node {
    std::vector<std::size_t> inputs;
    std::size_t output;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, bool is_parameter);

  bool record_;
  std::deque<Tensor> values_;
  std::vector<bool> requires_grad_;
  std::vector<bool> is_parameter_;
  std::vector<Node> nodes_;
};

/// Backward sweep from `loss`; free-function form.
inline GradientMap backward(const Tape& tape, Var loss) { return tape.backward(loss); }

}  // namespace scaseg
