#include "scaseg/tape.hpp"

#include <atomic>

#include "scaseg/instrument.hpp"
#include "scaseg/kernels.hpp"

namespace scaseg {

namespace {
std::atomic<double> g_corruption{0.0};
}

const Tensor& Var::value() const {
  if (!tape) throw std::logic_error("Var is not bound to a tape");
  return tape->value(id);
}

Tensor GradientMap::of(Var v) const {
  auto it = grads_.find(v.id);
  if (it != grads_.end()) return it->second;
  return Tensor::zeros_like(v.value());
}

Var Tape::push(Tensor value, bool requires_grad, bool is_parameter) {
  instrument::note_activation(value.size());
  values_.push_back(std::move(value));
  requires_grad_.push_back(requires_grad);
  is_parameter_.push_back(is_parameter);
  return Var{this, values_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, false); }

Var Tape::parameter(Tensor value) { return push(std::move(value), record_, true); }

Var Tape::emit(Tensor out, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  if (record_) {
    for (const Var& v : inputs) {
      if (v.tape != this) throw std::logic_error("Tape::emit: input from a different tape");
      needs = needs || requires_grad_[v.id];
    }
  }
  Var result = push(std::move(out), needs, false);
  if (needs) {
    Node node;
    node.output = result.id;
    node.backward = std::move(backward);
    for (const Var& v : inputs) node.inputs.push_back(v.id);
    nodes_.push_back(std::move(node));
  }
  return result;
}

std::vector<std::size_t> Tape::node_outputs() const {
  std::vector<std::size_t> ids;
  ids.reserve(nodes_.size());
  for (const auto& n : nodes_) ids.push_back(n.output);
  return ids;
}

GradientMap Tape::backward(Var loss) const {
  if (loss.tape != this) throw std::logic_error("Tape::backward: loss from a different tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got " + to_string(lv.shape()));

  instrument::PauseScope pause;
  GradientMap out;
  auto& grads = out.grads_;
  grads.emplace(loss.id, Tensor(lv.shape(), 1.0));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto g = grads.find(it->output);
    if (g == grads.end()) continue;
    std::vector<Tensor> in_grads = it->backward(g->second, values_[it->output]);
    for (std::size_t k = 0; k < it->inputs.size(); ++k) {
      const std::size_t id = it->inputs[k];
      if (!requires_grad_[id] || k >= in_grads.size() || in_grads[k].empty()) continue;
      if (in_grads[k].shape() != values_[id].shape()) {
        throw ShapeError("backward: gradient shape " + to_string(in_grads[k].shape()) +
                         " does not match value shape " + to_string(values_[id].shape()));
      }
      auto [slot, inserted] = grads.try_emplace(id, std::move(in_grads[k]));
      if (!inserted) slot->second = kernels::add(slot->second, in_grads[k]);
    }
  }
  const double corruption = g_corruption.load();
  if (corruption != 0.0) {
    for (auto& [id, g] : grads) {
      if (is_parameter_[id]) g = kernels::scale(g, 1.0 + corruption);
    }
  }
  return out;
}

void Tape::set_corruption(double factor) { g_corruption = factor; }

}  // namespace scaseg
