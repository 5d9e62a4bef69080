#include "vqwave/nn/tape.hpp"

#include "vqwave/error.hpp"

namespace vqwave::nn {

Parameter::Parameter(std::string name_, Tensor init)
    : name(std::move(name_)), value(std::move(init)), grad(value.shape()), adam_m(value.shape()), adam_v(value.shape()) {}

const Tensor& Var::value() const { return tape->value(*this); }

Tape::Tape() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Var Tape::push(Node node) {
  if (check_finite_ && !node.value.all_finite()) {
    throw Error(ErrorKind::Numerical, std::string("non-finite value produced by op '") + node.op + "'");
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value, const char* op) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  return push(std::move(n));
}

Var Tape::leaf(Tensor value, const char* op) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.op = op;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  n.op = "param";
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn), op);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn, const char* op) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const Var& in : inputs) {
    if (!in.valid()) continue;
    if (in.tape != this) throw invalid_input(std::string("op '") + op + "' mixes tapes");
    n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad_accumulator(int id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss, BackwardOptions opts) {
  if (loss.tape != this) throw invalid_input("backward: loss belongs to another tape");
  if (nodes_.at(loss.id).value.size() != 1) throw invalid_input("backward: loss must hold exactly one value");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_accumulator(loss.id).fill(1.0);

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      if (!n.param->grad.same_shape(n.grad)) n.param->grad = Tensor(n.grad.shape());
      n.param->grad.mat() += n.grad.mat();
    }
    if (opts.release_intermediates && n.param == nullptr && n.backward) {
      n.backward = nullptr;
      n.value.clear();
      n.grad.clear();
    }
  }
}

std::optional<std::pair<int, std::string>> Tape::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].value.all_finite()) return std::make_pair(static_cast<int>(i), std::string(nodes_[i].op));
  }
  return std::nullopt;
}

}  // namespace vqwave::nn
