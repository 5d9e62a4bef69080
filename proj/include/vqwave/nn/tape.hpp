#pragma once

#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "vqwave/nn/tensor.hpp"

namespace vqwave::nn {

class Tape;

/// Trainable tensor with its gradient and Adam moment accumulators.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor init);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  void zero_grad() { grad.fill(0); }
};

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::int64_t rows() const { return value().rows(); }
  std::int64_t cols() const { return value().cols(); }
  /// Convenience for 1-element results.
  Scalar item() const { return value()[0]; }
};

using BackwardFn = std::function<void(Tape&, int self)>;

struct BackwardOptions {
  // Frees intermediate values, gradients and saved state once they are consumed.
  bool release_intermediates = false;
};

/// Ordered record of executed operations. backward() visits nodes in exact
/// reverse recording order; leaves bound to Parameters flush their gradient
/// into Parameter::grad at the end.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value, const char* op = "constant");
  Var leaf(Tensor value, const char* op = "leaf");
  Var param(Parameter& p);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn, const char* op);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  const char* op_name(int id) const { return nodes_.at(id).op; }

  /// Gradient of the last backward() with respect to `v` (empty if none flowed).
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  const Tensor& grad(int id) const { return nodes_.at(id).grad; }
  /// Zero-initialised accumulator for node `id`; used by backward functions.
  Tensor& grad_accumulator(int id);

  void backward(Var loss, BackwardOptions opts = {});

  std::size_t size() const { return nodes_.size(); }

  /// Index and op label of the first recorded node holding a NaN or Inf.
  std::optional<std::pair<int, std::string>> first_non_finite() const;

  /// When set, record() throws as soon as a non-finite value is produced.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    const char* op = "";
  };
  Var push(Node node);

  std::vector<Node> nodes_;
  bool check_finite_;
};

}  // namespace vqwave::nn
