#pragma once

#include <functional>
#include <vector>

#include "ntg/errors.hpp"
#include "ntg/tensor.hpp"

namespace ntg {

// Handle into a Tape. Scalars are size-1 vectors.
struct Var {
  int id = -1;
  int size = 0;
  bool valid() const { return id >= 0; }
};

// Reverse-mode accumulation over an explicitly recorded computation.
// One tape per forward pass; backward() replays the op list in reverse and
// then flushes leaf gradients into the ParamTensors they came from.
// Parameter values are copied in at param(), so the ParamTensor itself stays
// untouched during the forward/backward of an example.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(std::vector<double> v);
  Var constant(double c) { return input({c}); }
  Var param(ParamTensor& t);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);          // elementwise
  Var scale(Var a, double c);     // constant scale
  Var add_const(Var a, double c);
  Var mul_scalar(Var s, Var x);   // size-1 s broadcast over x
  Var matvec(Var w, int rows, int cols, Var x);
  Var sigmoid(Var x);
  Var tanh_(Var x);
  Var relu(Var x);
  Var concat(const std::vector<Var>& xs);
  Var slice(Var x, int offset, int len);
  Var dot(Var a, Var b);
  Var pick(Var x, int i);
  Var stack(const std::vector<Var>& scalars);
  Var sum(const std::vector<Var>& scalars);
  Var mean(const std::vector<Var>& scalars);
  Var softmax(Var logits);
  // loss = -log softmax(logits)[target]; numerically stable
  Var softmax_cross_entropy(Var logits, int target);
  // p clamped into [eps, 1-eps] before the log; y in {0, 1}
  Var binary_cross_entropy(Var p, int y, double eps = 1e-7);

  void backward(Var loss);

  const std::vector<double>& value(Var v) const { return nodes_[v.id].val; }
  double scalar(Var v) const { return nodes_[v.id].val[0]; }
  const std::vector<double>& grad(Var v) const { return nodes_[v.id].grad; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<double> val;
    std::vector<double> grad;
  };

  int push(std::vector<double> val, std::function<void(Tape&)> back = nullptr);
  Node& n(int id) { return nodes_[id]; }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, std::function<void(Tape&)>>> ops_;  // (node id, backward)
  std::vector<std::pair<int, ParamTensor*>> leaves_;
};

}  // namespace ntg
