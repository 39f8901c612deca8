#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "rotdiff/tensor.hpp"

namespace rotdiff {

class Graph;

/// Handle to a node on a Graph tape. Plain index, cheap to copy. Only valid
/// for the graph that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over Tensor2 values.
///
/// Usage: bind parameter leaves with param(), build the computation with the
/// op methods, then call backward() on a 1x1 loss node. Gradients accumulate
/// (+=) into the external grad buffers given at param(); call sites own
/// zeroing. Nodes run their backward in reverse creation order, which makes
/// the accumulation order deterministic.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  // ---- leaves ----

  /// Value captured by copy; no gradient is tracked through it.
  Var constant(Tensor2 v);

  /// Leaf bound to external storage. The value is snapshotted at call time;
  /// after backward() the node gradient is added into *grad.
  Var param(const Tensor2* value, Tensor2* grad);

  // ---- core ops ----

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);                   // same shape
  Var sub(Var a, Var b);                   // same shape
  Var mul(Var a, Var b);                   // elementwise, same shape
  Var add_rowvec(Var a, Var row);          // row is 1 x cols(a), broadcast down rows
  Var mul_rowvec(Var a, Var row);          // row is 1 x cols(a)
  Var mul_bscalar(Var a, Var s);           // s is 1x1, broadcast everywhere
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var concat_rows(const std::vector<Var>& parts);  // shared col count
  Var concat_cols(const std::vector<Var>& parts);  // shared row count
  /// Gather rows; indices may repeat (backward scatter-adds).
  Var select_rows(Var a, std::vector<int> idx);
  Var slice_cols(Var a, int c0, int c1);   // [c0, c1)
  Var row_softmax(Var a);
  Var layernorm_rows(Var a);               // per-row normalize, eps 1e-5, no affine
  Var gelu(Var a);                         // exact: x * Phi(x)
  Var exp(Var a);                          // elementwise
  Var sum(Var a);                          // -> 1x1
  Var mean(Var a);                         // -> 1x1
  Var sum_squares(Var a);                  // -> 1x1
  Var l1_loss(Var a, Var b);               // mean |a - b| -> 1x1

  // ---- rotation ops (rows hold 3x3 matrices flattened row-major) ----

  /// n x 3 tangent rows -> n x 9 rotation rows via the exponential map.
  Var rodrigues_rows(Var v);
  /// Per-row 3x3 matrix product of two n x 9 inputs.
  Var rotmul_rows(Var a, Var b);

  /// Extension point for domain ops defined outside this class (e.g. forward
  /// kinematics). The backward fn reads grad(id) and accumulates into the
  /// parents via add_to_grad.
  Var add_custom(Tensor2 value, std::vector<int> parents, BackwardFn back);

  // ---- access / backward ----

  const Tensor2& value(Var v) const;
  /// Node gradient; zeros-shaped if nothing flowed there. Valid after backward().
  const Tensor2& grad(Var v) const;
  bool needs_grad(Var v) const;
  /// Accumulate into a node's gradient buffer (for custom backward fns).
  void add_to_grad(int id, const Tensor2& g);
  Tensor2& grad_buffer(int id);

  /// loss must be 1x1. May be called once per graph.
  void backward(Var loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;                // lazily sized
    bool grad_live = false;      // some gradient has been accumulated
    bool needs_grad = false;
    std::vector<int> parents;
    BackwardFn back;
    Tensor2* bound_grad = nullptr;  // param leaves only
  };

  // deque: node references handed out via value()/grad() stay valid while
  // later ops keep growing the tape.
  std::deque<Node> nodes_;
  bool ran_backward_ = false;

  int push(Tensor2 value, std::vector<int> parents, BackwardFn back);
  const Node& node(Var v) const;
  void check(Var v, const char* op) const;
};

}  // namespace rotdiff
