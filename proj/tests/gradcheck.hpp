#pragma once

// Central-difference gradient checking against the tape. Builders must be
// pure functions of the supplied tensors so the graph can be rebuilt for
// each probe.

#include <cmath>
#include <functional>
#include <vector>

#include "rotdiff/graph.hpp"
#include "rotdiff/nn.hpp"

namespace gradcheck {

struct Result {
  double max_rel = 0.0;
  double max_abs = 0.0;
  int checked = 0;
};

inline double rel_err(double a, double n) {
  const double denom = std::max(std::abs(a) + std::abs(n), 1e-6);
  return std::abs(a - n) / denom;
}

/// builder(graph, leaves) -> 1x1 loss var, with leaves[i] bound to tensors[i].
using TensorBuilder =
    std::function<rotdiff::Var(rotdiff::Graph&, const std::vector<rotdiff::Var>&)>;

inline double eval_loss(std::vector<rotdiff::Tensor2>& tensors, const TensorBuilder& build) {
  rotdiff::Graph g;
  std::vector<rotdiff::Var> leaves;
  std::vector<rotdiff::Tensor2> grads;
  grads.reserve(tensors.size());
  for (auto& t : tensors) grads.emplace_back(t.rows(), t.cols());
  for (size_t i = 0; i < tensors.size(); ++i) leaves.push_back(g.param(&tensors[i], &grads[i]));
  return g.value(build(g, leaves)).at(0, 0);
}

inline Result check_tensors(std::vector<rotdiff::Tensor2>& tensors, const TensorBuilder& build,
                            double h = 1e-5) {
  std::vector<rotdiff::Tensor2> grads;
  for (auto& t : tensors) grads.emplace_back(t.rows(), t.cols());
  {
    rotdiff::Graph g;
    std::vector<rotdiff::Var> leaves;
    for (size_t i = 0; i < tensors.size(); ++i)
      leaves.push_back(g.param(&tensors[i], &grads[i]));
    g.backward(build(g, leaves));
  }
  Result res;
  for (size_t i = 0; i < tensors.size(); ++i) {
    for (size_t k = 0; k < tensors[i].size(); ++k) {
      double& x = tensors[i].data()[k];
      const double saved = x;
      x = saved + h;
      const double lp = eval_loss(tensors, build);
      x = saved - h;
      const double lm = eval_loss(tensors, build);
      x = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = grads[i].data()[k];
      const double abs_err = std::abs(analytic - numeric);
      if (abs_err > 1e-8) res.max_rel = std::max(res.max_rel, rel_err(analytic, numeric));
      res.max_abs = std::max(res.max_abs, abs_err);
      ++res.checked;
    }
  }
  return res;
}

/// Same idea, but perturbing every parameter in a ParamStore.
using StoreBuilder = std::function<rotdiff::Var(rotdiff::Graph&, rotdiff::ParamStore&)>;

inline double eval_loss_store(rotdiff::ParamStore& ps, const StoreBuilder& build) {
  rotdiff::Graph g;
  return g.value(build(g, ps)).at(0, 0);
}

inline Result check_store(rotdiff::ParamStore& ps, const StoreBuilder& build,
                          double h = 1e-5) {
  ps.zero_grads();
  {
    rotdiff::Graph g;
    g.backward(build(g, ps));
  }
  Result res;
  for (const auto& name : ps.names()) {
    auto& e = ps.entry(name);
    for (size_t k = 0; k < e.value.size(); ++k) {
      double& x = e.value.data()[k];
      const double saved = x;
      x = saved + h;
      const double lp = eval_loss_store(ps, build);
      x = saved - h;
      const double lm = eval_loss_store(ps, build);
      x = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = e.grad.data()[k];
      const double abs_err = std::abs(analytic - numeric);
      if (abs_err > 1e-8) res.max_rel = std::max(res.max_rel, rel_err(analytic, numeric));
      res.max_abs = std::max(res.max_abs, abs_err);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace gradcheck
