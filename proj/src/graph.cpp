#include "rotdiff/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "rotdiff/so3.hpp"

namespace rotdiff {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.39894228040143268;  // 1/sqrt(2*pi)

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("graph: " + msg);
}

}  // namespace

int Graph::push(Tensor2 value, std::vector<int> parents, BackwardFn back) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  for (int p : n.parents)
    if (nodes_[p].needs_grad) n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::node(Var v) const {
  check(v, "node");
  return nodes_[v.id];
}

void Graph::check(Var v, const char* op) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument(std::string("graph: bad var passed to ") + op);
}

const Tensor2& Graph::value(Var v) const { return node(v).value; }

const Tensor2& Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad;
}

bool Graph::needs_grad(Var v) const { return node(v).needs_grad; }

Tensor2& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor2(n.value.rows(), n.value.cols());
    n.grad_live = true;
  }
  return n.grad;
}

void Graph::add_to_grad(int id, const Tensor2& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  require(g.rows() == n.value.rows() && g.cols() == n.value.cols(),
          "gradient shape mismatch in add_to_grad");
  grad_buffer(id).map() += g.map();
}

Var Graph::constant(Tensor2 v) { return Var{push(std::move(v), {}, nullptr)}; }

Var Graph::param(const Tensor2* value, Tensor2* grad) {
  require(value != nullptr && grad != nullptr, "param: null binding");
  require(grad->rows() == value->rows() && grad->cols() == value->cols(),
          "param: grad buffer shape mismatch");
  Tensor2* bound = grad;
  int id = push(*value, {}, [bound](Graph& g, int self) {
    bound->map() += g.nodes_[self].grad.map();
  });
  nodes_[id].needs_grad = true;
  nodes_[id].bound_grad = grad;
  return Var{id};
}

Var Graph::add_custom(Tensor2 value, std::vector<int> parents, BackwardFn back) {
  for (int p : parents) check(Var{p}, "add_custom");
  return Var{push(std::move(value), std::move(parents), std::move(back))};
}

// ---- core ops ----

Var Graph::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.cols() == B.rows(), "matmul: inner dims differ");
  Tensor2 out(A.rows(), B.cols());
  out.map().noalias() = A.map() * B.map();
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), {pa, pb}, [pa, pb](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map().noalias() += G * g.nodes_[pb].value.map().transpose();
    if (g.nodes_[pb].needs_grad)
      g.grad_buffer(pb).map().noalias() += g.nodes_[pa].value.map().transpose() * G;
  })};
}

Var Graph::transpose(Var a) {
  check(a, "transpose");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.cols(), A.rows());
  out.map() = A.map().transpose();
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map() += g.nodes_[self].grad.map().transpose();
  })};
}

Var Graph::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.same_shape(B), "add: shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map() + B.map();
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), {pa, pb}, [pa, pb](Graph& g, int self) {
    const Tensor2& G = g.nodes_[self].grad;
    g.add_to_grad(pa, G);
    g.add_to_grad(pb, G);
  })};
}

Var Graph::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.same_shape(B), "sub: shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map() - B.map();
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), {pa, pb}, [pa, pb](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    if (g.nodes_[pa].needs_grad) g.grad_buffer(pa).map() += G;
    if (g.nodes_[pb].needs_grad) g.grad_buffer(pb).map() -= G;
  })};
}

Var Graph::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.same_shape(B), "mul: shape mismatch");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().cwiseProduct(B.map());
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), {pa, pb}, [pa, pb](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map() += G.cwiseProduct(g.nodes_[pb].value.map());
    if (g.nodes_[pb].needs_grad)
      g.grad_buffer(pb).map() += G.cwiseProduct(g.nodes_[pa].value.map());
  })};
}

Var Graph::add_rowvec(Var a, Var row) {
  check(a, "add_rowvec");
  check(row, "add_rowvec");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& R = nodes_[row.id].value;
  require(R.rows() == 1 && R.cols() == A.cols(), "add_rowvec: row must be 1 x cols(a)");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().rowwise() + R.map().row(0);
  int pa = a.id, pr = row.id;
  return Var{push(std::move(out), {pa, pr}, [pa, pr](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    if (g.nodes_[pa].needs_grad) g.grad_buffer(pa).map() += G;
    if (g.nodes_[pr].needs_grad)
      g.grad_buffer(pr).map().row(0) += G.colwise().sum();
  })};
}

Var Graph::mul_rowvec(Var a, Var row) {
  check(a, "mul_rowvec");
  check(row, "mul_rowvec");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& R = nodes_[row.id].value;
  require(R.rows() == 1 && R.cols() == A.cols(), "mul_rowvec: row must be 1 x cols(a)");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().array().rowwise() * R.map().row(0).array();
  int pa = a.id, pr = row.id;
  return Var{push(std::move(out), {pa, pr}, [pa, pr](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    const auto A2 = g.nodes_[pa].value.map();
    const auto R2 = g.nodes_[pr].value.map();
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map().array() += G.array().rowwise() * R2.row(0).array();
    if (g.nodes_[pr].needs_grad)
      g.grad_buffer(pr).map().row(0) += G.cwiseProduct(A2).colwise().sum();
  })};
}

Var Graph::mul_bscalar(Var a, Var s) {
  check(a, "mul_bscalar");
  check(s, "mul_bscalar");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& S = nodes_[s.id].value;
  require(S.rows() == 1 && S.cols() == 1, "mul_bscalar: s must be 1x1");
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map() * S.at(0, 0);
  int pa = a.id, ps = s.id;
  return Var{push(std::move(out), {pa, ps}, [pa, ps](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map() += G * g.nodes_[ps].value.at(0, 0);
    if (g.nodes_[ps].needs_grad)
      g.grad_buffer(ps).at(0, 0) += G.cwiseProduct(g.nodes_[pa].value.map()).sum();
  })};
}

Var Graph::scale(Var a, double c) {
  check(a, "scale");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map() * c;
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa, c](Graph& g, int self) {
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map() += g.nodes_[self].grad.map() * c;
  })};
}

Var Graph::add_scalar(Var a, double c) {
  check(a, "add_scalar");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().array() + c;
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    g.add_to_grad(pa, g.nodes_[self].grad);
  })};
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty part list");
  int cols = -1, rows = 0;
  std::vector<int> pids;
  for (Var p : parts) {
    check(p, "concat_rows");
    const Tensor2& V = nodes_[p.id].value;
    if (cols < 0) cols = V.cols();
    require(V.cols() == cols, "concat_rows: column count mismatch");
    rows += V.rows();
    pids.push_back(p.id);
  }
  Tensor2 out(rows, cols);
  int r0 = 0;
  for (int pid : pids) {
    const Tensor2& V = nodes_[pid].value;
    out.map().middleRows(r0, V.rows()) = V.map();
    r0 += V.rows();
  }
  return Var{push(std::move(out), pids, [pids](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    int r0 = 0;
    for (int pid : pids) {
      const int nr = g.nodes_[pid].value.rows();
      if (g.nodes_[pid].needs_grad)
        g.grad_buffer(pid).map() += G.middleRows(r0, nr);
      r0 += nr;
    }
  })};
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty part list");
  int rows = -1, cols = 0;
  std::vector<int> pids;
  for (Var p : parts) {
    check(p, "concat_cols");
    const Tensor2& V = nodes_[p.id].value;
    if (rows < 0) rows = V.rows();
    require(V.rows() == rows, "concat_cols: row count mismatch");
    cols += V.cols();
    pids.push_back(p.id);
  }
  Tensor2 out(rows, cols);
  int c0 = 0;
  for (int pid : pids) {
    const Tensor2& V = nodes_[pid].value;
    out.map().middleCols(c0, V.cols()) = V.map();
    c0 += V.cols();
  }
  return Var{push(std::move(out), pids, [pids](Graph& g, int self) {
    const auto G = g.nodes_[self].grad.map();
    int c0 = 0;
    for (int pid : pids) {
      const int nc = g.nodes_[pid].value.cols();
      if (g.nodes_[pid].needs_grad)
        g.grad_buffer(pid).map() += G.middleCols(c0, nc);
      c0 += nc;
    }
  })};
}

Var Graph::select_rows(Var a, std::vector<int> idx) {
  check(a, "select_rows");
  const Tensor2& A = nodes_[a.id].value;
  for (int i : idx)
    require(i >= 0 && i < A.rows(), "select_rows: index out of range");
  Tensor2 out(static_cast<int>(idx.size()), A.cols());
  for (int r = 0; r < out.rows(); ++r) out.map().row(r) = A.map().row(idx[r]);
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa, idx = std::move(idx)](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    const auto G = g.nodes_[self].grad.map();
    auto D = g.grad_buffer(pa).map();
    // Repeated indices sum, so this must stay a loop of row adds.
    for (int r = 0; r < static_cast<int>(idx.size()); ++r) D.row(idx[r]) += G.row(r);
  })};
}

Var Graph::slice_cols(Var a, int c0, int c1) {
  check(a, "slice_cols");
  const Tensor2& A = nodes_[a.id].value;
  require(0 <= c0 && c0 < c1 && c1 <= A.cols(), "slice_cols: bad range");
  Tensor2 out(A.rows(), c1 - c0);
  out.map() = A.map().middleCols(c0, c1 - c0);
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa, c0, c1](Graph& g, int self) {
    if (g.nodes_[pa].needs_grad)
      g.grad_buffer(pa).map().middleCols(c0, c1 - c0) += g.nodes_[self].grad.map();
  })};
}

Var Graph::row_softmax(Var a) {
  check(a, "row_softmax");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.rows(), A.cols());
  for (int r = 0; r < A.rows(); ++r) {
    const double mx = A.map().row(r).maxCoeff();
    Eigen::RowVectorXd e = (A.map().row(r).array() - mx).exp();
    out.map().row(r) = e / e.sum();
  }
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    const auto Y = g.nodes_[self].value.map();
    const auto G = g.nodes_[self].grad.map();
    auto D = g.grad_buffer(pa).map();
    for (int r = 0; r < Y.rows(); ++r) {
      const double dot = G.row(r).dot(Y.row(r));
      D.row(r) += Y.row(r).cwiseProduct((G.row(r).array() - dot).matrix());
    }
  })};
}

Var Graph::layernorm_rows(Var a) {
  check(a, "layernorm_rows");
  const Tensor2& A = nodes_[a.id].value;
  require(A.cols() >= 1, "layernorm_rows: empty rows");
  Tensor2 out(A.rows(), A.cols());
  std::vector<double> inv_std(A.rows());
  for (int r = 0; r < A.rows(); ++r) {
    const double mu = A.map().row(r).mean();
    Eigen::RowVectorXd cent = A.map().row(r).array() - mu;
    const double var = cent.squaredNorm() / A.cols();
    const double s = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = s;
    out.map().row(r) = cent * s;
  }
  int pa = a.id;
  return Var{push(std::move(out), {pa},
                  [pa, inv_std = std::move(inv_std)](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    const auto Y = g.nodes_[self].value.map();
    const auto G = g.nodes_[self].grad.map();
    auto D = g.grad_buffer(pa).map();
    const int d = Y.cols();
    for (int r = 0; r < Y.rows(); ++r) {
      const double mg = G.row(r).mean();
      const double mgy = G.row(r).dot(Y.row(r)) / d;
      D.row(r) += inv_std[r] * (G.row(r).array() - mg - Y.row(r).array() * mgy).matrix();
    }
  })};
}

Var Graph::gelu(Var a) {
  check(a, "gelu");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
  });
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    const auto X = g.nodes_[pa].value.map();
    const auto G = g.nodes_[self].grad.map();
    auto D = g.grad_buffer(pa).map();
    D.array() += G.array() * X.unaryExpr([](double x) {
      const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      return cdf + x * pdf;
    }).array();
  })};
}

Var Graph::exp(Var a) {
  check(a, "exp");
  const Tensor2& A = nodes_[a.id].value;
  Tensor2 out(A.rows(), A.cols());
  out.map() = A.map().array().exp();
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    g.grad_buffer(pa).map().array() +=
        g.nodes_[self].grad.map().array() * g.nodes_[self].value.map().array();
  })};
}

Var Graph::sum(Var a) {
  check(a, "sum");
  Tensor2 out(1, 1);
  out.at(0, 0) = nodes_[a.id].value.map().sum();
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    g.grad_buffer(pa).map().array() += g.nodes_[self].grad.at(0, 0);
  })};
}

Var Graph::mean(Var a) {
  check(a, "mean");
  const Tensor2& A = nodes_[a.id].value;
  require(!A.empty(), "mean: empty tensor");
  Tensor2 out(1, 1);
  out.at(0, 0) = A.map().mean();
  int pa = a.id;
  const double inv_n = 1.0 / static_cast<double>(A.size());
  return Var{push(std::move(out), {pa}, [pa, inv_n](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    g.grad_buffer(pa).map().array() += g.nodes_[self].grad.at(0, 0) * inv_n;
  })};
}

Var Graph::sum_squares(Var a) {
  check(a, "sum_squares");
  Tensor2 out(1, 1);
  out.at(0, 0) = nodes_[a.id].value.map().squaredNorm();
  int pa = a.id;
  return Var{push(std::move(out), {pa}, [pa](Graph& g, int self) {
    if (!g.nodes_[pa].needs_grad) return;
    g.grad_buffer(pa).map() +=
        2.0 * g.nodes_[self].grad.at(0, 0) * g.nodes_[pa].value.map();
  })};
}

Var Graph::l1_loss(Var a, Var b) {
  check(a, "l1_loss");
  check(b, "l1_loss");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.same_shape(B), "l1_loss: shape mismatch");
  require(!A.empty(), "l1_loss: empty tensors");
  Tensor2 out(1, 1);
  out.at(0, 0) = (A.map() - B.map()).cwiseAbs().sum() / A.size();
  int pa = a.id, pb = b.id;
  const double inv_n = 1.0 / static_cast<double>(A.size());
  return Var{push(std::move(out), {pa, pb}, [pa, pb, inv_n](Graph& g, int self) {
    const double go = g.nodes_[self].grad.at(0, 0) * inv_n;
    const auto A2 = g.nodes_[pa].value.map();
    const auto B2 = g.nodes_[pb].value.map();
    RowMat sgn = (A2 - B2).unaryExpr([](double d) {
      return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    });
    if (g.nodes_[pa].needs_grad) g.grad_buffer(pa).map() += go * sgn;
    if (g.nodes_[pb].needs_grad) g.grad_buffer(pb).map() -= go * sgn;
  })};
}

// ---- rotation ops ----

Var Graph::rodrigues_rows(Var v) {
  check(v, "rodrigues_rows");
  const Tensor2& V = nodes_[v.id].value;
  require(V.cols() == 3, "rodrigues_rows: input must be n x 3");
  Tensor2 out(V.rows(), 9);
  for (int r = 0; r < V.rows(); ++r) {
    const so3::Vec3 w(V.at(r, 0), V.at(r, 1), V.at(r, 2));
    out.set_row9(r, so3::exp_map(w).m);
  }
  int pv = v.id;
  return Var{push(std::move(out), {pv}, [pv](Graph& g, int self) {
    if (!g.nodes_[pv].needs_grad) return;
    const Tensor2& V2 = g.nodes_[pv].value;
    const Tensor2& G = g.nodes_[self].grad;
    auto D = g.grad_buffer(pv).map();
    for (int r = 0; r < V2.rows(); ++r) {
      const so3::Vec3 w(V2.at(r, 0), V2.at(r, 1), V2.at(r, 2));
      const so3::Mat3 R = so3::exp_map(w).m;
      const so3::Mat3 M = R.transpose() * G.row9(r);
      // <G, dR> = (Jr dv) . vee(M - M^T), so grad_v = Jr^T vee(M - M^T).
      const so3::Vec3 s(M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1));
      const so3::Vec3 gv = so3::right_jacobian(w).transpose() * s;
      D.row(r) += gv.transpose();
    }
  })};
}

Var Graph::rotmul_rows(Var a, Var b) {
  check(a, "rotmul_rows");
  check(b, "rotmul_rows");
  const Tensor2& A = nodes_[a.id].value;
  const Tensor2& B = nodes_[b.id].value;
  require(A.cols() == 9 && B.cols() == 9, "rotmul_rows: inputs must be n x 9");
  require(A.rows() == B.rows(), "rotmul_rows: row count mismatch");
  Tensor2 out(A.rows(), 9);
  for (int r = 0; r < A.rows(); ++r) out.set_row9(r, A.row9(r) * B.row9(r));
  int pa = a.id, pb = b.id;
  return Var{push(std::move(out), {pa, pb}, [pa, pb](Graph& g, int self) {
    const Tensor2& A2 = g.nodes_[pa].value;
    const Tensor2& B2 = g.nodes_[pb].value;
    const Tensor2& G = g.nodes_[self].grad;
    const bool na = g.nodes_[pa].needs_grad, nb = g.nodes_[pb].needs_grad;
    for (int r = 0; r < A2.rows(); ++r) {
      const Eigen::Matrix3d Gm = G.row9(r);
      if (na) {
        Eigen::Matrix3d da = Gm * B2.row9(r).transpose();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            g.grad_buffer(pa).at(r, 3 * i + j) += da(i, j);
      }
      if (nb) {
        Eigen::Matrix3d db = A2.row9(r).transpose() * Gm;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            g.grad_buffer(pb).at(r, 3 * i + j) += db(i, j);
      }
    }
  })};
}

void Graph::backward(Var loss) {
  check(loss, "backward");
  if (ran_backward_) throw std::logic_error("graph: backward already ran");
  ran_backward_ = true;
  const Node& ln = nodes_[loss.id];
  require(ln.value.rows() == 1 && ln.value.cols() == 1, "backward: loss must be 1x1");
  grad_buffer(loss.id).at(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.grad_live || !n.needs_grad) continue;
    if (n.back) n.back(*this, i);
  }
}

}  // namespace rotdiff
