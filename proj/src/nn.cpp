#include "rotdiff/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rotdiff {

Tensor2& ParamStore::create(const std::string& name, int rows, int cols) {
  if (entries_.count(name)) throw std::invalid_argument("ParamStore: duplicate " + name);
  Entry e;
  e.value = Tensor2(rows, cols);
  e.grad = Tensor2(rows, cols);
  e.m = Tensor2(rows, cols);
  e.v = Tensor2(rows, cols);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) > 0; }

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: missing " + name);
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: missing " + name);
  return it->second;
}

Tensor2& ParamStore::get(const std::string& name) { return entry(name).value; }

const Tensor2& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: missing " + name);
  return it->second.value;
}

Tensor2& ParamStore::grad(const std::string& name) { return entry(name).grad; }

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.map().setZero();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

size_t ParamStore::total_values() const {
  size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

Var ParamStore::leaf(Graph& g, const std::string& name) {
  Entry& e = entry(name);
  return g.param(&e.value, &e.grad);
}

Tensor2 randn(int rows, int cols, double std_dev, RngState& rng) {
  Tensor2 t(rows, cols);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = std_dev * rng.normal();
  return t;
}

void adam_step(ParamStore& ps, const AdamConfig& cfg, int64_t step_index) {
  if (step_index < 1) throw std::invalid_argument("adam_step: step_index must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_index));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_index));
  for (auto& [name, e] : ps.entries()) {
    double* w = e.value.data();
    const double* g = e.grad.data();
    double* m = e.m.data();
    double* v = e.v.data();
    const size_t n = e.value.size();
    for (size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

Tensor2 time_embedding(int t, int dim, double max_period) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even");
  Tensor2 e(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(max_period, -static_cast<double>(i) / half);
    e.at(0, 2 * i) = std::sin(t * freq);
    e.at(0, 2 * i + 1) = std::cos(t * freq);
  }
  return e;
}

// ---- Linear ----

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in, int out,
                      RngState& rng, double init_std) {
  Linear l;
  l.w = prefix + ".w";
  l.b = prefix + ".b";
  l.in = in;
  l.out = out;
  const double sd = init_std < 0.0 ? std::sqrt(2.0 / (in + out)) : init_std;
  Tensor2& w = ps.create(l.w, in, out);
  if (sd > 0.0) w = randn(in, out, sd, rng);
  ps.create(l.b, 1, out);
  return l;
}

Var Linear::operator()(Graph& g, ParamStore& ps, Var x) const {
  return g.add_rowvec(g.matmul(x, ps.leaf(g, w)), ps.leaf(g, b));
}

Tensor2 Linear::apply_plain(const ParamStore& ps, const Tensor2& x) const {
  Tensor2 y(x.rows(), out);
  y.map().noalias() = x.map() * ps.get(w).map();
  y.map().rowwise() += ps.get(b).map().row(0);
  return y;
}

// ---- LayerNormAffine ----

LayerNormAffine LayerNormAffine::create(ParamStore& ps, const std::string& prefix, int dim) {
  LayerNormAffine ln;
  ln.g = prefix + ".g";
  ln.b = prefix + ".b";
  Tensor2& gain = ps.create(ln.g, 1, dim);
  gain.map().setOnes();
  ps.create(ln.b, 1, dim);
  return ln;
}

Var LayerNormAffine::operator()(Graph& gr, ParamStore& ps, Var x) const {
  return gr.add_rowvec(gr.mul_rowvec(gr.layernorm_rows(x), ps.leaf(gr, g)), ps.leaf(gr, b));
}

Tensor2 LayerNormAffine::apply_plain(const ParamStore& ps, const Tensor2& x) const {
  // Mirrors Graph::layernorm_rows (population variance, eps 1e-5).
  Tensor2 y(x.rows(), x.cols());
  const auto gain = ps.get(g).map().row(0);
  const auto bias = ps.get(b).map().row(0);
  for (int r = 0; r < x.rows(); ++r) {
    const double mu = x.map().row(r).mean();
    Eigen::RowVectorXd cent = x.map().row(r).array() - mu;
    const double var = cent.squaredNorm() / x.cols();
    y.map().row(r) =
        ((cent / std::sqrt(var + 1e-5)).array() * gain.array()).matrix() + bias;
  }
  return y;
}

// ---- Mlp ----

Mlp Mlp::create(ParamStore& ps, const std::string& prefix, int dim, int hidden,
                RngState& rng) {
  Mlp m;
  m.l1 = Linear::create(ps, prefix + ".l1", dim, hidden, rng);
  m.l2 = Linear::create(ps, prefix + ".l2", hidden, dim, rng);
  return m;
}

Var Mlp::operator()(Graph& g, ParamStore& ps, Var x) const {
  return l2(g, ps, g.gelu(l1(g, ps, x)));
}

// ---- MultiHeadAttention ----

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& prefix,
                                              int dim, int heads, RngState& rng) {
  if (dim % heads != 0)
    throw std::invalid_argument("MultiHeadAttention: dim not divisible by heads");
  MultiHeadAttention a;
  a.dim = dim;
  a.heads = heads;
  a.wq = Linear::create(ps, prefix + ".q", dim, dim, rng);
  a.wk = Linear::create(ps, prefix + ".k", dim, dim, rng);
  a.wv = Linear::create(ps, prefix + ".v", dim, dim, rng);
  a.wo = Linear::create(ps, prefix + ".o", dim, dim, rng);
  return a;
}

Var MultiHeadAttention::operator()(Graph& g, ParamStore& ps, Var x) const {
  const int dh = dim / heads;
  Var q = wq(g, ps, x), k = wk(g, ps, x), v = wv(g, ps, x);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(dh)));
    outs.push_back(g.matmul(g.row_softmax(scores), vh));
  }
  return wo(g, ps, g.concat_cols(outs));
}

// ---- TransformerBlock ----

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& prefix,
                                          int dim, int heads, int hidden, RngState& rng) {
  TransformerBlock b;
  b.ln1 = LayerNormAffine::create(ps, prefix + ".ln1", dim);
  b.ln2 = LayerNormAffine::create(ps, prefix + ".ln2", dim);
  b.attn = MultiHeadAttention::create(ps, prefix + ".attn", dim, heads, rng);
  b.mlp = Mlp::create(ps, prefix + ".mlp", dim, hidden, rng);
  return b;
}

Var TransformerBlock::operator()(Graph& g, ParamStore& ps, Var x) const {
  Var h = g.add(x, attn(g, ps, ln1(g, ps, x)));
  return g.add(h, mlp(g, ps, ln2(g, ps, h)));
}

Var adaln_modulate(Graph& g, Var h, Var gamma, Var delta) {
  return g.add_rowvec(g.mul_rowvec(g.layernorm_rows(h), g.add_scalar(gamma, 1.0)), delta);
}

}  // namespace rotdiff
