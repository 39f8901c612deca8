#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rotdiff/graph.hpp"
#include "rotdiff/rng.hpp"
#include "rotdiff/tensor.hpp"

namespace rotdiff {

/// Named parameter tensors plus their gradient and Adam moment buffers.
/// std::map keeps iteration order sorted by name, so every whole-store
/// operation (optimizer step, checkpoint serialization) is deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor2 value;
    Tensor2 grad;
    Tensor2 m;  // Adam first moment
    Tensor2 v;  // Adam second moment
  };

  /// Zero-initialized. Throws on duplicate names.
  Tensor2& create(const std::string& name, int rows, int cols);

  bool has(const std::string& name) const;
  Tensor2& get(const std::string& name);
  const Tensor2& get(const std::string& name) const;
  Tensor2& grad(const std::string& name);
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  void zero_grads();
  std::vector<std::string> names() const;
  size_t count() const { return entries_.size(); }
  size_t total_values() const;

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Bind a named parameter into a graph as a leaf.
  Var leaf(Graph& g, const std::string& name);

 private:
  std::map<std::string, Entry> entries_;
};

Tensor2 randn(int rows, int cols, double std_dev, RngState& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter in the store. step_index is the
/// 1-based count of updates already applied plus one.
void adam_step(ParamStore& ps, const AdamConfig& cfg, int64_t step_index);

/// Sinusoidal embedding of an integer step, 1 x dim, interleaved
/// (sin, cos) pairs over geometrically spaced frequencies. dim must be even.
Tensor2 time_embedding(int t, int dim, double max_period = 10000.0);

/// y = x W + b with W in x out.
struct Linear {
  std::string w, b;
  int in = 0, out = 0;

  /// init_std < 0 selects sqrt(2 / (in + out)); 0 gives a zero-initialized
  /// layer (used for output heads so the network starts neutral).
  static Linear create(ParamStore& ps, const std::string& prefix, int in, int out,
                       RngState& rng, double init_std = -1.0);
  Var operator()(Graph& g, ParamStore& ps, Var x) const;
  /// Same arithmetic without a tape, for hot inference paths.
  Tensor2 apply_plain(const ParamStore& ps, const Tensor2& x) const;
};

/// Row layernorm followed by learned gain and bias.
struct LayerNormAffine {
  std::string g, b;
  static LayerNormAffine create(ParamStore& ps, const std::string& prefix, int dim);
  Var operator()(Graph& gr, ParamStore& ps, Var x) const;
  Tensor2 apply_plain(const ParamStore& ps, const Tensor2& x) const;
};

struct Mlp {
  Linear l1, l2;
  static Mlp create(ParamStore& ps, const std::string& prefix, int dim, int hidden,
                    RngState& rng);
  Var operator()(Graph& g, ParamStore& ps, Var x) const;
};

struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int dim = 0, heads = 0;
  static MultiHeadAttention create(ParamStore& ps, const std::string& prefix, int dim,
                                   int heads, RngState& rng);
  Var operator()(Graph& g, ParamStore& ps, Var x) const;
};

/// Pre-norm transformer block: x + attn(ln1 x), then + mlp(ln2 x).
struct TransformerBlock {
  LayerNormAffine ln1, ln2;
  MultiHeadAttention attn;
  Mlp mlp;
  static TransformerBlock create(ParamStore& ps, const std::string& prefix, int dim,
                                 int heads, int hidden, RngState& rng);
  Var operator()(Graph& g, ParamStore& ps, Var x) const;
};

/// (1 + gamma) * layernorm(h) + delta, gamma/delta 1 x cols(h). With both at
/// zero this reduces to a plain layernorm, which is the intended start state
/// when the producing projection is zero-initialized.
Var adaln_modulate(Graph& g, Var h, Var gamma, Var delta);

}  // namespace rotdiff
