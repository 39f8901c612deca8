#include "rotdiff/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace rotdiff {

namespace {

Tensor2 layernorm_plain(const Tensor2& x) {
  Tensor2 y(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double mu = x.map().row(r).mean();
    Eigen::RowVectorXd cent = x.map().row(r).array() - mu;
    const double var = cent.squaredNorm() / x.cols();
    y.map().row(r) = cent / std::sqrt(var + 1e-5);
  }
  return y;
}

Tensor2 adaln_plain(const Tensor2& h, const Tensor2& gd) {
  const int w = h.cols();
  Tensor2 y = layernorm_plain(h);
  for (int r = 0; r < y.rows(); ++r)
    for (int c = 0; c < w; ++c)
      y.at(r, c) = y.at(r, c) * (1.0 + gd.at(0, c)) + gd.at(0, w + c);
  return y;
}

void gelu_inplace(Tensor2& x) {
  x.map() = x.map().unaryExpr(
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

Tensor2 hstack(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(a.rows(), a.cols() + b.cols());
  out.map().leftCols(a.cols()) = a.map();
  out.map().rightCols(b.cols()) = b.map();
  return out;
}

}  // namespace

DenoiserNet DenoiserNet::create(ParamStore& ps, const std::string& prefix,
                                const DenoiserConfig& cfg, RngState& rng) {
  DenoiserNet net;
  net.cfg = cfg;
  net.in_proj =
      Linear::create(ps, prefix + ".in", cfg.x_dim + cfg.latent, cfg.width, rng);
  for (int i = 0; i < cfg.blocks; ++i) {
    Block b;
    const std::string bp = prefix + ".b" + std::to_string(i);
    b.adaln = Linear::create(ps, bp + ".adaln", cfg.t_dim, 2 * cfg.width, rng, 0.0);
    b.l1 = Linear::create(ps, bp + ".l1", cfg.width + cfg.latent, cfg.width, rng);
    b.l2 = Linear::create(ps, bp + ".l2", cfg.width, cfg.width, rng);
    net.blocks.push_back(b);
  }
  net.final_adaln =
      Linear::create(ps, prefix + ".fadaln", cfg.t_dim, 2 * cfg.width, rng, 0.0);
  net.head = Linear::create(ps, prefix + ".head", cfg.width, cfg.out, rng, 0.0);
  return net;
}

Var DenoiserNet::build(Graph& g, ParamStore& ps, Var x, Var z, int t) const {
  if (g.value(x).cols() != cfg.x_dim || g.value(z).cols() != cfg.latent)
    throw std::invalid_argument("DenoiserNet: input width mismatch");
  Var temb = g.constant(time_embedding(t, cfg.t_dim));
  Var h = in_proj(g, ps, g.concat_cols({x, z}));
  for (const Block& b : blocks) {
    Var gd = b.adaln(g, ps, temb);
    Var gamma = g.slice_cols(gd, 0, cfg.width);
    Var delta = g.slice_cols(gd, cfg.width, 2 * cfg.width);
    Var u = adaln_modulate(g, h, gamma, delta);
    u = b.l2(g, ps, g.gelu(b.l1(g, ps, g.concat_cols({u, z}))));
    h = g.add(h, u);
  }
  Var gd = final_adaln(g, ps, temb);
  Var u = adaln_modulate(g, h, g.slice_cols(gd, 0, cfg.width),
                         g.slice_cols(gd, cfg.width, 2 * cfg.width));
  return head(g, ps, u);
}

Tensor2 DenoiserNet::forward_plain(const ParamStore& ps, const Tensor2& x,
                                   const Tensor2& z, int t) const {
  if (x.cols() != cfg.x_dim || z.cols() != cfg.latent || x.rows() != z.rows())
    throw std::invalid_argument("DenoiserNet: input width mismatch");
  const Tensor2 temb = time_embedding(t, cfg.t_dim);
  Tensor2 h = in_proj.apply_plain(ps, hstack(x, z));
  for (const Block& b : blocks) {
    const Tensor2 gd = b.adaln.apply_plain(ps, temb);
    Tensor2 u = adaln_plain(h, gd);
    u = b.l1.apply_plain(ps, hstack(u, z));
    gelu_inplace(u);
    u = b.l2.apply_plain(ps, u);
    h.map() += u.map();
  }
  const Tensor2 gd = final_adaln.apply_plain(ps, temb);
  return head.apply_plain(ps, adaln_plain(h, gd));
}

}  // namespace rotdiff
