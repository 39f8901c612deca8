#include "rotdiff/sequence_model.hpp"

#include <numeric>
#include <stdexcept>

namespace rotdiff {

namespace {

// Learned token/position tables start small and random, like the projections.
constexpr double kTableInitStd = 0.02;

void randn_into(ParamStore& ps, const std::string& name, int rows, int cols,
                RngState& rng) {
  ps.create(name, rows, cols) = randn(rows, cols, kTableInitStd, rng);
}

void check_permutation(const std::vector<int>& order, int n) {
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("cond_order: wrong length");
  std::vector<uint8_t> seen(n, 0);
  for (int v : order) {
    if (v < 0 || v >= n || seen[v])
      throw std::invalid_argument("cond_order: not a permutation");
    seen[v] = 1;
  }
}

}  // namespace

Tensor2 make_cond_feats(const Observation& obs) {
  const int J = static_cast<int>(obs.visible.size());
  if (obs.keypoints.rows() != J || obs.keypoints.cols() != 2)
    throw std::invalid_argument("make_cond_feats: keypoints shape mismatch");
  Tensor2 feats(J, 3);
  for (int j = 0; j < J; ++j) {
    if (obs.visible[j]) {
      feats.at(j, 0) = obs.keypoints.at(j, 0);
      feats.at(j, 1) = obs.keypoints.at(j, 1);
      feats.at(j, 2) = 1.0;
    }
    // hidden slots stay (0, 0, 0); the sentinel coordinates are never read
  }
  return feats;
}

SequenceModel SequenceModel::create(ParamStore& ps, const std::string& prefix,
                                    const SeqModelConfig& cfg, RngState& rng) {
  if (cfg.joints < 2 || cfg.d < 1 || cfg.heads < 1 || cfg.d % cfg.heads != 0)
    throw std::invalid_argument("SequenceModel: bad config");
  SequenceModel m;
  m.cfg = cfg;
  m.embed = Linear::create(ps, prefix + ".embed", 9, cfg.d, rng);
  m.cond_embed = Linear::create(ps, prefix + ".cond_embed", 3, cfg.d, rng);
  m.pos_pose = prefix + ".pos_pose";
  m.pos_cond = prefix + ".pos_cond";
  m.cam_token = prefix + ".cam_token";
  m.mask_token = prefix + ".mask_token";
  randn_into(ps, m.pos_pose, cfg.joints, cfg.d, rng);
  randn_into(ps, m.pos_cond, cfg.joints, cfg.d, rng);
  randn_into(ps, m.cam_token, 1, cfg.d, rng);
  randn_into(ps, m.mask_token, 1, cfg.d, rng);
  for (int i = 0; i < cfg.enc_blocks; ++i)
    m.enc.push_back(TransformerBlock::create(ps, prefix + ".enc" + std::to_string(i),
                                             cfg.d, cfg.heads, cfg.mlp_hidden, rng));
  for (int i = 0; i < cfg.dec_blocks; ++i)
    m.dec.push_back(TransformerBlock::create(ps, prefix + ".dec" + std::to_string(i),
                                             cfg.d, cfg.heads, cfg.mlp_hidden, rng));
  m.enc_ln = LayerNormAffine::create(ps, prefix + ".enc_ln", cfg.d);
  m.dec_ln = LayerNormAffine::create(ps, prefix + ".dec_ln", cfg.d);
  m.reg1 = Linear::create(ps, prefix + ".reg1", cfg.d, cfg.d, rng);
  m.reg2 = Linear::create(ps, prefix + ".reg2", cfg.d, cfg.reg_out(), rng, 0.0);
  return m;
}

SeqForward SequenceModel::build(Graph& g, ParamStore& ps, const SeqInputs& in) const {
  const int J = cfg.joints;
  if (in.theta_rows.rows() != J || in.theta_rows.cols() != 9)
    throw std::invalid_argument("SequenceModel: theta_rows must be J x 9");
  if (static_cast<int>(in.visible.size()) != J)
    throw std::invalid_argument("SequenceModel: visible must have J flags");

  std::vector<int> vis_idx;
  for (int j = 0; j < J; ++j)
    if (in.visible[j]) vis_idx.push_back(j);
  const int V = static_cast<int>(vis_idx.size());

  Var pp = ps.leaf(g, pos_pose);
  std::vector<Var> rows;

  // Only the visible rows are copied out of theta_rows, so masked slot
  // values cannot reach the network (enforced bit-exactly by tests).
  if (V > 0) {
    Tensor2 vis_theta(V, 9);
    for (int r = 0; r < V; ++r)
      for (int c = 0; c < 9; ++c) vis_theta.at(r, c) = in.theta_rows.at(vis_idx[r], c);
    Var tok = embed(g, ps, g.constant(vis_theta));
    rows.push_back(g.add(tok, g.select_rows(pp, vis_idx)));
  }
  rows.push_back(ps.leaf(g, cam_token));

  std::vector<int> order;
  if (in.conditional) {
    if (in.cond_feats.rows() != J || in.cond_feats.cols() != 3)
      throw std::invalid_argument("SequenceModel: cond_feats must be J x 3");
    order = in.cond_order;
    if (order.empty()) {
      order.resize(J);
      std::iota(order.begin(), order.end(), 0);
    }
    check_permutation(order, J);
    Tensor2 feats(J, 3);
    for (int m = 0; m < J; ++m)
      for (int c = 0; c < 3; ++c) feats.at(m, c) = in.cond_feats.at(order[m], c);
    Var tok = cond_embed(g, ps, g.constant(feats));
    rows.push_back(g.add(tok, g.select_rows(ps.leaf(g, pos_cond), order)));
  }

  Var x = rows.size() == 1 ? rows[0] : g.concat_rows(rows);
  for (const auto& blk : enc) x = blk(g, ps, x);
  x = enc_ln(g, ps, x);

  // Rebuild the full-length sequence: visible slots pull their encoder row,
  // hidden slots pull the shared mask vector appended at row R.
  const int R = V + 1 + (in.conditional ? J : 0);
  Var padded = g.concat_rows({x, ps.leaf(g, mask_token)});

  std::vector<int> idx;
  idx.reserve(J + 1 + (in.conditional ? J : 0));
  int rank = 0;
  for (int j = 0; j < J; ++j) idx.push_back(in.visible[j] ? rank++ : R);
  idx.push_back(V);  // camera/shape slot
  std::vector<Var> pos_parts = {pp, g.constant(Tensor2(1, cfg.d))};
  if (in.conditional) {
    std::vector<int> enc_row(J, -1);
    for (int m = 0; m < J; ++m) enc_row[order[m]] = V + 1 + m;
    for (int j = 0; j < J; ++j) idx.push_back(enc_row[j]);
    pos_parts.push_back(ps.leaf(g, pos_cond));
  }

  Var y = g.add(g.select_rows(padded, idx), g.concat_rows(pos_parts));
  for (const auto& blk : dec) y = blk(g, ps, y);
  y = dec_ln(g, ps, y);

  std::vector<int> joint_rows(J);
  std::iota(joint_rows.begin(), joint_rows.end(), 0);
  SeqForward out;
  // Positions added once more so each latent row carries its joint identity
  // even when the decoder output saturates toward a shared value.
  out.z = g.add(g.select_rows(y, joint_rows), pp);
  Var glob = g.select_rows(y, std::vector<int>{J});
  out.reg = reg2(g, ps, g.gelu(reg1(g, ps, glob)));
  return out;
}

Var reg_scale(Graph& g, const SeqForward& f) {
  return g.exp(g.slice_cols(f.reg, 0, 1));
}

Var reg_translation(Graph& g, const SeqForward& f) {
  return g.slice_cols(f.reg, 1, 3);
}

Var reg_beta(Graph& g, const SeqForward& f, int bones) {
  return g.slice_cols(f.reg, 3, 3 + bones);
}

LatentOutput eval_latents(const SequenceModel& model, ParamStore& ps,
                          const SeqInputs& in) {
  Graph g;
  SeqForward f = model.build(g, ps, in);
  LatentOutput out;
  out.z = g.value(f.z);
  const Tensor2& reg = g.value(f.reg);
  out.pi.s = std::exp(reg.at(0, 0));
  out.pi.tx = reg.at(0, 1);
  out.pi.ty = reg.at(0, 2);
  const int B = model.cfg.bones();
  out.beta.resize(B);
  for (int k = 0; k < B; ++k) out.beta(k) = reg.at(0, 3 + k);
  return out;
}

}  // namespace rotdiff
