#include "rotdiff/mar_generator.hpp"

#include <numeric>
#include <stdexcept>

namespace rotdiff {

void GenerationConfig::validate(int joints) const {
  if (K < 1 || K > joints)
    throw std::invalid_argument("GenerationConfig: K must be in [1, J]");
  if (steps < 1) throw std::invalid_argument("GenerationConfig: steps must be >= 1");
  if (eta < 0.0) throw std::invalid_argument("GenerationConfig: eta must be >= 0");
}

std::vector<std::vector<int>> choose_order(int J, int K, RngState& rng) {
  if (J < 1) throw std::invalid_argument("choose_order: J must be >= 1");
  if (K < 1 || K > J) throw std::invalid_argument("choose_order: K must be in [1, J]");
  std::vector<int> perm(J);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = J - 1; i > 0; --i) {
    int k = rng.uniform_int(0, i);
    std::swap(perm[i], perm[k]);
  }
  std::vector<std::vector<int>> chunks(K);
  const int base = J / K;
  const int extra = J % K;
  int at = 0;
  for (int k = 0; k < K; ++k) {
    const int len = base + (k < extra ? 1 : 0);
    chunks[k].assign(perm.begin() + at, perm.begin() + at + len);
    at += len;
  }
  return chunks;
}

namespace {

so3::Rotation denoise_token(const DenoiserNet& den, ParamStore& ps, const Tensor2& zrow,
                            const GenerationConfig& cfg, const Schedule& sched,
                            RngState& rng) {
  if (cfg.euclidean) {
    DenoiseFnEuclid f = [&](const Eigen::VectorXd& x, int t) {
      Tensor2 xr(1, 9);
      for (int c = 0; c < 9; ++c) xr.at(0, c) = x(c);
      Tensor2 eh = den.forward_plain(ps, xr, zrow, t);
      Eigen::VectorXd v(9);
      for (int c = 0; c < 9; ++c) v(c) = eh.at(0, c);
      return v;
    };
    Eigen::VectorXd flat = sample_chain_euclidean(f, 9, cfg.steps, cfg.eta, sched, rng);
    so3::Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = flat(3 * r + c);
    return so3::project_to_so3(m);
  }
  DenoiseFn f = [&](const so3::Rotation& x, int t) {
    Tensor2 xr(1, 9);
    xr.set_row9(0, x.m);
    Tensor2 eh = den.forward_plain(ps, xr, zrow, t);
    return so3::Vec3(eh.at(0, 0), eh.at(0, 1), eh.at(0, 2));
  };
  return sample_chain(f, cfg.steps, cfg.eta, sched, rng);
}

}  // namespace

PoseSequence generate(const SequenceModel& seq, const DenoiserNet& den, ParamStore& ps,
                      const std::optional<Observation>& cond, const GenerationConfig& cfg,
                      const Schedule& sched, RngState& rng, GenerationTrace* trace) {
  const int J = seq.cfg.joints;
  cfg.validate(J);
  if (cond.has_value() != cfg.conditional)
    throw std::invalid_argument("generate: condition must be present exactly in conditional mode");
  if ((den.cfg.out == 9) != cfg.euclidean)
    throw std::invalid_argument("generate: denoiser head width does not match the variant");
  if (cfg.steps > sched.T)
    throw std::invalid_argument("generate: steps exceeds the schedule length");

  SeqInputs in;
  in.theta_rows = Tensor2(J, 9);
  in.visible.assign(J, 0);
  in.conditional = cfg.conditional;
  if (cfg.conditional) in.cond_feats = make_cond_feats(*cond);

  const std::vector<std::vector<int>> chunks = choose_order(J, cfg.K, rng);

  PoseSequence out;
  out.theta.assign(J, so3::Rotation::identity());
  GenerationTrace local;
  LatentOutput lat;
  for (const std::vector<int>& chunk : chunks) {
    lat = eval_latents(seq, ps, in);
    for (int j : chunk) {
      Tensor2 zrow(1, seq.cfg.d);
      for (int c = 0; c < seq.cfg.d; ++c) zrow.at(0, c) = lat.z.at(j, c);
      so3::Rotation xj = denoise_token(den, ps, zrow, cfg, sched, rng);
      out.theta[j] = xj;
      in.theta_rows.set_row9(j, xj.m);
      in.visible[j] = 1;
    }
    if (trace) {
      local.revealed.push_back(chunk);
      PoseSequence snap;
      snap.theta = out.theta;
      snap.pi = lat.pi;
      snap.beta = lat.beta;
      local.intermediate.push_back(std::move(snap));
    }
  }
  out.pi = lat.pi;
  out.beta = lat.beta;
  if (trace) *trace = std::move(local);
  return out;
}

}  // namespace rotdiff
