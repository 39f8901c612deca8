#include "rotdiff/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rotdiff/util.hpp"

namespace rotdiff {

namespace {

constexpr uint64_t kInitStream = 0;  // parameter init
constexpr uint64_t kLoopStream = 1;  // corpus/batch/sample draws

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

// Key list here and in to_pairs() must stay in lockstep; a round-trip unit
// test guards the pairing.
TrainConfig TrainConfig::parse(KvConfig& kv) {
  TrainConfig c;
  c.lambda_diff = kv.get_double("lambda_diff", c.lambda_diff);
  c.lambda_3d = kv.get_double("lambda_3d", c.lambda_3d);
  c.lambda_2d = kv.get_double("lambda_2d", c.lambda_2d);
  c.mask_ratio_lo = kv.get_double("mask_ratio_lo", c.mask_ratio_lo);
  c.mask_ratio_hi = kv.get_double("mask_ratio_hi", c.mask_ratio_hi);
  c.p_uncond = kv.get_double("p_uncond", c.p_uncond);
  c.lr = kv.get_double("lr", c.lr);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.steps = kv.get_i64("steps", c.steps);
  c.seed = kv.get_u64("seed", c.seed);
  c.ckpt_every = kv.get_i64("ckpt_every", c.ckpt_every);
  c.T = kv.get_int("T", c.T);
  c.alpha_max = kv.get_double("alpha_max", c.alpha_max);
  c.variant = kv.get_string("variant", c.variant);
  c.seq.joints = kv.get_int("joints", c.seq.joints);
  c.seq.d = kv.get_int("d", c.seq.d);
  c.seq.heads = kv.get_int("heads", c.seq.heads);
  c.seq.enc_blocks = kv.get_int("enc_blocks", c.seq.enc_blocks);
  c.seq.dec_blocks = kv.get_int("dec_blocks", c.seq.dec_blocks);
  c.seq.mlp_hidden = kv.get_int("mlp_hidden", c.seq.mlp_hidden);
  c.den.width = kv.get_int("den_width", c.den.width);
  c.den.blocks = kv.get_int("den_blocks", c.den.blocks);
  c.den.t_dim = kv.get_int("den_tdim", c.den.t_dim);
  c.den.x_dim = 9;
  c.den.latent = c.seq.d;
  c.den.out = c.euclidean() ? 9 : 3;
  return c;
}

TrainConfig TrainConfig::from_file(const std::string& path,
                                   std::map<std::string, std::string>* resolved) {
  KvConfig kv = KvConfig::from_file(path);
  TrainConfig c = parse(kv);
  kv.finish();
  c.validate();
  if (resolved) *resolved = kv.resolved();
  return c;
}

void TrainConfig::validate() const {
  require(lambda_diff >= 0 && lambda_3d >= 0 && lambda_2d >= 0, "lambdas must be >= 0");
  require(p_uncond >= 0 && p_uncond <= 1, "p_uncond must be in [0, 1]");
  require(0 <= mask_ratio_lo && mask_ratio_lo <= mask_ratio_hi && mask_ratio_hi <= 1,
          "mask ratio range must satisfy 0 <= lo <= hi <= 1");
  require(lr > 0, "lr must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(steps >= 1, "steps must be >= 1");
  require(ckpt_every >= 0, "ckpt_every must be >= 0");
  require(T >= 1, "T must be >= 1");
  require(alpha_max > 0, "alpha_max must be > 0");
  require(variant == "so3" || variant == "euclidean", "variant must be so3 or euclidean");
  require(seq.joints >= 2, "joints must be >= 2");
  require(seq.d >= 1 && seq.heads >= 1 && seq.d % seq.heads == 0,
          "token width must be divisible by heads");
  require(seq.enc_blocks >= 1 && seq.dec_blocks >= 1 && seq.mlp_hidden >= 1,
          "block counts and hidden width must be >= 1");
  require(den.width >= 1 && den.blocks >= 1 && den.t_dim >= 2 && den.t_dim % 2 == 0,
          "denoiser dims must be positive with even t_dim");
}

std::map<std::string, std::string> TrainConfig::to_pairs() const {
  std::map<std::string, std::string> p;
  p["lambda_diff"] = fmt17(lambda_diff);
  p["lambda_3d"] = fmt17(lambda_3d);
  p["lambda_2d"] = fmt17(lambda_2d);
  p["mask_ratio_lo"] = fmt17(mask_ratio_lo);
  p["mask_ratio_hi"] = fmt17(mask_ratio_hi);
  p["p_uncond"] = fmt17(p_uncond);
  p["lr"] = fmt17(lr);
  p["batch_size"] = std::to_string(batch_size);
  p["steps"] = std::to_string(steps);
  p["seed"] = std::to_string(seed);
  p["ckpt_every"] = std::to_string(ckpt_every);
  p["T"] = std::to_string(T);
  p["alpha_max"] = fmt17(alpha_max);
  p["variant"] = variant;
  p["joints"] = std::to_string(seq.joints);
  p["d"] = std::to_string(seq.d);
  p["heads"] = std::to_string(seq.heads);
  p["enc_blocks"] = std::to_string(seq.enc_blocks);
  p["dec_blocks"] = std::to_string(seq.dec_blocks);
  p["mlp_hidden"] = std::to_string(seq.mlp_hidden);
  p["den_width"] = std::to_string(den.width);
  p["den_blocks"] = std::to_string(den.blocks);
  p["den_tdim"] = std::to_string(den.t_dim);
  return p;
}

Models Models::create(const TrainConfig& cfg) {
  Models m;
  RngState rng = RngState::derive(cfg.seed, kInitStream);
  m.seq = SequenceModel::create(m.ps, "seq", cfg.seq, rng);
  m.den = DenoiserNet::create(m.ps, "den", cfg.den, rng);
  return m;
}

Models Models::from_checkpoint(const LoadedCheckpoint& loaded, TrainConfig* cfg_out) {
  KvConfig kv = KvConfig::from_pairs(loaded.meta.hyper);
  TrainConfig cfg = TrainConfig::parse(kv);
  kv.finish();
  cfg.validate();
  Models m = create(cfg);
  if (m.ps.count() != loaded.ps.count())
    throw std::runtime_error("checkpoint: parameter count does not match architecture");
  for (auto& [name, entry] : m.ps.entries()) {
    if (!loaded.ps.has(name))
      throw std::runtime_error("checkpoint: missing parameter " + name);
    const ParamStore::Entry& src = loaded.ps.entry(name);
    if (!src.value.same_shape(entry.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    entry.value = src.value;
    entry.m = src.m;
    entry.v = src.v;
  }
  if (cfg_out) *cfg_out = cfg;
  return m;
}

std::vector<uint8_t> sample_mask(int joints, double lo, double hi, RngState& rng) {
  const double r = lo + (hi - lo) * rng.uniform01();
  const int masked = static_cast<int>(std::llround(r * joints));
  std::vector<int> idx(joints);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: the first `masked` entries are a uniform subset
  for (int i = 0; i < masked; ++i) std::swap(idx[i], idx[rng.uniform_int(i, joints - 1)]);
  std::vector<uint8_t> visible(joints, 1);
  for (int i = 0; i < masked; ++i) visible[idx[i]] = 0;
  return visible;
}

LossDraw draw_loss_randomness(int joints, const TrainConfig& cfg, RngState& rng) {
  LossDraw d;
  d.visible = sample_mask(joints, cfg.mask_ratio_lo, cfg.mask_ratio_hi, rng);
  d.t = rng.uniform_int(1, cfg.T);
  if (cfg.euclidean()) {
    d.eps9 = Tensor2(joints, 9);
    for (int j = 0; j < joints; ++j)
      for (int c = 0; c < 9; ++c) d.eps9.at(j, c) = rng.normal();
  } else {
    d.eps.reserve(joints);
    for (int j = 0; j < joints; ++j) d.eps.push_back(so3::sample_tangent_gaussian(1.0, rng));
  }
  return d;
}

LossParts build_sample_loss_core(Graph& g, Var z, Var cam_scale, Var cam_trans, Var beta,
                                 const Record& rec, const Skeleton& skel, const Schedule& sched,
                                 const LossDraw& draw, bool conditional, const TrainConfig& cfg,
                                 const EpsHatFn& eps_hat) {
  const int J = skel.joints;
  require(static_cast<int>(rec.theta.size()) == J, "loss: record joint count mismatch");
  require(static_cast<int>(draw.visible.size()) == J, "loss: draw mask size mismatch");
  require(draw.t >= 1 && draw.t <= sched.T, "loss: timestep out of range");
  const double sa = std::sqrt(sched.alpha[draw.t]);

  Tensor2 xt(J, 9), target(J, cfg.euclidean() ? 9 : 3);
  if (cfg.euclidean()) {
    Tensor2 x0 = rotations_to_rows(rec.theta);
    for (int j = 0; j < J; ++j)
      for (int c = 0; c < 9; ++c) {
        xt.at(j, c) = x0.at(j, c) + sa * draw.eps9.at(j, c);
        target.at(j, c) = draw.eps9.at(j, c);
      }
  } else {
    require(static_cast<int>(draw.eps.size()) == J, "loss: draw noise size mismatch");
    for (int j = 0; j < J; ++j) {
      xt.set_row9(j, forward_noise(rec.theta[j], draw.t, draw.eps[j], sched).m);
      const so3::Vec3 v = so3::log_map(draw.eps[j]);
      for (int c = 0; c < 3; ++c) target.at(j, c) = v(c);
    }
  }

  Var xt_c = g.constant(xt);
  Var eh = eps_hat(g, xt_c, z, draw.t);
  LossParts out;
  out.l_diff = g.scale(g.sum_squares(g.sub(eh, g.constant(target))), 1.0 / J);

  // predicted clean state at masked slots, ground truth at visible ones
  Var xhat0 = cfg.euclidean() ? g.sub(xt_c, g.scale(eh, sa))
                              : g.rotmul_rows(xt_c, g.rodrigues_rows(g.scale(eh, -sa)));
  Var gt = g.constant(rotations_to_rows(rec.theta));
  std::vector<int> pick(J);
  for (int j = 0; j < J; ++j) pick[j] = draw.visible[j] ? J + j : j;
  Var theta_fk = g.select_rows(g.concat_rows({xhat0, gt}), pick);
  Var fk = fk_positions(g, theta_fk, beta, skel);
  out.l_3d = g.l1_loss(fk, g.constant(rec.j3d));

  out.l_2d = g.constant(Tensor2(1, 1));
  double lambda_2d = 0.0;  // forced off for the unconditional corpus
  if (conditional) {
    lambda_2d = cfg.lambda_2d;
    std::vector<int> vis_kp;
    for (int j = 0; j < J; ++j)
      if (rec.visible[j]) vis_kp.push_back(j);
    if (!vis_kp.empty()) {
      Var uv = g.add_rowvec(g.mul_bscalar(g.slice_cols(fk, 0, 2), cam_scale), cam_trans);
      Tensor2 gt2(static_cast<int>(vis_kp.size()), 2);
      for (size_t r = 0; r < vis_kp.size(); ++r) {
        gt2.at(static_cast<int>(r), 0) = rec.j2d.at(vis_kp[r], 0);
        gt2.at(static_cast<int>(r), 1) = rec.j2d.at(vis_kp[r], 1);
      }
      out.l_2d = g.l1_loss(g.select_rows(uv, vis_kp), g.constant(gt2));
    }
  }

  out.total = g.add(g.add(g.scale(out.l_diff, cfg.lambda_diff), g.scale(out.l_3d, cfg.lambda_3d)),
                    g.scale(out.l_2d, lambda_2d));
  return out;
}

LossParts build_sample_loss(Graph& g, const SequenceModel& seq, const DenoiserNet& den,
                            ParamStore& ps, const Record& rec, const Skeleton& skel,
                            const Schedule& sched, const LossDraw& draw, bool conditional,
                            const TrainConfig& cfg) {
  SeqInputs in;
  in.theta_rows = rotations_to_rows(rec.theta);
  in.visible = draw.visible;
  in.conditional = conditional;
  if (conditional) in.cond_feats = make_cond_feats(make_observation(rec));
  SeqForward f = seq.build(g, ps, in);
  EpsHatFn fn = [&den, &ps](Graph& gg, Var xt, Var zz, int t) {
    return den.build(gg, ps, xt, zz, t);
  };
  return build_sample_loss_core(g, f.z, reg_scale(g, f), reg_translation(g, f),
                                reg_beta(g, f, skel.bones()), rec, skel, sched, draw,
                                conditional, cfg, fn);
}

namespace {

TrainConfig validated(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, Dataset cond, Dataset uncond)
    : cfg_(validated(std::move(cfg))),
      cond_(std::move(cond)),
      uncond_(std::move(uncond)),
      models_(Models::create(cfg_)),
      sched_(Schedule::quadratic(cfg_.T, cfg_.alpha_max)),
      loop_rng_(RngState::derive(cfg_.seed, kLoopStream)) {
  const bool has_cond = !cond_.records.empty();
  const bool has_uncond = !uncond_.records.empty();
  require(has_cond || has_uncond, "training needs at least one non-empty corpus");
  require(!(cfg_.p_uncond < 1.0 && !has_cond),
          "p_uncond < 1 requires a conditional corpus");
  require(!(cfg_.p_uncond > 0.0 && !has_uncond),
          "p_uncond > 0 requires an unconditional corpus");
  if (has_cond && has_uncond) {
    require(cond_.skeleton.hash() == uncond_.skeleton.hash(),
            "corpora were generated against different skeletons");
  }
  const Skeleton& skel = skeleton();
  skel.validate();
  require(skel.joints == cfg_.seq.joints, "dataset joint count does not match config");
}

const Skeleton& Trainer::skeleton() const {
  return cond_.records.empty() ? uncond_.skeleton : cond_.skeleton;
}

void Trainer::resume_from(const std::string& ckpt_path) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  if (loaded.meta.skeleton_hash != skeleton().hash())
    throw std::runtime_error("resume: checkpoint skeleton does not match the datasets");
  // Run-length keys may legitimately grow on resume; everything else is fixed.
  std::map<std::string, std::string> theirs = loaded.meta.hyper;
  std::map<std::string, std::string> ours = cfg_.to_pairs();
  for (const char* key : {"steps", "ckpt_every"}) {
    theirs.erase(key);
    ours.erase(key);
  }
  if (theirs != ours)
    throw std::runtime_error("resume: checkpoint hyperparameters do not match the config");
  models_ = Models::from_checkpoint(loaded);
  done_steps_ = loaded.meta.step;
  loop_rng_.set_state_string(loaded.meta.rng_state);
}

StepStats Trainer::one_step(int64_t step) {
  const bool conditional = loop_rng_.uniform01() >= cfg_.p_uncond;
  const Dataset& ds = conditional ? cond_ : uncond_;
  const int n = static_cast<int>(ds.records.size());
  std::vector<int> pick(cfg_.batch_size);
  for (int& p : pick) p = loop_rng_.uniform_int(0, n - 1);

  models_.ps.zero_grads();
  StepStats s;
  s.step = step;
  const double inv_b = 1.0 / cfg_.batch_size;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const Record& rec = ds.records[pick[b]];
    LossDraw draw = draw_loss_randomness(cfg_.seq.joints, cfg_, loop_rng_);
    Graph g;
    LossParts parts = build_sample_loss(g, models_.seq, models_.den, models_.ps, rec,
                                        skeleton(), sched_, draw, conditional, cfg_);
    g.backward(g.scale(parts.total, inv_b));
    s.l_diff += g.value(parts.l_diff).at(0, 0) * inv_b;
    s.l_3d += g.value(parts.l_3d).at(0, 0) * inv_b;
    s.l_2d += g.value(parts.l_2d).at(0, 0) * inv_b;
    s.total += g.value(parts.total).at(0, 0) * inv_b;
  }
  adam_step(models_.ps, AdamConfig{cfg_.lr}, step);
  return s;
}

void Trainer::save(const std::string& path, int64_t step) const {
  CheckpointData meta;
  meta.skeleton_hash = skeleton().hash();
  meta.step = step;
  meta.rng_state = loop_rng_.state_string();
  meta.hyper = cfg_.to_pairs();
  save_checkpoint(path, models_.ps, meta);
}

std::string Trainer::run(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
  csv << "step,l_diff,l_3d,l_2d,total\n";
  for (int64_t step = done_steps_ + 1; step <= cfg_.steps; ++step) {
    StepStats s = one_step(step);
    curve_.push_back(s);
    csv << s.step << ',' << fmt17(s.l_diff) << ',' << fmt17(s.l_3d) << ',' << fmt17(s.l_2d)
        << ',' << fmt17(s.total) << '\n';
    if (cfg_.ckpt_every > 0 && step % cfg_.ckpt_every == 0)
      save(out_dir + "/ckpt_" + std::to_string(step) + ".bin", step);
  }
  csv.flush();
  done_steps_ = cfg_.steps;
  const std::string final_path = out_dir + "/ckpt_final.bin";
  save(final_path, cfg_.steps);
  return final_path;
}

}  // namespace rotdiff
