#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rotdiff/checkpoint.hpp"
#include "rotdiff/config.hpp"
#include "rotdiff/denoiser.hpp"
#include "rotdiff/diffusion.hpp"
#include "rotdiff/kinematics.hpp"
#include "rotdiff/sequence_model.hpp"

namespace rotdiff {

/// Everything one run needs: objective weights, masking policy, loop
/// settings, diffusion schedule parameters, the state-space variant, and the
/// model dimensions. Parsed from a flat key=value file; unknown keys error.
struct TrainConfig {
  double lambda_diff = 1.0;
  double lambda_3d = 1.0;
  double lambda_2d = 1.0;
  double mask_ratio_lo = 0.7;
  double mask_ratio_hi = 1.0;
  double p_uncond = 0.5;  // fraction of batches drawn from the unconditional corpus

  double lr = 1e-3;
  int batch_size = 8;
  int64_t steps = 1000;
  uint64_t seed = 0;
  int64_t ckpt_every = 0;  // 0: final checkpoint only

  int T = 100;
  double alpha_max = 4.41;
  std::string variant = "so3";  // "so3" | "euclidean"

  SeqModelConfig seq;
  DenoiserConfig den;  // latent tied to seq.d; out tied to variant

  /// Consumes every recognized key from kv; callers run kv.finish() after to
  /// reject unknown keys, and keep kv.resolved() as the hyperparameter echo.
  static TrainConfig parse(KvConfig& kv);
  static TrainConfig from_file(const std::string& path,
                               std::map<std::string, std::string>* resolved = nullptr);

  bool euclidean() const { return variant == "euclidean"; }
  void validate() const;  // throws std::invalid_argument
  std::map<std::string, std::string> to_pairs() const;
};

/// The two networks plus their shared parameter store.
struct Models {
  SequenceModel seq;
  DenoiserNet den;
  ParamStore ps;

  static Models create(const TrainConfig& cfg);
  /// Rebuilds from checkpoint hyperparameters and loads all values and Adam
  /// moments. Throws if the stored tensors do not match the architecture.
  static Models from_checkpoint(const LoadedCheckpoint& loaded, TrainConfig* cfg_out = nullptr);
};

/// Per-sample randomness for one loss evaluation, drawn separately from the
/// graph build so finite-difference checks can re-evaluate the same draw.
/// Draw order: token mask, timestep, per-joint noise.
struct LossDraw {
  std::vector<uint8_t> visible;    // token-level mask (1 = model sees the joint)
  int t = 1;
  std::vector<so3::Rotation> eps;  // rotation noise, J entries (manifold variant)
  Tensor2 eps9;                    // J x 9 Gaussian noise (flat variant)
};

/// Visibility flags with round(r * J) joints masked, r ~ U[lo, hi]; the
/// masked subset is uniform among subsets of that size.
std::vector<uint8_t> sample_mask(int joints, double lo, double hi, RngState& rng);

LossDraw draw_loss_randomness(int joints, const TrainConfig& cfg, RngState& rng);

struct LossParts {
  Var l_diff;  // mean over joints of squared tangent (or flat) residual
  Var l_3d;    // L1 over 3D joint positions
  Var l_2d;    // L1 over visible projected keypoints; constant 0 when unconditional
  Var total;   // lambda-weighted sum, lambda_2d forced to 0 when unconditional
};

/// Test seam: produces the predicted noise from (x_t, z, t). The default
/// binds DenoiserNet::build; oracle tests substitute exact answers.
using EpsHatFn = std::function<Var(Graph&, Var, Var, int)>;

/// Core objective assembly from already-built model outputs.
LossParts build_sample_loss_core(Graph& g, Var z, Var cam_scale, Var cam_trans, Var beta,
                                 const Record& rec, const Skeleton& skel, const Schedule& sched,
                                 const LossDraw& draw, bool conditional, const TrainConfig& cfg,
                                 const EpsHatFn& eps_hat);

/// Full objective for one record: masked sequence pass for latents and
/// camera/shape, denoiser prediction, then the three loss terms.
LossParts build_sample_loss(Graph& g, const SequenceModel& seq, const DenoiserNet& den,
                            ParamStore& ps, const Record& rec, const Skeleton& skel,
                            const Schedule& sched, const LossDraw& draw, bool conditional,
                            const TrainConfig& cfg);

struct StepStats {
  int64_t step = 0;
  double l_diff = 0, l_3d = 0, l_2d = 0, total = 0;
};

/// Deterministic training loop over one or two corpora. Per step: corpus
/// coin (uniform01 >= p_uncond selects the conditional corpus), batch index
/// draws, then per-sample randomness; gradients accumulate over the batch
/// and one Adam update applies. Same seed, same build: bit-identical
/// checkpoints, whether run straight through or resumed.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset cond, Dataset uncond);

  void resume_from(const std::string& ckpt_path);

  /// Runs remaining steps, writing metrics.csv (header
  /// step,l_diff,l_3d,l_2d,total; components unweighted, total weighted) and
  /// periodic plus final checkpoints into out_dir. Returns the final
  /// checkpoint path.
  std::string run(const std::string& out_dir);

  Models& models() { return models_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<StepStats>& curve() const { return curve_; }
  const Skeleton& skeleton() const;

 private:
  TrainConfig cfg_;
  Dataset cond_, uncond_;
  Models models_;
  Schedule sched_;
  RngState loop_rng_;
  int64_t done_steps_ = 0;
  std::vector<StepStats> curve_;

  StepStats one_step(int64_t step);
  void save(const std::string& path, int64_t step) const;
};

}  // namespace rotdiff
