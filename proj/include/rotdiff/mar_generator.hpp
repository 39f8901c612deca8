#pragma once

#include <optional>
#include <vector>

#include "rotdiff/denoiser.hpp"
#include "rotdiff/diffusion.hpp"
#include "rotdiff/kinematics.hpp"
#include "rotdiff/sequence_model.hpp"

namespace rotdiff {

/// Knobs for masked-autoregressive sampling: K reveal rounds over the token
/// set, `steps` reverse-diffusion transitions per token, and the flat-space
/// ablation switch (which must match the denoiser head width).
struct GenerationConfig {
  int K = 1;
  int steps = 50;
  double eta = 0.0;
  bool conditional = false;
  bool euclidean = false;
  uint64_t seed = 0;

  void validate(int joints) const;
};

/// What one generate() call did, for inspection and tests.
struct GenerationTrace {
  std::vector<std::vector<int>> revealed;  // K disjoint chunks covering 0..J-1
  std::vector<PoseSequence> intermediate;  // state after each reveal round
};

/// Uniformly random permutation of 0..J-1 cut into K contiguous chunks whose
/// sizes differ by at most one (larger chunks first).
/// Throws std::invalid_argument for K < 1 or K > J.
std::vector<std::vector<int>> choose_order(int J, int K, RngState& rng);

/// Masked-autoregressive sampling. Starts fully masked; each round re-encodes
/// the rotations revealed so far (plus condition tokens when present) and
/// denoises this round's tokens with independent reverse chains conditioned
/// on their latents. Revealed tokens re-enter later rounds as clean states.
/// Camera and bone scales are re-regressed every round; the last round's
/// values are reported, so K = 1 yields the fully-masked regression, which is
/// the regime the masking policy trains. `cond` must be present exactly when
/// cfg.conditional is set.
PoseSequence generate(const SequenceModel& seq, const DenoiserNet& den, ParamStore& ps,
                      const std::optional<Observation>& cond, const GenerationConfig& cfg,
                      const Schedule& sched, RngState& rng, GenerationTrace* trace = nullptr);

}  // namespace rotdiff
