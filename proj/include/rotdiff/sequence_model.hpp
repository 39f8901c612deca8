#pragma once

#include <vector>

#include "rotdiff/kinematics.hpp"
#include "rotdiff/nn.hpp"

namespace rotdiff {

struct SeqModelConfig {
  int joints = 24;
  int d = 64;          // token width; also the per-joint latent width
  int heads = 4;
  int enc_blocks = 4;
  int dec_blocks = 4;
  int mlp_hidden = 128;
  int bones() const { return joints - 1; }
  int reg_out() const { return 3 + bones(); }  // raw scale, tx, ty, per-bone beta
};

/// Inputs to one masked-autoencoder pass. theta_rows carries all J slots but
/// the model only ever gathers the visible rows, so masked values cannot
/// influence the output. Condition features are (u, v, flag) per keypoint
/// with coordinates zeroed when hidden (the flag channel carries hiddenness;
/// sentinels never enter the network).
struct SeqInputs {
  Tensor2 theta_rows;            // J x 9
  std::vector<uint8_t> visible;  // J flags; masked = 0
  bool conditional = false;
  Tensor2 cond_feats;            // J x 3 when conditional
  /// Order in which condition tokens enter the token sequence. Attention is
  /// permutation-equivariant over keys, so any order must give the same
  /// outputs; the default is canonical. Exists so tests can assert that.
  std::vector<int> cond_order;
};

Tensor2 make_cond_feats(const Observation& obs);

struct SeqForward {
  Var z;    // J x d per-joint latents
  Var reg;  // 1 x (3 + B) raw camera/shape regression
};

/// Masked autoencoder over pose tokens. Encoder attends over the visible
/// pose tokens, one global camera/shape token, and (conditionally) J
/// keypoint tokens. The decoder rebuilds the full-length sequence with a
/// learned mask vector in hidden slots, positional embeddings added again,
/// and yields per-joint latents plus a camera/shape regression off the
/// global slot.
struct SequenceModel {
  SeqModelConfig cfg;
  Linear embed;       // 9 -> d
  Linear cond_embed;  // 3 -> d
  std::string pos_pose;    // J x d learned positions, added in encoder,
                           // decoder input, and once more on the latents
  std::string pos_cond;    // J x d positions for condition tokens
  std::string cam_token;   // 1 x d learned global token
  std::string mask_token;  // 1 x d learned fill vector
  std::vector<TransformerBlock> enc, dec;
  LayerNormAffine enc_ln, dec_ln;
  Linear reg1, reg2;  // global-token MLP head; final layer zero-init so the
                      // initial camera is (s=1, t=0) and beta=0

  static SequenceModel create(ParamStore& ps, const std::string& prefix,
                              const SeqModelConfig& cfg, RngState& rng);

  SeqForward build(Graph& g, ParamStore& ps, const SeqInputs& in) const;
};

/// Slices of the raw regression output.
Var reg_scale(Graph& g, const SeqForward& f);        // 1x1, exp(raw) > 0
Var reg_translation(Graph& g, const SeqForward& f);  // 1x2
Var reg_beta(Graph& g, const SeqForward& f, int bones);

/// Plain-value view for the sampling path (builds a throwaway graph).
struct LatentOutput {
  Tensor2 z;  // J x d
  Camera pi;
  Eigen::VectorXd beta;
};
LatentOutput eval_latents(const SequenceModel& model, ParamStore& ps, const SeqInputs& in);

}  // namespace rotdiff
