#pragma once

#include <string>
#include <vector>

#include "rotdiff/nn.hpp"

namespace rotdiff {

struct DenoiserConfig {
  int x_dim = 9;    // flattened 3x3 state entries
  int latent = 64;  // per-token conditioning latent
  int width = 128;
  int blocks = 3;
  int t_dim = 32;   // sinusoidal step embedding size
  int out = 3;      // tangent prediction; 9 for the flat-space ablation
};

/// Per-token denoising MLP conditioned on a latent and a diffusion step.
/// Each block applies step-conditioned modulation (AdaLN), re-appends the
/// latent, and adds a two-layer GELU MLP residual. The modulation
/// projections and the output head start at zero so the net begins as a
/// zero predictor.
///
/// build() and forward_plain() must stay arithmetic-identical; a unit test
/// pins them together. forward_plain exists because sampling calls the
/// denoiser hundreds of times per sequence and needs no tape.
struct DenoiserNet {
  DenoiserConfig cfg;
  Linear in_proj;
  struct Block {
    Linear adaln;  // t_dim -> 2*width, zero-init
    Linear l1;     // width + latent -> width
    Linear l2;     // width -> width
  };
  std::vector<Block> blocks;
  Linear final_adaln;  // t_dim -> 2*width, zero-init
  Linear head;         // width -> out, zero-init

  static DenoiserNet create(ParamStore& ps, const std::string& prefix,
                            const DenoiserConfig& cfg, RngState& rng);

  /// x: n x x_dim, z: n x latent. One diffusion step t for all rows.
  Var build(Graph& g, ParamStore& ps, Var x, Var z, int t) const;
  Tensor2 forward_plain(const ParamStore& ps, const Tensor2& x, const Tensor2& z,
                        int t) const;
};

}  // namespace rotdiff
