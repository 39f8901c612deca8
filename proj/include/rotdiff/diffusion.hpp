#pragma once

#include <functional>
#include <vector>

#include "rotdiff/schedule.hpp"
#include "rotdiff/so3.hpp"

namespace rotdiff {

/// Forward noising: x_t = x_0 * exp(sqrt(alpha_t) * log(eps)).
/// eps is a rotation-valued noise draw; t = 0 returns x_0 unchanged.
so3::Rotation forward_noise(const so3::Rotation& x0, int t, const so3::Rotation& eps,
                            const Schedule& s);

/// DDIM-style reverse noise scale:
/// sigma = eta * sqrt(alpha_prev * (alpha_t - alpha_prev) / alpha_t).
/// Returns 0 when eta = 0 or alpha_prev = 0. Requires 0 <= t_prev < t <= T
/// and alpha_t > 0.
double sigma_ddim(int t, int t_prev, double eta, const Schedule& s);

/// x_hat_0 = x_t * (exp(sqrt(alpha_t) * eps_hat))^{-1}. Requires t >= 1.
so3::Rotation predict_x0(const so3::Rotation& xt, const so3::Vec3& eps_hat, int t,
                         const Schedule& s);

/// One reverse update, composed left to right exactly as written:
///   x_{t_prev} = [x_t (exp(sqrt(a_t) e))^{-1}]
///                * exp(sqrt(a_prev - sigma^2) e) * exp(sigma * log(eps')),
/// where e = eps_hat and eps' is a fresh unit tangent-Gaussian rotation.
/// Draws from rng only when sigma > 0, and re-projects the result onto SO(3).
/// Throws std::domain_error when a_prev - sigma^2 < 0 (possible for eta > 1).
so3::Rotation reverse_step(const so3::Rotation& xt, const so3::Vec3& eps_hat, int t, int t_prev,
                           double eta, const Schedule& s, RngState& rng);

/// Denoiser callback: (x_t, t) -> predicted tangent noise. Callers bind any
/// conditioning (latents) into the closure.
using DenoiseFn = std::function<so3::Vec3(const so3::Rotation&, int)>;

/// Uniformly spaced decreasing timestep grid with `steps` transitions:
/// size steps + 1, strictly decreasing, front() == T, back() == 0.
/// Requires 1 <= steps <= T.
std::vector<int> timestep_grid(int T, int steps);

/// Full reverse chain over timestep_grid(s.T, steps). The initial state is an
/// exact Haar-uniform rotation: the exp-pushforward of a wide tangent
/// Gaussian never reaches the uniform law (its mean trace is
/// 1 + 2 (1 - s^2) exp(-s^2 / 2) >= 0.107 for every s), so the chain starts
/// from the true maximum-entropy prior instead of sample_tangent_gaussian.
so3::Rotation sample_chain(const DenoiseFn& denoise, int steps, double eta, const Schedule& s,
                           RngState& rng);

// ---------------------------------------------------------------------------
// Euclidean ablation: the same schedule applied to flattened matrix entries
// in R^9, no manifold structure. Used only for the SO(3)-vs-Euclidean
// comparison; sampled outputs must be re-projected by the caller.
// ---------------------------------------------------------------------------

using DenoiseFnEuclid = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

/// x_t = x_0 + sqrt(alpha_t) * eps.
Eigen::VectorXd forward_noise_euclidean(const Eigen::VectorXd& x0, int t,
                                        const Eigen::VectorXd& eps, const Schedule& s);

/// x_{t_prev} = (x_t - sqrt(a_t) e) + sqrt(a_prev - sigma^2) e + sigma n,
/// n ~ N(0, I). Same sigma rule and error conditions as the SO(3) step.
Eigen::VectorXd reverse_step_euclidean(const Eigen::VectorXd& xt, const Eigen::VectorXd& eps_hat,
                                       int t, int t_prev, double eta, const Schedule& s,
                                       RngState& rng);

/// Reverse chain in R^dim starting from x_T ~ N(0, alpha_T I).
Eigen::VectorXd sample_chain_euclidean(const DenoiseFnEuclid& denoise, int dim, int steps,
                                       double eta, const Schedule& s, RngState& rng);

}  // namespace rotdiff
