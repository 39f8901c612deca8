#include "rotdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace rotdiff {

using so3::Rotation;
using so3::Vec3;

so3::Rotation forward_noise(const Rotation& x0, int t, const Rotation& eps, const Schedule& s) {
  const double a = s.at(t);
  const Vec3 le = so3::log_map(eps);
  return so3::compose(x0, so3::exp_map(std::sqrt(a) * le));
}

double sigma_ddim(int t, int t_prev, double eta, const Schedule& s) {
  if (t_prev < 0 || t_prev >= t || t > s.T) {
    throw std::invalid_argument("sigma_ddim: need 0 <= t_prev < t <= T");
  }
  if (!(eta >= 0.0)) throw std::invalid_argument("sigma_ddim: eta must be >= 0");
  const double at = s.at(t);
  if (at <= 0.0) throw std::invalid_argument("sigma_ddim: alpha_t must be positive");
  const double ap = s.at(t_prev);
  if (eta == 0.0 || ap == 0.0) return 0.0;
  return eta * std::sqrt(ap * (at - ap) / at);
}

so3::Rotation predict_x0(const Rotation& xt, const Vec3& eps_hat, int t, const Schedule& s) {
  if (t < 1) throw std::invalid_argument("predict_x0: t must be >= 1");
  const double a = s.at(t);
  return so3::compose(xt, so3::inverse(so3::exp_map(std::sqrt(a) * eps_hat)));
}

so3::Rotation reverse_step(const Rotation& xt, const Vec3& eps_hat, int t, int t_prev, double eta,
                           const Schedule& s, RngState& rng) {
  const double sig = sigma_ddim(t, t_prev, eta, s);
  const double ap = s.at(t_prev);
  const double rad = ap - sig * sig;
  if (rad < 0.0) throw std::domain_error("reverse_step: alpha_prev - sigma^2 < 0");

  Rotation x = predict_x0(xt, eps_hat, t, s);
  x = so3::compose(x, so3::exp_map(std::sqrt(rad) * eps_hat));
  if (sig > 0.0) {
    const Rotation eps_fresh = so3::sample_tangent_gaussian(1.0, rng);
    x = so3::compose(x, so3::exp_map(sig * so3::log_map(eps_fresh)));
  }
  return so3::project_to_so3(x.m);
}

std::vector<int> timestep_grid(int T, int steps) {
  if (steps < 1 || steps > T) throw std::invalid_argument("timestep_grid: need 1 <= steps <= T");
  std::vector<int> ts(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    ts[i] = static_cast<int>(std::llround(static_cast<double>(T) * (steps - i) / steps));
  }
  // Gap >= 1 before rounding guarantees strict decrease.
  for (int i = 1; i <= steps; ++i) {
    if (ts[i] >= ts[i - 1]) throw std::logic_error("timestep_grid: grid not strictly decreasing");
  }
  return ts;
}

so3::Rotation sample_chain(const DenoiseFn& denoise, int steps, double eta, const Schedule& s,
                           RngState& rng) {
  const std::vector<int> ts = timestep_grid(s.T, steps);
  Rotation x = so3::uniform_rotation(rng);
  for (int i = 0; i < steps; ++i) {
    const Vec3 eps_hat = denoise(x, ts[i]);
    x = reverse_step(x, eps_hat, ts[i], ts[i + 1], eta, s, rng);
  }
  return x;
}

Eigen::VectorXd forward_noise_euclidean(const Eigen::VectorXd& x0, int t,
                                        const Eigen::VectorXd& eps, const Schedule& s) {
  if (eps.size() != x0.size()) throw std::invalid_argument("forward_noise_euclidean: size mismatch");
  return x0 + std::sqrt(s.at(t)) * eps;
}

Eigen::VectorXd reverse_step_euclidean(const Eigen::VectorXd& xt, const Eigen::VectorXd& eps_hat,
                                       int t, int t_prev, double eta, const Schedule& s,
                                       RngState& rng) {
  if (eps_hat.size() != xt.size()) throw std::invalid_argument("reverse_step_euclidean: size mismatch");
  const double sig = sigma_ddim(t, t_prev, eta, s);
  const double ap = s.at(t_prev);
  const double rad = ap - sig * sig;
  if (rad < 0.0) throw std::domain_error("reverse_step_euclidean: alpha_prev - sigma^2 < 0");

  Eigen::VectorXd x = xt - std::sqrt(s.at(t)) * eps_hat + std::sqrt(rad) * eps_hat;
  if (sig > 0.0) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sig * rng.normal();
  }
  return x;
}

Eigen::VectorXd sample_chain_euclidean(const DenoiseFnEuclid& denoise, int dim, int steps,
                                       double eta, const Schedule& s, RngState& rng) {
  const std::vector<int> ts = timestep_grid(s.T, steps);
  Eigen::VectorXd x(dim);
  const double std_T = std::sqrt(s.at(s.T));
  for (int i = 0; i < dim; ++i) x[i] = std_T * rng.normal();
  for (int i = 0; i < steps; ++i) {
    x = reverse_step_euclidean(x, denoise(x, ts[i]), ts[i], ts[i + 1], eta, s, rng);
  }
  return x;
}

}  // namespace rotdiff
