#include "rotdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace rotdiff {

Schedule Schedule::quadratic(int T, double alpha_max) {
  if (T < 1) throw std::invalid_argument("Schedule: T must be >= 1");
  if (!(alpha_max > 0.0) || !std::isfinite(alpha_max)) {
    throw std::invalid_argument("Schedule: alpha_max must be positive and finite");
  }
  Schedule s;
  s.T = T;
  s.alpha.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(T);
    s.alpha[t] = alpha_max * u * u;
  }
  return s;
}

Schedule Schedule::from_values(std::vector<double> values) {
  if (values.size() < 2) throw std::invalid_argument("Schedule: need at least alpha_0 and alpha_1");
  if (values[0] != 0.0) throw std::invalid_argument("Schedule: alpha_0 must be 0");
  for (size_t t = 1; t < values.size(); ++t) {
    if (!std::isfinite(values[t]) || values[t] <= values[t - 1]) {
      throw std::invalid_argument("Schedule: alpha must be strictly increasing and finite");
    }
  }
  Schedule s;
  s.T = static_cast<int>(values.size()) - 1;
  s.alpha = std::move(values);
  return s;
}

double Schedule::at(int t) const {
  if (t < 0 || t > T) throw std::out_of_range("Schedule::at: t out of [0, T]");
  return alpha[t];
}

}  // namespace rotdiff
