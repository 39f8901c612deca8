#pragma once

#include <vector>

namespace rotdiff {

/// Forward-noising variance schedule. alpha[t] is the squared tangent noise
/// scale at step t: alpha[0] = 0, strictly increasing, alpha[T] = alpha_max.
struct Schedule {
  int T = 0;
  std::vector<double> alpha;  // size T + 1

  /// alpha_t = alpha_max * (t / T)^2. The default alpha_max = 4.41 puts the
  /// terminal tangent std at 2.1 rad.
  static Schedule quadratic(int T, double alpha_max);

  /// Builds from explicit values after validating the invariants above.
  static Schedule from_values(std::vector<double> values);

  /// Bounds-checked lookup.
  double at(int t) const;
};

}  // namespace rotdiff
