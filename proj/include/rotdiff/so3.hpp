#pragma once

#include <Eigen/Dense>

#include "rotdiff/rng.hpp"

namespace rotdiff {
namespace so3 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// A rotation matrix. Factory functions validate orthonormality (R^T R = I
/// within 1e-9, det = +1); group operations preserve it up to roundoff, so
/// they skip re-validation.
struct Rotation {
  Mat3 m = Mat3::Identity();

  static Rotation identity() { return Rotation{}; }

  /// Wraps a raw matrix after checking the rotation invariants.
  /// Throws std::invalid_argument if the matrix is not a rotation.
  static Rotation from_matrix(const Mat3& m, double tol = 1e-9);

  /// Wraps without validation. For internal use where closure is guaranteed.
  static Rotation wrap(const Mat3& m) { return Rotation{m}; }

  bool is_orthonormal(double tol = 1e-9) const;
};

/// A skew-symmetric matrix, antisymmetric by construction (only hat() makes
/// one), so vee() can read the upper triangle without checks.
struct SkewMatrix {
  Mat3 m;
};

/// hat: R^3 -> so(3). hat(v) * u == v x u.
SkewMatrix hat(const Vec3& v);

/// vee: inverse of hat.
Vec3 vee(const SkewMatrix& s);

/// Rodrigues exponential, exact for any ||v||; switches to the Taylor
/// expansion of sin(t)/t and (1-cos(t))/t^2 below ||v|| = 1e-4.
/// Throws std::invalid_argument on non-finite input.
Rotation exp_map(const Vec3& v);

/// Principal-branch logarithm, ||result|| <= pi.
/// Within 1e-6 of angle pi the axis is recovered from the symmetric part
/// (R + I); the sign follows the skew part while it is informative and falls
/// back to the deterministic tie-break (first nonzero component positive)
/// at the exact-pi ambiguity.
Vec3 log_map(const Rotation& r);

Rotation compose(const Rotation& a, const Rotation& b);
Rotation inverse(const Rotation& a);

/// Geodesic distance ||log(a^T b)|| in [0, pi]. Bi-invariant.
double geodesic_distance(const Rotation& a, const Rotation& b);

/// Right Jacobian J_r(v) of the exponential map:
/// exp(v + d) ~= exp(v) * exp(J_r(v) d) for small d. Taylor branch below
/// ||v|| = 1e-4. Used by the reverse-mode rule for exp_map.
Mat3 right_jacobian(const Vec3& v);

/// exp of an isotropic tangent Gaussian: exp_map(w), w ~ N(0, std^2 I_3).
/// std = 0 returns identity. Throws std::invalid_argument for std < 0.
Rotation sample_tangent_gaussian(double std, RngState& rng);

/// Exactly Haar-uniform rotation (normalized 4D Gaussian quaternion).
Rotation uniform_rotation(RngState& rng);

/// Nearest rotation in Frobenius norm (polar factor via SVD), with the
/// determinant guard for reflections. Throws std::invalid_argument on
/// non-finite input or when the matrix is singular (projection undefined).
Rotation project_to_so3(const Mat3& m);

}  // namespace so3
}  // namespace rotdiff
