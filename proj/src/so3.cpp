#include "rotdiff/so3.hpp"

#include <cmath>
#include <stdexcept>

namespace rotdiff {
namespace so3 {

namespace {

constexpr double kTaylorThresh = 1e-4;
constexpr double kPiBranchWindow = 1e-6;

void require_finite(const Mat3& m, const char* who) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

void require_finite(const Vec3& v, const char* who) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace

Rotation Rotation::from_matrix(const Mat3& m, double tol) {
  require_finite(m, "Rotation::from_matrix");
  Rotation r{m};
  if (!r.is_orthonormal(tol)) throw std::invalid_argument("Rotation::from_matrix: not a rotation matrix");
  return r;
}

bool Rotation::is_orthonormal(double tol) const {
  if (!m.allFinite()) return false;
  if ((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return m.determinant() > 0.0;
}

SkewMatrix hat(const Vec3& v) {
  SkewMatrix s;
  s.m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
  return s;
}

Vec3 vee(const SkewMatrix& s) {
  return Vec3(s.m(2, 1), s.m(0, 2), s.m(1, 0));
}

Rotation exp_map(const Vec3& v) {
  require_finite(v, "exp_map");
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < kTaylorThresh) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(v).m;
  return Rotation::wrap(Mat3::Identity() + a * k + b * (k * k));
}

Vec3 log_map(const Rotation& r) {
  require_finite(r.m, "log_map");
  const Mat3& m = r.m;
  const double c = std::clamp((m.trace() - 1.0) * 0.5, -1.0, 1.0);
  const Vec3 w(0.5 * (m(2, 1) - m(1, 2)),
               0.5 * (m(0, 2) - m(2, 0)),
               0.5 * (m(1, 0) - m(0, 1)));  // = sin(theta) * axis
  // atan2 of (sin, cos) keeps the angle well conditioned at both ends of
  // [0, pi]; acos alone loses ~1/sin(theta) digits near pi.
  const double theta = std::atan2(w.norm(), c);

  if (theta < kTaylorThresh) {
    // v = (1 + t^2/6 + 7 t^4/360) * w, series of t / sin(t)
    return (1.0 + theta * theta / 6.0 + 7.0 * theta * theta * theta * theta / 360.0) * w;
  }
  if (theta < M_PI - kPiBranchWindow) {
    return (theta / w.norm()) * w;
  }

  // Near pi the skew part vanishes; recover the axis from the symmetric part.
  // aa^T = (S - cos(theta) I) / (1 - cos(theta)), S = (R + R^T)/2.
  const Mat3 aat = ((m + m.transpose()) * 0.5 - c * Mat3::Identity()) / (1.0 - c);
  int k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis;
  axis[k] = std::sqrt(std::max(0.0, aat(k, k)));
  for (int j = 0; j < 3; ++j) {
    if (j != k) axis[j] = aat(k, j) / axis[k];
  }
  axis.normalize();

  if (w.norm() > 1e-9) {
    // Below exact pi the sign is still determined by the skew part.
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    // Exact-pi tie: first nonzero component positive.
    for (int j = 0; j < 3; ++j) {
      if (std::abs(axis[j]) > 1e-8) {
        if (axis[j] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Rotation compose(const Rotation& a, const Rotation& b) {
  return Rotation::wrap(a.m * b.m);
}

Rotation inverse(const Rotation& a) {
  return Rotation::wrap(a.m.transpose());
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
  return log_map(Rotation::wrap(a.m.transpose() * b.m)).norm();
}

Mat3 right_jacobian(const Vec3& v) {
  require_finite(v, "right_jacobian");
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b, c;  // (1-cos t)/t^2 and (t - sin t)/t^3
  if (theta < kTaylorThresh) {
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = hat(v).m;
  return Mat3::Identity() - b * k + c * (k * k);
}

Rotation sample_tangent_gaussian(double std, RngState& rng) {
  if (!(std >= 0.0)) throw std::invalid_argument("sample_tangent_gaussian: std must be >= 0");
  Vec3 w(rng.normal(), rng.normal(), rng.normal());
  return exp_map(std * w);
}

Rotation uniform_rotation(RngState& rng) {
  double n = 0.0;
  Eigen::Vector4d q;
  do {
    q = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    n = q.norm();
  } while (n < 1e-12);
  q /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return Rotation::wrap(m);
}

Rotation project_to_so3(const Mat3& m) {
  require_finite(m, "project_to_so3");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(2) <= 1e-12 * std::max(1.0, s(0))) {
    throw std::invalid_argument("project_to_so3: singular input, projection undefined");
  }
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return Rotation::wrap(u * d * v.transpose());
}

}  // namespace so3
}  // namespace rotdiff
