#include "rotdiff/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rotdiff {

namespace {

void check_same_points(const Tensor2& pred, const Tensor2& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != 3 || gt.cols() != 3)
    throw std::invalid_argument("metrics: point sets must both be J x 3");
}

Eigen::MatrixXd as_points_cols(const Tensor2& t) {
  Eigen::MatrixXd m(3, t.rows());
  for (int j = 0; j < t.rows(); ++j)
    for (int c = 0; c < 3; ++c) m(c, j) = t.at(j, c);
  return m;
}

}  // namespace

Tensor2 root_align(const Tensor2& j3d) {
  if (j3d.cols() != 3 || j3d.rows() < 1)
    throw std::invalid_argument("root_align: need J x 3 with J >= 1");
  Tensor2 out(j3d.rows(), 3);
  for (int j = 0; j < j3d.rows(); ++j)
    for (int c = 0; c < 3; ++c) out.at(j, c) = j3d.at(j, c) - j3d.at(0, c);
  return out;
}

double mpjpe(const Tensor2& pred, const Tensor2& gt) {
  check_same_points(pred, gt);
  double sum = 0.0;
  for (int j = 0; j < pred.rows(); ++j) {
    double dx = pred.at(j, 0) - gt.at(j, 0);
    double dy = pred.at(j, 1) - gt.at(j, 1);
    double dz = pred.at(j, 2) - gt.at(j, 2);
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum / pred.rows() * 1000.0;
}

PaResult pa_mpjpe_full(const Tensor2& pred, const Tensor2& gt) {
  check_same_points(pred, gt);
  const int J = pred.rows();
  if (J < 3) throw std::invalid_argument("pa_mpjpe: need at least 3 points");
  Eigen::MatrixXd x = as_points_cols(pred);  // source
  Eigen::MatrixXd y = as_points_cols(gt);    // target

  Eigen::Vector3d mx = x.rowwise().mean();
  Eigen::Vector3d my = y.rowwise().mean();
  Eigen::MatrixXd xc = x.colwise() - mx;
  Eigen::MatrixXd yc = y.colwise() - my;
  Eigen::Matrix3d cov = yc * xc.transpose() / J;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
  const double smax = svd.singularValues()(0);

  PaResult out;
  Eigen::MatrixXd aligned;
  if (smax <= 0.0 || svd.singularValues()(2) < 1e-12 * smax) {
    // A rotation is not pinned down (collinear or coincident points):
    // translation-only alignment, reported as degenerate.
    out.degenerate = true;
    aligned = xc.colwise() + my;
  } else {
    Eigen::Matrix4d sim = Eigen::umeyama(x, y, /*with_scaling=*/true);
    aligned = (sim.topLeftCorner<3, 3>() * x).colwise() + sim.topRightCorner<3, 1>().eval();
  }
  double sum = 0.0;
  for (int j = 0; j < J; ++j) sum += (aligned.col(j) - y.col(j)).norm();
  out.value = sum / J * 1000.0;
  return out;
}

double pa_mpjpe(const Tensor2& pred, const Tensor2& gt) { return pa_mpjpe_full(pred, gt).value; }

double apd(const std::vector<PoseSequence>& samples, const Skeleton& skel) {
  const int Q = static_cast<int>(samples.size());
  if (Q < 2) throw std::invalid_argument("apd: need at least two samples");
  std::vector<Tensor2> joints;
  joints.reserve(Q);
  for (const PoseSequence& s : samples)
    joints.push_back(root_align(forward_kinematics(s.theta, s.beta, skel)));
  double sum = 0.0;
  for (int a = 0; a < Q; ++a)
    for (int b = a + 1; b < Q; ++b) {
      double pair = 0.0;
      for (int j = 0; j < skel.joints; ++j) {
        double dx = joints[a].at(j, 0) - joints[b].at(j, 0);
        double dy = joints[a].at(j, 1) - joints[b].at(j, 1);
        double dz = joints[a].at(j, 2) - joints[b].at(j, 2);
        pair += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
      sum += pair / skel.joints;
    }
  return sum / (Q * (Q - 1) / 2) * 100.0;
}

Tensor2 pose_features(const std::vector<PoseSequence>& samples, const Skeleton& skel) {
  const int Q = static_cast<int>(samples.size());
  Tensor2 out(Q, 3 * skel.joints);
  for (int i = 0; i < Q; ++i) {
    Tensor2 j3d = root_align(forward_kinematics(samples[i].theta, samples[i].beta, skel));
    for (int j = 0; j < skel.joints; ++j)
      for (int c = 0; c < 3; ++c) out.at(i, 3 * j + c) = j3d.at(j, c);
  }
  return out;
}

namespace {

void gaussian_fit(const Tensor2& set, Eigen::VectorXd& mu, Eigen::MatrixXd& sigma) {
  const int n = set.rows();
  const int d = set.cols();
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) m(i, c) = set.at(i, c);
  mu = m.colwise().mean();
  Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
  sigma = centered.transpose() * centered / (n - 1);
}

}  // namespace

double fid(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("fid: feature widths differ");
  const int d = a.cols();
  if (a.rows() < d + 2 || b.rows() < d + 2)
    throw std::invalid_argument("fid: each set needs at least dim + 2 samples");

  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd sa, sb;
  gaussian_fit(a, mu_a, sa);
  gaussian_fit(b, mu_b, sb);

  // sqrt(Sa) through the eigensystem; Sa is symmetric PSD up to roundoff
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  Eigen::VectorXd la = ea.eigenvalues();
  for (int i = 0; i < d; ++i) {
    if (la(i) < -1e-8) throw std::runtime_error("fid: covariance not PSD");
    la(i) = std::sqrt(std::max(la(i), 0.0));
  }
  Eigen::MatrixXd sqrt_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();

  Eigen::MatrixXd inner = sqrt_a * sb * sqrt_a;
  // symmetrize against roundoff before the second eigensolve
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner);
  double tr_cross = 0.0;
  for (int i = 0; i < d; ++i) {
    double v = ei.eigenvalues()(i);
    if (v < -1e-8) throw std::runtime_error("fid: cross term not PSD");
    tr_cross += std::sqrt(std::max(v, 0.0));
  }
  double v = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_cross;
  if (v < -1e-8) throw std::runtime_error("fid: negative distance beyond roundoff");
  return std::max(v, 0.0);
}

double best_of_q(const std::vector<Tensor2>& pred_j3d, const Tensor2& gt_j3d,
                 const std::function<double(const Tensor2&, const Tensor2&)>& metric) {
  if (pred_j3d.empty()) throw std::invalid_argument("best_of_q: no hypotheses");
  double best = metric(pred_j3d[0], gt_j3d);
  for (size_t i = 1; i < pred_j3d.size(); ++i)
    best = std::min(best, metric(pred_j3d[i], gt_j3d));
  return best;
}

CoverageResult mode_coverage(const std::vector<PoseSequence>& samples,
                             const PoseMixture& modes, const std::vector<int>& joints,
                             double threshold) {
  if (joints.empty()) throw std::invalid_argument("mode_coverage: empty joint subset");
  CoverageResult out;
  out.hits.assign(modes.modes.size(), 0);
  for (size_t m = 0; m < modes.modes.size(); ++m) {
    const auto& mean = modes.modes[m].mean;
    for (const PoseSequence& s : samples) {
      double dist = 0.0;
      for (int j : joints) dist += so3::geodesic_distance(s.theta[j], mean[j]) / joints.size();
      if (dist < threshold) ++out.hits[m];
    }
    if (out.hits[m] > 0) out.coverage += 1.0 / modes.modes.size();
  }
  return out;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "metric,q,n,mean,ci95,sec_per_item,note\n";
  for (const Row& r : rows)
    os << r.metric << ',' << r.q << ',' << r.n << ',' << r.mean << ',' << r.ci95 << ','
       << r.sec_per_item << ',' << r.note << '\n';
  return os.str();
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  for (const Row& r : rows) {
    os << r.metric << " (Q=" << r.q << ", n=" << r.n << "): " << r.mean << " +- " << r.ci95;
    if (!r.note.empty()) os << "  [" << r.note << ']';
    os << '\n';
  }
  return os.str();
}

MeanCi mean_ci95(const std::vector<double>& xs) {
  MeanCi out;
  out.n = static_cast<int>(xs.size());
  if (out.n == 0) throw std::invalid_argument("mean_ci95: empty sample");
  for (double x : xs) out.mean += x / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.half_width = 1.959963984540054 * std::sqrt(ss / (out.n - 1) / out.n);
  }
  return out;
}

namespace {

// Continued-fraction core of the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  // the continued fraction converges fast only for x below the mean
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double dof) {
  if (dof <= 0.0) throw std::invalid_argument("student_t_sf: dof must be > 0");
  double p = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t >= 0.0 ? p : 1.0 - p;
}

double paired_t_pvalue_greater(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_t_pvalue_greater: need matched samples, n >= 2");
  const int n = static_cast<int>(a.size());
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += (a[i] - b[i]) / n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  double se = std::sqrt(ss / (n - 1) / n);
  if (se == 0.0) return mean > 0.0 ? 0.0 : (mean < 0.0 ? 1.0 : 0.5);
  return student_t_sf(mean / se, n - 1);
}

}  // namespace rotdiff
