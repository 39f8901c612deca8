#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rotdiff/kinematics.hpp"

namespace rotdiff {

/// Subtract the root joint (row 0) from every row.
Tensor2 root_align(const Tensor2& j3d);

/// Mean per-joint Euclidean distance in millimeters. Inputs are expected to
/// be root-aligned already; this only checks the shapes.
double mpjpe(const Tensor2& pred, const Tensor2& gt);

struct PaResult {
  double value = 0.0;       // millimeters
  bool degenerate = false;  // translation-only fallback was used
};

/// MPJPE after the closed-form optimal similarity alignment (rotation,
/// translation, uniform scale) of pred onto gt. Point sets whose centered
/// covariance is rank-deficient cannot pin a rotation, so those fall back to
/// translation-only alignment and are flagged. Requires J >= 3.
PaResult pa_mpjpe_full(const Tensor2& pred, const Tensor2& gt);
double pa_mpjpe(const Tensor2& pred, const Tensor2& gt);

/// Average pairwise distance in centimeters: mean over all sample pairs of
/// the mean per-joint distance between their root-aligned FK joints.
/// Requires at least two samples.
double apd(const std::vector<PoseSequence>& samples, const Skeleton& skel);

/// Root-aligned flattened joint coordinates (one row per sample, 3J wide),
/// the fixed feature map under the Frechet metric below.
Tensor2 pose_features(const std::vector<PoseSequence>& samples, const Skeleton& skel);

/// Frechet distance between Gaussian fits of two feature sets (rows =
/// samples): ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}). The cross
/// term uses the symmetric form sqrt(Sa^{1/2} Sb Sa^{1/2}); eigenvalues in
/// [-1e-8, 0) clamp to zero, anything lower throws. Each set needs at least
/// dim + 2 rows for a usable covariance.
double fid(const Tensor2& a, const Tensor2& b);

/// Smallest metric value over the hypotheses.
double best_of_q(const std::vector<Tensor2>& pred_j3d, const Tensor2& gt_j3d,
                 const std::function<double(const Tensor2&, const Tensor2&)>& metric);

struct CoverageResult {
  double coverage = 0.0;  // covered modes / total modes
  std::vector<int> hits;  // per mode: samples within the threshold
};

/// A mode counts as covered when any sample sits within `threshold` mean
/// geodesic distance of it over the given joint subset.
CoverageResult mode_coverage(const std::vector<PoseSequence>& samples,
                             const PoseMixture& modes, const std::vector<int>& joints,
                             double threshold);

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;  // 95%, normal approximation
  int n = 0;
};

MeanCi mean_ci95(const std::vector<double>& xs);

/// One evaluation table: a row per metric, intervals over evaluation items
/// (never pooled joints). sec_per_item is the wall clock spent producing one
/// item, recorded so speed/quality curves can be plotted from the CSV alone.
struct EvalReport {
  struct Row {
    std::string metric;
    int q = 1;
    int n = 0;
    double mean = 0.0;
    double ci95 = 0.0;  // half-width
    double sec_per_item = 0.0;
    std::string note;  // free-form flag column, e.g. trend pass/fail
  };
  std::vector<Row> rows;

  /// Header `metric,q,n,mean,ci95,sec_per_item,note`, floats at full
  /// precision.
  std::string to_csv() const;
  /// Human-readable lines, one per row: "name (Q=…, n=…): mean ± hw".
  std::string summary() const;
};

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(T > t) for Student's t with `dof` degrees of freedom.
double student_t_sf(double t, double dof);

/// One-sided paired t-test p-value for H1: mean(a - b) > 0.
double paired_t_pvalue_greater(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rotdiff
