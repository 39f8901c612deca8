#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "rotdiff/graph.hpp"
#include "rotdiff/rng.hpp"
#include "rotdiff/so3.hpp"
#include "rotdiff/tensor.hpp"

namespace rotdiff {

/// Kinematic tree. offsets row j is the bone vector from parent(j) to j in
/// the rest pose (meters); row 0 is unused (root sits at the origin). Bone k
/// belongs to joint k+1, so there are J-1 bones.
struct Skeleton {
  int joints = 0;
  std::vector<int> parent;  // parent[0] == -1; parent[j] < j
  Tensor2 offsets;          // joints x 3

  int bones() const { return joints - 1; }

  /// 24-joint humanoid: pelvis root, leg/spine/arm chains, camera looking
  /// down -z so the image plane is x-y.
  static Skeleton humanoid24();

  /// Throws std::invalid_argument when the tree shape is malformed
  /// (wrong root, non-topological parents, zero-length bones).
  void validate() const;

  /// Canonical text form; hashed into dataset headers so a checkpoint or
  /// dataset can refuse to run against a different skeleton.
  std::string canonical_string() const;
  uint64_t hash() const;
};

struct Camera {
  double s = 1.0;  // > 0
  double tx = 0.0;
  double ty = 0.0;
};

struct PoseSequence {
  std::vector<so3::Rotation> theta;  // J rotations
  Camera pi;
  Eigen::VectorXd beta;  // per-bone log length scale, size J-1
};

/// 2D keypoints as the model consumes them. Invisible slots hold kSentinel
/// in both coordinates; consumers must branch on the flag, never the value.
struct Observation {
  static constexpr double kSentinel = -1000.0;
  Tensor2 keypoints;              // J x 2
  std::vector<uint8_t> visible;   // J flags
};

/// positions[j] = positions[parent] + G_parent * (offset_j * exp(beta_{j-1})),
/// G_j = G_parent * theta_j, root pinned at the origin. Returns J x 3.
Tensor2 forward_kinematics(const std::vector<so3::Rotation>& theta,
                           const Eigen::VectorXd& beta, const Skeleton& skel);

/// Orthographic projection: (u, v) = s * (x, y) + (tx, ty). Throws unless
/// pi.s > 0.
Tensor2 project(const Tensor2& j3d, const Camera& pi);

/// Differentiable forward kinematics: rots is J x 9 flattened rotations,
/// beta is 1 x (J-1). Output J x 3 positions on the tape.
Var fk_positions(Graph& g, Var rots, Var beta, const Skeleton& skel);

/// Flattened-rotation helpers shared by model and data code.
Tensor2 rotations_to_rows(const std::vector<so3::Rotation>& theta);
std::vector<so3::Rotation> rows_to_rotations(const Tensor2& rows);

// ---------------------------------------------------------------------------
// pose distributions
// ---------------------------------------------------------------------------

/// Finite mixture over full poses: pick a mode by weight, then perturb every
/// joint mean by exp of an isotropic tangent Gaussian with the mode's std.
struct PoseMixture {
  struct Mode {
    std::vector<so3::Rotation> mean;
    double std = 0.0;
    double weight = 0.0;
  };
  std::vector<Mode> modes;

  void validate(int joints) const;  // weights sum to 1, stds >= 0, sizes match
};

struct PoseDraw {
  std::vector<so3::Rotation> theta;
  int mode = -1;
};

PoseDraw sample_pose(const PoseMixture& mix, RngState& rng);

/// One fixed, moderately bent pose (deterministic), as a 1-mode mixture.
PoseMixture point_mass_mixture(int joints, double std_dev);

/// The two-mode ambiguity benchmark: modes differ only in both elbow
/// rotations, +angle vs -angle about the camera axis. With the wrist and
/// hand keypoints occluded the two modes produce identically distributed
/// visible keypoints (the differing joints move only hidden children);
/// fully visible they are separated in the image plane, so the posterior
/// collapses. Rotating about the camera axis also avoids creating a
/// depth-mirror twin of each mode.
PoseMixture two_mode_elbow_mixture(double angle, double std_dev);

/// Joints whose rotations differ between the two benchmark modes.
std::vector<int> two_mode_ambiguous_joints();
/// Keypoints hidden by the benchmark occlusion (elbow subtrees).
std::vector<int> two_mode_occluded_joints();

// ---------------------------------------------------------------------------
// occlusion and dataset files
// ---------------------------------------------------------------------------

struct OcclusionPolicy {
  enum class Kind { kNone, kFixed, kRandom };
  Kind kind = Kind::kNone;
  std::vector<int> fixed;  // joints hidden when kind == kFixed
  int random_count = 0;    // joints hidden when kind == kRandom

  /// "none", "fixed:20,21,22,23", "random:4".
  static OcclusionPolicy parse(const std::string& text);
  std::vector<uint8_t> draw_visibility(int joints, RngState& rng) const;
};

struct Record {
  std::vector<so3::Rotation> theta;
  Eigen::VectorXd beta;
  Camera pi;
  Tensor2 j3d;  // J x 3
  Tensor2 j2d;  // J x 2, true projections for every joint
  std::vector<uint8_t> visible;
};

/// Model-input view of a record: keypoints with sentinels at hidden slots.
Observation make_observation(const Record& rec);

struct Dataset {
  Skeleton skeleton;
  std::vector<Record> records;
};

struct GenParams {
  double beta_std = 0.04;    // per-bone log-scale spread
  double cam_log_s_std = 0.03;
  double cam_t_std = 0.05;
};

/// n records, each from its own derived RNG stream (seed, index), so
/// generation order is irrelevant and output is seed-deterministic.
/// Per record the draw order is: pose, visibility, beta, camera.
std::vector<Record> build_records(const PoseMixture& mix, const Skeleton& skel, int n,
                                  const OcclusionPolicy& policy, const GenParams& params,
                                  uint64_t seed);

/// Line-delimited records behind a self-describing header (format version,
/// J, B, skeleton and its hash). All floats at 17 significant digits.
void write_dataset(const std::string& path, const Skeleton& skel,
                   const std::vector<Record>& records);
Dataset read_dataset(const std::string& path);

void write_skeleton_file(const std::string& path, const Skeleton& skel);
Skeleton read_skeleton_file(const std::string& path);

}  // namespace rotdiff
