#include "rotdiff/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rotdiff/util.hpp"

namespace rotdiff {

namespace {

using json = nlohmann::json;

void fail(const std::string& msg) { throw std::invalid_argument("kinematics: " + msg); }

}  // namespace

// ---------------------------------------------------------------------------
// skeleton
// ---------------------------------------------------------------------------

Skeleton Skeleton::humanoid24() {
  Skeleton s;
  s.joints = 24;
  s.parent = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  const double off[24][3] = {
      {0.0, 0.0, 0.0},      // pelvis (root)
      {0.07, -0.09, 0.0},   // left hip
      {-0.07, -0.09, 0.0},  // right hip
      {0.0, 0.11, 0.0},     // spine1
      {0.01, -0.38, 0.0},   // left knee
      {-0.01, -0.38, 0.0},  // right knee
      {0.0, 0.13, 0.0},     // spine2
      {0.01, -0.40, 0.0},   // left ankle
      {-0.01, -0.40, 0.0},  // right ankle
      {0.0, 0.05, 0.0},     // spine3
      {0.02, -0.06, 0.12},  // left foot
      {-0.02, -0.06, 0.12}, // right foot
      {0.0, 0.21, 0.0},     // neck
      {0.08, 0.12, 0.0},    // left collar
      {-0.08, 0.12, 0.0},   // right collar
      {0.0, 0.09, 0.0},     // head
      {0.09, 0.02, 0.0},    // left shoulder
      {-0.09, 0.02, 0.0},   // right shoulder
      {0.26, 0.0, 0.0},     // left elbow
      {-0.26, 0.0, 0.0},    // right elbow
      {0.25, 0.0, 0.0},     // left wrist
      {-0.25, 0.0, 0.0},    // right wrist
      {0.08, 0.0, 0.0},     // left hand
      {-0.08, 0.0, 0.0},    // right hand
  };
  s.offsets = Tensor2(24, 3);
  for (int j = 0; j < 24; ++j)
    for (int c = 0; c < 3; ++c) s.offsets.at(j, c) = off[j][c];
  s.validate();
  return s;
}

void Skeleton::validate() const {
  if (joints < 2) fail("skeleton needs at least 2 joints");
  if (static_cast<int>(parent.size()) != joints || offsets.rows() != joints ||
      offsets.cols() != 3)
    fail("skeleton field sizes disagree");
  if (parent[0] != -1) fail("joint 0 must be the root");
  for (int j = 1; j < joints; ++j) {
    if (parent[j] < 0 || parent[j] >= j) fail("parents must be topological (parent[j] < j)");
    const double len = std::hypot(offsets.at(j, 0), offsets.at(j, 1), offsets.at(j, 2));
    if (!(len > 0.0)) fail("bone length must be positive");
  }
}

std::string Skeleton::canonical_string() const {
  std::string s = "skeleton v1\nJ=" + std::to_string(joints) + "\nparent=";
  for (int j = 0; j < joints; ++j) {
    if (j) s += ',';
    s += std::to_string(parent[j]);
  }
  s += "\noffsets=";
  for (int j = 0; j < joints; ++j)
    for (int c = 0; c < 3; ++c) {
      s += fmt17(offsets.at(j, c));
      s += ' ';
    }
  s += '\n';
  return s;
}

uint64_t Skeleton::hash() const { return fnv1a64(canonical_string()); }

// ---------------------------------------------------------------------------
// forward kinematics
// ---------------------------------------------------------------------------

Tensor2 forward_kinematics(const std::vector<so3::Rotation>& theta,
                           const Eigen::VectorXd& beta, const Skeleton& skel) {
  const int J = skel.joints;
  if (static_cast<int>(theta.size()) != J) fail("forward_kinematics: theta size");
  if (beta.size() != skel.bones()) fail("forward_kinematics: beta size");
  std::vector<so3::Mat3> G(J);
  Tensor2 p(J, 3);
  G[0] = theta[0].m;
  for (int j = 1; j < J; ++j) {
    const int par = skel.parent[j];
    const so3::Vec3 off(skel.offsets.at(j, 0), skel.offsets.at(j, 1), skel.offsets.at(j, 2));
    const so3::Vec3 pos = so3::Vec3(p.at(par, 0), p.at(par, 1), p.at(par, 2)) +
                          G[par] * (off * std::exp(beta(j - 1)));
    for (int c = 0; c < 3; ++c) p.at(j, c) = pos(c);
    G[j] = G[par] * theta[j].m;
  }
  return p;
}

Tensor2 project(const Tensor2& j3d, const Camera& pi) {
  if (!(pi.s > 0.0)) fail("project: camera scale must be positive");
  Tensor2 out(j3d.rows(), 2);
  for (int j = 0; j < j3d.rows(); ++j) {
    out.at(j, 0) = pi.s * j3d.at(j, 0) + pi.tx;
    out.at(j, 1) = pi.s * j3d.at(j, 1) + pi.ty;
  }
  return out;
}

Var fk_positions(Graph& g, Var rots, Var beta, const Skeleton& skel) {
  const Tensor2& R9 = g.value(rots);
  const Tensor2& B = g.value(beta);
  const int J = skel.joints;
  if (R9.rows() != J || R9.cols() != 9) fail("fk_positions: rots must be J x 9");
  if (B.rows() != 1 || B.cols() != skel.bones()) fail("fk_positions: beta must be 1 x (J-1)");

  auto chain = [&skel](const Tensor2& r9, const Tensor2& b, std::vector<so3::Mat3>& G,
                       std::vector<so3::Vec3>& o, Tensor2& p) {
    const int n = skel.joints;
    G.resize(n);
    o.resize(n);
    p = Tensor2(n, 3);
    G[0] = r9.row9(0);
    o[0].setZero();
    for (int j = 1; j < n; ++j) {
      const int par = skel.parent[j];
      o[j] = so3::Vec3(skel.offsets.at(j, 0), skel.offsets.at(j, 1), skel.offsets.at(j, 2)) *
             std::exp(b.at(0, j - 1));
      const so3::Vec3 pos =
          so3::Vec3(p.at(par, 0), p.at(par, 1), p.at(par, 2)) + G[par] * o[j];
      for (int c = 0; c < 3; ++c) p.at(j, c) = pos(c);
      G[j] = G[par] * r9.row9(j);
    }
  };

  std::vector<so3::Mat3> G;
  std::vector<so3::Vec3> o;
  Tensor2 p;
  chain(R9, B, G, o, p);

  const int pr = rots.id, pb = beta.id;
  return g.add_custom(std::move(p), {pr, pb}, [pr, pb, skel, chain](Graph& gg, int self) {
    const Tensor2& r9 = gg.value(Var{pr});
    const Tensor2& b = gg.value(Var{pb});
    const Tensor2& Gout = gg.grad(Var{self});
    const int J = skel.joints;
    std::vector<so3::Mat3> G;
    std::vector<so3::Vec3> o;
    Tensor2 p;
    chain(r9, b, G, o, p);
    std::vector<so3::Mat3> Gdot(J, so3::Mat3::Zero());
    std::vector<so3::Vec3> pdot(J);
    for (int j = 0; j < J; ++j)
      pdot[j] = so3::Vec3(Gout.at(j, 0), Gout.at(j, 1), Gout.at(j, 2));
    Tensor2 dR(J, 9);
    Tensor2 dB(1, J - 1);
    // Children have larger indices, so one descending sweep sees each node's
    // gradient complete before it pushes to its parent.
    for (int j = J - 1; j >= 1; --j) {
      const int par = skel.parent[j];
      pdot[par] += pdot[j];
      Gdot[par] += pdot[j] * o[j].transpose();
      dB.at(0, j - 1) += pdot[j].dot(G[par] * o[j]);
      Gdot[par] += Gdot[j] * r9.row9(j).transpose();
      dR.set_row9(j, G[par].transpose() * Gdot[j]);
    }
    dR.set_row9(0, Gdot[0]);
    gg.add_to_grad(pr, dR);
    gg.add_to_grad(pb, dB);
  });
}

Tensor2 rotations_to_rows(const std::vector<so3::Rotation>& theta) {
  Tensor2 out(static_cast<int>(theta.size()), 9);
  for (size_t j = 0; j < theta.size(); ++j) out.set_row9(static_cast<int>(j), theta[j].m);
  return out;
}

std::vector<so3::Rotation> rows_to_rotations(const Tensor2& rows) {
  if (rows.cols() != 9) fail("rows_to_rotations: need n x 9");
  std::vector<so3::Rotation> out;
  out.reserve(rows.rows());
  for (int j = 0; j < rows.rows(); ++j) out.push_back(so3::Rotation::from_matrix(rows.row9(j)));
  return out;
}

// ---------------------------------------------------------------------------
// pose distributions
// ---------------------------------------------------------------------------

void PoseMixture::validate(int joints) const {
  if (modes.empty()) fail("mixture has no modes");
  double wsum = 0.0;
  for (const auto& m : modes) {
    if (static_cast<int>(m.mean.size()) != joints) fail("mode mean has wrong joint count");
    if (!(m.std >= 0.0)) fail("mode std must be >= 0");
    if (!(m.weight >= 0.0)) fail("mode weight must be >= 0");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) fail("mode weights must sum to 1");
}

PoseDraw sample_pose(const PoseMixture& mix, RngState& rng) {
  const double u = rng.uniform01();
  int pick = static_cast<int>(mix.modes.size()) - 1;
  double acc = 0.0;
  for (size_t m = 0; m < mix.modes.size(); ++m) {
    acc += mix.modes[m].weight;
    if (u < acc) {
      pick = static_cast<int>(m);
      break;
    }
  }
  const PoseMixture::Mode& mode = mix.modes[pick];
  PoseDraw draw;
  draw.mode = pick;
  draw.theta.reserve(mode.mean.size());
  for (const auto& mean : mode.mean)
    draw.theta.push_back(so3::compose(mean, so3::sample_tangent_gaussian(mode.std, rng)));
  return draw;
}

PoseMixture point_mass_mixture(int joints, double std_dev) {
  PoseMixture mix;
  PoseMixture::Mode mode;
  mode.std = std_dev;
  mode.weight = 1.0;
  for (int j = 0; j < joints; ++j) {
    so3::Vec3 axis(std::sin(0.9 * j + 1.0), std::cos(1.7 * j + 2.0), std::sin(2.3 * j + 0.5));
    if (axis.norm() < 1e-6) axis = so3::Vec3(1, 0, 0);
    axis.normalize();
    const double angle = 0.25 + 0.35 * std::pow(std::sin(1.3 * j + 0.4), 2);
    mode.mean.push_back(so3::exp_map(angle * axis));
  }
  mix.modes.push_back(std::move(mode));
  return mix;
}

PoseMixture two_mode_elbow_mixture(double angle, double std_dev) {
  PoseMixture mix;
  for (double sign : {+1.0, -1.0}) {
    PoseMixture::Mode mode;
    mode.std = std_dev;
    mode.weight = 0.5;
    mode.mean.assign(24, so3::Rotation::identity());
    for (int elbow : two_mode_ambiguous_joints())
      mode.mean[elbow] = so3::exp_map(so3::Vec3(0, 0, sign * angle));
    mix.modes.push_back(std::move(mode));
  }
  return mix;
}

std::vector<int> two_mode_ambiguous_joints() { return {18, 19}; }

std::vector<int> two_mode_occluded_joints() { return {20, 21, 22, 23}; }

// ---------------------------------------------------------------------------
// occlusion
// ---------------------------------------------------------------------------

OcclusionPolicy OcclusionPolicy::parse(const std::string& text) {
  OcclusionPolicy p;
  if (text == "none") {
    p.kind = Kind::kNone;
    return p;
  }
  if (text.rfind("fixed:", 0) == 0) {
    p.kind = Kind::kFixed;
    std::stringstream ss(text.substr(6));
    std::string tok;
    while (std::getline(ss, tok, ','))
      p.fixed.push_back(std::stoi(tok));
    if (p.fixed.empty()) fail("occlusion fixed: needs at least one joint");
    return p;
  }
  if (text.rfind("random:", 0) == 0) {
    p.kind = Kind::kRandom;
    p.random_count = std::stoi(text.substr(7));
    if (p.random_count < 1) fail("occlusion random: needs a positive count");
    return p;
  }
  fail("unknown occlusion policy '" + text + "'");
  return p;
}

std::vector<uint8_t> OcclusionPolicy::draw_visibility(int joints, RngState& rng) const {
  std::vector<uint8_t> vis(joints, 1);
  switch (kind) {
    case Kind::kNone:
      break;
    case Kind::kFixed:
      for (int j : fixed) {
        if (j < 0 || j >= joints) fail("occlusion joint index out of range");
        vis[j] = 0;
      }
      break;
    case Kind::kRandom: {
      if (random_count > joints) fail("occlusion count exceeds joint count");
      std::vector<int> idx(joints);
      for (int j = 0; j < joints; ++j) idx[j] = j;
      for (int i = 0; i < random_count; ++i) {
        const int k = rng.uniform_int(i, joints - 1);
        std::swap(idx[i], idx[k]);
        vis[idx[i]] = 0;
      }
      break;
    }
  }
  return vis;
}

Observation make_observation(const Record& rec) {
  Observation obs;
  const int J = rec.j2d.rows();
  obs.keypoints = Tensor2(J, 2);
  obs.visible = rec.visible;
  for (int j = 0; j < J; ++j) {
    const bool vis = rec.visible[j] != 0;
    obs.keypoints.at(j, 0) = vis ? rec.j2d.at(j, 0) : Observation::kSentinel;
    obs.keypoints.at(j, 1) = vis ? rec.j2d.at(j, 1) : Observation::kSentinel;
  }
  return obs;
}

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

std::vector<Record> build_records(const PoseMixture& mix, const Skeleton& skel, int n,
                                  const OcclusionPolicy& policy, const GenParams& params,
                                  uint64_t seed) {
  skel.validate();
  mix.validate(skel.joints);
  if (n < 1) fail("build_records: n must be >= 1");
  std::vector<Record> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    RngState rng = RngState::derive(seed, static_cast<uint64_t>(i));
    Record rec;
    rec.theta = sample_pose(mix, rng).theta;
    rec.visible = policy.draw_visibility(skel.joints, rng);
    rec.beta = Eigen::VectorXd(skel.bones());
    for (int k = 0; k < skel.bones(); ++k) rec.beta(k) = params.beta_std * rng.normal();
    rec.pi.s = std::exp(params.cam_log_s_std * rng.normal());
    rec.pi.tx = params.cam_t_std * rng.normal();
    rec.pi.ty = params.cam_t_std * rng.normal();
    rec.j3d = forward_kinematics(rec.theta, rec.beta, skel);
    rec.j2d = project(rec.j3d, rec.pi);
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// file io
// ---------------------------------------------------------------------------

namespace {

void append_array(std::string& s, const double* v, int n) {
  s += '[';
  for (int i = 0; i < n; ++i) {
    if (i) s += ',';
    s += fmt17(v[i]);
  }
  s += ']';
}

void append_int_array(std::string& s, const std::vector<int>& v) {
  s += '[';
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  s += ']';
}

std::string skeleton_json(const Skeleton& skel) {
  std::string s = "{\"parent\":";
  append_int_array(s, skel.parent);
  s += ",\"offsets\":";
  append_array(s, skel.offsets.data(), static_cast<int>(skel.offsets.size()));
  s += '}';
  return s;
}

Skeleton skeleton_from_json(const json& j, int joints) {
  Skeleton skel;
  skel.joints = joints;
  skel.parent = j.at("parent").get<std::vector<int>>();
  const auto off = j.at("offsets").get<std::vector<double>>();
  if (static_cast<int>(off.size()) != joints * 3) fail("skeleton offsets have wrong size");
  skel.offsets = Tensor2(joints, 3);
  std::copy(off.begin(), off.end(), skel.offsets.data());
  skel.validate();
  return skel;
}

std::vector<double> require_doubles(const json& j, const char* key, size_t n, int line) {
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != n)
    throw std::runtime_error("dataset: line " + std::to_string(line) + ": field '" + key +
                             "' has size " + std::to_string(v.size()) + ", want " +
                             std::to_string(n));
  return v;
}

}  // namespace

void write_dataset(const std::string& path, const Skeleton& skel,
                   const std::vector<Record>& records) {
  skel.validate();
  std::string out;
  out.reserve(records.size() * 4096 + 1024);
  out += "{\"format_version\":1,\"J\":" + std::to_string(skel.joints) +
         ",\"B\":" + std::to_string(skel.bones()) + ",\"skeleton_hash\":\"" +
         to_hex(skel.hash()) + "\",\"skeleton\":" + skeleton_json(skel) + "}\n";
  const int J = skel.joints;
  for (const auto& rec : records) {
    Tensor2 theta = rotations_to_rows(rec.theta);
    out += "{\"theta\":";
    append_array(out, theta.data(), J * 9);
    out += ",\"beta\":";
    append_array(out, rec.beta.data(), static_cast<int>(rec.beta.size()));
    out += ",\"pi\":{\"s\":" + fmt17(rec.pi.s) + ",\"tx\":" + fmt17(rec.pi.tx) +
           ",\"ty\":" + fmt17(rec.pi.ty) + "}";
    out += ",\"j3d\":";
    append_array(out, rec.j3d.data(), J * 3);
    out += ",\"j2d\":";
    append_array(out, rec.j2d.data(), J * 2);
    out += ",\"visible\":[";
    for (int j = 0; j < J; ++j) {
      if (j) out += ',';
      out += rec.visible[j] ? '1' : '0';
    }
    out += "]}\n";
  }
  write_file(path, out);
}

Dataset read_dataset(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Dataset ds;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file " + path);
  ++lineno;
  json header;
  try {
    header = json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error("dataset: line 1: bad header: " + std::string(e.what()));
  }
  if (header.at("format_version").get<int>() != 1)
    throw std::runtime_error("dataset: unsupported format version");
  const int J = header.at("J").get<int>();
  const int B = header.at("B").get<int>();
  if (B != J - 1) throw std::runtime_error("dataset: header J/B mismatch");
  ds.skeleton = skeleton_from_json(header.at("skeleton"), J);
  if (to_hex(ds.skeleton.hash()) != header.at("skeleton_hash").get<std::string>())
    throw std::runtime_error("dataset: skeleton hash mismatch in " + path);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": " + e.what());
    }
    Record rec;
    const auto theta = require_doubles(j, "theta", static_cast<size_t>(J) * 9, lineno);
    Tensor2 rows(J, 9);
    std::copy(theta.begin(), theta.end(), rows.data());
    try {
      rec.theta = rows_to_rotations(rows);
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": " + e.what());
    }
    const auto beta = require_doubles(j, "beta", static_cast<size_t>(B), lineno);
    rec.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), B);
    rec.pi.s = j.at("pi").at("s").get<double>();
    rec.pi.tx = j.at("pi").at("tx").get<double>();
    rec.pi.ty = j.at("pi").at("ty").get<double>();
    if (!(rec.pi.s > 0.0))
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": camera s <= 0");
    const auto j3 = require_doubles(j, "j3d", static_cast<size_t>(J) * 3, lineno);
    rec.j3d = Tensor2(J, 3);
    std::copy(j3.begin(), j3.end(), rec.j3d.data());
    const auto j2 = require_doubles(j, "j2d", static_cast<size_t>(J) * 2, lineno);
    rec.j2d = Tensor2(J, 2);
    std::copy(j2.begin(), j2.end(), rec.j2d.data());
    const auto vis = j.at("visible").get<std::vector<int>>();
    if (static_cast<int>(vis.size()) != J)
      throw std::runtime_error("dataset: line " + std::to_string(lineno) + ": visible size");
    rec.visible.assign(vis.begin(), vis.end());
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_skeleton_file(const std::string& path, const Skeleton& skel) {
  skel.validate();
  std::string out = "{\"format_version\":1,\"J\":" + std::to_string(skel.joints) +
                    ",\"hash\":\"" + to_hex(skel.hash()) + "\",\"skeleton\":" +
                    skeleton_json(skel) + "}\n";
  write_file(path, out);
}

Skeleton read_skeleton_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("skeleton file " + path + ": " + e.what());
  }
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("skeleton file: unsupported format version");
  Skeleton skel = skeleton_from_json(j.at("skeleton"), j.at("J").get<int>());
  if (to_hex(skel.hash()) != j.at("hash").get<std::string>())
    throw std::runtime_error("skeleton file: hash mismatch in " + path);
  return skel;
}

}  // namespace rotdiff
