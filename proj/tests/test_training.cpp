#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "gradcheck.hpp"
#include "rotdiff/training.hpp"
#include "rotdiff/util.hpp"

using namespace rotdiff;

namespace {

constexpr uint64_t kSeed = 52417717ULL;

TrainConfig cfg_from_text(const std::string& text) {
  KvConfig kv = KvConfig::from_text(text);
  TrainConfig c = TrainConfig::parse(kv);
  kv.finish();
  c.validate();
  return c;
}

/// 5-joint test tree: root with two chains, non-trivial offsets.
Skeleton tiny_skeleton() {
  Skeleton s;
  s.joints = 5;
  s.parent = {-1, 0, 1, 0, 3};
  s.offsets = Tensor2(5, 3);
  s.offsets.at(1, 0) = 0.2;
  s.offsets.at(2, 0) = 0.3;
  s.offsets.at(2, 1) = -0.1;
  s.offsets.at(3, 1) = -0.25;
  s.offsets.at(4, 2) = 0.15;
  s.offsets.at(4, 0) = -0.05;
  s.validate();
  return s;
}

PoseMixture random_mode_mixture(int joints, double std_dev, uint64_t seed) {
  RngState rng(seed);
  PoseMixture mix;
  PoseMixture::Mode m;
  for (int j = 0; j < joints; ++j) m.mean.push_back(so3::uniform_rotation(rng));
  m.std = std_dev;
  m.weight = 1.0;
  mix.modes.push_back(m);
  mix.validate(joints);
  return mix;
}

Dataset make_dataset(const Skeleton& skel, int n, uint64_t seed,
                     const std::string& occlusion = "none") {
  Dataset ds;
  ds.skeleton = skel;
  PoseMixture mix = random_mode_mixture(skel.joints, 0.15, seed * 31 + 7);
  ds.records = build_records(mix, skel, n, OcclusionPolicy::parse(occlusion), GenParams{}, seed);
  return ds;
}

std::string temp_dir(const std::string& tag) {
  std::string d = std::filesystem::temp_directory_path() /
                  ("rotdiff_train_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

/// Base tiny config with `extra` lines merged in by key (overrides win).
std::string tiny_cfg_text(const std::string& extra = "") {
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"joints", "5"},    {"d", "8"},          {"heads", "2"},      {"enc_blocks", "1"},
      {"dec_blocks", "1"}, {"mlp_hidden", "16"}, {"den_width", "16"}, {"den_blocks", "1"},
      {"den_tdim", "4"},  {"T", "20"},         {"batch_size", "2"}, {"steps", "4"}};
  std::istringstream in(extra);
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::string val = line.substr(eq + 1);
    val.erase(0, val.find_first_not_of(" \t"));
    bool replaced = false;
    for (auto& kv : pairs)
      if (kv.first == key) {
        kv.second = val;
        replaced = true;
      }
    if (!replaced) pairs.emplace_back(key, val);
  }
  std::string text;
  for (const auto& kv : pairs) text += kv.first + " = " + kv.second + "\n";
  return text;
}

}  // namespace

TEST_CASE("config parses values, applies defaults, rejects junk") {
  KvConfig kv = KvConfig::from_text("lr = 0.01\n# comment\n\nT = 25\nvariant = euclidean\n");
  TrainConfig c = TrainConfig::parse(kv);
  kv.finish();
  CHECK(c.lr == 0.01);
  CHECK(c.T == 25);
  CHECK(c.euclidean());
  CHECK(c.den.out == 9);
  CHECK(c.lambda_diff == 1.0);  // default
  CHECK(c.p_uncond == 0.5);    // default
  CHECK(c.den.latent == c.seq.d);

  KvConfig bad = KvConfig::from_text("lr = 0.01\nmystery_knob = 3\n");
  TrainConfig::parse(bad);
  CHECK_THROWS_AS(bad.finish(), std::runtime_error);

  CHECK_THROWS_AS(KvConfig::from_text("lr = 1\nlr = 2\n"), std::runtime_error);
  CHECK_THROWS_AS(KvConfig::from_text("just some words\n"), std::runtime_error);
  KvConfig nan_kv = KvConfig::from_text("lr = fast\n");
  CHECK_THROWS_AS(nan_kv.get_double("lr", 1.0), std::runtime_error);
}

TEST_CASE("config echo round-trips through to_pairs") {
  TrainConfig c = cfg_from_text("lr = 0.004\nsteps = 77\nvariant = euclidean\nd = 32\nheads = 4\n");
  KvConfig kv = KvConfig::from_pairs(c.to_pairs());
  TrainConfig back = TrainConfig::parse(kv);
  kv.finish();  // every stored pair must be a recognized key
  CHECK(back.to_pairs() == c.to_pairs());
  CHECK(back.lr == c.lr);
  CHECK(back.steps == c.steps);
  CHECK(back.seq.d == 32);
}

TEST_CASE("config validation rejects bad settings") {
  CHECK_THROWS_AS(cfg_from_text("lambda_2d = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(cfg_from_text("p_uncond = 1.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(cfg_from_text("mask_ratio_lo = 0.9\nmask_ratio_hi = 0.5\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(cfg_from_text("variant = both\n"), std::invalid_argument);
  CHECK_THROWS_AS(cfg_from_text("d = 30\nheads = 4\n"), std::invalid_argument);
  CHECK_THROWS_AS(cfg_from_text("lr = 0\n"), std::invalid_argument);
}

TEST_CASE("mask draw hits forced extremes and the expected mean") {
  RngState rng(kSeed);
  const int J = 24;
  std::vector<uint8_t> all_masked = sample_mask(J, 1.0, 1.0, rng);
  for (uint8_t v : all_masked) CHECK(v == 0);
  std::vector<uint8_t> all_visible = sample_mask(J, 0.0, 0.0, rng);
  for (uint8_t v : all_visible) CHECK(v == 1);

  const int draws = 10000;
  double mean_masked = 0;
  int distinct_counts = 0;
  std::vector<int> seen_count(J + 1, 0);
  for (int i = 0; i < draws; ++i) {
    std::vector<uint8_t> vis = sample_mask(J, 0.7, 1.0, rng);
    int masked = 0;
    for (uint8_t v : vis) masked += v == 0;
    CHECK(masked >= 17);  // round(0.7 * 24)
    CHECK(masked <= 24);
    mean_masked += masked;
    if (seen_count[masked]++ == 0) ++distinct_counts;
  }
  mean_masked /= draws;
  CHECK(mean_masked == doctest::Approx(0.85 * J).epsilon(0.02));
  CHECK(distinct_counts >= 6);
}

TEST_CASE("loss randomness draw matches the variant") {
  TrainConfig c = cfg_from_text(tiny_cfg_text());
  RngState rng(kSeed + 1);
  LossDraw d = draw_loss_randomness(5, c, rng);
  CHECK(d.visible.size() == 5);
  CHECK(d.t >= 1);
  CHECK(d.t <= c.T);
  CHECK(d.eps.size() == 5);
  CHECK(d.eps9.rows() == 0);

  TrainConfig e = cfg_from_text(tiny_cfg_text("variant = euclidean\n"));
  LossDraw de = draw_loss_randomness(5, e, rng);
  CHECK(de.eps.empty());
  CHECK(de.eps9.rows() == 5);
  CHECK(de.eps9.cols() == 9);
}

TEST_CASE("checkpoint round trip is bit exact and validated") {
  ParamStore ps;
  RngState rng(kSeed + 2);
  ps.create("a.w", 3, 4) = randn(3, 4, 1.0, rng);
  ps.create("b.w", 2, 2) = randn(2, 2, 1.0, rng);
  ps.entry("a.w").m = randn(3, 4, 0.1, rng);
  ps.entry("a.w").v = randn(3, 4, 0.01, rng);

  CheckpointData meta;
  meta.skeleton_hash = 0xfeedbeefcafe1234ULL;
  meta.step = 41;
  meta.rng_state = RngState(9).state_string();
  meta.hyper = {{"lr", "0.001"}, {"steps", "41"}};

  std::string dir = temp_dir("ckpt");
  std::string p1 = dir + "/one.bin", p2 = dir + "/two.bin";
  save_checkpoint(p1, ps, meta);
  save_checkpoint(p2, ps, meta);
  CHECK(read_file(p1) == read_file(p2));

  LoadedCheckpoint lc = load_checkpoint(p1);
  CHECK(lc.meta.skeleton_hash == meta.skeleton_hash);
  CHECK(lc.meta.step == 41);
  CHECK(lc.meta.rng_state == meta.rng_state);
  CHECK(lc.meta.hyper == meta.hyper);
  REQUIRE(lc.ps.count() == 2);
  CHECK(std::memcmp(lc.ps.get("a.w").data(), ps.get("a.w").data(), 12 * sizeof(double)) == 0);
  CHECK(std::memcmp(lc.ps.entry("a.w").v.data(), ps.entry("a.w").v.data(),
                    12 * sizeof(double)) == 0);

  std::string bytes = read_file(p1);
  bytes[0] = 'X';
  write_file(dir + "/bad.bin", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir + "/bad.bin"), std::runtime_error);
  write_file(dir + "/short.bin", read_file(p1).substr(0, 40));
  CHECK_THROWS_AS(load_checkpoint(dir + "/short.bin"), std::runtime_error);
}

TEST_CASE("models rebuild from checkpoint hyperparameters") {
  TrainConfig c = cfg_from_text(tiny_cfg_text());
  Models m = Models::create(c);
  CheckpointData meta;
  meta.step = 7;
  meta.rng_state = RngState(1).state_string();
  meta.hyper = c.to_pairs();
  std::string dir = temp_dir("models");
  save_checkpoint(dir + "/m.bin", m.ps, meta);

  TrainConfig got;
  Models back = Models::from_checkpoint(load_checkpoint(dir + "/m.bin"), &got);
  CHECK(got.to_pairs() == c.to_pairs());
  CHECK(back.ps.count() == m.ps.count());
  for (const auto& name : m.ps.names()) {
    const Tensor2& a = m.ps.get(name);
    const Tensor2& b = back.ps.get(name);
    REQUIRE(a.same_shape(b));
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }

  // architecture drift must be caught
  LoadedCheckpoint tampered = load_checkpoint(dir + "/m.bin");
  tampered.meta.hyper["d"] = "16";
  CHECK_THROWS_AS(Models::from_checkpoint(tampered), std::runtime_error);
}

TEST_CASE("oracle denoiser and true camera zero out the loss") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 3, kSeed + 3, "fixed:2,4");
  const Record& rec = ds.records[1];
  TrainConfig c = cfg_from_text(tiny_cfg_text());
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState rng(kSeed + 4);
  LossDraw draw = draw_loss_randomness(skel.joints, c, rng);

  Tensor2 target(skel.joints, 3);
  for (int j = 0; j < skel.joints; ++j) {
    so3::Vec3 v = so3::log_map(draw.eps[j]);
    for (int k = 0; k < 3; ++k) target.at(j, k) = v(k);
  }
  EpsHatFn oracle = [&target](Graph& g, Var, Var, int) { return g.constant(target); };

  Graph g;
  Var z = g.constant(Tensor2(skel.joints, c.seq.d));
  Tensor2 s_val(1, 1), t_val(1, 2), b_val(1, skel.bones());
  s_val.at(0, 0) = rec.pi.s;
  t_val.at(0, 0) = rec.pi.tx;
  t_val.at(0, 1) = rec.pi.ty;
  for (int k = 0; k < skel.bones(); ++k) b_val.at(0, k) = rec.beta(k);
  LossParts parts = build_sample_loss_core(g, z, g.constant(s_val), g.constant(t_val),
                                           g.constant(b_val), rec, skel, sched, draw,
                                           /*conditional=*/true, c, oracle);
  CHECK(g.value(parts.l_diff).at(0, 0) == 0.0);
  CHECK(g.value(parts.l_3d).at(0, 0) < 1e-6);
  CHECK(g.value(parts.l_2d).at(0, 0) < 1e-6);
  CHECK(g.value(parts.total).at(0, 0) < 3e-6);
}

TEST_CASE("unconditional loss carries an exactly zero 2D term") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 2, kSeed + 5);
  TrainConfig c = cfg_from_text(tiny_cfg_text("lambda_2d = 123.0\n"));
  Models m = Models::create(c);
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState rng(kSeed + 6);
  LossDraw draw = draw_loss_randomness(skel.joints, c, rng);

  Graph g;
  LossParts parts = build_sample_loss(g, m.seq, m.den, m.ps, ds.records[0], skel, sched, draw,
                                      /*conditional=*/false, c);
  CHECK(g.value(parts.l_2d).at(0, 0) == 0.0);
  const double total = g.value(parts.total).at(0, 0);
  const double expect = c.lambda_diff * g.value(parts.l_diff).at(0, 0) +
                        c.lambda_3d * g.value(parts.l_3d).at(0, 0);
  CHECK(total == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("conditional total is the exact lambda-weighted sum") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 2, kSeed + 7, "fixed:4");
  TrainConfig c = cfg_from_text(tiny_cfg_text("lambda_diff = 0.7\nlambda_3d = 2.0\nlambda_2d = 0.3\n"));
  Models m = Models::create(c);
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState rng(kSeed + 8);
  LossDraw draw = draw_loss_randomness(skel.joints, c, rng);

  Graph g;
  LossParts parts = build_sample_loss(g, m.seq, m.den, m.ps, ds.records[1], skel, sched, draw,
                                      /*conditional=*/true, c);
  const double total = g.value(parts.total).at(0, 0);
  const double expect = 0.7 * g.value(parts.l_diff).at(0, 0) +
                        2.0 * g.value(parts.l_3d).at(0, 0) +
                        0.3 * g.value(parts.l_2d).at(0, 0);
  CHECK(total == doctest::Approx(expect).epsilon(1e-14));
  CHECK(g.value(parts.l_diff).at(0, 0) > 0.0);
  CHECK(g.value(parts.l_3d).at(0, 0) > 0.0);
  CHECK(g.value(parts.l_2d).at(0, 0) > 0.0);
}

TEST_CASE("full loss gradient matches finite differences (manifold variant)") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 2, kSeed + 9, "fixed:2");
  TrainConfig c = cfg_from_text(tiny_cfg_text());
  Models m = Models::create(c);
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState rng(kSeed + 10);
  // fill the zero-init heads so their gradients are exercised
  m.ps.get("den.head.w") = randn(c.den.width, c.den.out, 0.2, rng);
  m.ps.get("seq.reg2.w") = randn(c.seq.d, c.seq.reg_out(), 0.2, rng);
  LossDraw draw = draw_loss_randomness(skel.joints, c, rng);

  auto builder = [&](Graph& g, ParamStore& ps) {
    return build_sample_loss(g, m.seq, m.den, ps, ds.records[0], skel, sched, draw,
                             /*conditional=*/true, c)
        .total;
  };
  gradcheck::Result r = gradcheck::check_store(m.ps, builder);
  CHECK(r.checked > 2000);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("full loss gradient matches finite differences (flat variant)") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 2, kSeed + 11, "fixed:3");
  TrainConfig c = cfg_from_text(tiny_cfg_text("variant = euclidean\n"));
  Models m = Models::create(c);
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState rng(kSeed + 12);
  m.ps.get("den.head.w") = randn(c.den.width, c.den.out, 0.2, rng);
  m.ps.get("seq.reg2.w") = randn(c.seq.d, c.seq.reg_out(), 0.2, rng);
  LossDraw draw = draw_loss_randomness(skel.joints, c, rng);

  auto builder = [&](Graph& g, ParamStore& ps) {
    return build_sample_loss(g, m.seq, m.den, ps, ds.records[1], skel, sched, draw,
                             /*conditional=*/true, c)
        .total;
  };
  gradcheck::Result r = gradcheck::check_store(m.ps, builder);
  CHECK(r.checked > 2000);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("trainer validates corpora against config and each other") {
  Skeleton skel = tiny_skeleton();
  Dataset ds = make_dataset(skel, 4, kSeed + 13);
  TrainConfig c = cfg_from_text(tiny_cfg_text("p_uncond = 0.5\n"));

  // missing unconditional corpus while p_uncond > 0
  CHECK_THROWS_AS(Trainer(c, ds, Dataset{}), std::invalid_argument);

  // joint-count mismatch
  TrainConfig c24 = cfg_from_text(tiny_cfg_text("p_uncond = 1\njoints = 24\n"));
  // reuse the 5-joint dataset: must throw
  CHECK_THROWS_AS(Trainer(c24, Dataset{}, ds), std::invalid_argument);

  // different skeletons across corpora
  Skeleton other = tiny_skeleton();
  other.offsets.at(1, 0) = 0.33;
  Dataset ds2 = make_dataset(other, 4, kSeed + 14);
  CHECK_THROWS_AS(Trainer(c, ds2, ds), std::invalid_argument);
}

TEST_CASE("two seeded runs produce identical curves and checkpoints") {
  Skeleton skel = tiny_skeleton();
  Dataset cond = make_dataset(skel, 6, kSeed + 15, "fixed:4");
  Dataset uncond = make_dataset(skel, 6, kSeed + 16);
  TrainConfig c = cfg_from_text(tiny_cfg_text("steps = 6\nseed = 99\n"));

  std::string d1 = temp_dir("det1"), d2 = temp_dir("det2");
  Trainer t1(c, cond, uncond);
  Trainer t2(c, cond, uncond);
  std::string f1 = t1.run(d1);
  std::string f2 = t2.run(d2);
  CHECK(read_file(d1 + "/metrics.csv") == read_file(d2 + "/metrics.csv"));
  CHECK(read_file(f1) == read_file(f2));
  CHECK(t1.curve().size() == 6);
  for (const StepStats& s : t1.curve()) {
    CHECK(s.l_diff > 0.0);
    CHECK(s.total >= s.l_diff * c.lambda_diff - 1e-12);
  }
}

TEST_CASE("resumed training is bit-identical to a straight run") {
  Skeleton skel = tiny_skeleton();
  Dataset cond = make_dataset(skel, 5, kSeed + 17, "fixed:1");
  Dataset uncond = make_dataset(skel, 5, kSeed + 18);
  TrainConfig full = cfg_from_text(tiny_cfg_text("steps = 8\nseed = 5\nckpt_every = 4\n"));
  TrainConfig half = cfg_from_text(tiny_cfg_text("steps = 4\nseed = 5\nckpt_every = 4\n"));

  std::string da = temp_dir("straight"), db = temp_dir("half"), dc = temp_dir("resumed");
  Trainer straight(full, cond, uncond);
  std::string fa = straight.run(da);

  Trainer first(half, cond, uncond);
  std::string fb = first.run(db);

  Trainer second(full, cond, uncond);
  second.resume_from(fb);
  std::string fc = second.run(dc);

  CHECK(read_file(fa) == read_file(fc));

  // resumed metrics hold exactly the continuation rows
  std::string full_csv = read_file(da + "/metrics.csv");
  std::string tail_csv = read_file(dc + "/metrics.csv");
  size_t header_end = full_csv.find('\n') + 1;
  size_t row5 = full_csv.find("\n5,", header_end);
  REQUIRE(row5 != std::string::npos);
  CHECK(tail_csv.substr(tail_csv.find('\n') + 1) == full_csv.substr(row5 + 1));

  // mismatched hyperparameters refuse to resume
  TrainConfig other = cfg_from_text(tiny_cfg_text("steps = 8\nseed = 5\nckpt_every = 4\nlr = 0.01\n"));
  Trainer wrong(other, cond, uncond);
  CHECK_THROWS_AS(wrong.resume_from(fb), std::runtime_error);
}

TEST_CASE("smoke run on a point mass converges near the information floor") {
  // The mean loss over t ~ Uniform[1,T] cannot drop arbitrarily: once
  // sqrt(alpha_t) exceeds ~1 the wrap folds distinct tangent draws onto the
  // same x_t, so even the Bayes-optimal predictor keeps a residual there
  // (Monte-Carlo floor 1.139 averaged over t, vs zero-predictor baseline
  // 2.922 -> the drop ratio is capped near 2.6x). The strong inversion check
  // therefore lives at a fixed t in the fully recoverable band, where 10x
  // under the baseline is attainable with margin.
  Skeleton skel = tiny_skeleton();
  Dataset uncond;
  uncond.skeleton = skel;
  uncond.records = build_records(point_mass_mixture(skel.joints, 0.0), skel, 16,
                                 OcclusionPolicy::parse("none"), GenParams{}, 555);
  TrainConfig c = cfg_from_text(tiny_cfg_text(
      "d = 16\nmlp_hidden = 32\nden_width = 48\nden_blocks = 2\nden_tdim = 16\n"
      "T = 100\nbatch_size = 4\nsteps = 2000\nlr = 0.001\np_uncond = 1\nseed = 7\n"));

  std::string dir = temp_dir("smoke");
  Trainer t(c, Dataset{}, uncond);
  t.run(dir);
  const auto& curve = t.curve();
  REQUIRE(curve.size() == 2000);
  for (const StepStats& s : curve) CHECK(s.l_2d == 0.0);  // p_uncond = 1

  double head = 0, tail = 0;
  for (int i = 0; i < 50; ++i) head += curve[i].l_diff / 50;
  const int tail_n = 200;
  for (size_t i = curve.size() - tail_n; i < curve.size(); ++i)
    tail += curve[i].l_diff / tail_n;
  CHECK(head / tail > 1.5);   // measured 2.07 at this seed; cap is ~2.6
  CHECK(tail < 1.139 * 1.5);  // within 50% of the Bayes floor

  // Fixed-t inversion probe on fresh forward draws at t = T/4 (floor ~0
  // there): residual must undercut the zero-predictor baseline 10x.
  Models& m = t.models();
  SeqInputs in;
  in.theta_rows = Tensor2(skel.joints, 9);
  in.visible.assign(skel.joints, 0);
  LatentOutput lat = eval_latents(m.seq, m.ps, in);
  Schedule sched = Schedule::quadratic(c.T, c.alpha_max);
  RngState prng(kSeed + 19);
  const Record& rec = uncond.records[0];
  const int probe_t = c.T / 4;
  double err = 0;
  int n = 0;
  for (int rep = 0; rep < 64; ++rep) {
    Tensor2 xt(skel.joints, 9), target(skel.joints, 3);
    for (int j = 0; j < skel.joints; ++j) {
      so3::Rotation eps = so3::sample_tangent_gaussian(1.0, prng);
      xt.set_row9(j, forward_noise(rec.theta[j], probe_t, eps, sched).m);
      so3::Vec3 v = so3::log_map(eps);
      for (int k = 0; k < 3; ++k) target.at(j, k) = v(k);
    }
    Tensor2 eh = m.den.forward_plain(m.ps, xt, lat.z, probe_t);
    for (int j = 0; j < skel.joints; ++j)
      for (int k = 0; k < 3; ++k) {
        double d = eh.at(j, k) - target.at(j, k);
        err += d * d;
      }
    n += skel.joints;
  }
  CHECK(err / n < 2.922 / 10.0);  // measured 0.057 at this seed
}
