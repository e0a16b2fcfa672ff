#include <doctest.h>

#include <cstdio>

#include "reorient/policy.hpp"

using namespace reorient;
using namespace reorient::policy;

TEST_SUITE_BEGIN("policy");

TEST_CASE("action smoother follows the published update") {
  ActionSmoother smoother(0.8);
  smoother.reset(1);
  Eigen::VectorXd a(1);
  a << 1.0;
  CHECK(smoother.smooth(a)[0] == doctest::Approx(0.8));

  // Constant input converges geometrically: |abar_t - c| = 0.2^t * |c|.
  ActionSmoother s2(0.8);
  s2.reset(1);
  Eigen::VectorXd c(1);
  c << 2.0;
  double expected_gap = 2.0;
  for (int t = 1; t <= 8; ++t) {
    const double out = s2.smooth(c)[0];
    expected_gap *= 0.2;
    CHECK(std::abs(out - 2.0) == doctest::Approx(expected_gap).epsilon(1e-12));
  }

  // alpha = 1 passes the action through.
  ActionSmoother pass(1.0);
  pass.reset(1);
  CHECK(pass.smooth(a)[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(ActionSmoother(1.5), std::invalid_argument);
}

TEST_CASE("action smoother is linear from a zero state") {
  Rng rng(2001);
  Eigen::VectorXd a(3), b(3);
  for (int i = 0; i < 3; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  ActionSmoother sa(0.8), sb(0.8), sab(0.8);
  sa.reset(3);
  sb.reset(3);
  sab.reset(3);
  const Eigen::VectorXd sum = sab.smooth(a + b);
  const Eigen::VectorXd parts = sa.smooth(a) + sb.smooth(b);
  CHECK((sum - parts).norm() <= 1e-12);
}

TEST_CASE("target_joints adds and clamps") {
  Eigen::VectorXd q(2), abar(2), lo(2), hi(2);
  q << 0.1, 0.5;
  abar << 0.05, 0.2;
  lo << -1.0, -1.0;
  hi << 1.0, 0.6;
  const auto target = target_joints(q, abar, lo, hi);
  CHECK(target[0] == doctest::Approx(0.15));
  CHECK(target[1] == doctest::Approx(0.6));  // clamped at the upper limit
  const auto idle = target_joints(q, Eigen::VectorXd::Zero(2), lo, hi);
  CHECK((idle - q).norm() == 0.0);
  CHECK_THROWS_AS(target_joints(q, Eigen::VectorXd::Zero(3), lo, hi),
                  std::invalid_argument);
}

TEST_CASE("teacher outputs zero mean with a zero final layer") {
  TeacherConfig config;
  config.observation = 97;
  config.action = 12;
  config.hidden = {32, 16};
  Rng rng(2002);
  TeacherPolicy teacher(config, rng);
  teacher.actor().layer(teacher.actor().layer_count() - 1).zero_init();
  nn::MatX<float> obs = nn::MatX<float>::Random(97, 3);
  nn::MatX<float> prev = nn::MatX<float>::Random(12, 3);
  const auto mean = teacher.actor_forward(teacher.stack_input(obs, prev));
  CHECK(mean.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(mean.rows() == 12);  // 3G with G=4
}

TEST_CASE("teacher rejects mismatched input sizes") {
  TeacherConfig config;
  config.observation = 78;  // G=3
  config.action = 9;
  config.hidden = {16};
  Rng rng(2003);
  TeacherPolicy teacher(config, rng);
  nn::MatX<float> obs = nn::MatX<float>::Random(78, 2);
  nn::MatX<float> bad_prev = nn::MatX<float>::Random(12, 2);
  CHECK_THROWS_AS(teacher.stack_input(obs, bad_prev), std::invalid_argument);
}

TEST_CASE("teacher checkpoint round trip is bitwise identical") {
  TeacherConfig config;
  config.observation = 97;
  config.action = 12;
  config.hidden = {24, 16};
  Rng rng(2004);
  TeacherPolicy teacher(config, rng);
  nn::MatX<float> obs = nn::MatX<float>::Random(97, 5);
  nn::MatX<float> prev = nn::MatX<float>::Random(12, 5);
  const auto x = teacher.stack_input(obs, prev);
  const auto mean_before = teacher.actor_forward(x);
  const auto value_before = teacher.critic_forward(x);

  save_teacher(teacher, "teacher_test.ckpt");
  auto loaded = load_teacher("teacher_test.ckpt");
  const auto mean_after = loaded.actor_forward(x);
  const auto value_after = loaded.critic_forward(x);
  CHECK(mean_after == mean_before);
  CHECK(value_after == value_before);
  CHECK((loaded.log_std() - teacher.log_std()).cwiseAbs().maxCoeff() == 0.0f);
  std::remove("teacher_test.ckpt");
}

namespace {

StudentConfig small_student_config() {
  StudentConfig config;
  config.bounds.origin = Eigen::Vector3d(-0.08, -0.08, -0.08);
  config.bounds.resolution = 0.01;
  config.bounds.dims[0] = config.bounds.dims[1] = config.bounds.dims[2] = 16;
  config.conv_channels = {2, 4};
  config.feature = 16;
  config.hidden = 12;
  config.action = 12;
  return config;
}

}  // namespace

TEST_CASE("student step is deterministic and nonnegative on distance") {
  Rng rng(2005);
  StudentPolicy student(small_student_config(), rng);
  nn::MatX<float> occ = nn::MatX<float>::Zero(student.config().bounds.volume(), 2);
  Rng occ_rng(2006);
  for (int i = 0; i < 200; ++i) {
    occ(Eigen::Index(occ_rng.uniform_index(std::uint64_t(occ.rows()))), 0) = 1.0f;
    occ(Eigen::Index(occ_rng.uniform_index(std::uint64_t(occ.rows()))), 1) = 1.0f;
  }
  nn::MatX<float> prev = nn::MatX<float>::Zero(12, 2);
  const auto h0 = student.initial_hidden(2);
  const auto out1 = student.step(occ, prev, h0);
  const auto out2 = student.step(occ, prev, h0);
  CHECK(out1.action == out2.action);
  CHECK(out1.hidden == out2.hidden);
  for (Eigen::Index i = 0; i < out1.distance.size(); ++i) {
    CHECK(out1.distance[i] >= 0.0f);
  }
}

TEST_CASE("student distance stays nonnegative for random parameters") {
  Rng rng(2007);
  for (int trial = 0; trial < 5; ++trial) {
    StudentPolicy student(small_student_config(), rng);
    nn::MatX<float> occ =
        (nn::MatX<float>::Random(student.config().bounds.volume(), 3).array() > 0.8f)
            .cast<float>();
    nn::MatX<float> prev = nn::MatX<float>::Random(12, 3);
    const auto out = student.step(occ, prev, student.initial_hidden(3));
    for (Eigen::Index i = 0; i < out.distance.size(); ++i) {
      CHECK(out.distance[i] >= 0.0f);
    }
  }
}

TEST_CASE("voxel features are a function of the occupied cells") {
  Rng rng(2008);
  auto config = small_student_config();
  VoxelEncoder encoder(config.bounds, config.conv_channels, config.feature, rng);

  // Two clouds, same voxel cells in different order -> identical features.
  cloud::PointSet a, b;
  Rng prng(2009);
  for (int i = 0; i < 300; ++i) {
    a.points.emplace_back(prng.uniform(-0.07, 0.07), prng.uniform(-0.07, 0.07),
                          prng.uniform(-0.07, 0.07));
  }
  b.points.assign(a.points.rbegin(), a.points.rend());
  const auto grid_a = cloud::voxelize(a, config.bounds.resolution);
  const auto grid_b = cloud::voxelize(b, config.bounds.resolution);
  const auto fa = encode_voxel_features(encoder, grid_a);
  const auto fb = encode_voxel_features(encoder, grid_b);
  CHECK(fa == fb);

  // Shifting the scene by one voxel changes the encoding.
  cloud::PointSet shifted = a;
  for (auto& p : shifted.points) p.x() += config.bounds.resolution;
  const auto fs = encode_voxel_features(
      encoder, cloud::voxelize(shifted, config.bounds.resolution));
  CHECK((fs - fa).cwiseAbs().maxCoeff() > 0.0f);

  // Out-of-bounds cells are clipped and counted.
  cloud::PointSet outside = a;
  outside.points.emplace_back(10.0, 10.0, 10.0);
  int clipped = 0;
  encode_voxel_features(
      encoder, cloud::voxelize(outside, config.bounds.resolution), &clipped);
  CHECK(clipped == 1);

  // Empty grid is a contract violation.
  cloud::VoxelGrid empty;
  CHECK_THROWS_AS(encode_voxel_features(encoder, empty), std::invalid_argument);
}

TEST_CASE("student checkpoint round trip is bitwise identical") {
  Rng rng(2010);
  auto config = small_student_config();
  config.separate_goal_encoder = true;
  config.goal_bounds = config.bounds;
  StudentPolicy student(config, rng);
  save_student(student, "student_test.ckpt", {{"stage", 1}});
  auto loaded = load_student("student_test.ckpt");
  CHECK(loaded.config().separate_goal_encoder);

  const auto ck = nn::Checkpoint::load("student_test.ckpt");
  CHECK(ck.meta.at("stage") == 1);
  const auto occ = ck.get_matrix("__probe_in");
  const auto goal_occ = ck.get_matrix("__probe_goal_in");
  nn::MatX<float> prev = nn::MatX<float>::Zero(12, 2);
  const auto out = loaded.step(occ, prev, loaded.initial_hidden(2), goal_occ);
  CHECK(out.action == ck.get_matrix("__probe_action"));
  CHECK(out.hidden == ck.get_matrix("__probe_hidden"));
  std::remove("student_test.ckpt");
}

TEST_SUITE_END();
