#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "reorient/kinematics.hpp"

using namespace reorient;
using namespace reorient::cloud;
using reorient::so3::UnitQuaternion;

TEST_SUITE_BEGIN("kinematics");

namespace {

Link simple_link(int parent, const Vec3& translation, const Vec3& axis,
                 const UnitQuaternion& rot = UnitQuaternion::identity()) {
  Link link;
  link.parent = parent;
  link.translation_to_parent = translation;
  link.rotation_to_parent = rot;
  link.axis = axis.normalized();
  link.lower = -M_PI;
  link.upper = M_PI;
  link.shape = make_box_mesh({0.02, 0.02, 0.02});
  return link;
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& R, const Vec3& t) {
  Eigen::Matrix4d H = Eigen::Matrix4d::Identity();
  H.topLeftCorner<3, 3>() = R;
  H.topRightCorner<3, 1>() = t;
  return H;
}

}  // namespace

TEST_CASE("fk with zero angles composes fixed transforms") {
  const auto rot = UnitQuaternion::from_axis_angle({0, 1, 0}, 0.3);
  KinematicChain chain({simple_link(-1, {0.1, 0, 0}, {0, 0, 1}, rot),
                        simple_link(0, {0.2, 0, 0}, {0, 0, 1})});
  const auto fk = forward_kinematics(chain, {0.0, 0.0});
  CHECK((fk.poses[0].position - Vec3(0.1, 0, 0)).norm() <= 1e-12);
  CHECK(fk.poses[0].rotation.isApprox(rot.to_matrix(), 1e-12));
  const Vec3 expected1 = Vec3(0.1, 0, 0) + rot.to_matrix() * Vec3(0.2, 0, 0);
  CHECK((fk.poses[1].position - expected1).norm() <= 1e-12);
}

TEST_CASE("single z joint quarter turn maps x to y") {
  KinematicChain chain({simple_link(-1, Vec3::Zero(), {0, 0, 1})});
  const auto fk = forward_kinematics(chain, {M_PI_2});
  const Vec3 mapped = fk.poses[0].rotation * Vec3(1, 0, 0);
  CHECK((mapped - Vec3(0, 1, 0)).norm() <= 1e-12);
}

TEST_CASE("two-link chain matches the homogeneous product oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r0 = so3::sample_uniform_rotation(rng);
    const auto r1 = so3::sample_uniform_rotation(rng);
    const Vec3 t0(rng.normal(), rng.normal(), rng.normal());
    const Vec3 t1(rng.normal(), rng.normal(), rng.normal());
    const Vec3 axis0 = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 axis1 = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    KinematicChain chain(
        {simple_link(-1, t0, axis0, r0), simple_link(0, t1, axis1, r1)});
    const double q0 = rng.uniform(-3, 3), q1 = rng.uniform(-3, 3);
    const auto fk = forward_kinematics(chain, {q0, q1});

    const Eigen::Matrix4d H0 =
        homogeneous(r0.to_matrix(), t0) *
        homogeneous(UnitQuaternion::from_axis_angle(axis0, q0).to_matrix(),
                    Vec3::Zero());
    const Eigen::Matrix4d H1 =
        H0 * homogeneous(r1.to_matrix(), t1) *
        homogeneous(UnitQuaternion::from_axis_angle(axis1, q1).to_matrix(),
                    Vec3::Zero());
    CHECK(fk.poses[1].rotation.isApprox(H1.topLeftCorner<3, 3>(), 1e-9));
    CHECK((fk.poses[1].position - H1.topRightCorner<3, 1>()).norm() <= 1e-9);
  }
}

TEST_CASE("chain prefix poses unchanged by appending links") {
  KinematicChain two({simple_link(-1, {0.1, 0, 0}, {0, 0, 1}),
                      simple_link(0, {0.2, 0, 0}, {0, 1, 0})});
  KinematicChain three({simple_link(-1, {0.1, 0, 0}, {0, 0, 1}),
                        simple_link(0, {0.2, 0, 0}, {0, 1, 0}),
                        simple_link(1, {0.05, 0, 0}, {1, 0, 0})});
  const auto fk2 = forward_kinematics(two, {0.3, -0.7});
  const auto fk3 = forward_kinematics(three, {0.3, -0.7, 1.1});
  for (int i = 0; i < 2; ++i) {
    CHECK(fk2.poses[i].rotation.isApprox(fk3.poses[i].rotation, 1e-12));
    CHECK((fk2.poses[i].position - fk3.poses[i].position).norm() <= 1e-12);
  }
}

TEST_CASE("fk validates joint count and clamps out-of-limit values") {
  KinematicChain chain({simple_link(-1, Vec3::Zero(), {0, 0, 1})});
  CHECK_THROWS_AS(forward_kinematics(chain, {0.1, 0.2}), std::invalid_argument);
  const auto fk = forward_kinematics(chain, {10.0});
  CHECK(fk.clamped_joints == 1);
  const auto at_limit = forward_kinematics(chain, {M_PI});
  CHECK(fk.poses[0].rotation.isApprox(at_limit.poses[0].rotation, 1e-12));
}

TEST_CASE("compose_scene_cloud is the concatenation at identity poses") {
  auto chain = make_hand_chain(3, 40);
  ObjectInstance object;
  Rng rng(12);
  object.local_cloud = sample_mesh_points(make_box_mesh({0.1, 0.1, 0.1}), 60, rng);
  object.orientation = UnitQuaternion::identity();
  object.position = Vec3::Zero();

  const std::vector<double> q(chain.joint_count(), 0.0);
  const auto scene =
      compose_scene_cloud(chain, q, object, UnitQuaternion::identity());
  std::size_t expected = 2 * object.local_cloud.size();
  for (const auto& link : chain.links()) expected += link.local_cloud.size();
  CHECK(scene.size() == expected);

  // Object points pass through untouched at identity pose.
  const std::size_t obj_begin = expected - 2 * object.local_cloud.size();
  for (std::size_t i = 0; i < object.local_cloud.size(); ++i) {
    CHECK((scene.points[obj_begin + i] - object.local_cloud.points[i]).norm() <=
          1e-12);
  }
  // Goal cloud sits at the display offset.
  const std::size_t goal_begin = expected - object.local_cloud.size();
  for (std::size_t i = 0; i < object.local_cloud.size(); ++i) {
    CHECK((scene.points[goal_begin + i] -
           (object.local_cloud.points[i] + Vec3(0, 0, 0.3)))
              .norm() <= 1e-12);
  }
}

TEST_CASE("compose_scene_cloud applies the object pose per point") {
  auto chain = make_hand_chain(3, 10);
  ObjectInstance object;
  Rng rng(13);
  object.local_cloud = sample_mesh_points(make_box_mesh({0.1, 0.1, 0.1}), 50, rng);
  object.orientation = UnitQuaternion::from_axis_angle({0, 0, 1}, M_PI_2);
  object.position = Vec3(0.01, -0.02, 0.07);

  const std::vector<double> q(chain.joint_count(), 0.1);
  const auto scene =
      compose_scene_cloud(chain, q, object, UnitQuaternion::identity());
  const std::size_t obj_begin = scene.size() - 2 * object.local_cloud.size();
  const Eigen::Matrix3d R = object.orientation.to_matrix();
  for (std::size_t i = 0; i < object.local_cloud.size(); ++i) {
    const Vec3 expected = R * object.local_cloud.points[i] + object.position;
    CHECK((scene.points[obj_begin + i] - expected).norm() <= 1e-12);
  }
}

TEST_CASE("compose_scene_cloud commutes with a common rigid motion") {
  // Transforming every input pose by (R, t) transforms each output point the
  // same way. The chain is rebased by moving each root link.
  auto chain = make_hand_chain(2, 15);
  ObjectInstance object;
  Rng rng(14);
  object.local_cloud = sample_mesh_points(make_box_mesh({0.08, 0.06, 0.04}), 30, rng);
  object.orientation = so3::sample_uniform_rotation(rng);
  object.position = Vec3(0.02, 0.01, 0.06);
  std::vector<double> q(chain.joint_count());
  for (auto& v : q) v = rng.uniform(-0.5, 0.5);

  const auto motion_q = so3::sample_uniform_rotation(rng);
  const Eigen::Matrix3d R = motion_q.to_matrix();
  const Vec3 t(0.3, -0.2, 0.5);

  auto links = chain.links();
  for (auto& link : links) {
    if (link.parent < 0) {
      link.translation_to_parent = R * link.translation_to_parent + t;
      link.rotation_to_parent = motion_q * link.rotation_to_parent;
    }
  }
  KinematicChain moved_chain(links);
  ObjectInstance moved_object = object;
  moved_object.orientation = motion_q * object.orientation;
  moved_object.position = R * object.position + t;

  GoalDisplay goal_at_origin{Vec3::Zero()};
  GoalDisplay moved_goal{t};
  const auto goal = so3::sample_uniform_rotation(rng);

  const auto base =
      compose_scene_cloud(chain, q, object, goal, goal_at_origin);
  const auto moved = compose_scene_cloud(moved_chain, q, moved_object,
                                         motion_q * goal, moved_goal);
  REQUIRE(base.size() == moved.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK((moved.points[i] - (R * base.points[i] + t)).norm() <= 1e-9);
  }
}

TEST_CASE("chain json round trip preserves structure") {
  auto chain = make_hand_chain(3, 25);
  chain.save_json("chain_test.json");
  const auto loaded = KinematicChain::load_json("chain_test.json");
  REQUIRE(loaded.joint_count() == chain.joint_count());
  std::vector<double> q(chain.joint_count());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = 0.1 * double(i % 5) - 0.2;
  const auto fk_a = forward_kinematics(chain, q);
  const auto fk_b = forward_kinematics(loaded, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK((fk_a.poses[i].position - fk_b.poses[i].position).norm() <= 1e-9);
    CHECK(fk_a.poses[i].rotation.isApprox(fk_b.poses[i].rotation, 1e-9));
    CHECK(loaded.links()[i].local_cloud.size() ==
          chain.links()[i].local_cloud.size());
  }
  std::remove("chain_test.json");
}

TEST_CASE("chain validation rejects malformed structures") {
  auto bad_parent = simple_link(0, Vec3::Zero(), {0, 0, 1});
  CHECK_THROWS_AS(KinematicChain({bad_parent}), std::invalid_argument);
  auto bad_axis = simple_link(-1, Vec3::Zero(), {0, 0, 1});
  bad_axis.axis = Vec3(0, 0, 2);
  CHECK_THROWS_AS(KinematicChain({bad_axis}), std::invalid_argument);
  auto bad_limits = simple_link(-1, Vec3::Zero(), {0, 0, 1});
  bad_limits.lower = 1.0;
  bad_limits.upper = -1.0;
  CHECK_THROWS_AS(KinematicChain({bad_limits}), std::invalid_argument);
}

TEST_SUITE_END();
