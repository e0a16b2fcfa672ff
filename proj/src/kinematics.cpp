// SPDX-License-Identifier: Apache-2.0
#include "reorient/kinematics.hpp"

#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

namespace reorient::cloud {

KinematicChain::KinematicChain(std::vector<Link> links)
    : links_(std::move(links)) {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const Link& link = links_[i];
    if (link.parent >= int(i)) {
      throw std::invalid_argument(
          "KinematicChain: links must be ordered after their parents");
    }
    if (link.parent < -1) {
      throw std::invalid_argument("KinematicChain: invalid parent index");
    }
    if (std::abs(link.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("KinematicChain: joint axis must be unit");
    }
    if (link.lower >= link.upper) {
      throw std::invalid_argument(
          "KinematicChain: lower limit must be below upper limit");
    }
  }
}

std::vector<double> KinematicChain::home_pose() const {
  std::vector<double> q(links_.size());
  for (std::size_t i = 0; i < links_.size(); ++i) {
    q[i] = 0.5 * (links_[i].lower + links_[i].upper);
  }
  return q;
}

std::vector<double> KinematicChain::clamp_to_limits(
    const std::vector<double>& q) const {
  std::vector<double> out = q;
  for (std::size_t i = 0; i < links_.size() && i < out.size(); ++i) {
    out[i] = std::clamp(out[i], links_[i].lower, links_[i].upper);
  }
  return out;
}

FkResult forward_kinematics(const KinematicChain& chain,
                            const std::vector<double>& q) {
  const auto& links = chain.links();
  if (q.size() != links.size()) {
    throw std::invalid_argument("forward_kinematics: joint count mismatch");
  }
  FkResult result;
  result.poses.resize(links.size());
  static bool warned = false;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const Link& link = links[i];
    double angle = q[i];
    if (angle < link.lower || angle > link.upper) {
      angle = std::clamp(angle, link.lower, link.upper);
      ++result.clamped_joints;
      if (!warned) {
        std::cerr << "forward_kinematics: joint value outside limits, clamping"
                  << std::endl;
        warned = true;
      }
    }
    const Eigen::Matrix3d joint_rot =
        so3::UnitQuaternion::from_axis_angle(link.axis, angle).to_matrix();
    const Eigen::Matrix3d fixed_rot = link.rotation_to_parent.to_matrix();
    LinkPose pose;
    if (link.parent < 0) {
      pose.rotation = fixed_rot * joint_rot;
      pose.position = link.translation_to_parent;
    } else {
      const LinkPose& parent = result.poses[link.parent];
      pose.rotation = parent.rotation * fixed_rot * joint_rot;
      pose.position =
          parent.rotation * link.translation_to_parent + parent.position;
    }
    result.poses[i] = pose;
  }
  return result;
}

PointSet compose_scene_cloud(const KinematicChain& chain,
                             const std::vector<double>& q,
                             const ObjectInstance& object,
                             const so3::UnitQuaternion& goal_orientation,
                             const GoalDisplay& goal) {
  const FkResult fk = forward_kinematics(chain, q);
  PointSet scene;
  std::size_t total = object.local_cloud.size() * 2;
  for (const auto& link : chain.links()) total += link.local_cloud.size();
  scene.points.reserve(total);

  for (std::size_t i = 0; i < chain.links().size(); ++i) {
    const auto& link = chain.links()[i];
    const auto& pose = fk.poses[i];
    for (const auto& p : link.local_cloud.points) {
      scene.points.push_back(pose.rotation * p + pose.position);
    }
  }
  const Eigen::Matrix3d obj_rot = object.orientation.to_matrix();
  for (const auto& p : object.local_cloud.points) {
    scene.points.push_back(obj_rot * p + object.position);
  }
  const Eigen::Matrix3d goal_rot = goal_orientation.to_matrix();
  for (const auto& p : object.local_cloud.points) {
    scene.points.push_back(goal_rot * p + goal.offset);
  }
  return scene;
}

namespace {

nlohmann::json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(),
              j.at(2).get<double>());
}

}  // namespace

KinematicChain KinematicChain::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("KinematicChain: cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::vector<Link> links;
  int index = 0;
  for (const auto& lj : j.at("links")) {
    Link link;
    link.name = lj.value("name", "link" + std::to_string(index));
    link.parent = lj.at("parent").get<int>();
    link.translation_to_parent = vec3_from_json(lj.at("translation"));
    const auto& rq = lj.at("rotation_wxyz");
    link.rotation_to_parent =
        so3::UnitQuaternion(rq.at(0).get<double>(), rq.at(1).get<double>(),
                            rq.at(2).get<double>(), rq.at(3).get<double>())
            .normalized();
    link.axis = vec3_from_json(lj.at("axis")).normalized();
    link.lower = lj.at("limits").at(0).get<double>();
    link.upper = lj.at("limits").at(1).get<double>();
    const auto& box = lj.at("box_size");
    link.shape = make_box_mesh(vec3_from_json(box));
    const int k = lj.value("cloud_k", 500);
    Rng cloud_rng(0x9d0c7f6a5b3e2d10ULL ^ std::uint64_t(index));
    link.local_cloud = sample_mesh_points(link.shape, k, cloud_rng);
    links.push_back(std::move(link));
    ++index;
  }
  return KinematicChain(std::move(links));
}

void KinematicChain::save_json(const std::string& path) const {
  nlohmann::json j;
  j["links"] = nlohmann::json::array();
  for (const auto& link : links_) {
    nlohmann::json lj;
    lj["name"] = link.name;
    lj["parent"] = link.parent;
    lj["translation"] = vec3_to_json(link.translation_to_parent);
    lj["rotation_wxyz"] = {link.rotation_to_parent.w, link.rotation_to_parent.x,
                           link.rotation_to_parent.y, link.rotation_to_parent.z};
    lj["axis"] = vec3_to_json(link.axis);
    lj["limits"] = {link.lower, link.upper};
    const Vec3 size = link.shape.bbox_max() - link.shape.bbox_min();
    lj["box_size"] = vec3_to_json(size);
    lj["cloud_k"] = int(link.local_cloud.size());
    j["links"].push_back(lj);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("KinematicChain: cannot write " + path);
  out << j.dump(2) << "\n";
}

Vec3 fingertip_offset() { return Vec3(0.055, 0.0, 0.0); }

KinematicChain make_hand_chain(int fingers, int points_per_link) {
  if (fingers < 1) {
    throw std::invalid_argument("make_hand_chain: need at least one finger");
  }
  const double base_radius = 0.11;
  const double base_height = 0.20;
  const double proximal_len = 0.07;
  const double middle_len = 0.07;
  const double curl = 0.9;  // fixed downward pitch between segments

  std::vector<Link> links;
  int index = 0;
  for (int f = 0; f < fingers; ++f) {
    const double angle = 2.0 * M_PI * f / fingers;
    Rng cloud_rng(0x51a3b2c4d5e6f708ULL ^ std::uint64_t(f));

    Link proximal;
    proximal.name = "finger" + std::to_string(f) + "_proximal";
    proximal.parent = -1;
    proximal.translation_to_parent =
        Vec3(base_radius * std::cos(angle), base_radius * std::sin(angle),
             base_height);
    // Local +x points at the workspace center, +z stays up.
    proximal.rotation_to_parent =
        so3::UnitQuaternion::from_axis_angle(Vec3::UnitZ(), angle + M_PI);
    proximal.axis = Vec3::UnitZ();
    proximal.lower = -0.9;
    proximal.upper = 0.9;
    proximal.shape = make_box_mesh(Vec3(proximal_len, 0.018, 0.018));
    proximal.local_cloud =
        sample_mesh_points(proximal.shape, points_per_link, cloud_rng);
    links.push_back(proximal);
    ++index;

    Link middle;
    middle.name = "finger" + std::to_string(f) + "_middle";
    middle.parent = index - 1;
    middle.translation_to_parent = Vec3(proximal_len, 0.0, 0.0);
    middle.rotation_to_parent =
        so3::UnitQuaternion::from_axis_angle(Vec3::UnitY(), curl);
    middle.axis = Vec3::UnitY();
    middle.lower = -2.1;
    middle.upper = 0.6;
    middle.shape = make_box_mesh(Vec3(middle_len, 0.016, 0.016));
    middle.local_cloud =
        sample_mesh_points(middle.shape, points_per_link, cloud_rng);
    links.push_back(middle);
    ++index;

    Link tip;
    tip.name = "finger" + std::to_string(f) + "_tip";
    tip.parent = index - 1;
    tip.translation_to_parent = Vec3(middle_len, 0.0, 0.0);
    tip.rotation_to_parent =
        so3::UnitQuaternion::from_axis_angle(Vec3::UnitY(), curl);
    tip.axis = Vec3::UnitY();
    tip.lower = -2.1;
    tip.upper = 0.6;
    tip.shape = make_box_mesh(Vec3(0.055, 0.014, 0.014));
    tip.local_cloud = sample_mesh_points(tip.shape, points_per_link, cloud_rng);
    links.push_back(tip);
    ++index;
  }
  return KinematicChain(std::move(links));
}

}  // namespace reorient::cloud
