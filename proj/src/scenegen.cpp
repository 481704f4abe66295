/* Copyright 2026 The Eqpan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "eqpan/scenegen.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "eqpan/error.hpp"
#include "eqpan/rng.hpp"

namespace eqpan {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct ObjectState {
  int semantic = 0;
  int instance = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // frame 0, world coords
  Eigen::Vector3d size = Eigen::Vector3d::Zero();    // full extents
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // per frame
  double yaw_rate = 0.0;
};

Eigen::Vector3d sample_box_surface(CounterRng& rng,
                                   const Eigen::Vector3d& size) {
  // Faces weighted by area: 2 faces per axis pair.
  const double ax = size.y() * size.z();
  const double ay = size.x() * size.z();
  const double az = size.x() * size.y();
  const double total = 2.0 * (ax + ay + az);
  double pick = rng.uniform(0.0, total);
  const Eigen::Vector3d h = size / 2.0;
  double u = rng.uniform(-1.0, 1.0);
  double v = rng.uniform(-1.0, 1.0);
  if (pick < 2.0 * ax) {
    const double sign = pick < ax ? 1.0 : -1.0;
    return {sign * h.x(), u * h.y(), v * h.z()};
  }
  pick -= 2.0 * ax;
  if (pick < 2.0 * ay) {
    const double sign = pick < ay ? 1.0 : -1.0;
    return {u * h.x(), sign * h.y(), v * h.z()};
  }
  pick -= 2.0 * ay;
  const double sign = pick < az ? 1.0 : -1.0;
  return {u * h.x(), v * h.y(), sign * h.z()};
}

Eigen::Vector3d sample_cylinder_surface(CounterRng& rng,
                                        const Eigen::Vector3d& size) {
  const double radius = size.x() / 2.0;
  const double height = size.z();
  const double side = kTwoPi * radius * height;
  const double cap = std::numbers::pi * radius * radius;
  double pick = rng.uniform(0.0, side + 2.0 * cap);
  if (pick < side) {
    const double a = rng.uniform(0.0, kTwoPi);
    const double z = rng.uniform(-0.5, 0.5) * height;
    return {radius * std::cos(a), radius * std::sin(a), z};
  }
  const double sign = (pick - side) < cap ? 1.0 : -1.0;
  const double a = rng.uniform(0.0, kTwoPi);
  const double r = radius * std::sqrt(rng.uniform());
  return {r * std::cos(a), r * std::sin(a), sign * height / 2.0};
}

}  // namespace

GroundTruthFields offset_targets(const PointCloud& cloud,
                                 const CyclicGroup& group, double sigma_c) {
  if (!cloud.has_instance()) {
    throw InvalidArgument("offset_targets: cloud has no instance channel");
  }
  cloud.check_channels();
  const Eigen::Index m = cloud.size();

  std::unordered_map<int, Eigen::Vector3d> centroid_sum;
  std::unordered_map<int, int> centroid_count;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int id = cloud.instance[static_cast<std::size_t>(i)];
    if (id == 0) continue;
    auto [it, inserted] = centroid_sum.emplace(id, Eigen::Vector3d::Zero());
    it->second += cloud.positions.row(i).transpose();
    ++centroid_count[id];
  }

  GroundTruthFields gt;
  gt.semantic = cloud.semantic;
  gt.instance = cloud.instance;
  gt.offsets = Points::Zero(m, 3);
  gt.centerness = Eigen::VectorXd::Zero(m);
  gt.rotation_anchor.assign(static_cast<std::size_t>(m), 0);
  gt.rotation_valid.assign(static_cast<std::size_t>(m), 0);

  const double denom = 2.0 * sigma_c * sigma_c;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int id = cloud.instance[static_cast<std::size_t>(i)];
    if (id == 0) continue;
    const Eigen::Vector3d center = centroid_sum[id] / centroid_count[id];
    const Eigen::Vector3d v = center - cloud.positions.row(i).transpose();
    gt.offsets.row(i) = v.transpose();
    gt.centerness[i] = std::exp(-v.squaredNorm() / denom);
    if (auto anchor = try_anchor_of_vector(group, v)) {
      gt.rotation_anchor[static_cast<std::size_t>(i)] = *anchor;
      gt.rotation_valid[static_cast<std::size_t>(i)] = 1;
    }
  }
  return gt;
}

SceneSequence generate_sequence(const SceneSpec& spec,
                                const CyclicGroup& group) {
  if (spec.extent <= 0.0) {
    throw InvalidArgument("generate_sequence: extent must be positive");
  }
  CounterRng scene_rng(spec.seed);

  CounterRng object_rng = scene_rng.fork("objects");
  std::vector<ObjectState> objects;
  objects.reserve(static_cast<std::size_t>(spec.num_objects));
  for (int o = 0; o < spec.num_objects; ++o) {
    ObjectState obj;
    obj.instance = o + 1;
    obj.semantic =
        spec.object_classes.empty()
            ? 1
            : spec.object_classes[static_cast<std::size_t>(object_rng.uniform_int(
                  0, static_cast<int>(spec.object_classes.size())))];
    obj.size = {object_rng.uniform(spec.min_size, spec.max_size),
                object_rng.uniform(spec.min_size, spec.max_size),
                object_rng.uniform(spec.min_size, spec.max_size)};
    const double radius = object_rng.uniform(0.0, 0.7 * spec.extent);
    const double angle = object_rng.uniform(0.0, kTwoPi);
    obj.center = {radius * std::cos(angle), radius * std::sin(angle),
                  obj.size.z() / 2.0};
    obj.yaw = object_rng.uniform(0.0, kTwoPi);
    const double speed = object_rng.uniform(0.0, spec.max_speed);
    const double heading = object_rng.uniform(0.0, kTwoPi);
    obj.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
    obj.yaw_rate =
        object_rng.uniform(-spec.max_yaw_rate, spec.max_yaw_rate);
    objects.push_back(obj);
  }

  SceneSequence seq;
  seq.frames.reserve(static_cast<std::size_t>(spec.frames));
  seq.poses.reserve(static_cast<std::size_t>(spec.frames));

  for (int t = 0; t < spec.frames; ++t) {
    CounterRng frame_rng = scene_rng.fork(0x1000 + static_cast<std::uint64_t>(t));
    const Eigen::Vector3d ego(spec.ego_speed * t, 0.0, 0.0);

    const Eigen::Index total =
        spec.points_ground +
        static_cast<Eigen::Index>(objects.size()) * spec.points_per_object;
    PointCloud frame;
    frame.positions.resize(total, 3);
    frame.semantic.assign(static_cast<std::size_t>(total), 0);
    frame.instance.assign(static_cast<std::size_t>(total), 0);
    frame.remission.assign(static_cast<std::size_t>(total), 0.0F);

    Eigen::Index row = 0;
    for (int i = 0; i < spec.points_ground; ++i) {
      const double r = spec.extent * std::sqrt(frame_rng.uniform());
      const double a = frame_rng.uniform(0.0, kTwoPi);
      const double z = 0.02 * frame_rng.normal();
      // Ground sampled around the ego position, expressed in ego coords.
      frame.positions.row(row++) =
          Eigen::RowVector3d(r * std::cos(a), r * std::sin(a), z);
    }

    for (const auto& obj : objects) {
      const Eigen::Vector3d center_t =
          obj.center + t * Eigen::Vector3d(obj.velocity.x(),
                                           obj.velocity.y(), 0.0);
      const Eigen::Matrix3d rot = rotation_z(obj.yaw + t * obj.yaw_rate);
      for (int i = 0; i < spec.points_per_object; ++i) {
        const Eigen::Vector3d local =
            obj.semantic == 2 ? sample_cylinder_surface(frame_rng, obj.size)
                              : sample_box_surface(frame_rng, obj.size);
        const Eigen::Vector3d world = rot * local + center_t;
        frame.positions.row(row) = (world - ego).transpose();
        frame.semantic[static_cast<std::size_t>(row)] = obj.semantic;
        frame.instance[static_cast<std::size_t>(row)] = obj.instance;
        ++row;
      }
    }

    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose.topRightCorner<3, 1>() = ego;  // frame t -> frame 0 coordinates
    seq.frames.push_back(std::move(frame));
    seq.poses.push_back(pose);
  }

  seq.stacked = stack_frames(seq.frames, seq.poses);
  seq.gt = offset_targets(seq.stacked, group, spec.sigma_c);
  return seq;
}

}  // namespace eqpan
