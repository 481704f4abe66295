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
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "eqpan/group.hpp"
#include "eqpan/pointcloud.hpp"

namespace eqpan {

/// Parameters of the deterministic synthetic scene generator. Identical
/// spec (including seed) always produces byte-identical scenes.
struct SceneSpec {
  std::uint64_t seed = 0;
  int num_objects = 4;
  std::vector<int> object_classes = {1, 2};  // 1 = box, 2 = cylinder
  double extent = 8.0;                       // scene radius, meters
  int frames = 3;
  int points_per_object = 120;  // per frame
  int points_ground = 300;      // per frame
  double max_speed = 0.4;       // object translation per frame
  double max_yaw_rate = 0.3;    // object rotation per frame, radians
  double min_size = 0.5;
  double max_size = 1.3;
  double ego_speed = 0.5;       // sensor translation per frame, along +X
  double sigma_c = 1.0;         // centerness falloff, meters
};

/// Dense per-point supervision on a stacked window.
struct GroundTruthFields {
  std::vector<int> semantic;
  std::vector<int> instance;
  Points offsets;                        // instance center minus point
  Eigen::VectorXd centerness;            // in [0, 1]
  std::vector<int> rotation_anchor;      // anchor label of the offset
  std::vector<std::uint8_t> rotation_valid;  // 0 where the offset has no
                                             // horizontal part

  Eigen::Index size() const { return offsets.rows(); }
};

/// One generated sequence: per-frame clouds in sensor coordinates, the poses
/// mapping each frame into frame 0, the stacked window, and its ground truth.
struct SceneSequence {
  std::vector<PointCloud> frames;
  std::vector<Eigen::Matrix4d> poses;
  PointCloud stacked;
  GroundTruthFields gt;
};

/// Offset/centerness/rotation-label targets for a labeled cloud. The
/// instance center is the centroid of the instance's points across the whole
/// stacked window. Points without an instance get zero offset and zero
/// centerness; instance points get centerness exp(-|v|^2 / (2 sigma_c^2)).
/// Offsets with no horizontal component get anchor label 0 and are flagged
/// invalid for rotation classification.
///
/// Throws InvalidArgument when the cloud has no instance channel.
GroundTruthFields offset_targets(const PointCloud& cloud,
                                 const CyclicGroup& group,
                                 double sigma_c = 1.0);

/// Generates a scene: a ground disk plus rigid objects sampled on box or
/// cylinder surfaces, translated and rotated per frame, observed from an ego
/// position that advances along +X. Instance ids are consistent across
/// frames.
SceneSequence generate_sequence(const SceneSpec& spec,
                                const CyclicGroup& group);

}  // namespace eqpan
