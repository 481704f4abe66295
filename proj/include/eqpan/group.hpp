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
#include <optional>
#include <utility>
#include <vector>

namespace eqpan {

/// The n rotation anchors discretizing planar rotations about the vertical
/// axis. Anchor i is the Z-rotation by 2*pi*i/n; anchor 0 is the identity and
/// index arithmetic is modular.
///
/// Immutable after construction; safe to share across threads.
struct CyclicGroup {
  int n = 0;
  std::vector<double> anchors;            // radians, increasing in [0, 2*pi)
  std::vector<Eigen::Matrix3d> matrices;  // Z-axis rotation per anchor

  int add(int i, int j) const { return (i + j) % n; }
  int inverse(int i) const { return (n - i) % n; }
};

/// How the anchors of C_n act on the cosets of their order-m subgroup:
/// which anchors act trivially (the kernel) and which anchor pairs become
/// indistinguishable in the quotient.
struct FaithfulnessReport {
  int group_order = 0;
  int subgroup_order = 0;
  std::vector<int> kernel_elements;  // always contains 0
  bool faithful = false;             // kernel == {0}
  std::vector<std::pair<int, int>> collapsed_pairs;  // i < j, same action
};

/// Rotation about the Z axis by theta radians.
Eigen::Matrix3d rotation_z(double theta);

/// Wraps an angle into [0, 2*pi).
double wrap_angle(double theta);

/// Builds C_n. Throws InvalidArgument when n < 1.
CyclicGroup make_group(int n);

/// Circularly nearest anchor to theta; a tie at a bisector rounds to the
/// higher index mod n.
int nearest_anchor(const CyclicGroup& group, double theta);

/// Anchor nearest to the horizontal direction atan2(v_y, v_x) of v (the Z
/// component is ignored); distance ties go to the smaller index. Throws
/// DegenerateDirection when v has no horizontal component.
int anchor_of_vector(const CyclicGroup& group, const Eigen::Vector3d& v);

/// Non-throwing variant of anchor_of_vector: nullopt when (v_x, v_y) == 0.
std::optional<int> try_anchor_of_vector(const CyclicGroup& group,
                                        const Eigen::Vector3d& v);

/// Enumerates the action of every C_n anchor on the cosets of the order-m
/// subgroup and reports the action kernel. Throws InvalidArgument unless m
/// divides n.
FaithfulnessReport quotient_faithfulness(int n, int m);

}  // namespace eqpan
