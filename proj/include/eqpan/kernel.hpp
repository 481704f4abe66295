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
#include <string>
#include <vector>

#include "eqpan/group.hpp"
#include "eqpan/pointcloud.hpp"

namespace eqpan {

/// Kernel point layout symmetric under the rotation anchors: rotating the
/// layout by anchor j permutes point indices by `permutations[j]`, which is
/// what lets point convolutions rotate their kernels by index permutation
/// instead of re-sampling.
struct KernelLayout {
  Points points;        // k x 3, within radius
  double radius = 0.0;  // spatial extent of the layout
  double influence = 0.0;  // correlation falloff distance
  int group_order = 1;
  std::vector<std::vector<int>> permutations;  // n arrays of k indices

  int size() const { return static_cast<int>(points.rows()); }

  /// Inverse permutation of anchor j (equals the permutation of -j mod n).
  const std::vector<int>& inverse_permutation(int j) const {
    return permutations[(group_order - j) % group_order];
  }

  std::string to_json() const;
};

/// Analytic layout with exact cyclic symmetry: one center point, two axial
/// points at z = +-0.6r, and two horizontal rings (radius 0.5r at z = -0.25r
/// and radius r at z = +0.25r) of s points each, where s = 6 for group
/// orders {1,2,3,6} (15 points total) and s = 8 for order 4 (19 points).
/// influence defaults to 0.3 * radius when not given.
///
/// Throws InvalidArgument for unsupported group orders.
KernelLayout build_kernel(const CyclicGroup& group, double radius,
                          double influence = -1.0);

/// For each kernel point i, the unique index i' with R_j p_i = p_i' within
/// 1e-9. Throws InvalidState if any point is unmatched or matched twice
/// (which would mean the layout is not actually symmetric).
std::vector<int> permutation_for_anchor(const KernelLayout& layout,
                                        const CyclicGroup& group, int j);

/// Linear point-to-kernel correlation: max(0, 1 - |d - p| / influence).
double correlation(const Eigen::Vector3d& d, const Eigen::Vector3d& p,
                   double influence);

}  // namespace eqpan
