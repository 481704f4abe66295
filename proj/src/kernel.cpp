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
#include "eqpan/kernel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "eqpan/error.hpp"

namespace eqpan {

namespace {
constexpr double kMatchTolerance = 1e-9;
}

double correlation(const Eigen::Vector3d& d, const Eigen::Vector3d& p,
                   double influence) {
  if (!(influence > 0.0)) {
    throw InvalidArgument("correlation: influence must be positive");
  }
  return std::max(0.0, 1.0 - (d - p).norm() / influence);
}

std::vector<int> permutation_for_anchor(const KernelLayout& layout,
                                        const CyclicGroup& group, int j) {
  if (j < 0 || j >= group.n) {
    throw InvalidArgument("permutation_for_anchor: anchor index out of range");
  }
  const int k = layout.size();
  const Eigen::Matrix3d& rot = group.matrices[j];
  std::vector<int> perm(static_cast<std::size_t>(k), -1);
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (int i = 0; i < k; ++i) {
    const Eigen::Vector3d rotated = rot * layout.points.row(i).transpose();
    int match = -1;
    for (int t = 0; t < k; ++t) {
      if ((rotated.transpose() - layout.points.row(t)).norm() <
          kMatchTolerance) {
        if (match != -1) {
          throw InvalidState(
              "permutation_for_anchor: kernel asymmetry, point " +
              std::to_string(i) + " matches several points under anchor " +
              std::to_string(j));
        }
        match = t;
      }
    }
    if (match == -1 || used[static_cast<std::size_t>(match)]) {
      throw InvalidState("permutation_for_anchor: kernel asymmetry, point " +
                         std::to_string(i) + " has no unique image under " +
                         "anchor " + std::to_string(j));
    }
    used[static_cast<std::size_t>(match)] = true;
    perm[static_cast<std::size_t>(i)] = match;
  }
  return perm;
}

KernelLayout build_kernel(const CyclicGroup& group, double radius,
                          double influence) {
  if (!(radius > 0.0)) {
    throw InvalidArgument("build_kernel: radius must be positive");
  }
  int ring_points = 0;
  switch (group.n) {
    case 1:
    case 2:
    case 3:
    case 6:
      ring_points = 6;
      break;
    case 4:
      ring_points = 8;
      break;
    default:
      throw InvalidArgument("build_kernel: unsupported anchor count " +
                            std::to_string(group.n));
  }

  KernelLayout layout;
  layout.radius = radius;
  layout.influence = influence > 0.0 ? influence : 0.3 * radius;
  layout.group_order = group.n;
  layout.points.resize(3 + 2 * ring_points, 3);

  layout.points.row(0) = Eigen::RowVector3d(0.0, 0.0, 0.0);
  layout.points.row(1) = Eigen::RowVector3d(0.0, 0.0, 0.6 * radius);
  layout.points.row(2) = Eigen::RowVector3d(0.0, 0.0, -0.6 * radius);

  const double ring_radius[2] = {0.5 * radius, radius};
  const double ring_height[2] = {-0.25 * radius, 0.25 * radius};
  int row = 3;
  for (int ring = 0; ring < 2; ++ring) {
    for (int t = 0; t < ring_points; ++t) {
      const double a =
          2.0 * std::numbers::pi * static_cast<double>(t) / ring_points;
      layout.points.row(row++) =
          Eigen::RowVector3d(ring_radius[ring] * std::cos(a),
                             ring_radius[ring] * std::sin(a),
                             ring_height[ring]);
    }
  }

  layout.permutations.reserve(static_cast<std::size_t>(group.n));
  for (int j = 0; j < group.n; ++j) {
    layout.permutations.push_back(permutation_for_anchor(layout, group, j));
  }
  return layout;
}

std::string KernelLayout::to_json() const {
  std::ostringstream os;
  os << "{\"radius\":" << radius << ",\"influence\":" << influence
     << ",\"group_order\":" << group_order << ",\"points\":[";
  for (int i = 0; i < size(); ++i) {
    if (i) os << ',';
    os << '[' << points(i, 0) << ',' << points(i, 1) << ',' << points(i, 2)
       << ']';
  }
  os << "],\"permutations\":[";
  for (std::size_t j = 0; j < permutations.size(); ++j) {
    if (j) os << ',';
    os << '[';
    for (std::size_t i = 0; i < permutations[j].size(); ++i) {
      if (i) os << ',';
      os << permutations[j][i];
    }
    os << ']';
  }
  os << "]}";
  return os.str();
}

}  // namespace eqpan
