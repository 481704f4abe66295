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
#include "eqpan/group.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "eqpan/error.hpp"

namespace eqpan {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Eigen::Matrix3d rotation_z(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;  // fmod rounding can land exactly on 2*pi
  return r;
}

CyclicGroup make_group(int n) {
  if (n < 1) {
    throw InvalidArgument("make_group: anchor count must be positive, got " +
                          std::to_string(n));
  }
  CyclicGroup g;
  g.n = n;
  g.anchors.reserve(n);
  g.matrices.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double theta = kTwoPi * static_cast<double>(i) / n;
    g.anchors.push_back(theta);
    g.matrices.push_back(rotation_z(theta));
  }
  return g;
}

int nearest_anchor(const CyclicGroup& group, double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidArgument("nearest_anchor: angle must be finite");
  }
  // Anchors are evenly spaced, so the nearest one is round(theta * n / 2pi).
  // floor(x + 1/2) sends a bisector tie to the higher index.
  const double x = wrap_angle(theta) * group.n / kTwoPi;
  const int j = static_cast<int>(std::floor(x + 0.5));
  return j % group.n;
}

std::optional<int> try_anchor_of_vector(const CyclicGroup& group,
                                        const Eigen::Vector3d& v) {
  if (v.x() == 0.0 && v.y() == 0.0) return std::nullopt;
  const double theta = wrap_angle(std::atan2(v.y(), v.x()));
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < group.n; ++i) {
    const double raw = std::abs(theta - group.anchors[i]);
    const double dist = std::min(raw, kTwoPi - raw);
    if (dist < best_dist) {  // strict: ties keep the smaller index
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

int anchor_of_vector(const CyclicGroup& group, const Eigen::Vector3d& v) {
  auto idx = try_anchor_of_vector(group, v);
  if (!idx) {
    throw DegenerateDirection(
        "anchor_of_vector: vector has no horizontal component");
  }
  return *idx;
}

FaithfulnessReport quotient_faithfulness(int n, int m) {
  if (n < 1 || m < 1) {
    throw InvalidArgument("quotient_faithfulness: orders must be positive");
  }
  if (n % m != 0) {
    throw InvalidArgument("quotient_faithfulness: subgroup order " +
                          std::to_string(m) + " does not divide " +
                          std::to_string(n));
  }
  FaithfulnessReport report;
  report.group_order = n;
  report.subgroup_order = m;

  // The order-m subgroup is generated by step = n/m; coset of anchor g is
  // identified by g mod step.
  const int step = n / m;
  auto coset_of = [step](int g) { return g % step; };

  // Enumerate the action: anchor g sends coset(r) to coset(g + r).
  std::vector<std::vector<int>> action(n);
  for (int g = 0; g < n; ++g) {
    action[g].resize(step);
    for (int r = 0; r < step; ++r) {
      action[g][r] = coset_of((g + r) % n);
    }
  }

  for (int g = 0; g < n; ++g) {
    bool trivial = true;
    for (int r = 0; r < step; ++r) {
      if (action[g][r] != r) {
        trivial = false;
        break;
      }
    }
    if (trivial) report.kernel_elements.push_back(g);
  }
  report.faithful = report.kernel_elements.size() == 1;

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (action[i] == action[j]) report.collapsed_pairs.emplace_back(i, j);
    }
  }
  return report;
}

}  // namespace eqpan
