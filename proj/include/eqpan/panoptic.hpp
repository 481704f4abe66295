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

#include "eqpan/pointcloud.hpp"

namespace eqpan {

/// Per-point semantic class and 4D-consistent instance id (0 for stuff)
/// over one stacked window.
struct PanopticPrediction {
  std::vector<int> semantic;
  std::vector<int> instance;
  int window_id = 0;

  std::size_t size() const { return semantic.size(); }
};

/// Greedy clustering of shifted points (x + predicted offset): repeatedly
/// seed from the unassigned point with the largest radius neighborhood among
/// unassigned points (ties to the smallest index) and assign that
/// neighborhood. Clusters below min_points are dropped to id 0. Only points
/// with thing_mask set participate; ids are 1-based and deterministic.
std::vector<int> cluster_by_center(const Points& shifted,
                                   const std::vector<std::uint8_t>& thing_mask,
                                   double cluster_radius, int min_points);

/// Heatmap-style clustering: seeds are points whose score is maximal within
/// seed_radius (ties to the smaller index); every thing point joins the
/// highest-score seed within group_radius, or stays id 0 when none is in
/// range.
std::vector<int> cluster_by_centerness(
    const Eigen::VectorXd& scores, const Points& positions,
    const std::vector<std::uint8_t>& thing_mask, double seed_radius,
    double group_radius);

/// Within each instance every point receives the instance's most frequent
/// argmax class (ties to the smaller class id); points outside instances
/// keep their own argmax.
std::vector<int> majority_vote(const std::vector<int>& instance_ids,
                               const Eigen::MatrixXd& semantic_logits);

/// Remaps `next`'s instance ids to inherit `prev`'s ids by maximal point
/// overlap on the shared frames. `shared_prev[i]` and `shared_next[i]` index
/// the same physical point in the two windows. Greedy in descending overlap;
/// each prev id is used once; unmatched instances keep their id when it does
/// not collide with a prev id (fresh ids otherwise), which makes the
/// association idempotent.
///
/// Throws InvalidArgument when the windows share no points.
PanopticPrediction associate_windows(const PanopticPrediction& prev,
                                     const PanopticPrediction& next,
                                     const std::vector<int>& shared_prev,
                                     const std::vector<int>& shared_next);

}  // namespace eqpan
