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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace eqpan {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Point cloud with optional parallel label channels. Positions are always
/// stored in double precision so that geometric predicates (radius sets,
/// nearest neighbors) are stable under rotation regardless of the feature
/// precision used downstream.
///
/// Invariants: every non-empty channel has the same length as positions;
/// instance ids are nonzero only on "things" classes.
struct PointCloud {
  Points positions;                // m x 3, meters
  std::vector<int> time_index;     // frame offset within a stacked window
  std::vector<int> semantic;       // class ids
  std::vector<int> instance;       // 0 = no instance
  std::vector<float> remission;

  Eigen::Index size() const { return positions.rows(); }
  bool has_time() const { return !time_index.empty(); }
  bool has_semantic() const { return !semantic.empty(); }
  bool has_instance() const { return !instance.empty(); }
  bool has_remission() const { return !remission.empty(); }

  /// Throws InvalidState if any non-empty channel length differs from m.
  void check_channels() const;
};

/// Radius-neighborhood lists: for query q, `lists[q]` holds the indices of
/// all support points within `radius`, sorted ascending.
struct NeighborLists {
  double radius = 0.0;
  std::vector<std::vector<int>> lists;
};

/// Exact radius search over a uniform voxel hash with cell size r. Results
/// do not depend on support insertion order. Throws InvalidArgument on
/// non-positive radius or non-finite coordinates.
NeighborLists radius_neighbors(const Points& support, const Points& queries,
                               double radius);

/// One output point per occupied voxel, at the barycenter of the voxel's
/// points. Labels are per-voxel majorities with ties to the smaller id; the
/// instance majority is taken among the points that carry the winning
/// semantic class, which keeps instance/semantic consistency. Output voxels
/// appear in order of first occurrence.
PointCloud grid_subsample(const PointCloud& cloud, double cell);

/// Parses a scan in the SemanticKITTI binary layout: little-endian float32
/// quadruples (x, y, z, remission), plus optional little-endian uint32 label
/// words (low 16 bits semantic class, high 16 bits instance id).
PointCloud read_semantic_kitti(std::span<const std::byte> scan_bytes,
                               std::optional<std::span<const std::byte>>
                                   label_bytes = std::nullopt);

/// Concatenates frames into a common reference frame. poses[i] maps frame i
/// coordinates into frame 0 coordinates; time_index is set to the frame
/// offset. Optional channels are kept only when present in every frame.
PointCloud stack_frames(const std::vector<PointCloud>& frames,
                        const std::vector<Eigen::Matrix4d>& poses);

/// Positions rotated about the Z axis by theta; labels unchanged.
PointCloud rotate_cloud(const PointCloud& cloud, double theta);

}  // namespace eqpan
