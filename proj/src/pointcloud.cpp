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
#include "eqpan/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>

#include "eqpan/error.hpp"
#include "eqpan/group.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary scan/label parsing assumes a little-endian host");

namespace eqpan {

namespace {

using Cell = std::array<std::int64_t, 3>;

Cell cell_of(const Eigen::RowVector3d& p, double cell) {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
          static_cast<std::int64_t>(std::floor(p.y() / cell)),
          static_cast<std::int64_t>(std::floor(p.z() / cell))};
}

// Cell coordinates packed into a single 64-bit key (21 bits per axis, offset
// binary). Desk-scale extents stay far inside the representable range.
std::uint64_t pack_cell(const Cell& c) {
  constexpr std::int64_t kBias = 1 << 20;
  std::uint64_t key = 0;
  for (int a = 0; a < 3; ++a) {
    key = (key << 21) | static_cast<std::uint64_t>((c[a] + kBias) & 0x1FFFFF);
  }
  return key;
}

std::uint64_t voxel_key(const Eigen::RowVector3d& p, double cell) {
  return pack_cell(cell_of(p, cell));
}

void require_finite(const Points& pts, const char* what) {
  if (!pts.allFinite()) {
    throw InvalidArgument(std::string(what) + ": non-finite coordinates");
  }
}

// Majority id with ties to the smaller id.
int majority(const std::vector<int>& ids) {
  std::unordered_map<int, int> counts;
  for (int id : ids) ++counts[id];
  int best = 0;
  int best_count = -1;
  for (const auto& [id, count] : counts) {
    if (count > best_count || (count == best_count && id < best)) {
      best = id;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

void PointCloud::check_channels() const {
  const auto m = static_cast<std::size_t>(size());
  auto bad = [m](std::size_t s) { return s != 0 && s != m; };
  if (bad(time_index.size()) || bad(semantic.size()) ||
      bad(instance.size()) || bad(remission.size())) {
    throw InvalidState("PointCloud: channel length mismatch");
  }
}

NeighborLists radius_neighbors(const Points& support, const Points& queries,
                               double radius) {
  if (!(radius > 0.0)) {
    throw InvalidArgument("radius_neighbors: radius must be positive");
  }
  require_finite(support, "radius_neighbors support");
  require_finite(queries, "radius_neighbors queries");

  std::unordered_map<std::uint64_t, std::vector<int>> grid;
  grid.reserve(static_cast<std::size_t>(support.rows()));
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    grid[voxel_key(support.row(i), radius)].push_back(static_cast<int>(i));
  }

  const double r2 = radius * radius;
  NeighborLists out;
  out.radius = radius;
  out.lists.resize(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Eigen::RowVector3d p = queries.row(q);
    const Cell base = cell_of(p, radius);
    auto& list = out.lists[static_cast<std::size_t>(q)];
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(
              pack_cell({base[0] + dx, base[1] + dy, base[2] + dz}));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if ((support.row(j) - p).squaredNorm() <= r2) list.push_back(j);
          }
        }
      }
    }
    std::sort(list.begin(), list.end());
  }
  return out;
}

PointCloud grid_subsample(const PointCloud& cloud, double cell) {
  if (!(cell > 0.0)) {
    throw InvalidArgument("grid_subsample: cell must be positive");
  }
  cloud.check_channels();

  std::unordered_map<std::uint64_t, int> voxel_index;
  std::vector<std::vector<int>> members;  // point indices per voxel
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const std::uint64_t key = voxel_key(cloud.positions.row(i), cell);
    auto [it, inserted] =
        voxel_index.emplace(key, static_cast<int>(members.size()));
    if (inserted) members.emplace_back();
    members[static_cast<std::size_t>(it->second)].push_back(
        static_cast<int>(i));
  }

  PointCloud out;
  const auto v = static_cast<Eigen::Index>(members.size());
  out.positions.resize(v, 3);
  if (cloud.has_time()) out.time_index.resize(static_cast<std::size_t>(v));
  if (cloud.has_semantic()) out.semantic.resize(static_cast<std::size_t>(v));
  if (cloud.has_instance()) out.instance.resize(static_cast<std::size_t>(v));
  if (cloud.has_remission()) out.remission.resize(static_cast<std::size_t>(v));

  std::vector<int> scratch;
  for (Eigen::Index o = 0; o < v; ++o) {
    const auto& pts = members[static_cast<std::size_t>(o)];
    Eigen::RowVector3d sum = Eigen::RowVector3d::Zero();
    for (int i : pts) sum += cloud.positions.row(i);
    out.positions.row(o) = sum / static_cast<double>(pts.size());

    if (cloud.has_time()) {
      scratch.clear();
      for (int i : pts) scratch.push_back(cloud.time_index[i]);
      out.time_index[static_cast<std::size_t>(o)] = majority(scratch);
    }
    if (cloud.has_semantic()) {
      scratch.clear();
      for (int i : pts) scratch.push_back(cloud.semantic[i]);
      const int cls = majority(scratch);
      out.semantic[static_cast<std::size_t>(o)] = cls;
      if (cloud.has_instance()) {
        scratch.clear();
        for (int i : pts) {
          if (cloud.semantic[i] == cls) scratch.push_back(cloud.instance[i]);
        }
        out.instance[static_cast<std::size_t>(o)] = majority(scratch);
      }
    } else if (cloud.has_instance()) {
      scratch.clear();
      for (int i : pts) scratch.push_back(cloud.instance[i]);
      out.instance[static_cast<std::size_t>(o)] = majority(scratch);
    }
    if (cloud.has_remission()) {
      float sum_r = 0.0F;
      for (int i : pts) sum_r += cloud.remission[i];
      out.remission[static_cast<std::size_t>(o)] =
          sum_r / static_cast<float>(pts.size());
    }
  }
  return out;
}

PointCloud read_semantic_kitti(std::span<const std::byte> scan_bytes,
                               std::optional<std::span<const std::byte>>
                                   label_bytes) {
  if (scan_bytes.size() % 16 != 0) {
    throw SchemaError("read_semantic_kitti: malformed scan, byte count " +
                      std::to_string(scan_bytes.size()) +
                      " is not a multiple of 16");
  }
  const auto m = static_cast<Eigen::Index>(scan_bytes.size() / 16);

  PointCloud cloud;
  cloud.positions.resize(m, 3);
  cloud.remission.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    float xyzr[4];
    std::memcpy(xyzr, scan_bytes.data() + 16 * i, 16);
    cloud.positions.row(i) = Eigen::RowVector3d(xyzr[0], xyzr[1], xyzr[2]);
    cloud.remission[static_cast<std::size_t>(i)] = xyzr[3];
  }

  if (label_bytes) {
    if (label_bytes->size() % 4 != 0 ||
        static_cast<Eigen::Index>(label_bytes->size() / 4) != m) {
      throw SchemaError(
          "read_semantic_kitti: label count does not match point count");
    }
    cloud.semantic.resize(static_cast<std::size_t>(m));
    cloud.instance.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      std::uint32_t word = 0;
      std::memcpy(&word, label_bytes->data() + 4 * i, 4);
      cloud.semantic[static_cast<std::size_t>(i)] =
          static_cast<int>(word & 0xFFFFU);
      cloud.instance[static_cast<std::size_t>(i)] =
          static_cast<int>(word >> 16);
    }
  }
  return cloud;
}

PointCloud stack_frames(const std::vector<PointCloud>& frames,
                        const std::vector<Eigen::Matrix4d>& poses) {
  if (frames.size() != poses.size()) {
    throw InvalidArgument("stack_frames: frame and pose counts differ");
  }
  Eigen::Index total = 0;
  bool all_semantic = true;
  bool all_instance = true;
  bool all_remission = true;
  for (const auto& f : frames) {
    f.check_channels();
    total += f.size();
    all_semantic &= f.has_semantic();
    all_instance &= f.has_instance();
    all_remission &= f.has_remission();
  }

  PointCloud out;
  out.positions.resize(total, 3);
  out.time_index.reserve(static_cast<std::size_t>(total));
  if (all_semantic) out.semantic.reserve(static_cast<std::size_t>(total));
  if (all_instance) out.instance.reserve(static_cast<std::size_t>(total));
  if (all_remission) out.remission.reserve(static_cast<std::size_t>(total));

  Eigen::Index row = 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const Eigen::Matrix3d rot = poses[t].topLeftCorner<3, 3>();
    const Eigen::Vector3d trans = poses[t].topRightCorner<3, 1>();
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      out.positions.row(row + i) =
          (rot * f.positions.row(i).transpose() + trans).transpose();
    }
    row += f.size();
    out.time_index.insert(out.time_index.end(),
                          static_cast<std::size_t>(f.size()),
                          static_cast<int>(t));
    if (all_semantic) {
      out.semantic.insert(out.semantic.end(), f.semantic.begin(),
                          f.semantic.end());
    }
    if (all_instance) {
      out.instance.insert(out.instance.end(), f.instance.begin(),
                          f.instance.end());
    }
    if (all_remission) {
      out.remission.insert(out.remission.end(), f.remission.begin(),
                           f.remission.end());
    }
  }
  return out;
}

PointCloud rotate_cloud(const PointCloud& cloud, double theta) {
  PointCloud out = cloud;
  const Eigen::Matrix3d r = rotation_z(theta);
  out.positions = cloud.positions * r.transpose();
  return out;
}

}  // namespace eqpan
