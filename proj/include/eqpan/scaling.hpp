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

#include <cstdint>
#include <string>
#include <vector>

namespace eqpan {

/// Weight count of one equivariant convolution layer: k * n * c_in * c_out.
std::int64_t conv_params(int kernel_points, int anchors, int c_in, int c_out);

/// Element count of an equivariant feature map: points * channels * anchors.
std::int64_t feature_elems(std::int64_t points, int channels, int anchors);

/// Kernel size rule for the supported anchor counts: 19 points for n = 4,
/// 15 otherwise.
int kernel_points_for(int anchors);

struct ScalingRow {
  int anchors = 0;
  int channels = 0;
  int kernel_points = 0;
  std::int64_t conv_params_per_layer = 0;
  std::int64_t feature_elems_per_1000_points = 0;
};

/// Trade-off table at constant feature-map size K = c * n: for each anchor
/// count, channels = floor(K / n) and the per-layer parameter count follows
/// the kernel rule. `monotone` reports whether the parameter counts strictly
/// decrease down the listed anchor counts and stay below the n = 1 value.
struct ScalingTable {
  std::vector<ScalingRow> rows;
  bool monotone = false;

  std::string to_csv(const std::string& config_hash_hex) const;
};

ScalingTable scaling_table(int feature_size, const std::vector<int>& anchors);

}  // namespace eqpan
