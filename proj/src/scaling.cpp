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
#include "eqpan/scaling.hpp"

#include <sstream>

#include "eqpan/error.hpp"

namespace eqpan {

std::int64_t conv_params(int kernel_points, int anchors, int c_in, int c_out) {
  if (kernel_points <= 0 || anchors <= 0 || c_in <= 0 || c_out <= 0) {
    throw InvalidArgument("conv_params: all factors must be positive");
  }
  return static_cast<std::int64_t>(kernel_points) * anchors * c_in * c_out;
}

std::int64_t feature_elems(std::int64_t points, int channels, int anchors) {
  if (points <= 0 || channels <= 0 || anchors <= 0) {
    throw InvalidArgument("feature_elems: all factors must be positive");
  }
  return points * channels * anchors;
}

int kernel_points_for(int anchors) { return anchors == 4 ? 19 : 15; }

ScalingTable scaling_table(int feature_size,
                           const std::vector<int>& anchors) {
  if (feature_size <= 0) {
    throw InvalidArgument("scaling_table: feature size must be positive");
  }
  ScalingTable table;
  for (int n : anchors) {
    if (n <= 0 || n > feature_size) {
      throw InvalidArgument("scaling_table: invalid anchor count");
    }
    ScalingRow row;
    row.anchors = n;
    row.channels = feature_size / n;  // floor, e.g. 256/3 -> 85
    row.kernel_points = kernel_points_for(n);
    row.conv_params_per_layer =
        conv_params(row.kernel_points, n, row.channels, row.channels);
    row.feature_elems_per_1000_points =
        feature_elems(1000, row.channels, n);
    table.rows.push_back(row);
  }

  table.monotone = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].conv_params_per_layer >=
        table.rows[i - 1].conv_params_per_layer) {
      table.monotone = false;
    }
  }
  if (!table.rows.empty() && table.rows.front().anchors == 1) {
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      if (table.rows[i].conv_params_per_layer >=
          table.rows.front().conv_params_per_layer) {
        table.monotone = false;
      }
    }
  }
  return table;
}

std::string ScalingTable::to_csv(const std::string& config_hash_hex) const {
  std::ostringstream os;
  os << "anchors,channels,kernel_points,conv_params_per_layer,"
        "feature_elems_per_1000_points,config_hash\n";
  for (const auto& row : rows) {
    os << row.anchors << ',' << row.channels << ',' << row.kernel_points
       << ',' << row.conv_params_per_layer << ','
       << row.feature_elems_per_1000_points << ',' << config_hash_hex << '\n';
  }
  os << "# conv params strictly decreasing over listed anchors and below the "
        "single-anchor value: "
     << (monotone ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace eqpan
