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
#include "eqpan/panoptic.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "eqpan/error.hpp"

namespace eqpan {

namespace {

// Neighbor lists restricted to mask == 1 rows, with original indices.
std::vector<std::vector<int>> masked_neighbors(
    const Points& points, const std::vector<std::uint8_t>& mask,
    double radius) {
  std::vector<int> selected;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) selected.push_back(static_cast<int>(i));
  }
  Points sub(static_cast<Eigen::Index>(selected.size()), 3);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = points.row(selected[i]);
  }
  const NeighborLists nb = radius_neighbors(sub, sub, radius);
  std::vector<std::vector<int>> out(mask.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto& list = out[static_cast<std::size_t>(selected[i])];
    list.reserve(nb.lists[i].size());
    for (int j : nb.lists[i]) list.push_back(selected[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace

std::vector<int> cluster_by_center(const Points& shifted,
                                   const std::vector<std::uint8_t>& thing_mask,
                                   double cluster_radius, int min_points) {
  if (!(cluster_radius > 0.0)) {
    throw InvalidArgument("cluster_by_center: radius must be positive");
  }
  const std::size_t m = thing_mask.size();
  std::vector<int> ids(m, 0);
  if (static_cast<std::size_t>(shifted.rows()) != m) {
    throw InvalidArgument("cluster_by_center: mask size mismatch");
  }

  const auto neighbors = masked_neighbors(shifted, thing_mask, cluster_radius);
  std::vector<std::uint8_t> assigned(m, 0);
  int next_id = 1;
  for (;;) {
    // Seed: the unassigned point with the most unassigned neighbors.
    int best = -1;
    int best_count = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!thing_mask[i] || assigned[i]) continue;
      int count = 0;
      for (int j : neighbors[i]) {
        if (!assigned[static_cast<std::size_t>(j)]) ++count;
      }
      if (count > best_count) {
        best_count = count;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;

    std::vector<int> members;
    for (int j : neighbors[static_cast<std::size_t>(best)]) {
      if (!assigned[static_cast<std::size_t>(j)]) members.push_back(j);
    }
    for (int j : members) assigned[static_cast<std::size_t>(j)] = 1;
    if (static_cast<int>(members.size()) >= min_points) {
      for (int j : members) ids[static_cast<std::size_t>(j)] = next_id;
      ++next_id;
    }
  }
  return ids;
}

std::vector<int> cluster_by_centerness(
    const Eigen::VectorXd& scores, const Points& positions,
    const std::vector<std::uint8_t>& thing_mask, double seed_radius,
    double group_radius) {
  if (!(seed_radius > 0.0) || !(group_radius > 0.0)) {
    throw InvalidArgument("cluster_by_centerness: radii must be positive");
  }
  const std::size_t m = thing_mask.size();
  if (static_cast<std::size_t>(scores.size()) != m ||
      static_cast<std::size_t>(positions.rows()) != m) {
    throw InvalidArgument("cluster_by_centerness: size mismatch");
  }

  // Seeds: local score maxima within seed_radius (ties to the smaller
  // index).
  const auto seed_nb = masked_neighbors(positions, thing_mask, seed_radius);
  std::vector<int> seeds;
  for (std::size_t i = 0; i < m; ++i) {
    if (!thing_mask[i]) continue;
    bool is_max = true;
    for (int j : seed_nb[i]) {
      const auto js = static_cast<std::size_t>(j);
      if (scores[j] > scores[static_cast<Eigen::Index>(i)] ||
          (scores[j] == scores[static_cast<Eigen::Index>(i)] &&
           js < i)) {
        is_max = false;
        break;
      }
    }
    if (is_max) seeds.push_back(static_cast<int>(i));
  }

  std::vector<int> ids(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!thing_mask[i]) continue;
    int best_seed = -1;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const int seed = seeds[s];
      if ((positions.row(seed) - positions.row(static_cast<Eigen::Index>(i)))
              .norm() > group_radius) {
        continue;
      }
      if (best_seed < 0 || scores[seed] > scores[best_seed]) best_seed = seed;
    }
    if (best_seed >= 0) {
      // Seed index -> 1-based id in seed order.
      const auto it = std::find(seeds.begin(), seeds.end(), best_seed);
      ids[i] = static_cast<int>(it - seeds.begin()) + 1;
    }
  }
  return ids;
}

std::vector<int> majority_vote(const std::vector<int>& instance_ids,
                               const Eigen::MatrixXd& semantic_logits) {
  const std::size_t m = instance_ids.size();
  if (static_cast<std::size_t>(semantic_logits.rows()) != m) {
    throw InvalidArgument("majority_vote: size mismatch");
  }
  std::vector<int> argmax(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::Index arg = 0;
    semantic_logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    argmax[i] = static_cast<int>(arg);
  }

  // Count argmax classes per instance.
  std::map<int, std::map<int, int>> votes;
  for (std::size_t i = 0; i < m; ++i) {
    if (instance_ids[i] != 0) ++votes[instance_ids[i]][argmax[i]];
  }
  std::map<int, int> winner;
  for (const auto& [id, counts] : votes) {
    int best_class = -1;
    int best_count = -1;
    for (const auto& [cls, count] : counts) {  // ascending class id
      if (count > best_count) {
        best_count = count;
        best_class = cls;
      }
    }
    winner[id] = best_class;
  }

  std::vector<int> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = instance_ids[i] != 0 ? winner[instance_ids[i]] : argmax[i];
  }
  return out;
}

PanopticPrediction associate_windows(const PanopticPrediction& prev,
                                     const PanopticPrediction& next,
                                     const std::vector<int>& shared_prev,
                                     const std::vector<int>& shared_next) {
  if (shared_prev.size() != shared_next.size()) {
    throw InvalidArgument("associate_windows: shared index lists differ");
  }
  if (shared_prev.empty()) {
    throw InvalidArgument("associate_windows: windows share no points");
  }

  // Overlap counts between prev and next instances on the shared points.
  std::map<std::pair<int, int>, int> overlap;
  for (std::size_t i = 0; i < shared_prev.size(); ++i) {
    const int pid = prev.instance[static_cast<std::size_t>(shared_prev[i])];
    const int nid = next.instance[static_cast<std::size_t>(shared_next[i])];
    if (pid != 0 && nid != 0) ++overlap[{pid, nid}];
  }

  // Greedy matching in descending overlap. Ties prefer an id mapping to
  // itself (keeps reapplication idempotent), then smaller ids.
  std::vector<std::tuple<int, int, int, int>> ranked;
  ranked.reserve(overlap.size());
  for (const auto& [key, count] : overlap) {
    ranked.emplace_back(-count, key.first, key.first == key.second ? 0 : 1,
                        key.second);
  }
  std::sort(ranked.begin(), ranked.end());

  std::set<int> prev_used;
  std::map<int, int> remap;  // next id -> final id
  for (const auto& [neg, pid, self, nid] : ranked) {
    if (prev_used.count(pid) || remap.count(nid)) continue;
    prev_used.insert(pid);
    remap[nid] = pid;
  }

  // Unmatched next ids: keep when collision-free, else allocate fresh.
  std::set<int> prev_ids;
  for (int id : prev.instance) {
    if (id != 0) prev_ids.insert(id);
  }
  std::set<int> taken = prev_ids;
  int fresh = taken.empty() ? 1 : *taken.rbegin() + 1;
  std::set<int> next_ids;
  for (int id : next.instance) {
    if (id != 0) next_ids.insert(id);
  }
  for (int nid : next_ids) {
    if (remap.count(nid)) {
      taken.insert(remap[nid]);
      continue;
    }
    if (!taken.count(nid)) {
      remap[nid] = nid;
      taken.insert(nid);
    } else {
      while (taken.count(fresh)) ++fresh;
      remap[nid] = fresh;
      taken.insert(fresh);
    }
  }

  PanopticPrediction out = next;
  for (auto& id : out.instance) {
    if (id != 0) id = remap[id];
  }
  return out;
}

}  // namespace eqpan
