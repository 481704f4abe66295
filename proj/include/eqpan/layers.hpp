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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eqpan/diffcore.hpp"
#include "eqpan/error.hpp"
#include "eqpan/group.hpp"
#include "eqpan/kernel.hpp"
#include "eqpan/pointcloud.hpp"

namespace eqpan {

/// Features indexed by (point, rotation anchor, channel), stored anchor-major
/// on the tape: row a * points + x. Built from a rotated input, the map obeys
/// values[R_j x][a] = values[x][(a - j) mod n] up to numeric tolerance.
template <typename Scalar>
struct EquivariantFeatureMap {
  NodeId node = -1;
  int points = 0;
  int anchors = 1;
  int channels = 0;
};

/// Per-point features unchanged by rotating the scene.
template <typename Scalar>
struct InvariantFeatureMap {
  NodeId node = -1;
  int points = 0;
  int channels = 0;
};

enum class PoolMode { kMax, kAvg, kAttentive };

/// Geometry of one convolution: the correlation-weighted gather plan plus
/// the anchor count it was built for.
struct ConvGeometry {
  std::shared_ptr<const GatherPlan> plan;
  int anchors = 1;
  int query_points = 0;
  int support_points = 0;
  bool lifted = false;  // plain per-point input (no anchor axis)
};

/// Builds the gather plan realizing, for query x and anchor a,
///   h(x, a) = sum_{y in N(x)} sum_i corr(y - x, p_{sigma_a(i)}) W_i f(y[, a]).
/// Rotating the kernel is the index permutation sigma_a, so block i of the
/// gather row (a, x) accumulates corr(d, p_l) f(y) with i = sigma_a^{-1}(l).
inline ConvGeometry make_conv_geometry(const Points& queries,
                                       const Points& support,
                                       const NeighborLists& neighbors,
                                       const KernelLayout& layout,
                                       bool lifted) {
  const int n = layout.group_order;
  const int mq = static_cast<int>(queries.rows());
  const int ms = static_cast<int>(support.rows());
  if (static_cast<int>(neighbors.lists.size()) != mq) {
    throw InvalidArgument("make_conv_geometry: neighbor lists do not match "
                          "query count");
  }

  auto plan = std::make_shared<GatherPlan>();
  plan->out_rows = n * mq;
  plan->in_rows = lifted ? ms : n * ms;
  plan->blocks = layout.size();

  // Correlations are shared across anchors; collect the active kernel points
  // per neighbor pair once.
  struct Active {
    int q, y, l;
    double w;
  };
  std::vector<Active> active;
  for (int q = 0; q < mq; ++q) {
    for (int y : neighbors.lists[static_cast<std::size_t>(q)]) {
      const Eigen::Vector3d d =
          (support.row(y) - queries.row(q)).transpose();
      for (int l = 0; l < layout.size(); ++l) {
        const double w =
            correlation(d, layout.points.row(l).transpose(), layout.influence);
        if (w > 0.0) active.push_back({q, y, l, w});
      }
    }
  }

  plan->entries.reserve(active.size() * static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    const std::vector<int>& inverse = layout.inverse_permutation(a);
    for (const auto& e : active) {
      plan->entries.push_back({a * mq + e.q,
                               lifted ? e.y : a * ms + e.y,
                               inverse[static_cast<std::size_t>(e.l)], e.w});
    }
  }
  return ConvGeometry{std::move(plan), n, mq, ms, lifted};
}

/// First layer: plain per-point features to an anchor-indexed map.
template <typename Scalar>
EquivariantFeatureMap<Scalar> lift_conv(Tape<Scalar>& tape, NodeId features,
                                        NodeId weights,
                                        const ConvGeometry& geom) {
  if (!geom.lifted) {
    throw InvalidArgument("lift_conv: geometry was built for anchor input");
  }
  const NodeId out = tape.kpconv(features, weights, geom.plan);
  return {out, geom.query_points, geom.anchors,
          static_cast<int>(tape.value(out).cols())};
}

/// Spatial convolution applied per anchor with the permuted kernel.
template <typename Scalar>
EquivariantFeatureMap<Scalar> group_conv(Tape<Scalar>& tape,
                                         const EquivariantFeatureMap<Scalar>& in,
                                         NodeId weights,
                                         const ConvGeometry& geom) {
  if (geom.lifted) {
    throw InvalidArgument("group_conv: geometry was built for plain input");
  }
  if (geom.anchors != in.anchors || geom.support_points != in.points) {
    throw InvalidArgument("group_conv: input map does not match geometry");
  }
  const NodeId out = tape.kpconv(in.node, weights, geom.plan);
  return {out, geom.query_points, geom.anchors,
          static_cast<int>(tape.value(out).cols())};
}

/// Circulant mixing across anchors (weight sharing over the cyclic group).
template <typename Scalar>
EquivariantFeatureMap<Scalar> anchor_mix(Tape<Scalar>& tape,
                                         const EquivariantFeatureMap<Scalar>& in,
                                         NodeId mix) {
  const NodeId out = tape.anchor_mix(in.node, mix, in.anchors);
  return {out, in.points, in.anchors,
          static_cast<int>(tape.value(out).cols())};
}

/// Per-point, per-anchor affine map (a 1-by-1 convolution).
template <typename Scalar>
EquivariantFeatureMap<Scalar> pointwise_linear(
    Tape<Scalar>& tape, const EquivariantFeatureMap<Scalar>& in, NodeId weights,
    NodeId bias = -1) {
  NodeId out = tape.matmul(in.node, weights);
  if (bias >= 0) out = tape.add_row_bias(out, bias);
  return {out, in.points, in.anchors,
          static_cast<int>(tape.value(out).cols())};
}

/// Gather row indices copying each fine point's features from its nearest
/// coarse point, per anchor; distance ties keep the smallest coarse index.
inline std::vector<int> make_upsample_indices(const Points& fine,
                                              const Points& coarse,
                                              int anchors) {
  if (coarse.rows() == 0) {
    throw InvalidState("make_upsample_indices: empty coarse cloud");
  }
  const int mf = static_cast<int>(fine.rows());
  const int mc = static_cast<int>(coarse.rows());
  std::vector<int> nearest(static_cast<std::size_t>(mf), 0);
  for (int x = 0; x < mf; ++x) {
    double best = (coarse.row(0) - fine.row(x)).squaredNorm();
    int arg = 0;
    for (int y = 1; y < mc; ++y) {
      const double d = (coarse.row(y) - fine.row(x)).squaredNorm();
      if (d < best) {
        best = d;
        arg = y;
      }
    }
    nearest[static_cast<std::size_t>(x)] = arg;
  }
  std::vector<int> rows(static_cast<std::size_t>(anchors * mf));
  for (int a = 0; a < anchors; ++a) {
    for (int x = 0; x < mf; ++x) {
      rows[static_cast<std::size_t>(a * mf + x)] =
          a * mc + nearest[static_cast<std::size_t>(x)];
    }
  }
  return rows;
}

template <typename Scalar>
EquivariantFeatureMap<Scalar> nn_upsample(Tape<Scalar>& tape,
                                          const EquivariantFeatureMap<Scalar>& coarse,
                                          const std::vector<int>& rows,
                                          int fine_points) {
  if (static_cast<int>(rows.size()) != coarse.anchors * fine_points) {
    throw InvalidArgument("nn_upsample: row index count mismatch");
  }
  const NodeId out = tape.gather_rows(coarse.node, rows);
  return {out, fine_points, coarse.anchors, coarse.channels};
}

/// Reduction over the anchor axis producing rotation-invariant features.
/// Attentive mode uses a learned per-anchor score (softmax weights).
template <typename Scalar>
InvariantFeatureMap<Scalar> invariant_pool(Tape<Scalar>& tape,
                                           const EquivariantFeatureMap<Scalar>& in,
                                           PoolMode mode,
                                           NodeId attention_w = -1) {
  NodeId out;
  switch (mode) {
    case PoolMode::kMax:
      out = tape.reduce_anchors(in.node, in.anchors, Tape<Scalar>::Pool::kMax);
      break;
    case PoolMode::kAvg:
      out = tape.reduce_anchors(in.node, in.anchors, Tape<Scalar>::Pool::kAvg);
      break;
    case PoolMode::kAttentive:
      if (attention_w < 0) {
        throw InvalidArgument(
            "invariant_pool: attentive mode needs a scoring parameter");
      }
      out = tape.attentive_pool(in.node, attention_w, in.anchors);
      break;
    default:
      throw InvalidArgument("invariant_pool: unknown mode");
  }
  return {out, in.points, in.channels};
}

/// Per-point rotation scores: the same linear functional applied to every
/// anchor's features, so rotating the input permutes the score vector.
template <typename Scalar>
NodeId rotation_scores(Tape<Scalar>& tape,
                       const EquivariantFeatureMap<Scalar>& in, NodeId w) {
  return tape.anchor_scores(in.node, w, in.anchors);
}

/// Argmax anchor per point (ties to the smaller index) plus the decoded
/// global vector R_i * u from per-anchor local vectors. Inference-only.
template <typename Scalar>
std::pair<std::vector<int>, Points> select_coordinate(
    const MatrixX<Scalar>& scores, const MatrixX<Scalar>& anchor_vectors,
    const CyclicGroup& group) {
  const Eigen::Index m = scores.rows();
  if (scores.cols() != group.n || anchor_vectors.rows() != group.n * m ||
      anchor_vectors.cols() != 3) {
    throw InvalidArgument("select_coordinate: shape mismatch");
  }
  std::vector<int> chosen(static_cast<std::size_t>(m), 0);
  Points global(m, 3);
  for (Eigen::Index x = 0; x < m; ++x) {
    int arg = 0;
    for (int a = 1; a < group.n; ++a) {
      if (scores(x, a) > scores(x, arg)) arg = a;
    }
    chosen[static_cast<std::size_t>(x)] = arg;
    const Eigen::Vector3d local =
        anchor_vectors.row(arg * m + x).template cast<double>().transpose();
    global.row(x) = (group.matrices[arg] * local).transpose();
  }
  return {std::move(chosen), std::move(global)};
}

/// Normalization over points and anchors jointly (per channel), followed by
/// a learned per-channel affine map; commutes with anchor shifts.
template <typename Scalar>
EquivariantFeatureMap<Scalar> normalize_map(Tape<Scalar>& tape,
                                            const EquivariantFeatureMap<Scalar>& in,
                                            NodeId gamma, NodeId beta,
                                            Scalar eps = Scalar(1e-5)) {
  const NodeId out = tape.normalize_features(in.node, gamma, beta, eps);
  return {out, in.points, in.anchors, in.channels};
}

template <typename Scalar>
EquivariantFeatureMap<Scalar> leaky_relu_map(Tape<Scalar>& tape,
                                             const EquivariantFeatureMap<Scalar>& in,
                                             Scalar slope) {
  return {tape.leaky_relu(in.node, slope), in.points, in.anchors, in.channels};
}

/// Row indices reading each point's features at a chosen anchor.
inline std::vector<int> anchor_row_indices(const std::vector<int>& anchor,
                                           int points) {
  std::vector<int> rows(anchor.size());
  for (std::size_t x = 0; x < anchor.size(); ++x) {
    rows[x] = anchor[x] * points + static_cast<int>(x);
  }
  return rows;
}

}  // namespace eqpan
