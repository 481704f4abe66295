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

#include "eqpan/diffcore.hpp"
#include "eqpan/error.hpp"
#include "eqpan/group.hpp"
#include "eqpan/layers.hpp"
#include "eqpan/scenegen.hpp"

namespace eqpan {

/// How invariant targets (semantic class, centerness) read the equivariant
/// features: an invariant pooling over anchors, or the rotational coordinate
/// selection (rcs) that reads the anchor chosen by the rotation head.
enum class InvariantMode { kMax, kAvg, kAttentive, kRcs };

struct HeadConfig {
  InvariantMode invariant_mode = InvariantMode::kAvg;
  bool use_rotation_head = true;
  bool rhead_on_plain_backbone = false;  // ablation: plain backbone + R-head
  double lambda_sem = 1.0;
  double lambda_off = 1.0;
  double lambda_rot = 1.0;
  double lambda_ctr = 1.0;
};

inline void validate(const HeadConfig& cfg) {
  if (cfg.invariant_mode == InvariantMode::kRcs && !cfg.use_rotation_head) {
    throw SchemaError(
        "HeadConfig: rcs invariant prediction requires the rotation head");
  }
  if (cfg.rhead_on_plain_backbone && !cfg.use_rotation_head) {
    throw SchemaError("HeadConfig: the plain-backbone R-head ablation needs "
                      "use_rotation_head");
  }
}

inline std::string to_string(InvariantMode mode) {
  switch (mode) {
    case InvariantMode::kMax: return "max";
    case InvariantMode::kAvg: return "avg";
    case InvariantMode::kAttentive: return "attentive";
    case InvariantMode::kRcs: return "rcs";
  }
  return "?";
}

inline InvariantMode invariant_mode_from_string(const std::string& s) {
  if (s == "max") return InvariantMode::kMax;
  if (s == "avg") return InvariantMode::kAvg;
  if (s == "attentive") return InvariantMode::kAttentive;
  if (s == "rcs") return InvariantMode::kRcs;
  throw SchemaError("unknown invariant pooling mode '" + s + "'");
}

/// Anchor label for an offset vector; degenerate (purely vertical) offsets
/// fall back to anchor 0.
inline int offset_anchor_label(const Eigen::Vector3d& v,
                               const CyclicGroup& group) {
  return try_anchor_of_vector(group, v).value_or(0);
}

/// The regression target in the label's local frame: R_{i}^{-1} v.
inline Eigen::Vector3d to_local_frame(const Eigen::Vector3d& v, int label,
                                      const CyclicGroup& group) {
  return group.matrices[group.inverse(label)] * v;
}

/// Decode back to the global frame: R_i * u.
inline Eigen::Vector3d to_global_frame(const Eigen::Vector3d& local,
                                       int label, const CyclicGroup& group) {
  return group.matrices[label] * local;
}

/// Per-point supervision for the rotation-classification + local-frame
/// offset regression: shared by the equivariant offset head and the
/// plain-backbone R-head ablation.
struct OffsetSupervision {
  std::vector<int> anchor_label;             // i(v); 0 where degenerate
  std::vector<std::uint8_t> rotation_mask;   // thing and non-degenerate
  std::vector<std::uint8_t> regression_mask; // thing
  MatrixX<double> local_targets;             // R_{i(v)}^{-1} v per point
};

inline OffsetSupervision make_offset_supervision(const GroundTruthFields& gt,
                                                 const CyclicGroup& group) {
  const Eigen::Index m = gt.size();
  OffsetSupervision sup;
  sup.anchor_label.assign(static_cast<std::size_t>(m), 0);
  sup.rotation_mask.assign(static_cast<std::size_t>(m), 0);
  sup.regression_mask.assign(static_cast<std::size_t>(m), 0);
  sup.local_targets = MatrixX<double>::Zero(m, 3);
  for (Eigen::Index x = 0; x < m; ++x) {
    const auto xs = static_cast<std::size_t>(x);
    const bool thing = gt.instance[xs] != 0;
    if (!thing) continue;
    sup.regression_mask[xs] = 1;
    const int label = gt.rotation_anchor[xs];
    sup.anchor_label[xs] = label;
    sup.rotation_mask[xs] = gt.rotation_valid[xs];
    sup.local_targets.row(x) =
        to_local_frame(gt.offsets.row(x).transpose(), label, group)
            .transpose();
  }
  return sup;
}

template <typename Scalar>
struct SemanticHead {
  NodeId logits = -1;
  NodeId loss = -1;
};

/// Pointwise linear map from invariant features to class logits with mean
/// cross-entropy over all points.
template <typename Scalar>
SemanticHead<Scalar> semantic_head(Tape<Scalar>& tape, NodeId inv_features,
                                   NodeId weights, NodeId bias,
                                   const std::vector<int>& labels) {
  SemanticHead<Scalar> head;
  head.logits = tape.add_row_bias(tape.matmul(inv_features, weights), bias);
  std::vector<std::uint8_t> mask(labels.size(), 1);
  head.loss = tape.softmax_cross_entropy(head.logits, labels, mask);
  return head;
}

template <typename Scalar>
struct CenternessHead {
  NodeId score = -1;  // m x 1 in [0, 1]
  NodeId loss = -1;
};

template <typename Scalar>
CenternessHead<Scalar> centerness_head(Tape<Scalar>& tape, NodeId inv_features,
                                       NodeId weights, NodeId bias,
                                       const Eigen::VectorXd& target) {
  CenternessHead<Scalar> head;
  head.score =
      tape.sigmoid(tape.add_row_bias(tape.matmul(inv_features, weights), bias));
  MatrixX<Scalar> t = target.cast<Scalar>();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(target.size()), 1);
  head.loss = tape.mse_loss(head.score, std::move(t), std::move(mask));
  return head;
}

template <typename Scalar>
struct OffsetHead {
  NodeId scores = -1;        // m x n rotation scores
  NodeId anchor_vectors = -1;  // (n*m) x 3 local vectors, all anchors
  NodeId rotation_loss = -1;
  NodeId regression_loss = -1;
};

/// Rotation classification on the per-anchor scores plus L1 regression of
/// the local-frame offset read at the ground-truth anchor. Stuff points are
/// masked out of both losses; degenerate offsets stay in the regression with
/// label 0 but leave the classification.
template <typename Scalar>
OffsetHead<Scalar> offset_head(Tape<Scalar>& tape,
                               const EquivariantFeatureMap<Scalar>& features,
                               NodeId score_w, NodeId vec_w, NodeId vec_b,
                               const OffsetSupervision& sup) {
  OffsetHead<Scalar> head;
  head.scores = rotation_scores(tape, features, score_w);
  head.anchor_vectors =
      pointwise_linear(tape, features, vec_w, vec_b).node;
  head.rotation_loss =
      tape.softmax_cross_entropy(head.scores, sup.anchor_label,
                                 sup.rotation_mask);
  const NodeId picked = tape.gather_rows(
      head.anchor_vectors,
      anchor_row_indices(sup.anchor_label, features.points));
  head.regression_loss = tape.l1_loss(
      picked, sup.local_targets.template cast<Scalar>(), sup.regression_mask);
  return head;
}

/// Appendix-style ablation: the same rotation-classification scheme driven
/// by plain per-point features from a backbone without an anchor axis. The
/// head predicts `rotation_anchors` scores and local vectors per point.
template <typename Scalar>
OffsetHead<Scalar> rhead_plain(Tape<Scalar>& tape, NodeId plain_features,
                               NodeId score_w, NodeId vec_w, NodeId vec_b,
                               int rotation_anchors,
                               const OffsetSupervision& sup) {
  OffsetHead<Scalar> head;
  head.scores = tape.matmul(plain_features, score_w);  // m x n_r
  head.anchor_vectors =
      tape.add_row_bias(tape.matmul(plain_features, vec_w), vec_b);  // m x 3n_r
  head.rotation_loss = tape.softmax_cross_entropy(
      head.scores, sup.anchor_label, sup.rotation_mask);
  const NodeId picked =
      tape.gather_col_blocks(head.anchor_vectors, sup.anchor_label, 3);
  head.regression_loss = tape.l1_loss(
      picked, sup.local_targets.template cast<Scalar>(), sup.regression_mask);
  (void)rotation_anchors;
  return head;
}

/// Logged per-part loss values alongside the weighted total node.
template <typename Scalar>
struct LossParts {
  NodeId total = -1;
  double semantic = 0.0;
  double offset = 0.0;
  double rotation = 0.0;
  double centerness = 0.0;
  double weighted_total = 0.0;
};

template <typename Scalar>
LossParts<Scalar> total_loss(Tape<Scalar>& tape, const HeadConfig& cfg,
                             NodeId sem_loss, NodeId reg_loss, NodeId rot_loss,
                             NodeId ctr_loss) {
  std::vector<NodeId> parts;
  std::vector<Scalar> weights;
  LossParts<Scalar> out;
  auto consider = [&](NodeId node, double lambda, double* logged) {
    if (node < 0) return;
    *logged = static_cast<double>(tape.value(node)(0, 0));
    if (lambda != 0.0) {
      parts.push_back(node);
      weights.push_back(static_cast<Scalar>(lambda));
    }
  };
  consider(sem_loss, cfg.lambda_sem, &out.semantic);
  consider(reg_loss, cfg.lambda_off, &out.offset);
  consider(rot_loss, cfg.lambda_rot, &out.rotation);
  consider(ctr_loss, cfg.lambda_ctr, &out.centerness);
  if (parts.empty()) {
    throw SchemaError("total_loss: every loss weight is zero");
  }
  out.total = tape.weighted_sum(parts, weights);
  out.weighted_total = static_cast<double>(tape.value(out.total)(0, 0));
  return out;
}

}  // namespace eqpan
