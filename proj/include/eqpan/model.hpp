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

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eqpan/checkpoint.hpp"
#include "eqpan/diffcore.hpp"
#include "eqpan/group.hpp"
#include "eqpan/heads.hpp"
#include "eqpan/kernel.hpp"
#include "eqpan/layers.hpp"
#include "eqpan/optim.hpp"
#include "eqpan/pointcloud.hpp"
#include "eqpan/rng.hpp"
#include "eqpan/scenegen.hpp"

namespace eqpan {

struct ModelConfig {
  int anchors = 4;      // cyclic group order of the backbone
  int width = 8;        // channels at the finest level
  int num_classes = 3;
  std::vector<int> thing_classes = {1, 2};
  double base_radius = 1.0;    // neighbor/kernel radius at the finest level
  double coarse_radius = 2.0;  // radius at the subsampled level
  double subsample_cell = 0.8;
  double leaky_slope = 0.1;
  HeadConfig heads;
  int rhead_anchors = 1;  // > 1 with anchors == 1: plain-backbone R-head
  std::uint64_t init_seed = 1;
};

/// Per-layer parameter counts and the peak feature-map element count
/// observed on a forward pass.
struct ModelSizeReport {
  struct Layer {
    std::string name;
    std::int64_t params = 0;
  };
  std::vector<Layer> layers;
  std::int64_t total_params = 0;
  std::int64_t peak_feature_elements = 0;
  int kernel_points = 0;
  int anchors = 0;
  std::vector<int> widths;
  int points = 0;
};

/// Outputs of one forward pass. The tape owns all intermediate values; node
/// ids below index into it.
template <typename Scalar>
struct ForwardPass {
  Tape<Scalar> tape;
  std::vector<NodeId> param_ids;
  NodeId logits = -1;          // m x classes
  NodeId centerness = -1;      // m x 1
  NodeId rot_scores = -1;      // m x n_rot (when rotation head active)
  NodeId anchor_vectors = -1;  // (n*m) x 3, or m x 3n_r for the plain R-head
  NodeId inv_features = -1;    // m x c invariant (or anchor-selected) features
  EquivariantFeatureMap<Scalar> final_map;
  PointCloud level1;  // the subsampled support level
  int points = 0;
  std::int64_t peak_feature_elements = 0;
};

/// Encoder/decoder over two resolution levels with the anchor-indexed
/// feature maps, plus the prediction heads.
template <typename Scalar>
class Model {
 public:
  explicit Model(const ModelConfig& cfg)
      : cfg_(cfg),
        group_(make_group(cfg.anchors)),
        layout_fine_(build_kernel(group_, cfg.base_radius)),
        layout_coarse_(build_kernel(group_, cfg.coarse_radius)) {
    validate(cfg_.heads);
    if (cfg_.rhead_anchors > 1 && cfg_.anchors != 1) {
      throw SchemaError("Model: the plain-backbone R-head requires a "
                        "single-anchor backbone");
    }
    if (cfg_.rhead_anchors > 1 &&
        cfg_.heads.invariant_mode == InvariantMode::kRcs) {
      throw SchemaError("Model: rcs invariant prediction is undefined on the "
                        "plain-backbone R-head");
    }
    if (cfg_.rhead_anchors > 1) {
      rot_group_ = make_group(cfg_.rhead_anchors);
    } else {
      rot_group_ = group_;
    }
    init_params();
  }

  const ModelConfig& config() const { return cfg_; }
  const CyclicGroup& group() const { return group_; }
  /// Group used for rotation labels/decoding (differs from the backbone
  /// group only in the plain-backbone R-head ablation).
  const CyclicGroup& rotation_group() const { return rot_group_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  /// Runs the network. `sup` supplies ground-truth anchors for the rcs
  /// invariant-feature path during training; when absent, rcs reads the
  /// predicted argmax anchors.
  ForwardPass<Scalar> forward(const PointCloud& cloud,
                              const OffsetSupervision* sup = nullptr) const {
    const int n = cfg_.anchors;
    const int m = static_cast<int>(cloud.size());
    if (m == 0) throw InvalidArgument("Model::forward: empty cloud");

    ForwardPass<Scalar> fp;
    fp.points = m;
    Tape<Scalar>& tape = fp.tape;
    fp.param_ids = params_.attach(tape);
    auto P = [&](int idx) { return fp.param_ids[static_cast<std::size_t>(idx)]; };

    // Geometry pyramid. The coarse level comes from grid subsampling; its
    // labels are irrelevant here, only positions matter.
    fp.level1 = grid_subsample(cloud, cfg_.subsample_cell);
    const Points& pos0 = cloud.positions;
    const Points& pos1 = fp.level1.positions;
    const NeighborLists nb00 =
        radius_neighbors(pos0, pos0, cfg_.base_radius);
    const NeighborLists nb01 =
        radius_neighbors(pos0, pos1, cfg_.coarse_radius);
    const NeighborLists nb11 =
        radius_neighbors(pos1, pos1, cfg_.coarse_radius);
    const ConvGeometry geo_lift =
        make_conv_geometry(pos0, pos0, nb00, layout_fine_, true);
    const ConvGeometry geo_down =
        make_conv_geometry(pos1, pos0, nb01, layout_coarse_, false);
    const ConvGeometry geo_coarse =
        make_conv_geometry(pos1, pos1, nb11, layout_coarse_, false);
    const std::vector<int> up_rows = make_upsample_indices(pos0, pos1, n);

    // Input features: a constant channel plus the height, both invariant
    // under rotations about Z.
    MatrixX<Scalar> in_feats(m, 2);
    for (int i = 0; i < m; ++i) {
      in_feats(i, 0) = Scalar(1);
      in_feats(i, 1) = static_cast<Scalar>(pos0(i, 2));
    }
    const NodeId input = tape.leaf(std::move(in_feats), "input");

    const Scalar slope = static_cast<Scalar>(cfg_.leaky_slope);
    auto block = [&](EquivariantFeatureMap<Scalar> map, int mix_idx,
                     int gamma_idx, int beta_idx) {
      map = anchor_mix(tape, map, P(mix_idx));
      map = normalize_map(tape, map, P(gamma_idx), P(beta_idx));
      return leaky_relu_map(tape, map, slope);
    };

    // Encoder.
    auto enc0 = lift_conv(tape, input, P(w_lift_), geo_lift);
    enc0 = block(enc0, m_lift_, g_lift_, b_lift_);
    auto enc1 = group_conv(tape, enc0, P(w_down_), geo_down);
    enc1 = block(enc1, m_down_, g_down_, b_down_);
    auto enc2 = group_conv(tape, enc1, P(w_coarse_), geo_coarse);
    enc2 = block(enc2, m_coarse_, g_coarse_, b_coarse_);

    // Decoder: upsample, concatenate the fine skip, 1x1 convolution.
    auto up = nn_upsample(tape, enc2, up_rows, m);
    EquivariantFeatureMap<Scalar> merged{
        tape.concat_cols(enc0.node, up.node), m, n,
        enc0.channels + up.channels};
    auto dec = pointwise_linear(tape, merged, P(w_dec_));
    dec = normalize_map(tape, dec, P(g_dec_), P(b_dec_));
    dec = leaky_relu_map(tape, dec, slope);
    fp.final_map = dec;

    // Heads.
    const int c = dec.channels;
    NodeId inv = -1;
    if (cfg_.heads.invariant_mode == InvariantMode::kRcs) {
      // Features read at the selected anchor: ground-truth anchors during
      // training, predicted argmax otherwise.
      fp.rot_scores = rotation_scores(tape, dec, P(w_score_));
      std::vector<int> chosen(static_cast<std::size_t>(m), 0);
      if (sup) {
        chosen = sup->anchor_label;
      } else {
        const auto& s = tape.value(fp.rot_scores);
        for (int x = 0; x < m; ++x) {
          int arg = 0;
          for (int a = 1; a < n; ++a) {
            if (s(x, a) > s(x, arg)) arg = a;
          }
          chosen[static_cast<std::size_t>(x)] = arg;
        }
      }
      inv = tape.gather_rows(dec.node, anchor_row_indices(chosen, m));
    } else {
      PoolMode mode = PoolMode::kAvg;
      if (cfg_.heads.invariant_mode == InvariantMode::kMax) {
        mode = PoolMode::kMax;
      } else if (cfg_.heads.invariant_mode == InvariantMode::kAttentive) {
        mode = PoolMode::kAttentive;
      }
      inv = invariant_pool(tape, dec, mode,
                           mode == PoolMode::kAttentive ? P(w_att_) : -1)
                .node;
    }
    fp.inv_features = inv;

    fp.logits = tape.add_row_bias(tape.matmul(inv, P(w_cls_)), P(b_cls_));
    fp.centerness =
        tape.sigmoid(tape.add_row_bias(tape.matmul(inv, P(w_ctr_)), P(b_ctr_)));

    if (cfg_.heads.use_rotation_head) {
      if (cfg_.rhead_anchors > 1) {
        fp.rot_scores = tape.matmul(inv, P(w_score_));
        fp.anchor_vectors =
            tape.add_row_bias(tape.matmul(inv, P(w_vec_)), P(b_vec_));
      } else {
        if (fp.rot_scores < 0) {
          fp.rot_scores = rotation_scores(tape, dec, P(w_score_));
        }
        fp.anchor_vectors =
            pointwise_linear(tape, dec, P(w_vec_), P(b_vec_)).node;
      }
    } else {
      // Plain offset regression: one vector per point from the invariant
      // features (only meaningful for the n = 1 baseline).
      fp.anchor_vectors =
          tape.add_row_bias(tape.matmul(inv, P(w_vec_)), P(b_vec_));
    }

    fp.peak_feature_elements = std::max<std::int64_t>(
        {static_cast<std::int64_t>(m) * n * enc0.channels,
         static_cast<std::int64_t>(pos1.rows()) * n * enc2.channels,
         static_cast<std::int64_t>(m) * n * merged.channels,
         static_cast<std::int64_t>(m) * n * c});
    return fp;
  }

  /// Builds the training loss on the forward tape.
  LossParts<Scalar> loss(ForwardPass<Scalar>& fp, const GroundTruthFields& gt,
                         const OffsetSupervision& sup) const {
    Tape<Scalar>& tape = fp.tape;
    std::vector<std::uint8_t> all(static_cast<std::size_t>(fp.points), 1);
    const NodeId sem_loss =
        tape.softmax_cross_entropy(fp.logits, gt.semantic, all);

    MatrixX<Scalar> ctr_target(fp.points, 1);
    for (int x = 0; x < fp.points; ++x) ctr_target(x, 0) = gt.centerness[x];
    const NodeId ctr_loss = tape.mse_loss(fp.centerness, std::move(ctr_target),
                                          std::move(all));

    NodeId rot_loss = -1;
    NodeId reg_loss = -1;
    if (cfg_.heads.use_rotation_head) {
      rot_loss = tape.softmax_cross_entropy(fp.rot_scores, sup.anchor_label,
                                            sup.rotation_mask);
      NodeId picked;
      if (cfg_.rhead_anchors > 1) {
        picked = tape.gather_col_blocks(fp.anchor_vectors, sup.anchor_label, 3);
      } else {
        picked = tape.gather_rows(
            fp.anchor_vectors, anchor_row_indices(sup.anchor_label, fp.points));
      }
      reg_loss = tape.l1_loss(picked,
                              sup.local_targets.template cast<Scalar>(),
                              sup.regression_mask);
    } else {
      // Global-frame regression against the raw offsets.
      MatrixX<Scalar> target = MatrixX<Scalar>::Zero(fp.points, 3);
      for (int x = 0; x < fp.points; ++x) {
        for (int j = 0; j < 3; ++j) {
          target(x, j) = static_cast<Scalar>(gt.offsets(x, j));
        }
      }
      reg_loss =
          tape.l1_loss(fp.anchor_vectors, std::move(target),
                       sup.regression_mask);
    }
    return total_loss(tape, cfg_.heads, sem_loss, reg_loss, rot_loss,
                      ctr_loss);
  }

  /// Decoded global-frame offsets (and chosen anchors) for inference.
  std::pair<std::vector<int>, Points> decode_offsets(
      const ForwardPass<Scalar>& fp) const {
    const auto& tape = fp.tape;
    const int m = fp.points;
    if (!cfg_.heads.use_rotation_head) {
      Points out = tape.value(fp.anchor_vectors).template cast<double>();
      return {std::vector<int>(static_cast<std::size_t>(m), 0),
              std::move(out)};
    }
    if (cfg_.rhead_anchors > 1) {
      const auto& scores = tape.value(fp.rot_scores);
      const auto& vecs = tape.value(fp.anchor_vectors);
      std::vector<int> chosen(static_cast<std::size_t>(m), 0);
      Points out(m, 3);
      for (int x = 0; x < m; ++x) {
        int arg = 0;
        for (int a = 1; a < cfg_.rhead_anchors; ++a) {
          if (scores(x, a) > scores(x, arg)) arg = a;
        }
        chosen[static_cast<std::size_t>(x)] = arg;
        const Eigen::Vector3d local =
            vecs.row(x).segment(3 * arg, 3).template cast<double>()
                .transpose();
        out.row(x) = (rot_group_.matrices[arg] * local).transpose();
      }
      return {std::move(chosen), std::move(out)};
    }
    return select_coordinate(tape.value(fp.rot_scores),
                             tape.value(fp.anchor_vectors), group_);
  }

  ModelSizeReport size_report(const ForwardPass<Scalar>& fp) const {
    ModelSizeReport report;
    for (int i = 0; i < params_.count(); ++i) {
      report.layers.push_back(
          {params_[i].name,
           static_cast<std::int64_t>(params_[i].value.size())});
      report.total_params += params_[i].value.size();
    }
    report.peak_feature_elements = fp.peak_feature_elements;
    report.kernel_points = layout_fine_.size();
    report.anchors = cfg_.anchors;
    report.widths = {cfg_.width, 2 * cfg_.width};
    report.points = fp.points;
    return report;
  }

  std::vector<std::pair<std::string, MatrixX<Scalar>>> named_arrays() const {
    return params_.named_arrays();
  }

  void load_arrays(const Checkpoint<Scalar>& ckpt) {
    for (int i = 0; i < params_.count(); ++i) {
      auto& p = params_[i];
      const MatrixX<Scalar>* stored = ckpt.find(p.name);
      if (!stored) {
        throw SchemaError("checkpoint is missing parameter '" + p.name + "'");
      }
      if (stored->rows() != p.value.rows() ||
          stored->cols() != p.value.cols()) {
        throw SchemaError("checkpoint shape mismatch for '" + p.name + "'");
      }
      p.value = *stored;
    }
  }

 private:
  void init_params() {
    CounterRng rng = CounterRng(cfg_.init_seed).fork("init");
    std::uint64_t stream = 0;
    auto init = [&rng, &stream](Eigen::Index rows, Eigen::Index cols,
                                double scale) {
      CounterRng local = rng.fork(++stream);
      MatrixX<Scalar> m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          m(i, j) = static_cast<Scalar>(scale * local.normal());
        }
      }
      return m;
    };
    auto he = [](Eigen::Index fan_in) {
      return std::sqrt(2.0 / static_cast<double>(fan_in));
    };

    const int n = cfg_.anchors;
    const int c = cfg_.width;
    const int c2 = 2 * c;
    const int k0 = layout_fine_.size();
    const int k1 = layout_coarse_.size();
    const int classes = cfg_.num_classes;
    const int n_rot = cfg_.rhead_anchors > 1 ? cfg_.rhead_anchors : n;

    auto ones_row = [](Eigen::Index cols) {
      return MatrixX<Scalar>::Ones(1, cols);
    };
    auto zeros_row = [](Eigen::Index cols) {
      return MatrixX<Scalar>::Zero(1, cols);
    };

    w_lift_ = params_.add("enc0/conv", init(k0 * 2, c, he(k0 * 2)));
    m_lift_ = params_.add("enc0/mix", init(n * c, c, he(n * c)));
    g_lift_ = params_.add("enc0/gamma", ones_row(c));
    b_lift_ = params_.add("enc0/beta", zeros_row(c));

    w_down_ = params_.add("enc1/conv", init(k1 * c, c2, he(k1 * c)));
    m_down_ = params_.add("enc1/mix", init(n * c2, c2, he(n * c2)));
    g_down_ = params_.add("enc1/gamma", ones_row(c2));
    b_down_ = params_.add("enc1/beta", zeros_row(c2));

    w_coarse_ = params_.add("enc2/conv", init(k1 * c2, c2, he(k1 * c2)));
    m_coarse_ = params_.add("enc2/mix", init(n * c2, c2, he(n * c2)));
    g_coarse_ = params_.add("enc2/gamma", ones_row(c2));
    b_coarse_ = params_.add("enc2/beta", zeros_row(c2));

    w_dec_ = params_.add("dec/conv1x1", init(c + c2, c, he(c + c2)));
    g_dec_ = params_.add("dec/gamma", ones_row(c));
    b_dec_ = params_.add("dec/beta", zeros_row(c));

    w_cls_ = params_.add("head/semantic_w", init(c, classes, he(c)));
    b_cls_ = params_.add("head/semantic_b", zeros_row(classes));
    w_ctr_ = params_.add("head/centerness_w", init(c, 1, he(c)));
    b_ctr_ = params_.add("head/centerness_b", zeros_row(1));

    if (cfg_.heads.invariant_mode == InvariantMode::kAttentive) {
      w_att_ = params_.add("head/attention_w", init(c, 1, he(c)));
    }
    if (cfg_.heads.use_rotation_head) {
      if (cfg_.rhead_anchors > 1) {
        w_score_ = params_.add("head/rotation_w", init(c, n_rot, he(c)));
        w_vec_ = params_.add("head/vector_w", init(c, 3 * n_rot, he(c)));
        b_vec_ = params_.add("head/vector_b", zeros_row(3 * n_rot));
      } else {
        w_score_ = params_.add("head/rotation_w", init(c, 1, he(c)));
        w_vec_ = params_.add("head/vector_w", init(c, 3, he(c)));
        b_vec_ = params_.add("head/vector_b", zeros_row(3));
      }
    } else {
      w_vec_ = params_.add("head/vector_w", init(c, 3, he(c)));
      b_vec_ = params_.add("head/vector_b", zeros_row(3));
    }
  }

  ModelConfig cfg_;
  CyclicGroup group_;
  CyclicGroup rot_group_;
  KernelLayout layout_fine_;
  KernelLayout layout_coarse_;
  ParamStore<Scalar> params_;

  int w_lift_ = -1, m_lift_ = -1, g_lift_ = -1, b_lift_ = -1;
  int w_down_ = -1, m_down_ = -1, g_down_ = -1, b_down_ = -1;
  int w_coarse_ = -1, m_coarse_ = -1, g_coarse_ = -1, b_coarse_ = -1;
  int w_dec_ = -1, g_dec_ = -1, b_dec_ = -1;
  int w_cls_ = -1, b_cls_ = -1, w_ctr_ = -1, b_ctr_ = -1;
  int w_att_ = -1, w_score_ = -1, w_vec_ = -1, b_vec_ = -1;
};

}  // namespace eqpan
