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
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eqpan/error.hpp"

namespace eqpan {

template <typename Scalar>
using MatrixX =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using NodeId = int;

/// Precomputed sparse plan for a correlation-weighted gather: entry
/// (out_row, in_row, block, w) accumulates `w * input.row(in_row)` into
/// column block `block` of `scratch.row(out_row)`; the convolution output is
/// then `scratch * weights`. Entries execute in order, so accumulation is
/// deterministic.
struct GatherPlan {
  struct Entry {
    int out_row;
    int in_row;
    int block;
    double w;
  };
  int out_rows = 0;
  int in_rows = 0;
  int blocks = 0;
  std::vector<Entry> entries;
};

/// Reverse-mode tape over a small fixed op set. Values are dense row-major
/// matrices; scalars are 1x1. Nodes execute forward immediately; backward
/// replays registered pull closures in reverse creation order, so gradient
/// accumulation order is deterministic.
///
/// Feature maps with a rotation-anchor axis are stored anchor-major: row
/// a * points + x holds the features of point x at anchor a.
template <typename Scalar>
class Tape {
 public:
  enum class Pool { kMax, kAvg };

  NodeId leaf(MatrixX<Scalar> value, std::string name = "leaf") {
    return push(std::move(value), std::move(name), nullptr);
  }

  const MatrixX<Scalar>& value(NodeId id) const { return nodes_[id].value; }
  const MatrixX<Scalar>& grad(NodeId id) const { return nodes_[id].grad; }
  const std::string& name(NodeId id) const { return nodes_[id].name; }
  int size() const { return static_cast<int>(nodes_.size()); }

  NodeId matmul(NodeId a, NodeId b) {
    check_cols(a, rows(b), "matmul");
    MatrixX<Scalar> out = value(a) * value(b);
    return push(std::move(out), "matmul", [a, b](Tape& t, NodeId id) {
      t.nodes_[a].grad.noalias() += t.nodes_[id].grad * t.value(b).transpose();
      t.nodes_[b].grad.noalias() += t.value(a).transpose() * t.nodes_[id].grad;
    });
  }

  /// Broadcast-add a 1 x c bias row to every row.
  NodeId add_row_bias(NodeId a, NodeId bias) {
    if (rows(bias) != 1 || cols(bias) != cols(a)) {
      throw InvalidArgument("add_row_bias: bias must be 1 x cols");
    }
    MatrixX<Scalar> out = value(a).rowwise() + value(bias).row(0);
    return push(std::move(out), "add_row_bias", [a, bias](Tape& t, NodeId id) {
      t.nodes_[a].grad += t.nodes_[id].grad;
      t.nodes_[bias].grad.row(0) += t.nodes_[id].grad.colwise().sum();
    });
  }

  NodeId add(NodeId a, NodeId b) {
    check_same_shape(a, b, "add");
    MatrixX<Scalar> out = value(a) + value(b);
    return push(std::move(out), "add", [a, b](Tape& t, NodeId id) {
      t.nodes_[a].grad += t.nodes_[id].grad;
      t.nodes_[b].grad += t.nodes_[id].grad;
    });
  }

  NodeId scale(NodeId a, Scalar s) {
    MatrixX<Scalar> out = value(a) * s;
    return push(std::move(out), "scale", [a, s](Tape& t, NodeId id) {
      t.nodes_[a].grad += t.nodes_[id].grad * s;
    });
  }

  NodeId leaky_relu(NodeId a, Scalar slope) {
    MatrixX<Scalar> out =
        value(a).unaryExpr([slope](Scalar x) { return x > 0 ? x : slope * x; });
    return push(std::move(out), "leaky_relu", [a, slope](Tape& t, NodeId id) {
      t.nodes_[a].grad.array() +=
          t.nodes_[id].grad.array() *
          t.value(a).array().unaryExpr(
              [slope](Scalar x) { return x > 0 ? Scalar(1) : slope; });
    });
  }

  NodeId sigmoid(NodeId a) {
    MatrixX<Scalar> out = value(a).unaryExpr(
        [](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
    return push(std::move(out), "sigmoid", [a](Tape& t, NodeId id) {
      const auto& y = t.value(id).array();
      t.nodes_[a].grad.array() +=
          t.nodes_[id].grad.array() * y * (Scalar(1) - y);
    });
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    if (rows(a) != rows(b)) {
      throw InvalidArgument("concat_cols: row counts differ");
    }
    MatrixX<Scalar> out(rows(a), cols(a) + cols(b));
    out.leftCols(cols(a)) = value(a);
    out.rightCols(cols(b)) = value(b);
    const Eigen::Index ca = cols(a);
    const Eigen::Index cb = cols(b);
    return push(std::move(out), "concat_cols",
                [a, b, ca, cb](Tape& t, NodeId id) {
                  t.nodes_[a].grad += t.nodes_[id].grad.leftCols(ca);
                  t.nodes_[b].grad += t.nodes_[id].grad.rightCols(cb);
                });
  }

  /// out.row(i) = in.row(index[i]).
  NodeId gather_rows(NodeId a, std::vector<int> index) {
    MatrixX<Scalar> out(static_cast<Eigen::Index>(index.size()), cols(a));
    for (std::size_t i = 0; i < index.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = value(a).row(index[i]);
    }
    return push(std::move(out), "gather_rows",
                [a, index = std::move(index)](Tape& t, NodeId id) {
                  for (std::size_t i = 0; i < index.size(); ++i) {
                    t.nodes_[a].grad.row(index[i]) +=
                        t.nodes_[id].grad.row(static_cast<Eigen::Index>(i));
                  }
                });
  }

  /// out.row(i) = in.row(i).segment(index[i] * block, block).
  NodeId gather_col_blocks(NodeId a, std::vector<int> index, int block) {
    if (static_cast<Eigen::Index>(index.size()) != rows(a)) {
      throw InvalidArgument("gather_col_blocks: one index per row required");
    }
    MatrixX<Scalar> out(rows(a), block);
    for (Eigen::Index i = 0; i < rows(a); ++i) {
      out.row(i) = value(a).row(i).segment(
          static_cast<Eigen::Index>(index[static_cast<std::size_t>(i)]) *
              block,
          block);
    }
    return push(std::move(out), "gather_col_blocks",
                [a, index = std::move(index), block](Tape& t, NodeId id) {
                  for (Eigen::Index i = 0; i < t.rows(id); ++i) {
                    t.nodes_[a].grad.row(i).segment(
                        static_cast<Eigen::Index>(
                            index[static_cast<std::size_t>(i)]) *
                            block,
                        block) += t.nodes_[id].grad.row(i);
                  }
                });
  }

  NodeId reduce_sum(NodeId a) {
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = value(a).sum();
    return push(std::move(out), "reduce_sum", [a](Tape& t, NodeId id) {
      t.nodes_[a].grad.array() += t.nodes_[id].grad(0, 0);
    });
  }

  /// Weighted sum of scalar (1x1) nodes.
  NodeId weighted_sum(std::vector<NodeId> xs, std::vector<Scalar> ws) {
    if (xs.size() != ws.size() || xs.empty()) {
      throw InvalidArgument("weighted_sum: need matching, non-empty lists");
    }
    for (NodeId x : xs) {
      if (rows(x) != 1 || cols(x) != 1) {
        throw InvalidArgument("weighted_sum: inputs must be scalar nodes");
      }
    }
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out(0, 0) += ws[i] * value(xs[i])(0, 0);
    }
    return push(std::move(out), "weighted_sum",
                [xs = std::move(xs), ws = std::move(ws)](Tape& t, NodeId id) {
                  for (std::size_t i = 0; i < xs.size(); ++i) {
                    t.nodes_[xs[i]].grad(0, 0) += ws[i] * t.nodes_[id].grad(0, 0);
                  }
                });
  }

  /// Correlation-weighted gather followed by a shared linear map:
  /// out = gather(input) * weights, with `weights` shaped
  /// (blocks * c_in) x c_out. The gather scratch is kept for backward.
  NodeId kpconv(NodeId input, NodeId weights,
                std::shared_ptr<const GatherPlan> plan) {
    const Eigen::Index c_in = cols(input);
    if (rows(input) != plan->in_rows) {
      throw InvalidArgument("kpconv: input rows do not match plan");
    }
    if (rows(weights) != plan->blocks * c_in) {
      throw InvalidArgument("kpconv: weight rows must be blocks * c_in");
    }
    auto scratch = std::make_shared<MatrixX<Scalar>>(
        MatrixX<Scalar>::Zero(plan->out_rows, plan->blocks * c_in));
    const auto& in = value(input);
    for (const auto& e : plan->entries) {
      scratch->row(e.out_row).segment(e.block * c_in, c_in) +=
          static_cast<Scalar>(e.w) * in.row(e.in_row);
    }
    MatrixX<Scalar> out = (*scratch) * value(weights);
    return push(std::move(out), "kpconv",
                [input, weights, scratch, plan = std::move(plan), c_in](
                    Tape& t, NodeId id) {
                  t.nodes_[weights].grad.noalias() +=
                      scratch->transpose() * t.nodes_[id].grad;
                  MatrixX<Scalar> dscratch =
                      t.nodes_[id].grad * t.value(weights).transpose();
                  auto& din = t.nodes_[input].grad;
                  for (const auto& e : plan->entries) {
                    din.row(e.in_row) +=
                        static_cast<Scalar>(e.w) *
                        dscratch.row(e.out_row).segment(e.block * c_in, c_in);
                  }
                });
  }

  /// Circulant mixing over the anchor axis: with per-anchor blocks of `m`
  /// rows, out_a = sum_o in_{(a+o) mod n} * M_o, where M is stored as a
  /// (n * c_in) x c_out stack of offset blocks.
  NodeId anchor_mix(NodeId input, NodeId mix, int anchors) {
    const Eigen::Index c_in = cols(input);
    const Eigen::Index c_out = cols(mix);
    if (rows(input) % anchors != 0) {
      throw InvalidArgument("anchor_mix: rows not divisible by anchor count");
    }
    if (rows(mix) != anchors * c_in) {
      throw InvalidArgument("anchor_mix: mix rows must be anchors * c_in");
    }
    const Eigen::Index m = rows(input) / anchors;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(rows(input), c_out);
    for (int o = 0; o < anchors; ++o) {
      const auto m_o = value(mix).middleRows(o * c_in, c_in);
      for (int a = 0; a < anchors; ++a) {
        const int b = (a + o) % anchors;
        out.middleRows(a * m, m).noalias() +=
            value(input).middleRows(b * m, m) * m_o;
      }
    }
    return push(std::move(out), "anchor_mix",
                [input, mix, anchors, m, c_in](Tape& t, NodeId id) {
                  for (int o = 0; o < anchors; ++o) {
                    const auto m_o = t.value(mix).middleRows(o * c_in, c_in);
                    for (int a = 0; a < anchors; ++a) {
                      const int b = (a + o) % anchors;
                      t.nodes_[input].grad.middleRows(b * m, m).noalias() +=
                          t.nodes_[id].grad.middleRows(a * m, m) *
                          m_o.transpose();
                      t.nodes_[mix].grad.middleRows(o * c_in, c_in).noalias() +=
                          t.value(input).middleRows(b * m, m).transpose() *
                          t.nodes_[id].grad.middleRows(a * m, m);
                    }
                  }
                });
  }

  /// Reduce the anchor axis to one row per point (max keeps the smallest
  /// argmax index on ties).
  NodeId reduce_anchors(NodeId input, int anchors, Pool mode) {
    const Eigen::Index m = check_anchor_rows(input, anchors, "reduce_anchors");
    const Eigen::Index c = cols(input);
    MatrixX<Scalar> out(m, c);
    if (mode == Pool::kAvg) {
      out.setZero();
      for (int a = 0; a < anchors; ++a) {
        out += value(input).middleRows(a * m, m);
      }
      out /= static_cast<Scalar>(anchors);
      return push(std::move(out), "reduce_anchors_avg",
                  [input, anchors, m](Tape& t, NodeId id) {
                    const MatrixX<Scalar> share =
                        t.nodes_[id].grad / static_cast<Scalar>(anchors);
                    for (int a = 0; a < anchors; ++a) {
                      t.nodes_[input].grad.middleRows(a * m, m) += share;
                    }
                  });
    }
    auto argmax = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(m * c), 0);
    out = value(input).topRows(m);
    for (int a = 1; a < anchors; ++a) {
      for (Eigen::Index x = 0; x < m; ++x) {
        for (Eigen::Index ch = 0; ch < c; ++ch) {
          const Scalar v = value(input)(a * m + x, ch);
          if (v > out(x, ch)) {
            out(x, ch) = v;
            (*argmax)[static_cast<std::size_t>(x * c + ch)] = a;
          }
        }
      }
    }
    return push(std::move(out), "reduce_anchors_max",
                [input, argmax, m](Tape& t, NodeId id) {
                  const Eigen::Index c = t.cols(id);
                  for (Eigen::Index x = 0; x < m; ++x) {
                    for (Eigen::Index ch = 0; ch < c; ++ch) {
                      const int a =
                          (*argmax)[static_cast<std::size_t>(x * c + ch)];
                      t.nodes_[input].grad(a * m + x, ch) +=
                          t.nodes_[id].grad(x, ch);
                    }
                  }
                });
  }

  /// Per-point scores of each anchor's features under a shared linear
  /// functional: out(x, a) = input.row(a * m + x) . w, with w shaped c x 1.
  NodeId anchor_scores(NodeId input, NodeId w, int anchors) {
    const Eigen::Index m = check_anchor_rows(input, anchors, "anchor_scores");
    if (cols(w) != 1 || rows(w) != cols(input)) {
      throw InvalidArgument("anchor_scores: w must be c x 1");
    }
    MatrixX<Scalar> out(m, anchors);
    for (int a = 0; a < anchors; ++a) {
      out.col(a) = value(input).middleRows(a * m, m) * value(w);
    }
    return push(std::move(out), "anchor_scores",
                [input, w, anchors, m](Tape& t, NodeId id) {
                  for (int a = 0; a < anchors; ++a) {
                    t.nodes_[input].grad.middleRows(a * m, m).noalias() +=
                        t.nodes_[id].grad.col(a) * t.value(w).transpose();
                    t.nodes_[w].grad.noalias() +=
                        t.value(input).middleRows(a * m, m).transpose() *
                        t.nodes_[id].grad.col(a);
                  }
                });
  }

  /// Softmax-weighted sum over anchors with learned per-anchor scores
  /// s(x, a) = input.row(a * m + x) . w; differentiable and label-free.
  NodeId attentive_pool(NodeId input, NodeId w, int anchors) {
    const Eigen::Index m = check_anchor_rows(input, anchors, "attentive_pool");
    const Eigen::Index c = cols(input);
    if (cols(w) != 1 || rows(w) != c) {
      throw InvalidArgument("attentive_pool: w must be c x 1");
    }
    MatrixX<Scalar> scores(m, anchors);
    for (int a = 0; a < anchors; ++a) {
      scores.col(a) = value(input).middleRows(a * m, m) * value(w);
    }
    auto alpha = std::make_shared<MatrixX<Scalar>>(m, anchors);
    for (Eigen::Index x = 0; x < m; ++x) {
      const Scalar mx = scores.row(x).maxCoeff();
      Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
          (scores.row(x).array() - mx).exp();
      alpha->row(x) = e / e.sum();
    }
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(m, c);
    for (int a = 0; a < anchors; ++a) {
      out.array() += value(input).middleRows(a * m, m).array().colwise() *
                     alpha->col(a).array();
    }
    return push(
        std::move(out), "attentive_pool",
        [input, w, anchors, m, alpha](Tape& t, NodeId id) {
          const auto& dout = t.nodes_[id].grad;
          MatrixX<Scalar> dalpha(m, anchors);
          for (int a = 0; a < anchors; ++a) {
            dalpha.col(a) = (dout.array() *
                             t.value(input).middleRows(a * m, m).array())
                                .rowwise()
                                .sum();
            t.nodes_[input].grad.middleRows(a * m, m).array() +=
                dout.array().colwise() * alpha->col(a).array();
          }
          // Softmax backward per point row.
          MatrixX<Scalar> dscores(m, anchors);
          for (Eigen::Index x = 0; x < m; ++x) {
            const Scalar dot = (alpha->row(x).array() * dalpha.row(x).array()).sum();
            dscores.row(x) =
                alpha->row(x).array() * (dalpha.row(x).array() - dot);
          }
          for (int a = 0; a < anchors; ++a) {
            t.nodes_[input].grad.middleRows(a * m, m).noalias() +=
                dscores.col(a) * t.value(w).transpose();
            t.nodes_[w].grad.noalias() +=
                t.value(input).middleRows(a * m, m).transpose() *
                dscores.col(a);
          }
        });
  }

  /// Normalizes each channel over all rows (points and anchors jointly,
  /// which keeps the statistics invariant under anchor shifts), then applies
  /// a learned per-channel affine map. gamma and beta are 1 x c.
  NodeId normalize_features(NodeId input, NodeId gamma, NodeId beta,
                            Scalar eps = Scalar(1e-5)) {
    const Eigen::Index n_rows = rows(input);
    const Eigen::Index c = cols(input);
    if (rows(gamma) != 1 || cols(gamma) != c || rows(beta) != 1 ||
        cols(beta) != c) {
      throw InvalidArgument("normalize_features: gamma/beta must be 1 x c");
    }
    auto mean = std::make_shared<MatrixX<Scalar>>(
        value(input).colwise().mean());
    MatrixX<Scalar> centered = value(input).rowwise() - mean->row(0);
    auto inv_std = std::make_shared<MatrixX<Scalar>>(
        (centered.array().square().colwise().mean() + eps)
            .sqrt()
            .inverse()
            .matrix());
    auto xhat = std::make_shared<MatrixX<Scalar>>(
        centered.array().rowwise() * inv_std->row(0).array());
    MatrixX<Scalar> out =
        (xhat->array().rowwise() * value(gamma).row(0).array()).matrix();
    out.rowwise() += value(beta).row(0);
    return push(
        std::move(out), "normalize_features",
        [input, gamma, beta, xhat, inv_std, n_rows](Tape& t, NodeId id) {
          const auto& dout = t.nodes_[id].grad;
          t.nodes_[beta].grad.row(0) += dout.colwise().sum();
          t.nodes_[gamma].grad.row(0) +=
              (dout.array() * xhat->array()).colwise().sum().matrix();
          MatrixX<Scalar> dxhat =
              dout.array().rowwise() * t.value(gamma).row(0).array();
          const MatrixX<Scalar> sum_dxhat = dxhat.colwise().sum();
          const MatrixX<Scalar> sum_dxhat_xhat =
              (dxhat.array() * xhat->array()).colwise().sum();
          const Scalar n = static_cast<Scalar>(n_rows);
          MatrixX<Scalar> dx = dxhat;
          dx.array().rowwise() -= sum_dxhat.row(0).array() / n;
          dx.array() -=
              xhat->array().rowwise() * (sum_dxhat_xhat.row(0).array() / n);
          dx.array().rowwise() *= inv_std->row(0).array();
          t.nodes_[input].grad += dx;
        });
  }

  /// Mean cross entropy of row-wise softmax against integer labels over the
  /// masked rows; an empty mask yields zero loss and zero gradient.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels,
                               std::vector<std::uint8_t> mask) {
    const Eigen::Index m = rows(logits);
    if (static_cast<Eigen::Index>(labels.size()) != m ||
        static_cast<Eigen::Index>(mask.size()) != m) {
      throw InvalidArgument("softmax_cross_entropy: labels/mask size mismatch");
    }
    for (Eigen::Index x = 0; x < m; ++x) {
      const int label = labels[static_cast<std::size_t>(x)];
      if (mask[static_cast<std::size_t>(x)] &&
          (label < 0 || label >= cols(logits))) {
        throw InvalidArgument("softmax_cross_entropy: label out of range");
      }
    }
    auto probs = std::make_shared<MatrixX<Scalar>>(m, cols(logits));
    Scalar total = 0;
    Eigen::Index count = 0;
    for (Eigen::Index x = 0; x < m; ++x) {
      const Scalar mx = value(logits).row(x).maxCoeff();
      Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
          (value(logits).row(x).array() - mx).exp();
      probs->row(x) = e / e.sum();
      if (mask[static_cast<std::size_t>(x)]) {
        total -= std::log(
            std::max((*probs)(x, labels[static_cast<std::size_t>(x)]),
                     std::numeric_limits<Scalar>::min()));
        ++count;
      }
    }
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = count > 0 ? total / static_cast<Scalar>(count) : Scalar(0);
    return push(std::move(out), "softmax_cross_entropy",
                [logits, labels = std::move(labels), mask = std::move(mask),
                 probs, count](Tape& t, NodeId id) {
                  if (count == 0) return;
                  const Scalar g =
                      t.nodes_[id].grad(0, 0) / static_cast<Scalar>(count);
                  for (Eigen::Index x = 0; x < t.rows(logits); ++x) {
                    if (!mask[static_cast<std::size_t>(x)]) continue;
                    t.nodes_[logits].grad.row(x) += g * probs->row(x);
                    t.nodes_[logits].grad(
                        x, labels[static_cast<std::size_t>(x)]) -= g;
                  }
                });
  }

  /// Mean over masked rows of the elementwise L1 distance to a fixed target.
  NodeId l1_loss(NodeId pred, MatrixX<Scalar> target,
                 std::vector<std::uint8_t> mask) {
    check_loss_args(pred, target, mask, "l1_loss");
    Scalar total = 0;
    Eigen::Index count = 0;
    for (Eigen::Index x = 0; x < rows(pred); ++x) {
      if (!mask[static_cast<std::size_t>(x)]) continue;
      total += (value(pred).row(x) - target.row(x)).cwiseAbs().sum();
      ++count;
    }
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = count > 0 ? total / static_cast<Scalar>(count) : Scalar(0);
    return push(std::move(out), "l1_loss",
                [pred, target = std::move(target), mask = std::move(mask),
                 count](Tape& t, NodeId id) {
                  if (count == 0) return;
                  const Scalar g =
                      t.nodes_[id].grad(0, 0) / static_cast<Scalar>(count);
                  for (Eigen::Index x = 0; x < t.rows(pred); ++x) {
                    if (!mask[static_cast<std::size_t>(x)]) continue;
                    t.nodes_[pred].grad.row(x).array() +=
                        g * (t.value(pred).row(x) - target.row(x))
                                .array()
                                .sign();
                  }
                });
  }

  /// Mean over masked rows of the squared distance to a fixed target.
  NodeId mse_loss(NodeId pred, MatrixX<Scalar> target,
                  std::vector<std::uint8_t> mask) {
    check_loss_args(pred, target, mask, "mse_loss");
    Scalar total = 0;
    Eigen::Index count = 0;
    for (Eigen::Index x = 0; x < rows(pred); ++x) {
      if (!mask[static_cast<std::size_t>(x)]) continue;
      total += (value(pred).row(x) - target.row(x)).squaredNorm();
      ++count;
    }
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = count > 0 ? total / static_cast<Scalar>(count) : Scalar(0);
    return push(std::move(out), "mse_loss",
                [pred, target = std::move(target), mask = std::move(mask),
                 count](Tape& t, NodeId id) {
                  if (count == 0) return;
                  const Scalar g = Scalar(2) * t.nodes_[id].grad(0, 0) /
                                   static_cast<Scalar>(count);
                  for (Eigen::Index x = 0; x < t.rows(pred); ++x) {
                    if (!mask[static_cast<std::size_t>(x)]) continue;
                    t.nodes_[pred].grad.row(x) +=
                        g * (t.value(pred).row(x) - target.row(x));
                  }
                });
  }

  /// Reverse pass from a scalar loss node. Throws NumericError naming the
  /// first node with non-finite values if the loss is not finite.
  void backward(NodeId loss) {
    if (rows(loss) != 1 || cols(loss) != 1) {
      throw InvalidArgument("backward: loss must be scalar");
    }
    if (!std::isfinite(static_cast<double>(value(loss)(0, 0)))) {
      for (const auto& n : nodes_) {
        if (!n.value.allFinite()) {
          throw NumericError("backward: non-finite values at node '" + n.name +
                             "'");
        }
      }
      throw NumericError("backward: non-finite loss");
    }
    for (auto& n : nodes_) {
      n.grad.setZero(n.value.rows(), n.value.cols());
    }
    nodes_[loss].grad(0, 0) = Scalar(1);
    for (int id = loss; id >= 0; --id) {
      if (nodes_[id].pull) nodes_[id].pull(*this, id);
    }
  }

 private:
  struct Node {
    MatrixX<Scalar> value;
    MatrixX<Scalar> grad;
    std::string name;
    std::function<void(Tape&, NodeId)> pull;
  };

  Eigen::Index rows(NodeId id) const { return nodes_[id].value.rows(); }
  Eigen::Index cols(NodeId id) const { return nodes_[id].value.cols(); }

  void check_cols(NodeId a, Eigen::Index expected, const char* op) const {
    if (cols(a) != expected) {
      throw InvalidArgument(std::string(op) + ": inner dimensions disagree");
    }
  }

  void check_same_shape(NodeId a, NodeId b, const char* op) const {
    if (rows(a) != rows(b) || cols(a) != cols(b)) {
      throw InvalidArgument(std::string(op) + ": shape mismatch");
    }
  }

  Eigen::Index check_anchor_rows(NodeId a, int anchors, const char* op) const {
    if (anchors < 1 || rows(a) % anchors != 0) {
      throw InvalidArgument(std::string(op) +
                            ": rows not divisible by anchor count");
    }
    return rows(a) / anchors;
  }

  void check_loss_args(NodeId pred, const MatrixX<Scalar>& target,
                       const std::vector<std::uint8_t>& mask,
                       const char* op) const {
    if (target.rows() != rows(pred) || target.cols() != cols(pred) ||
        static_cast<Eigen::Index>(mask.size()) != rows(pred)) {
      throw InvalidArgument(std::string(op) + ": target/mask shape mismatch");
    }
  }

  NodeId push(MatrixX<Scalar> value, std::string name,
              std::function<void(Tape&, NodeId)> pull) {
    Node n;
    n.value = std::move(value);
    n.name = std::move(name);
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace eqpan
