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
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "eqpan/layers.hpp"
#include "eqpan/rng.hpp"

namespace eqpan {

/// Randomized check of the discrete transformation law for every layer on
/// one sampled cloud: a layer L is run on the cloud and on its copy rotated
/// by each anchor j, and the reported residual is the max-abs difference
/// between L(rotated) at anchor a and L(original) at anchor (a - j) mod n
/// (plain difference for invariant outputs, score-shift law for rotation
/// scores). Grid subsampling never appears in these paths; the coarse level
/// is a rotation-stable index subset.
///
/// `corrupt_permutations` deliberately swaps two kernel permutation entries
/// first, as a negative control for the audit machinery.
template <typename Scalar>
std::map<std::string, double> equivariance_residuals(
    const CyclicGroup& group, int points, std::uint64_t seed,
    bool corrupt_permutations = false) {
  CounterRng rng(seed);
  const int n = group.n;
  const int c_in = 3;
  const int c_mid = 5;

  // Random cloud in a ball; radii chosen so typical neighborhoods hold a
  // handful of points.
  Points cloud(points, 3);
  for (int i = 0; i < points; ++i) {
    for (int a = 0; a < 3; ++a) cloud(i, a) = rng.uniform(-2.0, 2.0);
  }
  const double r0 = 1.0;
  const double r1 = 1.6;

  KernelLayout layout0 = build_kernel(group, r0);
  KernelLayout layout1 = build_kernel(group, r1);
  if (corrupt_permutations && n > 1 && layout0.size() > 4) {
    std::swap(layout0.permutations[1][3], layout0.permutations[1][4]);
  }

  // Rotation-stable coarse level: a fixed index subset.
  const int coarse_count = std::max(2, points / 3);
  std::vector<int> subset;
  subset.reserve(static_cast<std::size_t>(coarse_count));
  for (int i = 0; i < coarse_count; ++i) subset.push_back(i * 3 % points);
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());

  // Per-point input features invariant to rotation (heights, random scalars).
  MatrixX<Scalar> feats(points, c_in);
  for (int i = 0; i < points; ++i) {
    feats(i, 0) = Scalar(1);
    feats(i, 1) = static_cast<Scalar>(cloud(i, 2));
    feats(i, 2) = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  }

  // Shared random weights.
  auto random_matrix = [&rng](Eigen::Index r, Eigen::Index c) {
    MatrixX<Scalar> m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        m(i, j) = static_cast<Scalar>(rng.uniform(-0.5, 0.5));
      }
    }
    return m;
  };
  const MatrixX<Scalar> w_lift = random_matrix(layout0.size() * c_in, c_mid);
  const MatrixX<Scalar> w_group = random_matrix(layout1.size() * c_mid, c_mid);
  const MatrixX<Scalar> w_mix = random_matrix(n * c_mid, c_mid);
  const MatrixX<Scalar> w_point = random_matrix(c_mid, c_mid);
  const MatrixX<Scalar> b_point = random_matrix(1, c_mid);
  const MatrixX<Scalar> w_gamma = random_matrix(1, c_mid);
  const MatrixX<Scalar> w_beta = random_matrix(1, c_mid);
  const MatrixX<Scalar> w_score = random_matrix(c_mid, 1);

  // A synthetic equivariant input for isolated layer tests: per anchor a,
  // smooth functions evaluated at R_a^{-1} x.
  Eigen::Matrix3d mix_dirs;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) mix_dirs(r, c) = rng.uniform(-1.0, 1.0);
  }
  auto synthetic_map = [&](const Points& pos) {
    MatrixX<Scalar> values(n * pos.rows(), c_mid);
    for (int a = 0; a < n; ++a) {
      const Eigen::Matrix3d inv = group.matrices[(n - a) % n];
      for (Eigen::Index x = 0; x < pos.rows(); ++x) {
        const Eigen::Vector3d p = inv * pos.row(x).transpose();
        for (int c = 0; c < c_mid; ++c) {
          values(a * pos.rows() + x, c) = static_cast<Scalar>(
              std::sin(mix_dirs.row(c % 3).dot(p) + 0.3 * c) +
              0.5 * std::cos(p.z() + c));
        }
      }
    }
    return values;
  };

  auto subset_points = [&subset](const Points& pos) {
    Points out(static_cast<Eigen::Index>(subset.size()), 3);
    for (std::size_t i = 0; i < subset.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = pos.row(subset[i]);
    }
    return out;
  };

  struct Outputs {
    MatrixX<Scalar> lift, group_out, mix, pointwise, upsample, norm, composed;
    MatrixX<Scalar> pool_max, pool_avg, pool_att, scores;
  };

  auto run = [&](const Points& pos) {
    Outputs o;
    const Points coarse = subset_points(pos);
    const NeighborLists nb0 = radius_neighbors(pos, pos, r0);
    const NeighborLists nb1 = radius_neighbors(pos, coarse, r1);
    const ConvGeometry geo_lift =
        make_conv_geometry(pos, pos, nb0, layout0, true);
    const ConvGeometry geo_group =
        make_conv_geometry(coarse, pos, nb1, layout1, false);
    const std::vector<int> up_rows = make_upsample_indices(pos, coarse, n);

    Tape<Scalar> tape;
    const NodeId in_plain = tape.leaf(feats, "input");
    const NodeId in_eq = tape.leaf(synthetic_map(pos), "synthetic");
    EquivariantFeatureMap<Scalar> eq_in{in_eq, static_cast<int>(pos.rows()), n,
                                        c_mid};

    const NodeId lift_w = tape.leaf(w_lift);
    const NodeId group_w = tape.leaf(w_group);
    const NodeId mix_w = tape.leaf(w_mix);
    const NodeId point_w = tape.leaf(w_point);
    const NodeId point_b = tape.leaf(b_point);
    const NodeId gamma = tape.leaf(w_gamma);
    const NodeId beta = tape.leaf(w_beta);
    const NodeId score_w = tape.leaf(w_score);

    const auto lifted = lift_conv(tape, in_plain, lift_w, geo_lift);
    o.lift = tape.value(lifted.node);

    const auto strided = group_conv(tape, eq_in, group_w, geo_group);
    o.group_out = tape.value(strided.node);

    const auto mixed = anchor_mix(tape, eq_in, mix_w);
    o.mix = tape.value(mixed.node);

    const auto pointed = pointwise_linear(tape, eq_in, point_w, point_b);
    o.pointwise = tape.value(pointed.node);

    EquivariantFeatureMap<Scalar> coarse_in{
        tape.leaf(synthetic_map(coarse)), static_cast<int>(coarse.rows()), n,
        c_mid};
    const auto upsampled =
        nn_upsample(tape, coarse_in, up_rows, static_cast<int>(pos.rows()));
    o.upsample = tape.value(upsampled.node);

    const auto normed = normalize_map(tape, eq_in, gamma, beta);
    o.norm = tape.value(normed.node);

    // Composed encoder/decoder: lift -> strided conv -> mix -> upsample ->
    // 1x1, with nonlinearities.
    auto enc = leaky_relu_map(tape, lifted, Scalar(0.1));
    auto down = group_conv(tape, enc, group_w, geo_group);
    auto mixed2 = anchor_mix(tape, down, mix_w);
    auto up = nn_upsample(tape, mixed2, up_rows, static_cast<int>(pos.rows()));
    auto composed = pointwise_linear(tape, up, point_w, point_b);
    o.composed = tape.value(composed.node);

    o.pool_max =
        tape.value(invariant_pool(tape, eq_in, PoolMode::kMax).node);
    o.pool_avg =
        tape.value(invariant_pool(tape, eq_in, PoolMode::kAvg).node);
    o.pool_att = tape.value(
        invariant_pool(tape, eq_in, PoolMode::kAttentive, score_w).node);
    o.scores = tape.value(rotation_scores(tape, eq_in, score_w));
    return o;
  };

  const Outputs base = run(cloud);

  std::map<std::string, double> residuals{
      {"lift_conv", 0.0},   {"group_conv", 0.0}, {"anchor_mix", 0.0},
      {"pointwise_linear", 0.0}, {"nn_upsample", 0.0}, {"normalize", 0.0},
      {"composed", 0.0},    {"invariant_pool_max", 0.0},
      {"invariant_pool_avg", 0.0}, {"invariant_pool_attentive", 0.0},
      {"rotation_scores", 0.0}};

  auto transported_diff = [n](const MatrixX<Scalar>& rotated,
                              const MatrixX<Scalar>& original, int m, int j) {
    double max_abs = 0.0;
    for (int a = 0; a < n; ++a) {
      const int src = (a - j + n) % n;
      const double d = (rotated.middleRows(a * m, m) -
                        original.middleRows(src * m, m))
                           .template cast<double>()
                           .cwiseAbs()
                           .maxCoeff();
      max_abs = std::max(max_abs, d);
    }
    return max_abs;
  };

  for (int j = 1; j < n; ++j) {
    const Points rotated_cloud = cloud * group.matrices[j].transpose();
    const Outputs rot = run(rotated_cloud);
    const int m = points;
    const int mc = static_cast<int>(subset.size());

    auto track = [&](const char* key, double v) {
      residuals[key] = std::max(residuals[key], v);
    };
    track("lift_conv", transported_diff(rot.lift, base.lift, m, j));
    track("group_conv", transported_diff(rot.group_out, base.group_out, mc, j));
    track("anchor_mix", transported_diff(rot.mix, base.mix, m, j));
    track("pointwise_linear",
          transported_diff(rot.pointwise, base.pointwise, m, j));
    track("nn_upsample", transported_diff(rot.upsample, base.upsample, m, j));
    track("normalize", transported_diff(rot.norm, base.norm, m, j));
    track("composed", transported_diff(rot.composed, base.composed, m, j));

    auto plain_diff = [](const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
      return (a - b).template cast<double>().cwiseAbs().maxCoeff();
    };
    track("invariant_pool_max", plain_diff(rot.pool_max, base.pool_max));
    track("invariant_pool_avg", plain_diff(rot.pool_avg, base.pool_avg));
    track("invariant_pool_attentive",
          plain_diff(rot.pool_att, base.pool_att));

    double score_res = 0.0;
    for (int x = 0; x < m; ++x) {
      for (int a = 0; a < n; ++a) {
        score_res = std::max(
            score_res, std::abs(static_cast<double>(
                           rot.scores(x, a) -
                           base.scores(x, (a - j + n) % n))));
      }
    }
    track("rotation_scores", score_res);
  }

  if (n == 1) {
    // Single anchor: the law is vacuous; report zero rows.
  }
  return residuals;
}

}  // namespace eqpan
