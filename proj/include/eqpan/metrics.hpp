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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "eqpan/panoptic.hpp"

namespace eqpan {

/// The full metric family over a sequence set. Values are in [0, 1];
/// lstq^2 == s_assoc * s_cls exactly. The pq/sq/rq identity pq = sq * rq
/// holds per class; the reported aggregates are class means, which do not
/// multiply in general.
struct MetricReport {
  double lstq = 0.0;
  double s_assoc = 0.0;
  double s_cls = 0.0;
  double iou_things = 0.0;
  double iou_stuff = 0.0;
  std::map<int, double> per_class_iou;

  double pq = 0.0;
  double pq_dagger = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double pq_things = 0.0;
  double sq_things = 0.0;
  double rq_things = 0.0;
  double pq_stuff = 0.0;
  double sq_stuff = 0.0;
  double rq_stuff = 0.0;
  double miou = 0.0;
  std::map<int, double> per_class_pq;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row(const std::string& config_hash_hex) const;
};

/// Mean intersection-over-union over semantic classes; classes absent from
/// both prediction and ground truth are excluded from the mean.
std::pair<double, std::map<int, double>> s_cls(
    const std::vector<int>& pred, const std::vector<int>& gt,
    const std::set<int>& class_list);

/// Association score over 4D tubes (class-agnostic): for every ground-truth
/// tube t, sum |p and t| * IoU(p, t) over overlapping predicted tubes p,
/// normalized by |t|, averaged over tubes. Empty ground truth scores 1 when
/// the prediction is also empty, else 0.
double s_assoc(const std::vector<int>& pred_instances,
               const std::vector<int>& gt_instances);

/// Geometric mean of the two scores.
double lstq(double assoc, double cls);

struct PanopticQuality {
  double pq = 0.0, sq = 0.0, rq = 0.0, pq_dagger = 0.0;
  double pq_things = 0.0, sq_things = 0.0, rq_things = 0.0;
  double pq_stuff = 0.0, sq_stuff = 0.0, rq_stuff = 0.0;
  double miou = 0.0;
  std::map<int, double> per_class_pq;
};

/// Class-wise panoptic quality with the usual IoU > 0.5 matching (unique by
/// construction); stuff classes count as a single segment each, and pq_dagger
/// replaces the stuff terms by plain IoU. Classes with no prediction and no
/// ground truth are excluded from the means.
PanopticQuality panoptic_quality(const PanopticPrediction& pred,
                                 const PanopticPrediction& gt,
                                 const std::set<int>& things);

/// Accumulates windows/sequences (instance ids namespaced per sequence) and
/// evaluates the full report in one pass.
class MetricAccumulator {
 public:
  void add(const PanopticPrediction& pred, const PanopticPrediction& gt);
  MetricReport report(const std::set<int>& class_list,
                      const std::set<int>& things) const;

 private:
  PanopticPrediction pred_;
  PanopticPrediction gt_;
  int next_namespace_ = 0;
};

}  // namespace eqpan
