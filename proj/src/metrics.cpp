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
#include "eqpan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "eqpan/error.hpp"

namespace eqpan {

std::pair<double, std::map<int, double>> s_cls(
    const std::vector<int>& pred, const std::vector<int>& gt,
    const std::set<int>& class_list) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("s_cls: prediction and ground truth sizes differ");
  }
  std::map<int, double> per_class;
  double total = 0.0;
  int counted = 0;
  for (int cls : class_list) {
    std::size_t inter = 0, pred_count = 0, gt_count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == cls;
      const bool g = gt[i] == cls;
      inter += static_cast<std::size_t>(p && g);
      pred_count += static_cast<std::size_t>(p);
      gt_count += static_cast<std::size_t>(g);
    }
    const std::size_t uni = pred_count + gt_count - inter;
    if (uni == 0) continue;  // absent from both sides
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    per_class[cls] = iou;
    total += iou;
    ++counted;
  }
  const double mean = counted > 0 ? total / counted : 1.0;
  return {mean, per_class};
}

double s_assoc(const std::vector<int>& pred_instances,
               const std::vector<int>& gt_instances) {
  if (pred_instances.size() != gt_instances.size()) {
    throw InvalidArgument("s_assoc: sizes differ");
  }
  std::unordered_map<int, std::size_t> gt_sizes;
  std::unordered_map<int, std::size_t> pred_sizes;
  std::map<std::pair<int, int>, std::size_t> inter;
  for (std::size_t i = 0; i < gt_instances.size(); ++i) {
    const int g = gt_instances[i];
    const int p = pred_instances[i];
    if (g != 0) ++gt_sizes[g];
    if (p != 0) ++pred_sizes[p];
    if (g != 0 && p != 0) ++inter[{g, p}];
  }
  if (gt_sizes.empty()) return pred_sizes.empty() ? 1.0 : 0.0;

  double total = 0.0;
  for (const auto& [g, g_size] : gt_sizes) {
    double tube = 0.0;
    for (const auto& [key, overlap] : inter) {
      if (key.first != g) continue;
      const std::size_t p_size = pred_sizes[key.second];
      const double iou =
          static_cast<double>(overlap) /
          static_cast<double>(g_size + p_size - overlap);
      tube += static_cast<double>(overlap) * iou;
    }
    total += tube / static_cast<double>(g_size);
  }
  return total / static_cast<double>(gt_sizes.size());
}

double lstq(double assoc, double cls) { return std::sqrt(assoc * cls); }

namespace {

struct ClassStats {
  double iou_sum = 0.0;
  int tp = 0, fp = 0, fn = 0;
  bool present() const { return tp + fp + fn > 0; }
  double pq() const {
    const double denom = tp + 0.5 * fp + 0.5 * fn;
    return denom > 0.0 ? iou_sum / denom : 0.0;
  }
  double sq() const { return tp > 0 ? iou_sum / tp : 0.0; }
  double rq() const {
    const double denom = tp + 0.5 * fp + 0.5 * fn;
    return denom > 0.0 ? tp / denom : 0.0;
  }
};

}  // namespace

PanopticQuality panoptic_quality(const PanopticPrediction& pred,
                                 const PanopticPrediction& gt,
                                 const std::set<int>& things) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("panoptic_quality: sizes differ");
  }
  const std::size_t m = pred.size();

  // Segments: things by (class, instance); stuff as one segment per class.
  // Key: class -> segment id -> point count; overlap keyed per class.
  std::set<int> classes;
  for (std::size_t i = 0; i < m; ++i) {
    classes.insert(pred.semantic[i]);
    classes.insert(gt.semantic[i]);
  }

  std::map<int, ClassStats> stats;
  std::map<int, double> stuff_iou;  // for pq_dagger

  for (int cls : classes) {
    const bool is_thing = things.count(cls) > 0;
    std::unordered_map<int, std::size_t> pred_seg;
    std::unordered_map<int, std::size_t> gt_seg;
    std::map<std::pair<int, int>, std::size_t> inter;
    for (std::size_t i = 0; i < m; ++i) {
      const int ps = pred.semantic[i] == cls
                         ? (is_thing ? pred.instance[i] : 1)
                         : 0;
      const int gs =
          gt.semantic[i] == cls ? (is_thing ? gt.instance[i] : 1) : 0;
      // Thing points without an instance id do not form a segment.
      const bool p_valid = ps != 0;
      const bool g_valid = gs != 0;
      if (p_valid) ++pred_seg[ps];
      if (g_valid) ++gt_seg[gs];
      if (p_valid && g_valid) ++inter[{gs, ps}];
    }

    ClassStats& s = stats[cls];
    std::set<int> matched_pred;
    std::set<int> matched_gt;
    for (const auto& [key, overlap] : inter) {
      const auto [gs, ps] = key;
      const double iou =
          static_cast<double>(overlap) /
          static_cast<double>(gt_seg[gs] + pred_seg[ps] - overlap);
      if (iou > 0.5) {  // the unique-match threshold
        ++s.tp;
        s.iou_sum += iou;
        matched_gt.insert(gs);
        matched_pred.insert(ps);
      }
    }
    s.fn = static_cast<int>(gt_seg.size() - matched_gt.size());
    s.fp = static_cast<int>(pred_seg.size() - matched_pred.size());

    if (!is_thing && (!pred_seg.empty() || !gt_seg.empty())) {
      std::size_t overlap = 0;
      auto it = inter.find({1, 1});
      if (it != inter.end()) overlap = it->second;
      const std::size_t uni =
          (gt_seg.count(1) ? gt_seg[1] : 0) +
          (pred_seg.count(1) ? pred_seg[1] : 0) - overlap;
      stuff_iou[cls] =
          uni > 0 ? static_cast<double>(overlap) / static_cast<double>(uni)
                  : 0.0;
    }
  }

  PanopticQuality out;
  int n_all = 0, n_things = 0, n_stuff = 0, n_dagger = 0;
  for (const auto& [cls, s] : stats) {
    if (!s.present()) continue;
    out.per_class_pq[cls] = s.pq();
    out.pq += s.pq();
    out.sq += s.sq();
    out.rq += s.rq();
    ++n_all;
    if (things.count(cls)) {
      out.pq_things += s.pq();
      out.sq_things += s.sq();
      out.rq_things += s.rq();
      ++n_things;
      out.pq_dagger += s.pq();
      ++n_dagger;
    } else {
      out.pq_stuff += s.pq();
      out.sq_stuff += s.sq();
      out.rq_stuff += s.rq();
      ++n_stuff;
      out.pq_dagger += stuff_iou[cls];
      ++n_dagger;
    }
  }
  auto avg = [](double total, int n) { return n > 0 ? total / n : 0.0; };
  out.pq = avg(out.pq, n_all);
  out.sq = avg(out.sq, n_all);
  out.rq = avg(out.rq, n_all);
  out.pq_dagger = avg(out.pq_dagger, n_dagger);
  out.pq_things = avg(out.pq_things, n_things);
  out.sq_things = avg(out.sq_things, n_things);
  out.rq_things = avg(out.rq_things, n_things);
  out.pq_stuff = avg(out.pq_stuff, n_stuff);
  out.sq_stuff = avg(out.sq_stuff, n_stuff);
  out.rq_stuff = avg(out.rq_stuff, n_stuff);

  std::set<int> class_list(classes.begin(), classes.end());
  out.miou = s_cls(pred.semantic, gt.semantic, class_list).first;
  return out;
}

void MetricAccumulator::add(const PanopticPrediction& pred,
                            const PanopticPrediction& gt) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("MetricAccumulator: window sizes differ");
  }
  // Namespace instance ids so tubes never collide across sequences.
  const int shift = next_namespace_ * 1000000;
  auto append = [shift](PanopticPrediction& into,
                        const PanopticPrediction& from) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      into.semantic.push_back(from.semantic[i]);
      into.instance.push_back(
          from.instance[i] == 0 ? 0 : from.instance[i] + shift);
    }
  };
  append(pred_, pred);
  append(gt_, gt);
  ++next_namespace_;
}

MetricReport MetricAccumulator::report(const std::set<int>& class_list,
                                       const std::set<int>& things) const {
  MetricReport r;
  auto [cls_mean, per_class] = s_cls(pred_.semantic, gt_.semantic, class_list);
  r.s_cls = cls_mean;
  r.per_class_iou = per_class;
  r.s_assoc = s_assoc(pred_.instance, gt_.instance);
  r.lstq = lstq(r.s_assoc, r.s_cls);

  int n_things = 0, n_stuff = 0;
  for (const auto& [cls, iou] : per_class) {
    if (things.count(cls)) {
      r.iou_things += iou;
      ++n_things;
    } else {
      r.iou_stuff += iou;
      ++n_stuff;
    }
  }
  if (n_things > 0) r.iou_things /= n_things;
  if (n_stuff > 0) r.iou_stuff /= n_stuff;

  const PanopticQuality pq = panoptic_quality(pred_, gt_, things);
  r.pq = pq.pq;
  r.pq_dagger = pq.pq_dagger;
  r.sq = pq.sq;
  r.rq = pq.rq;
  r.pq_things = pq.pq_things;
  r.sq_things = pq.sq_things;
  r.rq_things = pq.rq_things;
  r.pq_stuff = pq.pq_stuff;
  r.sq_stuff = pq.sq_stuff;
  r.rq_stuff = pq.rq_stuff;
  r.miou = pq.miou;
  r.per_class_pq = pq.per_class_pq;
  return r;
}

std::string MetricReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{";
  os << "\"lstq\":" << lstq << ",\"s_assoc\":" << s_assoc
     << ",\"s_cls\":" << s_cls << ",\"iou_things\":" << iou_things
     << ",\"iou_stuff\":" << iou_stuff;
  os << ",\"per_class_iou\":{";
  bool first = true;
  for (const auto& [cls, iou] : per_class_iou) {
    if (!first) os << ',';
    first = false;
    os << '"' << cls << "\":" << iou;
  }
  os << "}";
  os << ",\"pq\":" << pq << ",\"pq_dagger\":" << pq_dagger << ",\"sq\":" << sq
     << ",\"rq\":" << rq << ",\"pq_things\":" << pq_things
     << ",\"sq_things\":" << sq_things << ",\"rq_things\":" << rq_things
     << ",\"pq_stuff\":" << pq_stuff << ",\"sq_stuff\":" << sq_stuff
     << ",\"rq_stuff\":" << rq_stuff << ",\"miou\":" << miou << "}";
  return os.str();
}

std::string MetricReport::csv_header() {
  return "lstq,s_assoc,s_cls,iou_things,iou_stuff,pq,pq_dagger,sq,rq,"
         "pq_things,sq_things,rq_things,pq_stuff,sq_stuff,rq_stuff,miou,"
         "config_hash";
}

std::string MetricReport::csv_row(const std::string& config_hash_hex) const {
  std::ostringstream os;
  os.precision(17);
  os << lstq << ',' << s_assoc << ',' << s_cls << ',' << iou_things << ','
     << iou_stuff << ',' << pq << ',' << pq_dagger << ',' << sq << ',' << rq
     << ',' << pq_things << ',' << sq_things << ',' << rq_things << ','
     << pq_stuff << ',' << sq_stuff << ',' << rq_stuff << ',' << miou << ','
     << config_hash_hex;
  return os.str();
}

}  // namespace eqpan
