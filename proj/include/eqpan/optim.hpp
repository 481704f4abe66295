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
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eqpan/diffcore.hpp"
#include "eqpan/error.hpp"
#include "eqpan/rng.hpp"

namespace eqpan {

/// Named trainable arrays with gradient accumulators. Parameters attach to a
/// tape as leaves each forward pass; gradients accumulate across a batch and
/// are zeroed at the start of each optimizer step.
template <typename Scalar>
class ParamStore {
 public:
  struct Param {
    std::string name;
    MatrixX<Scalar> value;
    MatrixX<Scalar> grad;
  };

  int add(std::string name, MatrixX<Scalar> value) {
    for (const auto& p : params_) {
      if (p.name == name) {
        throw InvalidArgument("ParamStore: duplicate parameter '" + name +
                              "'");
      }
    }
    Param p;
    p.name = std::move(name);
    p.grad = MatrixX<Scalar>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  }

  Param& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param& operator[](int i) const {
    return params_[static_cast<std::size_t>(i)];
  }
  int count() const { return static_cast<int>(params_.size()); }
  std::int64_t total_elements() const {
    std::int64_t total = 0;
    for (const auto& p : params_) total += p.value.size();
    return total;
  }

  /// One leaf per parameter, in registration order.
  std::vector<NodeId> attach(Tape<Scalar>& tape) const {
    std::vector<NodeId> ids;
    ids.reserve(params_.size());
    for (const auto& p : params_) ids.push_back(tape.leaf(p.value, p.name));
    return ids;
  }

  void accumulate_grads(const Tape<Scalar>& tape,
                        const std::vector<NodeId>& ids) {
    if (ids.size() != params_.size()) {
      throw InvalidState("ParamStore: id list does not match parameters");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      params_[i].grad += tape.grad(ids[i]);
    }
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::vector<std::pair<std::string, MatrixX<Scalar>>> named_arrays() const {
    std::vector<std::pair<std::string, MatrixX<Scalar>>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p.name, p.value);
    return out;
  }

 private:
  std::vector<Param> params_;
};

enum class OptimizerKind { kSgdMomentum, kAdam };

/// SGD-with-momentum or Adam over a ParamStore. Bitwise deterministic given
/// the same gradients and step order.
template <typename Scalar>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double momentum = 0.9,
            double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind),
        lr_(lr),
        momentum_(momentum),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    if (!(lr > 0.0)) throw InvalidArgument("Optimizer: lr must be positive");
  }

  void step(ParamStore<Scalar>& params) {
    ensure_state(params);
    ++steps_;
    for (int i = 0; i < params.count(); ++i) {
      auto& p = params[i];
      auto& m = state_m_[static_cast<std::size_t>(i)];
      if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
        throw InvalidState("Optimizer: state shape mismatch for '" + p.name +
                           "'");
      }
      if (kind_ == OptimizerKind::kSgdMomentum) {
        m = static_cast<Scalar>(momentum_) * m + p.grad;
        p.value -= static_cast<Scalar>(lr_) * m;
      } else {
        auto& v = state_v_[static_cast<std::size_t>(i)];
        const Scalar b1 = static_cast<Scalar>(beta1_);
        const Scalar b2 = static_cast<Scalar>(beta2_);
        m = b1 * m + (Scalar(1) - b1) * p.grad;
        v = b2 * v + (Scalar(1) - b2) *
                         MatrixX<Scalar>(p.grad.array().square());
        const Scalar mc =
            Scalar(1) - static_cast<Scalar>(std::pow(beta1_, steps_));
        const Scalar vc =
            Scalar(1) - static_cast<Scalar>(std::pow(beta2_, steps_));
        p.value.array() -=
            static_cast<Scalar>(lr_) * (m.array() / mc) /
            ((v.array() / vc).sqrt() + static_cast<Scalar>(eps_));
      }
    }
  }

  std::int64_t steps() const { return steps_; }

  /// State exposed for checkpointing; names carry a reserved prefix.
  std::vector<std::pair<std::string, MatrixX<Scalar>>> named_state(
      const ParamStore<Scalar>& params) const {
    std::vector<std::pair<std::string, MatrixX<Scalar>>> out;
    MatrixX<Scalar> t(1, 1);
    t(0, 0) = static_cast<Scalar>(steps_);
    out.emplace_back("__opt/steps", t);
    for (std::size_t i = 0; i < state_m_.size(); ++i) {
      out.emplace_back("__opt/m/" + params[static_cast<int>(i)].name,
                       state_m_[i]);
    }
    for (std::size_t i = 0; i < state_v_.size(); ++i) {
      out.emplace_back("__opt/v/" + params[static_cast<int>(i)].name,
                       state_v_[i]);
    }
    return out;
  }

  void restore_state(const ParamStore<Scalar>& params,
                     const std::function<const MatrixX<Scalar>*(
                         const std::string&)>& lookup) {
    ensure_state(params);
    if (const auto* t = lookup("__opt/steps")) {
      steps_ = static_cast<std::int64_t>((*t)(0, 0));
    }
    for (int i = 0; i < params.count(); ++i) {
      if (const auto* m = lookup("__opt/m/" + params[i].name)) {
        state_m_[static_cast<std::size_t>(i)] = *m;
      }
      if (!state_v_.empty()) {
        if (const auto* v = lookup("__opt/v/" + params[i].name)) {
          state_v_[static_cast<std::size_t>(i)] = *v;
        }
      }
    }
  }

 private:
  void ensure_state(const ParamStore<Scalar>& params) {
    if (!state_m_.empty()) return;
    for (int i = 0; i < params.count(); ++i) {
      state_m_.push_back(MatrixX<Scalar>::Zero(params[i].value.rows(),
                                               params[i].value.cols()));
    }
    if (kind_ == OptimizerKind::kAdam) {
      for (int i = 0; i < params.count(); ++i) {
        state_v_.push_back(MatrixX<Scalar>::Zero(params[i].value.rows(),
                                                 params[i].value.cols()));
      }
    }
  }

  OptimizerKind kind_;
  double lr_;
  double momentum_;
  double beta1_;
  double beta2_;
  double eps_;
  std::int64_t steps_ = 0;
  std::vector<MatrixX<Scalar>> state_m_;
  std::vector<MatrixX<Scalar>> state_v_;
};

/// Central finite-difference check of the tape gradients.
///
/// `build` must construct the forward graph on the given tape from parameter
/// leaves created in the order of `params`, returning the scalar loss node.
/// Every parameter entry is perturbed by +-eps; the returned value is the
/// maximum relative error |analytic - numeric| / max(1, |analytic|,
/// |numeric|) over all entries. Runs in double precision.
inline double grad_check(
    const std::function<NodeId(Tape<double>&, const std::vector<NodeId>&)>&
        build,
    std::vector<MatrixX<double>> params, double eps = 1e-5) {
  auto run = [&](const std::vector<MatrixX<double>>& values) -> double {
    Tape<double> tape;
    std::vector<NodeId> ids;
    ids.reserve(values.size());
    for (const auto& v : values) ids.push_back(tape.leaf(v, "param"));
    return tape.value(build(tape, ids))(0, 0);
  };

  Tape<double> tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& v : params) ids.push_back(tape.leaf(v, "param"));
  tape.backward(build(tape, ids));

  double max_err = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const MatrixX<double>& analytic = tape.grad(ids[p]);
    for (Eigen::Index r = 0; r < params[p].rows(); ++r) {
      for (Eigen::Index c = 0; c < params[p].cols(); ++c) {
        auto perturbed = params;
        perturbed[p](r, c) += eps;
        const double up = run(perturbed);
        perturbed[p](r, c) -= 2.0 * eps;
        const double down = run(perturbed);
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic(r, c);
        const double err = std::abs(a - numeric) /
                           std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, err);
      }
    }
  }
  return max_err;
}

}  // namespace eqpan
