// Copyright 2026 The qkdrate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkdrate/errors.hpp"
#include "qkdrate/keymap.hpp"
#include "qkdrate/operator.hpp"

namespace qkdrate {

/// Paired list of constraint operators and observed values, <Gamma_i> = gamma_i.
class ConstraintSet {
 public:
  ConstraintSet() = default;

  void add(HermitianOperator op, double value) {
    if (!ops_.empty() && op.dim() != ops_.front().dim()) {
      throw DimensionError("ConstraintSet: operator dim " + std::to_string(op.dim()) + " != " +
                           std::to_string(ops_.front().dim()));
    }
    if (!std::isfinite(value)) throw DomainError("ConstraintSet: non-finite value");
    ops_.push_back(std::move(op));
    vals_.push_back(value);
  }

  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  Index dim() const { return ops_.empty() ? 0 : ops_.front().dim(); }
  const std::vector<HermitianOperator>& operators() const { return ops_; }
  const std::vector<double>& values() const { return vals_; }
  const HermitianOperator& op(std::size_t i) const { return ops_[i]; }
  double value(std::size_t i) const { return vals_[i]; }

  RealVector value_vector() const { return Eigen::Map<const RealVector>(vals_.data(), static_cast<Index>(vals_.size())); }

  /// Index of the constraint <1> = 1, if present.
  std::optional<std::size_t> normalization_index(double tol = 1e-12) const {
    if (ops_.empty()) return std::nullopt;
    const auto id = HermitianOperator::identity(dim());
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (ops_[i].approx_equal(id, tol) && std::abs(vals_[i] - 1.0) <= tol) return i;
    }
    return std::nullopt;
  }

  /// Appends <1> = 1 unless an equivalent entry already exists. Rejects any
  /// entry <c 1> = v with v != c, which no density operator can satisfy.
  void ensure_normalization(Index dim_if_empty = 0, double tol = 1e-9) {
    const Index n = empty() ? dim_if_empty : dim();
    if (n < 1) throw DimensionError("ConstraintSet: cannot infer dimension for normalization");
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      const Complex c = ops_[i](0, 0);
      if (ops_[i].approx_equal(HermitianOperator::identity(n) * c.real(), tol) &&
          std::abs(c.real() * 1.0 - vals_[i]) > tol * std::max(1.0, std::abs(c.real()))) {
        throw DomainError("ConstraintSet: constraint " + std::to_string(i) + " fixes <" +
                          std::to_string(c.real()) + " * 1> = " + std::to_string(vals_[i]) +
                          ", inconsistent with unit trace");
      }
    }
    if (!normalization_index()) add(HermitianOperator::identity(n), 1.0);
  }

  /// max_i |Tr(rho Gamma_i) - gamma_i|.
  double max_residual(const HermitianOperator& rho) const {
    double r = 0.0;
    for (std::size_t i = 0; i < ops_.size(); ++i) r = std::max(r, std::abs(rho.dot(ops_[i]) - vals_[i]));
    return r;
  }

  /// Values (1 - d eps) gamma + eps Tr(Gamma) matching the depolarized state
  /// (1 - d eps) rho + eps 1.
  ConstraintSet perturbed(double eps) const;

 private:
  std::vector<HermitianOperator> ops_;
  std::vector<double> vals_;
};

/// Everything needed to bound one protocol's key rate.
struct KeyRateProblem {
  /// Subsystem dimensions; their product is the dimension of every operator.
  std::vector<Index> dims;
  /// Key map acting on the full joint space.
  KeyMapPOVM keymap;
  ConstraintSet constraints;
  /// Kraus operator G of a pass/fail post-selection G(.)G^dagger.
  std::optional<Matrix> postselect;
  /// Error-correction cost H(Z_A|Z_B) in bits, per round that contributes key
  /// (a passing round under post-selection, a retained round otherwise).
  double hzazb = 0.0;
  /// Probability that a round passes post-selection.
  std::optional<double> p_pass;
  /// Fraction of rounds whose announcement is kept. If set, the key map must
  /// send discarded rounds to a fixed symbol and the rate is reported per
  /// retained round.
  std::optional<double> retained_fraction;
  /// A state satisfying the constraints, when the builder knows one.
  std::optional<HermitianOperator> witness;
  std::string label;

  Index dim() const { return total_dim(dims); }

  /// Checks the structural invariants; throws on the first violation.
  void validate() const {
    const Index n = dim();
    if (keymap.size() == 0) throw DomainError("KeyRateProblem: empty key map");
    if (keymap.dim() != n) {
      throw DimensionError("KeyRateProblem: key map dim " + std::to_string(keymap.dim()) +
                           " != joint dim " + std::to_string(n));
    }
    if (constraints.empty() || constraints.dim() != n) {
      throw DimensionError("KeyRateProblem: constraint operators must act on the joint space");
    }
    if (!constraints.normalization_index()) throw DomainError("KeyRateProblem: missing <1> = 1");
    if (!(hzazb >= 0.0) || !std::isfinite(hzazb)) throw DomainError("KeyRateProblem: hzazb must be >= 0");
    if (postselect) {
      if (postselect->rows() != n || postselect->cols() != n) {
        throw DimensionError("KeyRateProblem: post-selection Kraus operator must be square on the joint space");
      }
      if (p_pass && !(*p_pass > 0.0 && *p_pass <= 1.0 + 1e-12)) {
        throw DomainError("KeyRateProblem: p_pass must lie in (0, 1]");
      }
    }
    if (retained_fraction && !(*retained_fraction > 0.0 && *retained_fraction <= 1.0)) {
      throw DomainError("KeyRateProblem: retained_fraction must lie in (0, 1]");
    }
    if (witness && witness->dim() != n) throw DimensionError("KeyRateProblem: witness dimension");
  }
};

inline ConstraintSet ConstraintSet::perturbed(double eps) const {
  const double d = static_cast<double>(dim());
  if (!(eps >= 0.0 && eps * d < 1.0)) {
    throw DomainError("perturbed: eps must lie in [0, 1/d), got " + std::to_string(eps));
  }
  ConstraintSet out;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    out.add(ops_[i], (1.0 - d * eps) * vals_[i] + eps * ops_[i].trace());
  }
  return out;
}

}  // namespace qkdrate
