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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkdrate/errors.hpp"
#include "qkdrate/operator.hpp"

namespace qkdrate {

/// Ordered POVM {Z_j} that Alice applies to produce her raw key.
class KeyMapPOVM {
 public:
  KeyMapPOVM() = default;

  /// Checks that every element is PSD and that the elements sum to the
  /// identity, both within `tol`.
  explicit KeyMapPOVM(std::vector<HermitianOperator> elements, double tol = 1e-10)
      : elements_(std::move(elements)) {
    if (elements_.empty()) throw DomainError("KeyMapPOVM: no elements");
    const Index n = elements_.front().dim();
    HermitianOperator sum = HermitianOperator::zero(n);
    for (std::size_t j = 0; j < elements_.size(); ++j) {
      const auto& z = elements_[j];
      if (z.dim() != n) throw DimensionError("KeyMapPOVM: elements differ in dimension");
      if (!is_psd(z, tol)) {
        throw DomainError("KeyMapPOVM: element " + std::to_string(j) + " is not PSD");
      }
      sum += z;
    }
    if (!sum.approx_equal(HermitianOperator::identity(n), tol)) {
      throw DomainError("KeyMapPOVM: elements do not sum to the identity");
    }
    projective_ = true;
    for (std::size_t j = 0; j < elements_.size() && projective_; ++j) {
      for (std::size_t k = 0; k < elements_.size() && projective_; ++k) {
        const Matrix prod = elements_[j].matrix() * elements_[k].matrix();
        const Matrix expected = j == k ? elements_[j].matrix() : Matrix::Zero(n, n);
        if (detail::max_abs_entry(prod - expected) > tol) projective_ = false;
      }
    }
  }

  /// Projectors onto the columns of an orthonormal basis matrix.
  static KeyMapPOVM from_basis(const Matrix& basis) {
    std::vector<HermitianOperator> els;
    for (Index j = 0; j < basis.cols(); ++j) els.push_back(HermitianOperator::projector(basis.col(j)));
    return KeyMapPOVM(std::move(els));
  }

  static KeyMapPOVM standard_basis(Index d) { return from_basis(Matrix::Identity(d, d)); }

  std::size_t size() const { return elements_.size(); }
  Index dim() const { return elements_.front().dim(); }
  bool is_projective() const { return projective_; }
  const std::vector<HermitianOperator>& elements() const { return elements_; }
  const HermitianOperator& operator[](std::size_t j) const { return elements_[j]; }

  /// Z_j (x) 1_B.
  KeyMapPOVM lifted(Index dim_b) const {
    const Index dims[] = {dim(), dim_b};
    return embedded(dims, 0);
  }

  /// Each element placed on subsystem `which` of a register with `dims`.
  KeyMapPOVM embedded(std::span<const Index> dims, std::size_t which) const {
    std::vector<HermitianOperator> els;
    els.reserve(elements_.size());
    for (const auto& z : elements_) els.push_back(embed(z, dims, which));
    KeyMapPOVM out;
    out.elements_ = std::move(els);
    out.projective_ = projective_;
    return out;
  }

 private:
  std::vector<HermitianOperator> elements_;
  bool projective_ = false;
};

/// Z(O) = sum_j Z_j O Z_j.
inline HermitianOperator pinch(const HermitianOperator& o, const KeyMapPOVM& z) {
  if (z.dim() != o.dim()) {
    throw DimensionError("pinch: operator dim " + std::to_string(o.dim()) + " != key map dim " +
                         std::to_string(z.dim()));
  }
  Matrix acc = Matrix::Zero(o.dim(), o.dim());
  for (const auto& zj : z.elements()) acc.noalias() += zj.matrix() * o.matrix() * zj.matrix();
  return HermitianOperator::symmetrized(acc);
}

}  // namespace qkdrate
