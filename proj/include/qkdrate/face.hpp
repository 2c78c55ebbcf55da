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

#include <optional>
#include <span>
#include <vector>

#include "qkdrate/errors.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

/// Eigenvalues of an implied reduced state below this (relative to its
/// largest) mark a direction every feasible state avoids.
inline constexpr double kFaceTolerance = 1e-10;

/// Isometry W onto a subspace containing the support of every state that
/// satisfies the constraints. Feasible states are W X W^dagger.
struct Face {
  Matrix isometry;
  /// Constraint operators compressed to the face, W^dagger Gamma_i W.
  ConstraintSet constraints;

  Index dim() const { return isometry.cols(); }
  Matrix lift(const Matrix& x) const { return isometry * x * isometry.adjoint(); }
  Matrix compress(const Matrix& full) const { return isometry.adjoint() * full * isometry; }
};

/// Reduced state of subsystem `which` if the constraints determine it.
inline std::optional<HermitianOperator> implied_marginal(const ConstraintSet& cs, std::span<const Index> dims, std::size_t which) {
  const Index n = cs.dim();
  RealMatrix c(n * n, static_cast<Index>(cs.size()));
  for (std::size_t l = 0; l < cs.size(); ++l) c.col(static_cast<Index>(l)) = to_real_coords(cs.op(l));
  const auto basis = hermitian_basis(dims[which]);
  RealMatrix targets(n * n, static_cast<Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) targets.col(static_cast<Index>(k)) = to_real_coords(embed(basis[k], dims, which));
  const RealMatrix a = c.completeOrthogonalDecomposition().solve(targets);
  if ((c * a - targets).norm() > 1e-9 * std::max(1.0, targets.norm())) return std::nullopt;
  const RealVector values = a.transpose() * cs.value_vector();
  return from_real_coords(values, dims[which]);
}

/// Restricts every subsystem whose reduced state is fixed and rank deficient
/// to that state's support. Returns nullopt when nothing can be removed.
inline std::optional<Face> find_face(const ConstraintSet& cs, std::span<const Index> dims) {
  if (total_dim(dims) != cs.dim()) throw DimensionError("find_face: dims do not match the constraint space");
  Matrix w = Matrix::Identity(1, 1);
  bool reduced = false;
  for (std::size_t s = 0; s < dims.size(); ++s) {
    Matrix part = Matrix::Identity(dims[s], dims[s]);
    if (auto rho = implied_marginal(cs, dims, s)) {
      const Spectrum sp = eigh(*rho);
      const double top = sp.values(sp.values.size() - 1);
      Index keep = 0;
      for (Index k = 0; k < sp.values.size(); ++k)
        if (sp.values(k) > kFaceTolerance * top) ++keep;
      if (keep < dims[s]) {
        part = sp.vectors.rightCols(keep);
        reduced = true;
      }
    }
    w = kron(w, part);
  }
  if (!reduced) return std::nullopt;
  Face f;
  f.isometry = w;
  for (std::size_t l = 0; l < cs.size(); ++l) {
    f.constraints.add(HermitianOperator::symmetrized(f.compress(cs.op(l).matrix())), cs.value(l));
  }
  return f;
}

inline std::optional<Face> find_face(const KeyRateProblem& pr) { return find_face(pr.constraints, pr.dims); }

}  // namespace qkdrate
