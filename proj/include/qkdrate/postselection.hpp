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
#include <string>
#include <vector>

#include "qkdrate/errors.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

/// Largest accepted condition number of a post-selection Kraus operator on
/// the invertible path.
inline constexpr double kMaxFilterCondition = 1e12;

/// Constraints on the image G rho G^dagger of every state satisfying the input
/// constraints.
struct TransformedConstraints {
  std::vector<HermitianOperator> omega_ops;
  std::vector<double> omega_vals;
  /// Directions orthogonal to the image of the feasible set; their
  /// expectation is zero.
  std::vector<HermitianOperator> lambda_ops;
  double p_pass = 1.0;
};

namespace detail {

/// Columns are the real coordinates of the constraint operators.
inline RealMatrix coordinate_matrix(std::span<const HermitianOperator> ops) {
  const Index n = ops.front().dim();
  RealMatrix c(n * n, static_cast<Index>(ops.size()));
  for (std::size_t l = 0; l < ops.size(); ++l) c.col(static_cast<Index>(l)) = to_real_coords(ops[l]);
  return c;
}

}  // namespace detail

/// Writes `target` as a combination of the constraint operators and returns
/// the implied expectation value, or nullopt if `target` is not in their span.
inline std::optional<double> implied_value(const ConstraintSet& cs, const HermitianOperator& target, double tol = 1e-9) {
  const RealMatrix c = detail::coordinate_matrix(cs.operators());
  const RealVector t = to_real_coords(target);
  const RealVector a = c.completeOrthogonalDecomposition().solve(t);
  if ((c * a - t).norm() > tol * std::max(1.0, t.norm())) return std::nullopt;
  return a.dot(cs.value_vector());
}

/// p_pass = Tr(G rho G^dagger) whenever G^dagger G lies in the constraint span.
inline std::optional<double> infer_p_pass(const ConstraintSet& cs, const Matrix& g) {
  return implied_value(cs, HermitianOperator::symmetrized(g.adjoint() * g));
}

inline double condition_number(const Matrix& g) {
  Eigen::JacobiSVD<Matrix> svd(g);
  const RealVector sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  return smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
}

/// Constraints for the normalized post-selected state when G is invertible:
/// G^{-1 dagger} Gamma_i G^{-1} with value gamma_i / p_pass, plus <1> = 1.
inline ConstraintSet transform_invertible(const Matrix& g, const ConstraintSet& cs, double p_pass) {
  if (g.rows() != g.cols() || g.rows() != cs.dim()) throw DimensionError("transform_invertible: G must be square on the constraint space");
  if (!(p_pass > 0.0 && p_pass <= 1.0 + 1e-12)) throw DomainError("transform_invertible: p_pass must lie in (0, 1]");
  const double cond = condition_number(g);
  if (!(cond < kMaxFilterCondition)) {
    throw DomainError("transform_invertible: G is singular or ill-conditioned (condition number " + std::to_string(cond) + ")");
  }
  const Matrix g_inv = g.inverse();
  ConstraintSet out;
  for (std::size_t i = 0; i < cs.size(); ++i) out.add(cs.op(i).conjugated(g_inv.adjoint()), cs.value(i) / p_pass);
  out.add(HermitianOperator::identity(g.rows()), 1.0);
  return out;
}

/// Image constraints for an arbitrary single-Kraus map. p_pass is read off
/// the witness.
inline TransformedConstraints transform_general(const Matrix& g, const ConstraintSet& cs, const HermitianOperator& rho_witness) {
  const Index n_in = cs.dim();
  const Index n_out = g.rows();
  if (g.cols() != n_in || rho_witness.dim() != n_in) throw DimensionError("transform_general: dimension mismatch");
  const Index in_coords = n_in * n_in, out_coords = n_out * n_out;

  // Orthonormal {Delta_i} for the constraint span and delta_i solving
  // sum_i <Gamma_l, Delta_i> delta_i = gamma_l.
  RealOrthonormalizer input(in_coords);
  for (const auto& op : cs.operators()) input.add(to_real_coords(op));
  const std::size_t k = input.size();
  const RealMatrix delta_basis = input.as_matrix();
  const RealMatrix coeff = detail::coordinate_matrix(cs.operators()).transpose() * delta_basis;
  const RealVector gamma = cs.value_vector();
  const RealVector delta = coeff.completeOrthogonalDecomposition().solve(gamma);
  if ((coeff * delta - gamma).norm() > 1e-8 * std::max(1.0, gamma.norm())) {
    throw InfeasibleError("transform_general: constraint values are inconsistent");
  }
  input.complete();

  auto image = [&](const RealVector& v) { return to_real_coords(Matrix(g * matrix_from_real_coords(v, n_in) * g.adjoint())); };

  RealOrthonormalizer out_basis(out_coords);
  for (std::size_t j = k; j < input.size(); ++j) out_basis.add(image(input.vectors()[j]));
  const std::size_t upsilon = out_basis.size();
  for (std::size_t i = 0; i < k; ++i) out_basis.add(image(input.vectors()[i]));
  const std::size_t omega_end = out_basis.size();
  out_basis.complete();

  const RealVector rho0 = delta_basis * delta;
  const RealVector g_rho0 = image(rho0);

  TransformedConstraints tc;
  for (std::size_t m = upsilon; m < omega_end; ++m) {
    tc.omega_ops.push_back(from_real_coords(out_basis.vectors()[m], n_out));
    tc.omega_vals.push_back(out_basis.vectors()[m].dot(g_rho0));
  }
  for (std::size_t l = omega_end; l < out_basis.size(); ++l) tc.lambda_ops.push_back(from_real_coords(out_basis.vectors()[l], n_out));
  tc.p_pass = rho_witness.conjugated(g).trace();
  if (!(tc.p_pass > 0.0 && tc.p_pass <= 1.0 + 1e-9)) {
    throw DomainError("transform_general: witness pass probability " + std::to_string(tc.p_pass) + " outside (0, 1]");
  }
  return tc;
}

/// Constraint set for the normalized post-selected state built from the
/// general transformation: <Omega_n> = omega_n / p_pass, <Lambda_l> = 0, <1> = 1.
inline ConstraintSet normalized_constraints(const TransformedConstraints& tc) {
  ConstraintSet out;
  for (std::size_t i = 0; i < tc.omega_ops.size(); ++i) out.add(tc.omega_ops[i], tc.omega_vals[i] / tc.p_pass);
  for (const auto& l : tc.lambda_ops) out.add(l, 0.0);
  const Index n = !tc.omega_ops.empty() ? tc.omega_ops.front().dim() : tc.lambda_ops.front().dim();
  out.add(HermitianOperator::identity(n), 1.0);
  return out;
}

/// Same constraints for the unnormalized image, with <1> = p_pass.
inline ConstraintSet unnormalized_constraints(const TransformedConstraints& tc) {
  ConstraintSet out;
  for (std::size_t i = 0; i < tc.omega_ops.size(); ++i) out.add(tc.omega_ops[i], tc.omega_vals[i]);
  for (const auto& l : tc.lambda_ops) out.add(l, 0.0);
  const Index n = !tc.omega_ops.empty() ? tc.omega_ops.front().dim() : tc.lambda_ops.front().dim();
  out.add(HermitianOperator::identity(n), tc.p_pass);
  return out;
}

enum class PostselectPath { Automatic, Invertible, General };

/// Pass probability of a post-selected problem: the stored value, else the
/// value implied by the constraints, else the witness.
inline double resolve_p_pass(const KeyRateProblem& pr) {
  if (pr.p_pass) return *pr.p_pass;
  if (auto p = infer_p_pass(pr.constraints, *pr.postselect)) return *p;
  if (pr.witness) return pr.witness->conjugated(*pr.postselect).trace();
  throw DomainError("post-selection: p_pass is not given and cannot be inferred from the constraints");
}

/// The problem on the normalized post-selected state. Problems without
/// post-selection are returned unchanged. The result keeps p_pass so the rate
/// can be reported per transmitted signal.
inline KeyRateProblem effective_problem(const KeyRateProblem& pr, PostselectPath path = PostselectPath::Automatic) {
  if (!pr.postselect) return pr;
  const Matrix& g = *pr.postselect;
  const double p_pass = resolve_p_pass(pr);
  if (path == PostselectPath::Automatic) {
    path = condition_number(g) < kMaxFilterCondition ? PostselectPath::Invertible : PostselectPath::General;
  }
  KeyRateProblem out = pr;
  out.postselect.reset();
  out.p_pass = p_pass;
  if (path == PostselectPath::Invertible) {
    out.constraints = transform_invertible(g, pr.constraints, p_pass);
  } else {
    // The witness only supplies p_pass here; build a stand-in with the right
    // pass probability if none is stored.
    HermitianOperator w = pr.witness ? *pr.witness : HermitianOperator::identity(g.cols()) / static_cast<double>(g.cols());
    TransformedConstraints tc = transform_general(g, pr.constraints, w);
    tc.p_pass = p_pass;
    out.constraints = normalized_constraints(tc);
  }
  if (pr.witness) {
    out.witness = pr.witness->conjugated(g) / p_pass;
  }
  return out;
}

}  // namespace qkdrate
