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
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "qkdrate/dual_solver.hpp"
#include "qkdrate/entropy.hpp"
#include "qkdrate/errors.hpp"
#include "qkdrate/face.hpp"
#include "qkdrate/keymap.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/optimize.hpp"
#include "qkdrate/postselection.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

struct OracleOptions {
  /// Perturbation applied when the constraint set has no strictly positive
  /// member. Ignored if `force_eps` is set.
  double eps = 1e-5;
  /// Always solve the eps-perturbed problem with this eps.
  std::optional<double> force_eps;
  double mu_start = 1e-2;
  double mu_end = 1e-9;
  double mu_factor = 0.2;
  /// Iteration cap per barrier stage.
  int max_iters = 5000;
  /// Smallest eigenvalue a point must exceed to count as strictly feasible.
  double strict_tol = 1e-9;
  /// Optimize over the support of any rank-deficient reduced state the
  /// constraints fix, as the dual solver does.
  bool facial_reduction = true;
};

struct PrimalResult {
  HermitianOperator rho_star;
  /// Coherence of rho_star with respect to the key map, bits.
  double value = 0.0;
  /// Residual against the constraint set that was solved (the perturbed one
  /// when eps_used > 0).
  double feasibility_residual = 0.0;
  double min_eigenvalue = 0.0;
  int iterations = 0;
  double eps_used = 0.0;
  bool converged = false;
};

inline ConstraintSet perturb_constraints(const ConstraintSet& cs, double eps) { return cs.perturbed(eps); }

/// The affine set {rho : Tr(rho Gamma_i) = gamma_i} in real coordinates,
/// rho = rho0 + Xi xi with orthonormal columns Xi.
class AffineStates {
 public:
  explicit AffineStates(const ConstraintSet& cs) : n_(cs.dim()) {
    const RealMatrix c = detail::coordinate_matrix(cs.operators());
    const RealVector gamma = cs.value_vector();
    origin_ = c.transpose().completeOrthogonalDecomposition().solve(gamma);
    residual_ = (c.transpose() * origin_ - gamma).norm();
    if (residual_ > 1e-8 * std::max(1.0, gamma.norm())) {
      throw InfeasibleError("constraint values are inconsistent (least-squares residual " + std::to_string(residual_) + ")");
    }
    Eigen::ColPivHouseholderQR<RealMatrix> qr(c);
    qr.setThreshold(1e-10);
    const Index rank = qr.rank();
    const RealMatrix q = qr.householderQ() * RealMatrix::Identity(c.rows(), c.rows());
    free_ = q.rightCols(c.rows() - rank);
  }

  Index dim() const { return n_; }
  Index free_dim() const { return free_.cols(); }
  const RealMatrix& free_directions() const { return free_; }

  RealVector coords(const RealVector& xi) const { return origin_ + free_ * xi; }
  Matrix state(const RealVector& xi) const { return matrix_from_real_coords(coords(xi), n_); }
  /// Free coordinates of a point assumed to lie in the set.
  RealVector project(const HermitianOperator& rho) const { return free_.transpose() * (to_real_coords(rho) - origin_); }
  /// Gradient in free coordinates of a function whose Frobenius gradient is g.
  RealVector pull_back(const Matrix& g) const { return free_.transpose() * to_real_coords(g); }

 private:
  Index n_;
  RealVector origin_;
  RealMatrix free_;
  double residual_ = 0.0;
};

namespace detail {

/// (f(x) - f(y)) / (x - y) for f = ln, with the limit 1/x on the diagonal.
inline double log_divided_difference(double x, double y) {
  const double d = x - y;
  if (std::abs(d) <= 1e-12 * std::max(x, y)) return 2.0 / (x + y);
  return (std::log(x) - std::log(y)) / d;
}

/// Eigenvalues of Z(rho) below this fraction of the largest are treated as
/// outside its support when rho lives on a face.
inline constexpr double kPinchedSupportFloor = 1e-14;

/// Phi(rho) = Tr rho ln rho - Tr rho ln Z(rho) in nats, and its Frobenius
/// gradient ln rho + 1 - ln Z(rho) - Z(Dln_{Z(rho)}(rho)). Returns +infinity
/// if rho or Z(rho) is not positive definite.
///
/// With an isometry w, x is the compressed state and rho = w x w^dagger; the
/// logarithm of Z(rho) is taken on its support and the gradient is with
/// respect to x.
inline double coherence_nats(const Matrix& x, const KeyMapPOVM& z, Matrix* grad, Spectrum* x_spec = nullptr,
                             const Matrix* w = nullptr) {
  Spectrum r = eigh(x);
  if (!(r.values(0) > 0.0)) return std::numeric_limits<double>::infinity();
  const Matrix rho = w ? Matrix(*w * x * w->adjoint()) : x;
  const Spectrum t = eigh(pinch(HermitianOperator::symmetrized(rho), z));
  const Index n = rho.rows();
  Index first = 0;
  if (w) {
    const double floor = kPinchedSupportFloor * t.values(n - 1);
    while (first < n && !(t.values(first) > floor)) ++first;
  }
  if (!(t.values(first) > 0.0)) return std::numeric_limits<double>::infinity();
  const Index s = n - first;
  const Matrix u = t.vectors.rightCols(s);
  const RealVector tv = t.values.tail(s);
  const RealVector log_r = r.values.array().log();
  const RealVector log_t = tv.array().log();
  const Matrix rho_in_t = u.adjoint() * rho * u;
  double value = r.values.dot(log_r);
  for (Index k = 0; k < s; ++k) value -= rho_in_t(k, k).real() * log_t(k);
  if (grad) {
    Matrix dl(s, s);
    for (Index j = 0; j < s; ++j)
      for (Index k = 0; k < s; ++k) dl(j, k) = rho_in_t(j, k) * log_divided_difference(tv(j), tv(k));
    const Matrix dlog = u * dl * u.adjoint();
    const Matrix ln_tau = u * log_t.cast<Complex>().asDiagonal() * u.adjoint();
    Matrix outer = -ln_tau - pinch(HermitianOperator::symmetrized(dlog), z).matrix();
    if (w) outer = w->adjoint() * outer * *w;
    const Index m = x.rows();
    *grad = r.vectors * log_r.cast<Complex>().asDiagonal() * r.vectors.adjoint() + Matrix::Identity(m, m) + outer;
  }
  if (x_spec) *x_spec = std::move(r);
  return value;
}

/// Maximizes the smallest eigenvalue over the affine set through the smooth
/// surrogate -(1/s) ln Tr exp(-s rho). Returns the best point found and its
/// smallest eigenvalue.
inline std::pair<RealVector, double> maximize_min_eigenvalue(const AffineStates& aff, RealVector xi, int max_iters) {
  auto min_eig = [&](const RealVector& x) { return eigh(aff.state(x)).values(0); };
  double best = min_eig(xi);
  RealVector best_xi = xi;
  const double scale = static_cast<double>(aff.dim());
  for (double s : {10.0, 100.0, 1e3, 1e4, 1e5}) {
    const double sharp = s * scale;
    auto fg = [&](const RealVector& x, RealVector& g) {
      const Spectrum sp = eigh(aff.state(x));
      const double m = sp.values(0);
      RealVector w = (-(sp.values.array() - m) * sharp).exp();
      const double sum = w.sum();
      w /= sum;
      const Matrix p = sp.vectors * w.cast<Complex>().asDiagonal() * sp.vectors.adjoint();
      g = -aff.pull_back(p);
      return -(m - std::log(sum) / sharp);
    };
    BfgsOptions bo;
    bo.max_iters = max_iters;
    bo.ftol = 1e-14;
    bo.gtol = 1e-12;
    const BfgsResult r = bfgs_minimize(fg, xi, bo);
    xi = r.x;
    const double m = min_eig(xi);
    if (m > best) {
      best = m;
      best_xi = xi;
    }
  }
  return {best_xi, best};
}

}  // namespace detail

/// Minimizes the coherence of rho with respect to the key map over the states
/// satisfying the constraints, with a log-det barrier whose weight shrinks
/// geometrically. Post-selected problems are transformed first. The value is
/// in bits.
inline PrimalResult solve_primal(const KeyRateProblem& problem, const OracleOptions& opts = {}) {
  problem.validate();
  const KeyRateProblem pr = effective_problem(problem);
  const std::optional<Face> face = opts.facial_reduction ? find_face(pr) : std::nullopt;
  const Matrix* w = face ? &face->isometry : nullptr;
  const ConstraintSet& base = face ? face->constraints : pr.constraints;
  const Index n = base.dim();

  PrimalResult res;
  ConstraintSet cs = base;
  std::optional<HermitianOperator> base_witness;
  if (pr.witness) base_witness = face ? HermitianOperator::symmetrized(face->compress(pr.witness->matrix())) : *pr.witness;
  std::optional<HermitianOperator> witness = base_witness;
  RealVector xi;
  std::optional<AffineStates> aff;

  auto perturb = [&](double eps) {
    cs = perturb_constraints(base, eps);
    res.eps_used = eps;
    if (witness) witness = (1.0 - static_cast<double>(n) * eps) * *base_witness + eps * HermitianOperator::identity(n);
  };
  if (opts.force_eps) perturb(*opts.force_eps);

  for (int attempt = 0; attempt < 2; ++attempt) {
    aff.emplace(cs);
    xi = witness ? aff->project(*witness) : RealVector::Zero(aff->free_dim());
    double m = eigh(aff->state(xi)).values(0);
    if (!(m > 1e-7)) std::tie(xi, m) = detail::maximize_min_eigenvalue(*aff, xi, opts.max_iters);
    if (m > opts.strict_tol) break;
    if (attempt == 1 || res.eps_used > 0.0) {
      throw InfeasibleError("solve_primal: no positive definite state satisfies the constraints (best smallest eigenvalue " +
                            std::to_string(m) + ")");
    }
    perturb(opts.eps);
  }

  BfgsOptions bo;
  bo.max_iters = opts.max_iters;
  bo.ftol = 1e-14;
  bo.gtol = 1e-10;
  bool converged = true;
  for (double mu = opts.mu_start; mu >= opts.mu_end * (1.0 - 1e-9); mu *= opts.mu_factor) {
    auto fg = [&](const RealVector& x, RealVector& g) {
      const Matrix rho = aff->state(x);
      Matrix grad;
      Spectrum rs;
      double v;
      try {
        v = detail::coherence_nats(rho, pr.keymap, &grad, &rs, w);
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
      }
      if (!std::isfinite(v)) return v;
      const RealVector inv = rs.values.cwiseInverse();
      grad -= mu * (rs.vectors * inv.cast<Complex>().asDiagonal() * rs.vectors.adjoint());
      g = aff->pull_back(0.5 * (grad + grad.adjoint()));
      return v - mu * rs.values.array().log().sum();
    };
    const BfgsResult r = bfgs_minimize(fg, xi, bo);
    res.iterations += r.iterations;
    if (std::isfinite(r.f)) xi = r.x;
    converged = r.converged;
  }

  const HermitianOperator x_star = HermitianOperator::symmetrized(aff->state(xi));
  res.value = detail::coherence_nats(x_star.matrix(), pr.keymap, nullptr, nullptr, w) / kLn2;
  res.feasibility_residual = cs.max_residual(x_star);
  res.min_eigenvalue = min_eigenvalue(x_star);
  res.rho_star = face ? HermitianOperator::symmetrized(face->lift(x_star.matrix())) : x_star;
  res.converged = converged;
  return res;
}

/// Key rate implied by a primal value, with the same post-selection and
/// retained-fraction conventions as the dual.
inline double primal_key_rate(const KeyRateProblem& problem, const PrimalResult& r) {
  KeyRateProblem pr = problem;
  if (pr.postselect) pr.p_pass = resolve_p_pass(pr);
  return key_rate_for(pr, r.value * kLn2);
}

/// Primal values for a strictly decreasing list of perturbation strengths.
inline std::vector<double> perturbation_convergence_check(const KeyRateProblem& problem, const std::vector<double>& eps_list,
                                                          OracleOptions opts = {}) {
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1]) || !(eps_list[i] > 0.0)) {
      throw DomainError("perturbation_convergence_check: eps list must be positive and strictly decreasing");
    }
  }
  std::vector<double> out;
  for (double eps : eps_list) {
    opts.force_eps = eps;
    out.push_back(solve_primal(problem, opts).value);
  }
  return out;
}

}  // namespace qkdrate
