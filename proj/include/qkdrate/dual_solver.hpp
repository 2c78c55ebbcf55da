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
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qkdrate/entropy.hpp"
#include "qkdrate/errors.hpp"
#include "qkdrate/face.hpp"
#include "qkdrate/keymap.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/optimize.hpp"
#include "qkdrate/postselection.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

enum class GradientMode { Analytic, FiniteDifference };

struct SolverOptions {
  int starts = 8;
  std::uint64_t seed = 20170321;
  /// Objective improvement (nats) below which a stage stops.
  double tol = 1e-9;
  /// Iteration cap per smoothing stage.
  int max_iters = 2000;
  double grad_tol = 1e-7;
  GradientMode gradient = GradientMode::Analytic;
  /// Relative central-difference step for GradientMode::FiniteDifference.
  double fd_step = 1e-6;
  /// Standard deviation of the random starting multipliers.
  double start_scale = 1.0;
  /// Sharpness values t of the smoothed objective, visited in order.
  std::vector<double> smoothing = {1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
  /// Extra starting points, given as multipliers for the constraints of the
  /// problem being solved.
  std::vector<RealVector> warm_starts;
  /// Restrict to the support of any rank-deficient reduced state the
  /// constraints fix. Without this such problems need unbounded multipliers.
  bool facial_reduction = true;
};

struct DualResult {
  /// Multipliers for the constraints of the solved problem (the
  /// post-selected problem when post-selection is present).
  RealVector lambda;
  /// Dual objective at lambda, nats.
  double theta = 0.0;
  /// Key rate lower bound in bits, clamped at zero.
  double key_rate = 0.0;
  int restarts_used = 0;
  int best_start = 0;
  int iterations = 0;
  bool converged = false;
  /// Exact objective after each smoothing stage of the winning start.
  std::vector<double> objective_trace;
};

/// max(0, p_pass * (theta / ln 2 - hzazb)).
inline double key_rate_from_theta(double theta, double hzazb, std::optional<double> p_pass = std::nullopt) {
  return std::max(0.0, p_pass.value_or(1.0) * (theta / kLn2 - hzazb));
}

/// Rate for a solved (already post-selected) problem: scaled by p_pass when
/// present and taken per retained round when a retained fraction is set.
inline double key_rate_for(const KeyRateProblem& pr, double theta) {
  const double per_round = pr.retained_fraction ? theta / *pr.retained_fraction : theta;
  return key_rate_from_theta(per_round, pr.hzazb, pr.p_pass);
}

/// sum_i lambda_i Gamma_i.
inline HermitianOperator weighted_sum(const RealVector& lambda, const ConstraintSet& cs) {
  if (lambda.size() != static_cast<Index>(cs.size())) {
    throw DimensionError("multiplier count " + std::to_string(lambda.size()) + " != constraint count " + std::to_string(cs.size()));
  }
  Matrix acc = Matrix::Zero(cs.dim(), cs.dim());
  for (std::size_t i = 0; i < cs.size(); ++i) acc += lambda(static_cast<Index>(i)) * cs.op(i).matrix();
  return HermitianOperator::symmetrized(acc);
}

/// R(lambda) = exp(-1 - lambda . Gamma).
inline HermitianOperator r_operator(const RealVector& lambda, const ConstraintSet& cs) {
  return herm_exp(-HermitianOperator::identity(cs.dim()) - weighted_sum(lambda, cs));
}

/// -|| Z(R(lambda)) || - lambda . gamma in nats, evaluated on the problem as
/// given (no post-selection transform). The exponential is shifted by its
/// largest eigenvalue so large multipliers do not overflow.
///
/// With a face W, R is replaced by W exp(W^dagger(-1 - lambda . Gamma)W) W^dagger,
/// the limit of R as the multiplier of the (zero-valued) projector onto the
/// complement of the face goes to +infinity.
inline double theta_objective(const RealVector& lambda, const KeyRateProblem& pr, const Face* face = nullptr) {
  const ConstraintSet& cs = face ? face->constraints : pr.constraints;
  const HermitianOperator q = -HermitianOperator::identity(cs.dim()) - weighted_sum(lambda, cs);
  const Spectrum s = eigh(q);
  const double m = s.values(s.values.size() - 1);
  Matrix shifted = spectral_apply(s, [m](double x) { return std::exp(x - m); });
  if (face) shifted = face->lift(shifted);
  const double top = sup_norm(pinch(HermitianOperator::symmetrized(shifted), pr.keymap));
  return -std::exp(m) * top - lambda.dot(pr.constraints.value_vector());
}

/// The dual objective with the multiplier of the identity direction
/// maximized in closed form. With c = Tr(rho) fixed by the constraints,
/// orthonormal non-identity directions Delta_i, delta_i = Tr(rho Delta_i) and
/// M(mu) = ||Z(exp(-sum_i mu_i Delta_i))||:
///   g(mu) = -c ln M(mu) + c ln c - mu . delta.
/// The smoothed variant replaces ln M by (1/t) ln Tr Z(.)^t. When a face is
/// given, the multipliers act on the compressed constraints and the
/// exponential is lifted back before pinching.
class DualObjective {
 public:
  explicit DualObjective(const KeyRateProblem& pr, std::optional<Face> face = std::nullopt)
      : keymap_(pr.keymap), face_(std::move(face)) {
    const ConstraintSet& cs = face_ ? face_->constraints : pr.constraints;
    n_ = cs.dim();
    const auto c = implied_value(cs, HermitianOperator::identity(n_));
    if (!c) throw DomainError("DualObjective: constraints do not fix the trace; add <1> = 1");
    if (!(*c > 0.0)) throw InfeasibleError("DualObjective: constraints fix a non-positive trace");
    trace_ = *c;

    gamma_ = cs.value_vector();
    coords_ = detail::coordinate_matrix(cs.operators());
    lambda_solver_.compute(coords_);
    const RealVector rho0 = coords_.transpose().completeOrthogonalDecomposition().solve(gamma_);
    const double inconsistency = (coords_.transpose() * rho0 - gamma_).norm();
    if (inconsistency > 1e-8 * std::max(1.0, gamma_.norm())) {
      throw InfeasibleError("DualObjective: constraint values are inconsistent (residual " + std::to_string(inconsistency) + ")");
    }

    RealOrthonormalizer gs(n_ * n_);
    gs.add(to_real_coords(HermitianOperator::identity(n_)));
    for (const auto& op : cs.operators()) gs.add(to_real_coords(op));
    directions_ = gs.as_matrix(1);
    delta_ = directions_.transpose() * rho0;
  }

  /// Number of free multipliers.
  Index size() const { return directions_.cols(); }
  double trace_value() const { return trace_; }
  const std::optional<Face>& face() const { return face_; }

  double exact(const RealVector& mu) const {
    const Pinched p = pinched(mu);
    const double zmax = p.z.values(p.z.values.size() - 1);
    return -trace_ * (p.amax + std::log(zmax)) + trace_ * std::log(trace_) - mu.dot(delta_);
  }

  /// Smoothed objective at sharpness t; fills grad when non-null.
  double smoothed(const RealVector& mu, double t, RealVector* grad) const {
    const Pinched p = pinched(mu);
    const RealVector& z = p.z.values;
    const double zmax = z(z.size() - 1);
    RealVector w(z.size());
    double sum = 0.0;
    for (Index k = 0; k < z.size(); ++k) {
      const double r = std::max(z(k), 0.0) / zmax;
      sum += std::pow(r, t);
      w(k) = std::pow(r, t - 1.0);
    }
    const double log_m = p.amax + std::log(zmax) + std::log(sum) / t;
    const double value = -trace_ * log_m + trace_ * std::log(trace_) - mu.dot(delta_);
    if (grad) {
      // W = Z_s^{t-1} / Tr Z_s^t, then X = Dexp(Z(W)) in the eigenbasis of the
      // exponent; dg/dmu_i = c Tr(X Delta_i) - delta_i.
      w /= (sum * zmax);
      const Matrix wm = p.z.vectors * w.cast<Complex>().asDiagonal() * p.z.vectors.adjoint();
      Matrix zw = pinch(HermitianOperator::symmetrized(wm), keymap_).matrix();
      if (face_) zw = face_->compress(zw);
      const Matrix inner = p.a.vectors.adjoint() * zw * p.a.vectors;
      const RealVector& a = p.a.values;
      Matrix kd(a.size(), a.size());
      for (Index j = 0; j < a.size(); ++j) {
        for (Index k = 0; k < a.size(); ++k) kd(j, k) = inner(j, k) * exp_divided_difference(a(j) - p.amax, a(k) - p.amax);
      }
      const Matrix x = p.a.vectors * kd * p.a.vectors.adjoint();
      *grad = trace_ * (directions_.transpose() * to_real_coords(Matrix(0.5 * (x + x.adjoint())))) - delta_;
    }
    return value;
  }

  double smoothed_fd(const RealVector& mu, double t, RealVector* grad, double rel_step) const {
    const double value = smoothed(mu, t, nullptr);
    if (grad) {
      grad->resize(mu.size());
      RealVector probe = mu;
      for (Index i = 0; i < mu.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(mu(i)));
        probe(i) = mu(i) + h;
        const double up = smoothed(probe, t, nullptr);
        probe(i) = mu(i) - h;
        const double down = smoothed(probe, t, nullptr);
        probe(i) = mu(i);
        (*grad)(i) = (up - down) / (2.0 * h);
      }
    }
    return value;
  }

  /// Multipliers for the original constraints reproducing mu with the
  /// optimal identity component (minimum-norm solution).
  RealVector to_lambda(const RealVector& mu) const {
    const Pinched p = pinched(mu);
    const double zmax = p.z.values(p.z.values.size() - 1);
    const double s = p.amax + std::log(zmax) - std::log(trace_);
    RealVector target = directions_ * mu;
    target += (s - 1.0) * to_real_coords(HermitianOperator::identity(n_));
    return lambda_solver_.solve(target);
  }

  /// Projects constraint multipliers onto the free directions.
  RealVector from_lambda(const RealVector& lambda) const {
    if (lambda.size() != coords_.cols()) throw DimensionError("from_lambda: wrong multiplier count");
    return directions_.transpose() * (coords_ * lambda);
  }

 private:
  struct Pinched {
    Spectrum a;   // eigen-decomposition of -sum mu_i Delta_i
    double amax;  // its largest eigenvalue
    Spectrum z;   // spectrum of Z(exp(. - amax))
  };

  Pinched pinched(const RealVector& mu) const {
    Pinched p;
    p.a = eigh(Matrix(-matrix_from_real_coords(directions_ * mu, n_)));
    p.amax = p.a.values(p.a.values.size() - 1);
    const double amax = p.amax;
    Matrix e = spectral_apply(p.a, [amax](double x) { return std::exp(x - amax); });
    if (face_) e = face_->lift(e);
    p.z = eigh(pinch(HermitianOperator::symmetrized(e), keymap_));
    return p;
  }

  /// (e^x - e^y) / (x - y), with the limit e^x on the diagonal.
  static double exp_divided_difference(double x, double y) {
    const double d = x - y;
    if (std::abs(d) < 1e-12) return std::exp(0.5 * (x + y));
    return std::exp(y) * std::expm1(d) / d;
  }

  KeyMapPOVM keymap_;
  std::optional<Face> face_;
  Index n_ = 0;
  double trace_ = 1.0;
  RealVector gamma_;
  RealMatrix coords_;
  Eigen::CompleteOrthogonalDecomposition<RealMatrix> lambda_solver_;
  RealMatrix directions_;
  RealVector delta_;
};

namespace detail {

struct StartOutcome {
  RealVector mu;
  double value = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  std::vector<double> trace;
};

inline StartOutcome run_start(const DualObjective& obj, RealVector mu, std::size_t first_stage, const SolverOptions& opts) {
  StartOutcome out;
  out.mu = mu;
  // The starting point is itself a candidate, so a warm start never loses
  // ground to smoothing bias.
  try {
    if (const double v = obj.exact(mu); std::isfinite(v)) out.value = v;
  } catch (const NumericalError&) {
  }
  BfgsOptions bo;
  bo.max_iters = opts.max_iters;
  bo.ftol = opts.tol;
  bo.gtol = opts.grad_tol;
  for (std::size_t stage = first_stage; stage < opts.smoothing.size(); ++stage) {
    const double t = opts.smoothing[stage];
    auto fg = [&](const RealVector& x, RealVector& g) {
      constexpr double kRejected = std::numeric_limits<double>::infinity();
      if (!x.allFinite()) return kRejected;
      try {
        const double v = opts.gradient == GradientMode::Analytic ? obj.smoothed(x, t, &g) : obj.smoothed_fd(x, t, &g, opts.fd_step);
        g = -g;
        return std::isfinite(v) && g.allFinite() ? -v : kRejected;
      } catch (const NumericalError&) {
        return kRejected;
      }
    };
    const BfgsResult r = bfgs_minimize(fg, mu, bo);
    out.iterations += r.iterations;
    if (!std::isfinite(r.f)) break;
    mu = r.x;
    out.converged = r.converged;
    const double exact = obj.exact(mu);
    out.trace.push_back(exact);
    if (std::isfinite(exact) && exact > out.value) {
      out.value = exact;
      out.mu = mu;
    }
  }
  return out;
}

}  // namespace detail

/// Maximizes the dual objective over the multipliers from several starting
/// points and returns the best bound found. Start 0 is the zero vector (the
/// trivial bound); further starts are Gaussian with opts.start_scale and skip
/// the first smoothing stage, which is concave and would undo the
/// randomization. Post-selected problems are transformed first.
inline DualResult maximize_theta(const KeyRateProblem& problem, const SolverOptions& opts = {}) {
  problem.validate();
  const KeyRateProblem pr = effective_problem(problem);
  const DualObjective obj(pr, opts.facial_reduction ? find_face(pr) : std::nullopt);
  if (opts.smoothing.empty()) throw DomainError("maximize_theta: empty smoothing schedule");

  std::vector<std::pair<RealVector, std::size_t>> starts;
  starts.emplace_back(RealVector::Zero(obj.size()), 0);
  for (const auto& w : opts.warm_starts) starts.emplace_back(obj.from_lambda(w), 1);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, opts.start_scale);
  const std::size_t random_first = std::min<std::size_t>(1, opts.smoothing.size() - 1);
  for (int s = 1; s < opts.starts; ++s) {
    RealVector mu(obj.size());
    for (Index i = 0; i < mu.size(); ++i) mu(i) = normal(rng);
    starts.emplace_back(std::move(mu), random_first);
  }

  DualResult res;
  detail::StartOutcome best;
  int best_index = -1;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    detail::StartOutcome o = detail::run_start(obj, starts[s].first, starts[s].second, opts);
    ++res.restarts_used;
    res.iterations += o.iterations;
    if (std::isfinite(o.value) && o.value > best.value) {
      best = std::move(o);
      best_index = static_cast<int>(s);
    }
  }
  if (best_index < 0) throw ConvergenceError("maximize_theta: every start produced a non-finite objective");

  res.best_start = best_index;
  res.lambda = obj.to_lambda(best.mu);
  res.theta = theta_objective(res.lambda, pr, obj.face() ? &*obj.face() : nullptr);
  if (!std::isfinite(res.theta)) {
    throw NumericalError("maximize_theta: objective at the reconstructed multipliers is not finite");
  }
  res.converged = best.converged;
  res.objective_trace = std::move(best.trace);
  res.key_rate = key_rate_for(pr, res.theta);
  return res;
}

}  // namespace qkdrate
