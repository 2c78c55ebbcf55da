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
#include <utility>

#include "qkdrate/operator.hpp"

namespace qkdrate {

struct BfgsOptions {
  int max_iters = 2000;
  /// Stop after two consecutive steps that lower f by less than this.
  double ftol = 1e-9;
  /// Stop when the gradient norm falls below this.
  double gtol = 1e-7;
  /// Halvings tried by the backtracking line search before giving up.
  int max_backtracks = 60;
};

struct BfgsResult {
  RealVector x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f with dense inverse-Hessian BFGS and an Armijo backtracking
/// line search. `fg(x, grad)` returns f(x) and fills grad; it may return
/// +infinity (or NaN) to mark x as outside the domain, which the line search
/// treats as a rejected step.
template <class FG>
BfgsResult bfgs_minimize(FG&& fg, RealVector x0, const BfgsOptions& opts = {}) {
  const Index n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  RealVector g(n), g_new(n);
  r.f = fg(r.x, g);
  ++r.evaluations;
  if (!std::isfinite(r.f)) return r;
  if (n == 0) {
    r.converged = true;
    return r;
  }

  RealMatrix h = RealMatrix::Identity(n, n);
  bool fresh = true;
  int small_steps = 0;
  for (r.iterations = 0; r.iterations < opts.max_iters; ++r.iterations) {
    if (g.norm() < opts.gtol) {
      r.converged = true;
      break;
    }
    RealVector p = -h * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      p = -g;
      slope = -g.squaredNorm();
    }
    // Keep the first trial step of a fresh (identity) model modest.
    double step = fresh ? std::min(1.0, 1.0 / std::max(1e-300, p.norm())) : 1.0;
    RealVector x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt, step *= 0.5) {
      x_new = r.x + step * p;
      f_new = fg(x_new, g_new);
      ++r.evaluations;
      if (std::isfinite(f_new) && f_new <= r.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        // Curvature model is stale; retry from steepest descent.
        h.setIdentity();
        fresh = true;
        continue;
      }
      r.converged = g.norm() < std::sqrt(opts.gtol);
      break;
    }

    const RealVector s = x_new - r.x;
    const RealVector y = g_new - g;
    const double improvement = r.f - f_new;
    r.x = std::move(x_new);
    r.f = f_new;
    g = g_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        h = RealMatrix::Identity(n, n) * (sy / y.squaredNorm());
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const RealVector hy = h * y;
      const double yhy = y.dot(hy);
      h += ((sy + yhy) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (improvement < opts.ftol) {
      if (++small_steps >= 2) {
        r.converged = true;
        ++r.iterations;
        break;
      }
    } else {
      small_steps = 0;
    }
  }
  return r;
}

}  // namespace qkdrate
