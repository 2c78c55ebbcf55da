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
#include <string>
#include <utility>

#include "qkdrate/errors.hpp"
#include "qkdrate/keymap.hpp"
#include "qkdrate/operator.hpp"

namespace qkdrate {

/// The only conversion factor between nats and bits used in the library.
inline const double kLn2 = std::log(2.0);

/// Eigenvalues at or below this are treated as zero in entropy sums.
inline constexpr double kEntropyFloor = 1e-15;
/// Eigenvalues of the second argument of a relative entropy above this count
/// as its support.
inline constexpr double kSupportFloor = 1e-12;
/// Weight of the first argument outside that support above which the
/// relative entropy is reported as +infinity.
inline constexpr double kSupportViolation = 1e-10;

/// -x log2 x with the 0 log 0 = 0 convention.
inline double xlog2x_neg(double x) { return x > kEntropyFloor ? -x * std::log2(x) : 0.0; }

inline double binary_entropy(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("binary_entropy: q outside [0,1]: " + std::to_string(q));
  return xlog2x_neg(q) + xlog2x_neg(1.0 - q);
}

/// Shannon entropy (bits) of a list of non-negative weights; weights need not
/// sum to one.
inline double shannon_entropy(const RealVector& p) {
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i) h += xlog2x_neg(p(i));
  return h;
}

/// -Tr(p log2 p), bits. Sub-normalized input is fine.
inline double von_neumann_entropy(const HermitianOperator& p, double tol = 1e-9) {
  RealVector ev = eigenvalues(p);
  if (ev(0) < -tol) {
    throw DomainError("von_neumann_entropy: negative eigenvalue " + std::to_string(ev(0)));
  }
  return shannon_entropy(ev);
}

/// D(rho || tau) = Tr rho log2 rho - Tr rho log2 tau, bits. Returns +infinity
/// when rho has weight outside the support of tau.
inline double relative_entropy(const HermitianOperator& rho, const HermitianOperator& tau,
                               double tol = 1e-9) {
  if (rho.dim() != tau.dim()) throw DimensionError("relative_entropy: dimension mismatch");
  const RealVector rho_ev = eigenvalues(rho);
  if (rho_ev(0) < -tol) throw DomainError("relative_entropy: rho has a negative eigenvalue");
  const Spectrum t = eigh(tau);
  if (t.values(0) < -tol) throw DomainError("relative_entropy: tau has a negative eigenvalue");

  double cross = 0.0;
  double outside = 0.0;
  for (Index k = 0; k < t.values.size(); ++k) {
    const Vector v = t.vectors.col(k);
    const double w = (v.adjoint() * rho.matrix() * v)(0, 0).real();
    if (t.values(k) > kSupportFloor) {
      cross += w * std::log2(t.values(k));
    } else {
      outside += w;
    }
  }
  if (outside > kSupportViolation) return std::numeric_limits<double>::infinity();
  return -shannon_entropy(rho_ev) - cross;
}

/// Relative entropy of coherence with respect to a projective key map,
/// computed as H(Z(rho)) - H(rho).
inline double coherence(const HermitianOperator& rho, const KeyMapPOVM& z) {
  if (!z.is_projective()) {
    throw DomainError("coherence: key map is not projective; use generalized_coherence");
  }
  return von_neumann_entropy(pinch(rho, z)) - von_neumann_entropy(rho);
}

/// D(rho || sum_j P_j rho P_j) for an arbitrary POVM; the second argument is
/// not renormalized.
inline double generalized_coherence(const HermitianOperator& rho, const KeyMapPOVM& z) {
  return relative_entropy(rho, pinch(rho, z));
}

/// Classical joint distribution p(j, k) of Alice's outcome j and Bob's k.
class JointDistribution {
 public:
  explicit JointDistribution(RealMatrix probs, double tol = 1e-10) : p_(std::move(probs)) {
    if (p_.size() == 0) throw DomainError("JointDistribution: empty");
    if (p_.minCoeff() < -tol) throw DomainError("JointDistribution: negative probability");
    if (std::abs(p_.sum() - 1.0) > tol) {
      throw DomainError("JointDistribution: probabilities sum to " + std::to_string(p_.sum()));
    }
    p_ = p_.cwiseMax(0.0);
  }

  const RealMatrix& probs() const { return p_; }

 private:
  RealMatrix p_;
};

/// H(A|B) = H(AB) - H(B) in bits; rows index A, columns index B.
inline double cond_entropy(const JointDistribution& jd) {
  const RealMatrix& p = jd.probs();
  const RealVector flat = Eigen::Map<const RealVector>(p.data(), p.size());
  return shannon_entropy(flat) - shannon_entropy(p.colwise().sum().transpose());
}

/// h(q) + q log2(alphabet - 1).
inline double fano_bound(double q, int alphabet) {
  if (alphabet < 2) throw DomainError("fano_bound: alphabet must be >= 2");
  return binary_entropy(q) + q * std::log2(static_cast<double>(alphabet - 1));
}

}  // namespace qkdrate
