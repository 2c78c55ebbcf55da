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
#include <numbers>
#include <string>
#include <vector>

#include "qkdrate/entropy.hpp"
#include "qkdrate/errors.hpp"
#include "qkdrate/keymap.hpp"
#include "qkdrate/operator.hpp"
#include "qkdrate/problem.hpp"

namespace qkdrate {

// Bases are stored as matrices whose columns are the basis vectors.

inline void require_dim(int d, const char* who) {
  if (d < 2) throw DomainError(std::string(who) + ": dimension must be >= 2, got " + std::to_string(d));
}

inline bool is_prime(int d) {
  if (d < 2) return false;
  for (int k = 2; k * k <= d; ++k)
    if (d % k == 0) return false;
  return true;
}

inline Complex root_of_unity(int d, long long power) {
  const long long r = ((power % d) + d) % d;
  const double a = 2.0 * std::numbers::pi * static_cast<double>(r) / d;
  return {std::cos(a), std::sin(a)};
}

/// F_jk = omega^{-jk} / sqrt(d), omega = exp(2 pi i / d).
inline Matrix fourier_matrix(int d) {
  require_dim(d, "fourier_matrix");
  Matrix f(d, d);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) f(j, k) = s * root_of_unity(d, -static_cast<long long>(j) * k);
  return f;
}

struct PauliPair {
  Matrix z;  ///< sum_j omega^j |j><j|
  Matrix x;  ///< sum_j |j+1><j|
};

inline PauliPair generalized_paulis(int d) {
  require_dim(d, "generalized_paulis");
  PauliPair p{Matrix::Zero(d, d), Matrix::Zero(d, d)};
  for (int j = 0; j < d; ++j) {
    p.z(j, j) = root_of_unity(d, j);
    p.x((j + 1) % d, j) = 1.0;
  }
  return p;
}

inline Matrix matrix_power(const Matrix& m, int k) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) out = out * m;
  return out;
}

/// |phi_{0,0}> = sum_j |jj> / sqrt(d).
inline Vector max_entangled(int d) {
  require_dim(d, "max_entangled");
  Vector v = Vector::Zero(static_cast<Index>(d) * d);
  for (int j = 0; j < d; ++j) v(static_cast<Index>(j) * d + j) = 1.0 / std::sqrt(static_cast<double>(d));
  return v;
}

/// |phi_{q,r}> = (1 (x) X^q Z^r) |phi_{0,0}>, stored at index q*d + r.
inline std::vector<Vector> bell_basis(int d) {
  const PauliPair p = generalized_paulis(d);
  const Vector phi = max_entangled(d);
  const Matrix id = Matrix::Identity(d, d);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(d) * d);
  for (int q = 0; q < d; ++q)
    for (int r = 0; r < d; ++r) out.push_back(kron(id, Matrix(matrix_power(p.x, q) * matrix_power(p.z, r))) * phi);
  return out;
}

/// First n bases of a complete MUB family for prime d: standard, Fourier,
/// then the quadratic-phase bases H_k. For d = 2 the third basis is the
/// sigma_Y eigenbasis.
inline std::vector<Matrix> mub_family(int d, int n) {
  if (!is_prime(d)) throw DomainError("mub_family: d must be prime, got " + std::to_string(d));
  if (n < 2 || n > d + 1) {
    throw DomainError("mub_family: need 2 <= n <= d+1, got n=" + std::to_string(n));
  }
  std::vector<Matrix> out{Matrix::Identity(d, d), fourier_matrix(d)};
  if (d == 2) {
    if (n == 3) {
      const double s = 1.0 / std::sqrt(2.0);
      Matrix y(2, 2);
      y << s, s, Complex(0, s), Complex(0, -s);
      out.push_back(y);
    }
    return out;
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 1; k <= n - 2; ++k) {
    Matrix h(d, d);
    for (int j = 0; j < d; ++j) {
      const long long sj = static_cast<long long>(d - j) * (d + j - 1) / 2;
      for (int jp = 0; jp < d; ++jp) {
        const long long e = -static_cast<long long>(j) * jp - k * sj;
        h(j, jp) = norm * root_of_unity(d, e);
      }
    }
    out.push_back(h);
  }
  return out;
}

/// correlate = true: sum_{j != k} |a_j><a_j| (x) |b_k><b_k| (error means the
/// outcomes differ). correlate = false: sum_j |a_j><a_j| (x) |b_j><b_j|
/// (error means they agree).
inline HermitianOperator error_operator(const Matrix& basis_a, const Matrix& basis_b, bool correlate) {
  if (basis_a.cols() != basis_b.cols() || basis_a.rows() != basis_b.rows()) {
    throw DimensionError("error_operator: basis sizes differ");
  }
  const Index d = basis_a.cols();
  Matrix match = Matrix::Zero(d * d, d * d);
  for (Index j = 0; j < d; ++j) {
    match += kron(Matrix(basis_a.col(j) * basis_a.col(j).adjoint()), Matrix(basis_b.col(j) * basis_b.col(j).adjoint()));
  }
  if (correlate) return HermitianOperator::symmetrized(Matrix::Identity(d * d, d * d) - match);
  return HermitianOperator::symmetrized(match);
}

/// (1 - p) rho + p rho_A (x) 1_B / d_B.
inline HermitianOperator depolarize(const HermitianOperator& rho, double p, Index dim_a, Index dim_b) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("depolarize: p outside [0,1]");
  const HermitianOperator rho_a = partial_trace(rho, dim_a, dim_b, Subsystem::A);
  return (1.0 - p) * rho + p * kron(rho_a, HermitianOperator::identity(dim_b) / static_cast<double>(dim_b));
}

struct SourceReplacement {
  /// sum_j sqrt(p_j) |j>|phi_j> on A (x) A'.
  Vector psi;
  /// Reduced state on A, sum_jk sqrt(p_j p_k) <phi_k|phi_j> |j><k|.
  HermitianOperator rho_a;
  /// Tomography of rho_A: every element Omega of the real-coordinate basis,
  /// lifted to Omega (x) 1_{A'}, with value Tr(rho_A Omega).
  ConstraintSet tomography;
};

inline SourceReplacement source_replacement(const std::vector<Vector>& signals, const std::vector<double>& probs,
                                            double tol = 1e-10) {
  if (signals.empty() || signals.size() != probs.size()) {
    throw DomainError("source_replacement: need one probability per signal");
  }
  const Index n = static_cast<Index>(signals.size());
  const Index m = signals.front().size();
  double total = 0.0;
  for (std::size_t j = 0; j < signals.size(); ++j) {
    if (signals[j].size() != m) throw DimensionError("source_replacement: signals differ in dimension");
    if (std::abs(signals[j].norm() - 1.0) > tol) throw DomainError("source_replacement: signal not normalized");
    if (probs[j] < 0.0) throw DomainError("source_replacement: negative probability");
    total += probs[j];
  }
  if (std::abs(total - 1.0) > tol) throw DomainError("source_replacement: probabilities do not sum to 1");

  SourceReplacement out;
  out.psi = Vector::Zero(n * m);
  Matrix rho_a(n, n);
  for (Index j = 0; j < n; ++j) {
    out.psi.segment(j * m, m) = std::sqrt(probs[static_cast<std::size_t>(j)]) * signals[static_cast<std::size_t>(j)];
    for (Index k = 0; k < n; ++k) {
      rho_a(j, k) = std::sqrt(probs[static_cast<std::size_t>(j)] * probs[static_cast<std::size_t>(k)]) *
                    signals[static_cast<std::size_t>(k)].dot(signals[static_cast<std::size_t>(j)]);
    }
  }
  out.rho_a = HermitianOperator(rho_a);
  const auto id_b = HermitianOperator::identity(m);
  for (const auto& omega : hermitian_basis(n)) out.tomography.add(kron(omega, id_b), out.rho_a.dot(omega));
  return out;
}

// ---------------------------------------------------------------------------
// Protocol builders.

inline HermitianOperator pure_state(const Vector& v) { return HermitianOperator::projector(v); }

inline Matrix conjugate_basis(const Matrix& b) { return b.conjugate(); }

/// Maximally entangled state through the depolarizing channel that produces
/// error rate q in every conjugate basis pair.
inline HermitianOperator noisy_max_entangled(int d, double q) {
  const double p = q * d / (d - 1.0);
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("error rate " + std::to_string(q) + " out of range for d=" + std::to_string(d));
  }
  return depolarize(pure_state(max_entangled(d)), p, d, d);
}

namespace detail {

inline void require_q(double q, double upper, const char* who) {
  if (!(q >= 0.0 && q < upper)) {
    throw DomainError(std::string(who) + ": Q must lie in [0, " + std::to_string(upper) + "), got " + std::to_string(q));
  }
}

/// Key map Z on A, constraints <1> = 1, <E_Z> = q, <E_avg> = q where E_avg
/// averages the error operators of the given non-key bases (Bob conjugated).
inline KeyRateProblem mub_problem(int d, double q, const std::vector<Matrix>& test_bases, std::string label) {
  KeyRateProblem pr;
  pr.dims = {d, d};
  pr.keymap = KeyMapPOVM::standard_basis(d).lifted(d);
  const Matrix z = Matrix::Identity(d, d);
  HermitianOperator e_avg = HermitianOperator::zero(static_cast<Index>(d) * d);
  for (const auto& b : test_bases) e_avg += error_operator(b, conjugate_basis(b), true);
  e_avg = e_avg / static_cast<double>(test_bases.size());
  pr.constraints.add(HermitianOperator::identity(static_cast<Index>(d) * d), 1.0);
  pr.constraints.add(e_avg, q);
  pr.constraints.add(error_operator(z, z, true), q);
  pr.hzazb = fano_bound(q, d);
  pr.witness = noisy_max_entangled(d, q);
  pr.label = std::move(label);
  return pr;
}

}  // namespace detail

inline KeyRateProblem build_two_mub(int d, double q) {
  require_dim(d, "build_two_mub");
  detail::require_q(q, 1.0 - 1.0 / d, "build_two_mub");
  return detail::mub_problem(d, q, {fourier_matrix(d)}, "two-mub");
}

inline KeyRateProblem build_bb84(double q) {
  detail::require_q(q, 0.5, "build_bb84");
  KeyRateProblem pr = build_two_mub(2, q);
  pr.label = "bb84";
  return pr;
}

inline KeyRateProblem build_n_mub(int d, int n, double q) {
  detail::require_q(q, 1.0 - 1.0 / d, "build_n_mub");
  auto bases = mub_family(d, n);
  bases.erase(bases.begin());
  return detail::mub_problem(d, q, bases, "n-mub");
}

/// Constraints <E_XY> = Q, <E_Z> = Q with E_XY = (E_X + E_Y)/2. E_Y counts
/// agreeing outcomes as errors.
inline KeyRateProblem build_six_state(double q) {
  detail::require_q(q, 0.5, "build_six_state");
  const auto bases = mub_family(2, 3);
  KeyRateProblem pr;
  pr.dims = {2, 2};
  pr.keymap = KeyMapPOVM::standard_basis(2).lifted(2);
  const HermitianOperator e_x = error_operator(bases[1], bases[1], true);
  const HermitianOperator e_y = error_operator(bases[2], bases[2], false);
  pr.constraints.add(HermitianOperator::identity(4), 1.0);
  pr.constraints.add((e_x + e_y) / 2.0, q);
  pr.constraints.add(error_operator(bases[0], bases[0], true), q);
  pr.hzazb = binary_entropy(q);
  pr.witness = noisy_max_entangled(2, q);
  pr.label = "six-state";
  return pr;
}

/// Pauli matrices in the standard basis.
struct Qubit {
  static Matrix x() { return (Matrix(2, 2) << 0, 1, 1, 0).finished(); }
  static Matrix y() { return (Matrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished(); }
  static Matrix z() { return (Matrix(2, 2) << 1, 0, 0, -1).finished(); }
};

/// Z and W = sin(theta) Z + cos(theta) X measured by both parties. `level`
/// 1..4 includes <WW>, then <ZZ>, <ZW>, <WZ>.
inline KeyRateProblem build_rotated(double theta, double q, int level) {
  if (!(theta >= 0.0 && theta < std::numbers::pi / 2)) throw DomainError("build_rotated: theta must lie in [0, pi/2)");
  detail::require_q(q, 0.5, "build_rotated");
  if (level < 1 || level > 4) throw DomainError("build_rotated: level must be 1..4");
  const Matrix z = Qubit::z();
  const Matrix w = std::sin(theta) * z + std::cos(theta) * Qubit::x();
  const double c = 1.0 - 2.0 * q;
  KeyRateProblem pr;
  pr.dims = {2, 2};
  pr.keymap = KeyMapPOVM::standard_basis(2).lifted(2);
  pr.constraints.add(HermitianOperator::identity(4), 1.0);
  pr.constraints.add(HermitianOperator(kron(w, w)), c);
  if (level >= 2) pr.constraints.add(HermitianOperator(kron(z, z)), c);
  if (level >= 3) pr.constraints.add(HermitianOperator(kron(z, w)), std::sin(theta) * c);
  if (level >= 4) pr.constraints.add(HermitianOperator(kron(w, z)), std::sin(theta) * c);
  pr.hzazb = binary_entropy(q);
  pr.witness = noisy_max_entangled(2, q);
  pr.label = "rotated";
  return pr;
}

/// Entropic-uncertainty comparison bound -log2 c - 2 h(Q), c = (1 + sin theta)/2,
/// clamped at zero.
inline double eur_baseline(double theta, double q) {
  const double c = (1.0 + std::sin(theta)) / 2.0;
  return std::max(0.0, -std::log2(c) - 2.0 * binary_entropy(q));
}

struct B92States {
  Vector phi0, phi1, bar0, bar1;
};

/// Signals at angle theta/2 apart on the Bloch circle, <phi0|phi1> = cos(theta/2),
/// and the states orthogonal to each.
inline B92States b92_states(double theta) {
  const double c = std::cos(theta / 4), s = std::sin(theta / 4);
  B92States st;
  st.phi0 = (Vector(2) << c, s).finished();
  st.phi1 = (Vector(2) << c, -s).finished();
  st.bar0 = (Vector(2) << -s, c).finished();
  st.bar1 = (Vector(2) << s, c).finished();
  return st;
}

/// Bob's filter 1_A (x) sqrt((|bar0><bar0| + |bar1><bar1|)/2).
inline Matrix b92_filter(double theta) {
  const B92States st = b92_states(theta);
  const HermitianOperator f = (pure_state(st.bar0) + pure_state(st.bar1)) / 2.0;
  const HermitianOperator root = spectral_apply(f, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  return kron(Matrix(Matrix::Identity(2, 2)), root.matrix());
}

inline KeyRateProblem build_b92(double theta, double p) {
  if (!(theta > 0.0 && theta < std::numbers::pi)) {
    throw DomainError("build_b92: theta must lie in (0, pi); the endpoints give parallel or orthogonal signals");
  }
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("build_b92: p must lie in [0, 1)");
  const B92States st = b92_states(theta);
  const Matrix p0 = Matrix(pure_state((Vector(2) << 1, 0).finished()).matrix());
  const Matrix p1 = Matrix(pure_state((Vector(2) << 0, 1).finished()).matrix());
  const Matrix b0 = pure_state(st.bar0).matrix(), b1 = pure_state(st.bar1).matrix();
  const HermitianOperator gamma1 = HermitianOperator::symmetrized(kron(p0, b0) + kron(p1, b1));
  const HermitianOperator gamma2 = HermitianOperator::symmetrized(kron(p0, b1) + kron(p1, b0));

  const SourceReplacement sr = source_replacement({st.phi0, st.phi1}, {0.5, 0.5});
  const HermitianOperator rho = depolarize(pure_state(sr.psi), p, 2, 2);
  const double g1 = p / 2.0;
  const double g2 = p / 2.0 + (1.0 - p) * std::pow(std::sin(theta / 2.0), 2);

  KeyRateProblem pr;
  pr.dims = {2, 2};
  pr.keymap = KeyMapPOVM::standard_basis(2).lifted(2);
  pr.constraints.add(HermitianOperator::identity(4), 1.0);
  pr.constraints.add(gamma1, g1);
  pr.constraints.add(gamma2, g2);
  pr.constraints.add(HermitianOperator(kron(Qubit::x(), Matrix(Matrix::Identity(2, 2)))), std::cos(theta / 2.0));
  pr.postselect = b92_filter(theta);
  pr.p_pass = rho.conjugated(*pr.postselect).trace();
  pr.hzazb = binary_entropy(g1 / (g1 + g2));
  pr.witness = rho;
  pr.label = "b92";
  return pr;
}

/// Closed-form one-way rate max(0, 1 - 2 h(Q)).
inline double bb84_theory_rate(double q) { return std::max(0.0, 1.0 - 2.0 * binary_entropy(q)); }

namespace detail {

/// Tr_{A'B'}[(rho_A rho_B)(1 (x) M)] for two 8-dimensional party states
/// ordered (label, outgoing qubit) and a relay element M on A'B'.
inline Matrix relay_output(const Matrix& ra, const Matrix& rb, const Matrix& m) {
  Matrix out = Matrix::Zero(16, 16);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int xp = 0; xp < 4; ++xp)
        for (int yp = 0; yp < 4; ++yp) {
          Complex acc = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int ap = 0; ap < 2; ++ap)
              for (int b = 0; b < 2; ++b)
                for (int bp = 0; bp < 2; ++bp)
                  acc += ra(x * 2 + a, xp * 2 + ap) * rb(y * 2 + b, yp * 2 + bp) * m(ap * 2 + bp, a * 2 + b);
          out(x * 4 + y, xp * 4 + yp) = acc;
        }
  return out;
}

}  // namespace detail

/// Fixed-phase MDI protocol on A(4) (x) B(4) (x) M(2). Alice and Bob each
/// prepare |0>,|1> with probability pz/2 and |+>,|-> with (1-pz)/2, purified
/// as sum_j sqrt(p_j)|j>|phi_j>. The relay announces m = 0 for the retained
/// psi^- outcome, with POVM element (1-2Q)|psi^-><psi^-| + 2Q 1/4, and m = 1
/// otherwise. Alice's key map is {|0><0|+|2><2|, |1><1|+|3><3|} on retained
/// rounds; discarded rounds map to a third, constant symbol. Constraints are
/// the 32 label statistics plus the product marginal of the two labs.
inline KeyRateProblem build_mdi_bb84(double q, double pz = 0.99) {
  detail::require_q(q, 0.5, "build_mdi_bb84");
  if (!(pz > 0.0 && pz < 1.0)) throw DomainError("build_mdi_bb84: pz must lie in (0, 1)");
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<Vector> signals = {(Vector(2) << 1, 0).finished(), (Vector(2) << 0, 1).finished(),
                                       (Vector(2) << s, s).finished(), (Vector(2) << s, -s).finished()};
  const std::vector<double> probs = {pz / 2, pz / 2, (1 - pz) / 2, (1 - pz) / 2};
  const SourceReplacement sr = source_replacement(signals, probs);
  const Matrix party = sr.psi * sr.psi.adjoint();

  const Vector psi_minus = (Vector(4) << 0, s, -s, 0).finished();
  const Matrix m0 = (1.0 - 2.0 * q) * psi_minus * psi_minus.adjoint() + (2.0 * q / 4.0) * Matrix::Identity(4, 4);
  const Matrix m1 = Matrix::Identity(4, 4) - m0;
  const Matrix rho_m0 = detail::relay_output(party, party, m0);
  const Matrix rho_m1 = detail::relay_output(party, party, m1);
  const auto e0 = HermitianOperator::diagonal({1, 0});
  const auto e1 = HermitianOperator::diagonal({0, 1});
  const HermitianOperator rho = HermitianOperator::symmetrized(kron(rho_m0, e0.matrix()) + kron(rho_m1, e1.matrix()));

  KeyRateProblem pr;
  pr.dims = {4, 4, 2};
  pr.constraints.add(HermitianOperator::identity(32), 1.0);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k)
      for (const auto& em : {e0, e1}) {
        const HermitianOperator proj = kron({pure_state(Vector::Unit(4, j)), pure_state(Vector::Unit(4, k)), em});
        pr.constraints.add(proj, rho.dot(proj));
      }
  const auto omegas = hermitian_basis(4);
  const auto id_m = HermitianOperator::identity(2);
  for (const auto& oa : omegas)
    for (const auto& ob : omegas) pr.constraints.add(kron({oa, ob, id_m}), sr.rho_a.dot(oa) * sr.rho_a.dot(ob));

  const auto id_b = HermitianOperator::identity(4);
  pr.keymap = KeyMapPOVM({kron({HermitianOperator::diagonal({1, 0, 1, 0}), id_b, e0}),
                          kron({HermitianOperator::diagonal({0, 1, 0, 1}), id_b, e0}),
                          kron({HermitianOperator::identity(4), id_b, e1})});

  // Alice's key bit against Bob's full preparation label, on retained rounds.
  RealMatrix joint = RealMatrix::Zero(2, 4);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) joint(j % 2, k) += rho_m0(j * 4 + k, j * 4 + k).real();
  const double retained = joint.sum();
  pr.retained_fraction = retained;
  pr.hzazb = cond_entropy(JointDistribution(joint / retained, 1e-9));
  pr.witness = rho;
  pr.label = "mdi-bb84";
  return pr;
}

}  // namespace qkdrate
