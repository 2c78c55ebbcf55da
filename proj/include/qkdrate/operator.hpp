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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qkdrate/errors.hpp"

namespace qkdrate {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Largest tolerated |M - M^dagger| entry (relative to the largest entry)
/// when a general matrix is accepted as a Hermitian operator.
inline constexpr double kHermiticityTolerance = 1e-9;
/// Default eigenvalue floor used by herm_log.
inline constexpr double kLogFloor = 1e-14;
/// Residual norm below which Gram-Schmidt treats an input as dependent.
inline constexpr double kGramSchmidtDropTolerance = 1e-10;

namespace detail {

inline double max_abs_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Dense complex Hermitian matrix. The stored entries are exactly Hermitian:
/// every constructor re-symmetrizes with (M + M^dagger) / 2.
class HermitianOperator {
 public:
  HermitianOperator() : m_(Matrix::Zero(1, 1)) {}

  /// Accepts `m` if it is Hermitian up to `tol` (relative to its largest
  /// entry); throws DomainError otherwise.
  explicit HermitianOperator(const Matrix& m, double tol = kHermiticityTolerance) {
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimensionError("HermitianOperator: matrix must be square with dim >= 1, got " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    const double scale = std::max(1.0, detail::max_abs_entry(m));
    const double skew = detail::max_abs_entry(m - m.adjoint());
    if (skew > tol * scale) {
      throw DomainError("HermitianOperator: matrix is not Hermitian (max |M - M^dag| = " +
                        std::to_string(skew) + ")");
    }
    m_ = 0.5 * (m + m.adjoint());
  }

  /// Symmetrizes without checking. For results of arithmetic that is
  /// Hermitian up to rounding.
  static HermitianOperator symmetrized(const Matrix& m) {
    HermitianOperator h;
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimensionError("HermitianOperator: matrix must be square with dim >= 1");
    }
    h.m_ = 0.5 * (m + m.adjoint());
    return h;
  }

  static HermitianOperator identity(Index dim) { return symmetrized(Matrix::Identity(dim, dim)); }
  static HermitianOperator zero(Index dim) { return symmetrized(Matrix::Zero(dim, dim)); }

  static HermitianOperator diagonal(const RealVector& d) {
    return symmetrized(d.cast<Complex>().asDiagonal().toDenseMatrix());
  }
  static HermitianOperator diagonal(std::initializer_list<double> d) {
    RealVector v(static_cast<Index>(d.size()));
    Index i = 0;
    for (double x : d) v(i++) = x;
    return diagonal(v);
  }

  /// |v><v| (not normalized).
  static HermitianOperator projector(const Vector& v) { return symmetrized(v * v.adjoint()); }

  Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  Complex operator()(Index i, Index j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }

  /// Frobenius inner product Tr(A B), real for Hermitian A, B.
  double dot(const HermitianOperator& other) const {
    check_same_dim(other, "dot");
    // Tr(A B) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
    return (m_.array() * other.m_.conjugate().array()).sum().real();
  }

  /// Tr(this * m) for an arbitrary square matrix.
  Complex trace_with(const Matrix& m) const { return (m_.transpose().array() * m.array()).sum(); }

  double frobenius_norm() const { return m_.norm(); }

  /// U A U^dagger for any (not necessarily unitary) square U of matching size.
  HermitianOperator conjugated(const Matrix& u) const {
    if (u.cols() != dim()) throw DimensionError("HermitianOperator::conjugated: size mismatch");
    return symmetrized(u * m_ * u.adjoint());
  }

  HermitianOperator& operator+=(const HermitianOperator& o) {
    check_same_dim(o, "+=");
    m_ += o.m_;
    return *this;
  }
  HermitianOperator& operator-=(const HermitianOperator& o) {
    check_same_dim(o, "-=");
    m_ -= o.m_;
    return *this;
  }
  HermitianOperator& operator*=(double s) {
    m_ *= s;
    return *this;
  }

  friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) { return a += b; }
  friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) { return a -= b; }
  friend HermitianOperator operator*(HermitianOperator a, double s) { return a *= s; }
  friend HermitianOperator operator*(double s, HermitianOperator a) { return a *= s; }
  friend HermitianOperator operator/(HermitianOperator a, double s) { return a *= 1.0 / s; }
  friend HermitianOperator operator-(HermitianOperator a) { return a *= -1.0; }

  bool approx_equal(const HermitianOperator& o, double tol) const {
    return dim() == o.dim() && detail::max_abs_entry(m_ - o.m_) <= tol;
  }

 private:
  void check_same_dim(const HermitianOperator& o, const char* what) const {
    if (o.dim() != dim()) {
      throw DimensionError(std::string("HermitianOperator::") + what + ": dimension mismatch " +
                           std::to_string(dim()) + " vs " + std::to_string(o.dim()));
    }
  }

  Matrix m_;
};

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors.
struct Spectrum {
  RealVector values;
  Matrix vectors;
};

inline Spectrum eigh(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed (dim " + std::to_string(hermitian.rows()) +
                         ", max entry " + std::to_string(detail::max_abs_entry(hermitian)) + ")");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline Spectrum eigh(const HermitianOperator& h) { return eigh(h.matrix()); }

inline RealVector eigenvalues(const HermitianOperator& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return solver.eigenvalues();
}

/// U f(D) U^dagger.
template <class F>
Matrix spectral_apply(const Spectrum& s, F&& f) {
  RealVector fd = s.values.unaryExpr(std::forward<F>(f));
  return s.vectors * fd.cast<Complex>().asDiagonal() * s.vectors.adjoint();
}

template <class F>
HermitianOperator spectral_apply(const HermitianOperator& h, F&& f) {
  return HermitianOperator::symmetrized(spectral_apply(eigh(h), std::forward<F>(f)));
}

inline HermitianOperator herm_exp(const HermitianOperator& h) {
  return spectral_apply(h, [](double x) { return std::exp(x); });
}

/// Matrix logarithm of a PSD operator. Eigenvalues below `floor` are clamped
/// to `floor`; eigenvalues below -tol are a DomainError.
inline HermitianOperator herm_log(const HermitianOperator& p, double floor = kLogFloor,
                                  double tol = 1e-9) {
  Spectrum s = eigh(p);
  if (s.values(0) < -tol) {
    throw DomainError("herm_log: operator has negative eigenvalue " + std::to_string(s.values(0)));
  }
  return HermitianOperator::symmetrized(
      spectral_apply(s, [floor](double x) { return std::log(std::max(x, floor)); }));
}

/// Operator norm. For PSD input this is the largest eigenvalue.
inline double sup_norm(const HermitianOperator& p) {
  RealVector ev = eigenvalues(p);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

inline double max_eigenvalue(const HermitianOperator& p) {
  RealVector ev = eigenvalues(p);
  return ev(ev.size() - 1);
}

inline double min_eigenvalue(const HermitianOperator& p) { return eigenvalues(p)(0); }

inline bool is_psd(const HermitianOperator& p, double tol = 1e-9) { return min_eigenvalue(p) >= -tol; }

/// Sum of singular values.
inline double trace_norm(const HermitianOperator& p) { return eigenvalues(p).cwiseAbs().sum(); }

inline double trace_distance(const HermitianOperator& a, const HermitianOperator& b) {
  return 0.5 * trace_norm(a - b);
}

// ---------------------------------------------------------------------------
// Tensor products and partial traces. Left factor = first subsystem.

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator::symmetrized(kron(a.matrix(), b.matrix()));
}

inline HermitianOperator kron(std::initializer_list<HermitianOperator> factors) {
  if (factors.size() == 0) throw DimensionError("kron: empty factor list");
  auto it = factors.begin();
  Matrix acc = it->matrix();
  for (++it; it != factors.end(); ++it) acc = kron(acc, it->matrix());
  return HermitianOperator::symmetrized(acc);
}

inline Index total_dim(std::span<const Index> dims) {
  Index n = 1;
  for (Index d : dims) {
    if (d < 1) throw DimensionError("subsystem dimension must be >= 1");
    n *= d;
  }
  return n;
}

/// Places `op` on subsystem `which` of a register with dimensions `dims`,
/// identity elsewhere.
inline HermitianOperator embed(const HermitianOperator& op, std::span<const Index> dims,
                               std::size_t which) {
  if (which >= dims.size() || dims[which] != op.dim()) {
    throw DimensionError("embed: operator dimension does not match subsystem");
  }
  Matrix acc = Matrix::Identity(1, 1);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    acc = kron(acc, k == which ? op.matrix() : Matrix(Matrix::Identity(dims[k], dims[k])));
  }
  return HermitianOperator::symmetrized(acc);
}

/// Traces out every subsystem whose `keep` flag is false.
inline HermitianOperator partial_trace(const HermitianOperator& p, std::span<const Index> dims,
                                       std::span<const bool> keep) {
  if (dims.size() != keep.size()) throw DimensionError("partial_trace: dims/keep length mismatch");
  const Index n = total_dim(dims);
  if (n != p.dim()) {
    throw DimensionError("partial_trace: operator dim " + std::to_string(p.dim()) +
                         " != product of subsystem dims " + std::to_string(n));
  }
  const std::size_t parts = dims.size();
  Index kept_dim = 1;
  for (std::size_t k = 0; k < parts; ++k)
    if (keep[k]) kept_dim *= dims[k];

  // Digits of a flat index in the mixed radix given by dims.
  auto digits = [&](Index flat) {
    std::vector<Index> d(parts);
    for (std::size_t k = parts; k-- > 0;) {
      d[k] = flat % dims[k];
      flat /= dims[k];
    }
    return d;
  };
  auto kept_index = [&](const std::vector<Index>& d) {
    Index idx = 0;
    for (std::size_t k = 0; k < parts; ++k)
      if (keep[k]) idx = idx * dims[k] + d[k];
    return idx;
  };

  Matrix out = Matrix::Zero(kept_dim, kept_dim);
  for (Index i = 0; i < n; ++i) {
    const auto di = digits(i);
    for (Index j = 0; j < n; ++j) {
      const auto dj = digits(j);
      bool traced_equal = true;
      for (std::size_t k = 0; k < parts && traced_equal; ++k)
        if (!keep[k] && di[k] != dj[k]) traced_equal = false;
      if (traced_equal) out(kept_index(di), kept_index(dj)) += p.matrix()(i, j);
    }
  }
  return HermitianOperator::symmetrized(out);
}

enum class Subsystem { A, B };

/// Bipartite partial trace on A (x) B, keeping the named factor.
inline HermitianOperator partial_trace(const HermitianOperator& p, Index dim_a, Index dim_b,
                                       Subsystem keep) {
  const Index dims[] = {dim_a, dim_b};
  const bool flags[] = {keep == Subsystem::A, keep == Subsystem::B};
  return partial_trace(p, dims, flags);
}

// ---------------------------------------------------------------------------
// Real coordinates for Hermitian operators.
//
// An n x n Hermitian operator is mapped to R^{n^2} through the orthonormal
// basis {|j><j|, (|j><k|+|k><j|)/sqrt2, i(|j><k|-|k><j|)/sqrt2 : j<k}.
// Under this map Tr(AB) is the Euclidean dot product.

inline RealVector to_real_coords(const Matrix& h) {
  const Index n = h.rows();
  RealVector v(n * n);
  Index k = 0;
  for (Index j = 0; j < n; ++j) v(k++) = h(j, j).real();
  const double s = std::sqrt(2.0);
  for (Index j = 0; j < n; ++j) {
    for (Index l = j + 1; l < n; ++l) {
      v(k++) = s * h(j, l).real();
      v(k++) = s * h(j, l).imag();
    }
  }
  return v;
}

inline RealVector to_real_coords(const HermitianOperator& h) { return to_real_coords(h.matrix()); }

inline Matrix matrix_from_real_coords(const RealVector& v, Index n) {
  if (v.size() != n * n) throw DimensionError("from_real_coords: length is not n^2");
  Matrix h(n, n);
  Index k = 0;
  for (Index j = 0; j < n; ++j) h(j, j) = v(k++);
  const double s = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < n; ++j) {
    for (Index l = j + 1; l < n; ++l) {
      const Complex c(s * v(k), s * v(k + 1));
      h(j, l) = c;
      h(l, j) = std::conj(c);
      k += 2;
    }
  }
  return h;
}

inline HermitianOperator from_real_coords(const RealVector& v, Index n) {
  return HermitianOperator::symmetrized(matrix_from_real_coords(v, n));
}

/// The n^2 elements of the coordinate basis above, in the same order.
inline std::vector<HermitianOperator> hermitian_basis(Index n) {
  std::vector<HermitianOperator> out;
  out.reserve(static_cast<std::size_t>(n * n));
  for (Index k = 0; k < n * n; ++k) out.push_back(from_real_coords(RealVector::Unit(n * n, k), n));
  return out;
}

// ---------------------------------------------------------------------------
// Gram-Schmidt in operator space.

/// Orthonormal family of real vectors built incrementally by modified
/// Gram-Schmidt with one re-orthogonalization pass.
class RealOrthonormalizer {
 public:
  explicit RealOrthonormalizer(Index ambient) : ambient_(ambient) {}

  /// Adds the normalized residual of `v`; returns false (and adds nothing) if
  /// the residual norm is below drop_tol * max(1, |v|).
  bool add(const RealVector& v, double drop_tol = kGramSchmidtDropTolerance) {
    if (v.size() != ambient_) throw DimensionError("RealOrthonormalizer: wrong vector length");
    RealVector r = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis_) r -= q.dot(r) * q;
    }
    const double norm = r.norm();
    if (norm < drop_tol * std::max(1.0, v.norm())) return false;
    basis_.push_back(r / norm);
    return true;
  }

  /// Adds coordinate unit vectors until the family spans the whole space.
  void complete() {
    for (Index k = 0; k < ambient_ && static_cast<Index>(basis_.size()) < ambient_; ++k) {
      add(RealVector::Unit(ambient_, k), 1e-8);
    }
  }

  std::size_t size() const { return basis_.size(); }
  Index ambient() const { return ambient_; }
  const std::vector<RealVector>& vectors() const { return basis_; }

  /// Basis vectors as columns.
  RealMatrix as_matrix(std::size_t first = 0) const {
    RealMatrix m(ambient_, static_cast<Index>(basis_.size() - first));
    for (std::size_t k = first; k < basis_.size(); ++k) m.col(static_cast<Index>(k - first)) = basis_[k];
    return m;
  }

 private:
  Index ambient_;
  std::vector<RealVector> basis_;
};

struct OperatorBasis {
  std::vector<HermitianOperator> elements;
  bool orthonormal = false;

  std::size_t size() const { return elements.size(); }
};

/// Orthonormal basis (Frobenius inner product) of span(ops). Inputs whose
/// residual norm falls below 1e-10 are dropped, so the output size is the rank.
inline OperatorBasis gram_schmidt_operators(std::span<const HermitianOperator> ops,
                                            double drop_tol = kGramSchmidtDropTolerance) {
  OperatorBasis out;
  out.orthonormal = true;
  if (ops.empty()) return out;
  const Index n = ops.front().dim();
  RealOrthonormalizer gs(n * n);
  for (const auto& op : ops) {
    if (op.dim() != n) throw DimensionError("gram_schmidt_operators: operators differ in dimension");
    if (gs.add(to_real_coords(op), drop_tol)) out.elements.push_back(from_real_coords(gs.vectors().back(), n));
  }
  return out;
}

inline OperatorBasis gram_schmidt_operators(std::initializer_list<HermitianOperator> ops,
                                            double drop_tol = kGramSchmidtDropTolerance) {
  return gram_schmidt_operators(std::span<const HermitianOperator>(ops.begin(), ops.size()), drop_tol);
}

/// Largest entry of |AB - BA|.
inline double commutator_norm(const Matrix& a, const Matrix& b) {
  return detail::max_abs_entry(a * b - b * a);
}

}  // namespace qkdrate
