#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gspnet/error.hpp"

namespace gspnet {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense symmetric matrix. Construction symmetrizes by averaging with the
/// transpose, so entries (i,j) and (j,i) are bit-identical afterwards.
template <typename Scalar>
class SymMatrix {
 public:
  template <typename Derived>
  explicit SymMatrix(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols() || a.rows() < 1) {
      throw Error(ErrorKind::usage, "linalg", "linalg.not_square",
                  "symmetric matrix must be square and non-empty, got " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()));
    }
    a_ = a.template cast<Scalar>();
    const Index n = a_.rows();
    for (Index j = 0; j < n; ++j) {
      for (Index i = j + 1; i < n; ++i) {
        const Scalar mean = (a_(i, j) + a_(j, i)) / Scalar(2);
        a_(i, j) = mean;
        a_(j, i) = mean;
      }
    }
  }

  Index size() const { return a_.rows(); }
  const Matrix<Scalar>& matrix() const { return a_; }
  Scalar operator()(Index i, Index j) const { return a_(i, j); }

 private:
  Matrix<Scalar> a_;
};

/// Ascending eigenvalues; column i of `vectors` belongs to values[i].
template <typename Scalar>
struct EigenPairs {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;
};

namespace detail {

// Flip each column so that its dominant entry is non-negative. Near-ties in
// magnitude (within a relative 1e-12) resolve to the lowest row index.
template <typename Scalar>
void orient_columns(Matrix<Scalar>& v) {
  for (Index c = 0; c < v.cols(); ++c) {
    const Scalar peak = v.col(c).cwiseAbs().maxCoeff();
    const Scalar floor = peak * (Scalar(1) - Scalar(1e-12));
    for (Index r = 0; r < v.rows(); ++r) {
      if (std::abs(v(r, c)) >= floor) {
        if (v(r, c) < Scalar(0)) v.col(c) = -v.col(c);
        break;
      }
    }
  }
}

template <typename Scalar>
Scalar off_diagonal_norm(const Matrix<Scalar>& a) {
  Scalar sum = 0;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

}  // namespace detail

/// Full eigendecomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Sweeps stop once the off-diagonal Frobenius norm falls below
/// tol * ||a||_F. Output is sorted ascending and every column oriented so its
/// dominant entry is non-negative; eigenvectors of numerically equal
/// eigenvalues (|gap| < 1e-10) are ordered by lexicographic comparison.
template <typename Scalar>
EigenPairs<Scalar> jacobi_eigh(const SymMatrix<Scalar>& sym, Scalar tol = Scalar(1e-12), int max_sweeps = 100) {
  if (!(tol > Scalar(0))) {
    throw Error(ErrorKind::usage, "linalg", "linalg.bad_tolerance", "jacobi tolerance must be positive");
  }
  const Index n = sym.size();
  Matrix<Scalar> a = sym.matrix();
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar scale = a.norm();
  if (!std::isfinite(scale)) {
    throw Error(ErrorKind::numerical, "linalg", "linalg.non_finite", "matrix has non-finite entries");
  }
  const Scalar target = tol * scale;

  Scalar off = detail::off_diagonal_norm(a);
  int sweep = 0;
  while (off > target) {
    if (sweep == max_sweeps) {
      throw Error(ErrorKind::numerical, "linalg", "linalg.no_convergence",
                  "jacobi did not converge after " + std::to_string(max_sweeps) +
                      " sweeps; off-diagonal residual " + std::to_string(off / scale));
    }
    // Early sweeps skip small pivots; later sweeps rotate everything non-zero.
    const Scalar threshold = sweep < 3 ? Scalar(0.2) * off / Scalar(n * n) : Scalar(0);
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        const Scalar guard = Scalar(100) * std::abs(apq);
        if (sweep > 3 && std::abs(a(p, p)) + guard == std::abs(a(p, p)) &&
            std::abs(a(q, q)) + guard == std::abs(a(q, q))) {
          a(p, q) = a(q, p) = Scalar(0);
          continue;
        }
        if (std::abs(apq) <= threshold || apq == Scalar(0)) continue;

        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        Scalar t = Scalar(1) / (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        if (theta < Scalar(0)) t = -t;
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = Scalar(0);
        for (Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = detail::off_diagonal_norm(a);
    ++sweep;
  }

  detail::orient_columns(v);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) < a(j, j); });
  const std::vector<Index> by_value = order;

  // Within clusters of numerically equal eigenvalues, order the vectors by
  // content; the values stay ascending.
  auto lex_less = [&](Index i, Index j) {
    for (Index r = 0; r < n; ++r) {
      if (v(r, i) != v(r, j)) return v(r, i) > v(r, j);
    }
    return false;
  };
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin + 1;
    while (end < order.size() && a(order[end], order[end]) - a(order[end - 1], order[end - 1]) < Scalar(1e-10)) ++end;
    if (end - begin > 1) std::stable_sort(order.begin() + begin, order.begin() + end, lex_less);
    begin = end;
  }

  EigenPairs<Scalar> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values(i) = a(by_value[i], by_value[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

/// ||a - V diag(w) V^T||_F / ||a||_F, with the denominator floored at the
/// smallest normal value.
template <typename Scalar>
Scalar reconstruction_residual(const SymMatrix<Scalar>& a, const EigenPairs<Scalar>& e) {
  const Index n = a.size();
  if (e.values.size() != n || e.vectors.rows() != n || e.vectors.cols() != n) {
    throw Error(ErrorKind::usage, "linalg", "linalg.dimension_mismatch",
                "eigenpairs do not match a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  }
  const Matrix<Scalar> rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  const Scalar denom = std::max(a.matrix().norm(), std::numeric_limits<Scalar>::min());
  return (a.matrix() - rebuilt).norm() / denom;
}

/// Largest entry-wise deviation of V^T V from the identity.
template <typename Derived>
typename Derived::Scalar orthonormality_deviation(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> gram = v.transpose() * v;
  return (gram - Matrix<Scalar>::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace gspnet
