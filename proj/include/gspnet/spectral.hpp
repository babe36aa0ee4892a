#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "gspnet/linalg.hpp"

namespace gspnet {

/// Eigenbasis of a normalized Laplacian: column l of u() is the eigenvector of
/// graph frequency l, and lambdas() is non-decreasing within [0, 2].
class SpectralBasis {
 public:
  /// Validates orthonormality (1e-10), ordering and the [0, 2] range.
  SpectralBasis(Eigen::MatrixXd u, Eigen::VectorXd lambdas);

  Index size() const { return u_.rows(); }
  const Eigen::MatrixXd& u() const { return u_; }
  const Eigen::VectorXd& lambdas() const { return lambdas_; }

  friend bool operator==(const SpectralBasis& a, const SpectralBasis& b) {
    return a.u_ == b.u_ && a.lambdas_ == b.lambdas_;
  }

 private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd lambdas_;
};

/// Diagonalizes a normalized Laplacian. Rejects spectra leaving
/// [-1e-6, 2 + 1e-6] or missing the zero eigenvalue; values within that
/// slack are clamped into [0, 2].
SpectralBasis build_basis(const SymMatrix<double>& laplacian);

namespace detail {
void check_rows(const SpectralBasis& b, Index rows, const char* what);
}

/// x_hat = U^T x, applied column by column (one column per channel).
template <typename Derived>
Eigen::MatrixXd gft(const SpectralBasis& b, const Eigen::MatrixBase<Derived>& x) {
  detail::check_rows(b, x.rows(), "gft input");
  return b.u().transpose() * x.template cast<double>();
}

/// x = U x_hat.
template <typename Derived>
Eigen::MatrixXd igft(const SpectralBasis& b, const Eigen::MatrixBase<Derived>& xhat) {
  detail::check_rows(b, xhat.rows(), "igft input");
  return b.u() * xhat.template cast<double>();
}

/// x * h = IGFT(GFT(x) .* GFT(h)) for single-channel signals.
Eigen::VectorXd spectral_convolve(const SpectralBasis& b, const Eigen::VectorXd& x, const Eigen::VectorXd& h);

/// Contiguous frequency band [offset, offset + bandwidth).
struct BandSpec {
  Index offset = 0;
  Index bandwidth = 1;
};

std::vector<bool> band_mask(Index n, const BandSpec& band);

/// Strictly ascending set of frequency indices below n.
class KeptSet {
 public:
  KeptSet() = default;
  KeptSet(std::vector<Index> indices, Index n);

  static KeptSet all(Index n);
  static KeptSet band(Index n, const BandSpec& band);
  static KeptSet from_mask(const std::vector<bool>& mask);

  const std::vector<Index>& indices() const { return indices_; }
  Index k() const { return static_cast<Index>(indices_.size()); }
  Index n() const { return n_; }
  bool empty() const { return indices_.empty(); }
  bool contains(Index l) const;
  bool is_all() const { return k() == n_; }

  friend bool operator==(const KeptSet&, const KeptSet&) = default;

 private:
  std::vector<Index> indices_;
  Index n_ = 0;
};

std::string to_string(const KeptSet& kept);

/// Basis cache: "GSPB", u32 n, n lambdas, then u column-major; all
/// little-endian doubles.
void save_basis(const SpectralBasis& b, const std::filesystem::path& path);
SpectralBasis load_basis(const std::filesystem::path& path);

}  // namespace gspnet
