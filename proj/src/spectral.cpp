#include "gspnet/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "gspnet/io.hpp"

namespace gspnet {

namespace {

constexpr double kOrthoTol = 1e-10;
constexpr double kRangeTol = 1e-10;
constexpr double kLaplacianSlack = 1e-6;

Error spectral_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "spectral", "spectral." + code, message);
}

}  // namespace

SpectralBasis::SpectralBasis(Eigen::MatrixXd u, Eigen::VectorXd lambdas)
    : u_(std::move(u)), lambdas_(std::move(lambdas)) {
  const Index n = u_.rows();
  if (n < 1 || u_.cols() != n || lambdas_.size() != n) {
    throw spectral_error(ErrorKind::usage, "bad_shape", "basis must be n x n with n eigenvalues");
  }
  if (!u_.allFinite() || !lambdas_.allFinite()) {
    throw spectral_error(ErrorKind::numerical, "non_finite", "basis has non-finite entries");
  }
  const double deviation = orthonormality_deviation(u_);
  if (deviation >= kOrthoTol) {
    throw spectral_error(ErrorKind::numerical, "not_orthonormal",
                         "basis deviates from orthonormality by " + std::to_string(deviation));
  }
  for (Index l = 0; l < n; ++l) {
    if (lambdas_(l) < -kRangeTol || lambdas_(l) > 2.0 + kRangeTol) {
      throw spectral_error(ErrorKind::numerical, "bad_spectrum",
                           "graph frequency " + std::to_string(l) + " = " + std::to_string(lambdas_(l)) +
                               " lies outside [0, 2]");
    }
    if (l > 0 && lambdas_(l) < lambdas_(l - 1)) {
      throw spectral_error(ErrorKind::numerical, "unsorted", "graph frequencies must be non-decreasing");
    }
  }
}

SpectralBasis build_basis(const SymMatrix<double>& laplacian) {
  EigenPairs<double> pairs = jacobi_eigh(laplacian);
  const Index n = laplacian.size();
  for (Index l = 0; l < n; ++l) {
    const double v = pairs.values(l);
    if (v < -kLaplacianSlack || v > 2.0 + kLaplacianSlack) {
      throw spectral_error(ErrorKind::numerical, "not_laplacian",
                           "eigenvalue " + std::to_string(v) + " outside [0, 2]; input is not a normalized Laplacian");
    }
  }
  if (std::abs(pairs.values(0)) > kLaplacianSlack) {
    throw spectral_error(ErrorKind::numerical, "not_laplacian",
                         "smallest eigenvalue " + std::to_string(pairs.values(0)) +
                             " is not 0; input is not a normalized Laplacian");
  }
  pairs.values = pairs.values.cwiseMax(0.0).cwiseMin(2.0);
  return SpectralBasis(std::move(pairs.vectors), std::move(pairs.values));
}

void detail::check_rows(const SpectralBasis& b, Index rows, const char* what) {
  if (rows != b.size()) {
    throw spectral_error(ErrorKind::usage, "dimension_mismatch",
                         std::string(what) + " has " + std::to_string(rows) + " rows, basis has " +
                             std::to_string(b.size()));
  }
}

Eigen::VectorXd spectral_convolve(const SpectralBasis& b, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  detail::check_rows(b, x.size(), "signal");
  detail::check_rows(b, h.size(), "filter");
  const Eigen::VectorXd product = gft(b, x).cwiseProduct(gft(b, h));
  return igft(b, product);
}

std::vector<bool> band_mask(Index n, const BandSpec& band) {
  if (band.offset < 0 || band.bandwidth < 1 || band.offset + band.bandwidth > n) {
    throw spectral_error(ErrorKind::usage, "bad_band",
                         "band [" + std::to_string(band.offset) + ", " +
                             std::to_string(band.offset + band.bandwidth) + ") does not fit " +
                             std::to_string(n) + " frequencies");
  }
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  std::fill(mask.begin() + band.offset, mask.begin() + band.offset + band.bandwidth, true);
  return mask;
}

KeptSet::KeptSet(std::vector<Index> indices, Index n) : indices_(std::move(indices)), n_(n) {
  if (n_ < 1) throw spectral_error(ErrorKind::usage, "bad_kept_set", "kept set needs n >= 1");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0 || indices_[i] >= n_ || (i > 0 && indices_[i] <= indices_[i - 1])) {
      throw spectral_error(ErrorKind::usage, "bad_kept_set",
                           "kept frequencies must be strictly ascending and below " + std::to_string(n_));
    }
  }
}

KeptSet KeptSet::all(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index l = 0; l < n; ++l) idx[l] = l;
  return KeptSet(std::move(idx), n);
}

KeptSet KeptSet::band(Index n, const BandSpec& band) { return from_mask(band_mask(n, band)); }

KeptSet KeptSet::from_mask(const std::vector<bool>& mask) {
  std::vector<Index> idx;
  for (std::size_t l = 0; l < mask.size(); ++l)
    if (mask[l]) idx.push_back(static_cast<Index>(l));
  return KeptSet(std::move(idx), static_cast<Index>(mask.size()));
}

bool KeptSet::contains(Index l) const { return std::binary_search(indices_.begin(), indices_.end(), l); }

std::string to_string(const KeptSet& kept) {
  std::string out = "{";
  for (std::size_t i = 0; i < kept.indices().size(); ++i) {
    if (i) out += ",";
    out += std::to_string(kept.indices()[i]);
  }
  return out + "}";
}

void save_basis(const SpectralBasis& b, const std::filesystem::path& path) {
  const Index n = b.size();
  io::Bytes out;
  out.reserve(8 + 8 * static_cast<std::size_t>(n * (n + 1)));
  out.insert(out.end(), {'G', 'S', 'P', 'B'});
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  for (Index l = 0; l < n; ++l) io::put_le<double>(out, b.lambdas()(l));
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) io::put_le<double>(out, b.u()(i, j));
  io::write_file(path, out, "spectral");
}

SpectralBasis load_basis(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path, "spectral");
  if (bytes.size() < 8 || std::string(bytes.begin(), bytes.begin() + 4) != "GSPB") {
    throw spectral_error(ErrorKind::format, "bad_magic", "'" + path.string() + "' is not a basis cache");
  }
  const auto n = static_cast<Index>(io::get_le<std::uint32_t>(bytes, 4));
  const std::size_t expected = 8 + 8 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1);
  if (bytes.size() != expected) {
    throw spectral_error(ErrorKind::format, "payload_size_mismatch",
                         "basis cache has " + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(expected));
  }
  Eigen::VectorXd lambdas(n);
  Eigen::MatrixXd u(n, n);
  std::size_t at = 8;
  for (Index l = 0; l < n; ++l, at += 8) lambdas(l) = io::get_le<double>(bytes, at);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i, at += 8) u(i, j) = io::get_le<double>(bytes, at);
  return SpectralBasis(std::move(u), std::move(lambdas));
}

}  // namespace gspnet
