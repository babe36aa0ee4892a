#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gspnet/spectral.hpp"

namespace gspnet {

/// Labelled graph signals. `signals` is n_vertices x n_samples (one column
/// per sample), which in memory is the samples x vertices row-major layout
/// used on disk.
struct Dataset {
  Index n_vertices = 0;
  Index n_classes = 0;
  Eigen::MatrixXf signals;
  std::vector<int> labels;

  Index samples() const { return signals.cols(); }

  /// Throws on label range violations, empty classes or non-finite values.
  void validate() const;

  /// Samples at the given positions, in that order.
  Dataset subset(const std::vector<Index>& positions) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.n_vertices == b.n_vertices && a.n_classes == b.n_classes && a.labels == b.labels &&
           a.signals.rows() == b.signals.rows() && a.signals.cols() == b.signals.cols() && a.signals == b.signals;
  }
};

/// Reads a manifest and its payloads; verifies sizes, then SHA-256 digests,
/// then labels and values.
Dataset load_dataset(const std::filesystem::path& manifest);

/// Writes manifest.json, signals.f32 and labels.u32 into `dir` and returns
/// the manifest path. Refuses to replace an existing manifest unless
/// `overwrite` is set.
std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool overwrite = false);

/// Each class gets a unit-norm spectral mean supported on `band`; a sample is
/// IGFT(snr * mean + white spectral noise with unit variance). Labels cycle
/// through the classes.
Dataset synth_planted_band(const SpectralBasis& basis, Index n_classes, const KeptSet& band, double snr,
                           Index samples_per_class, std::uint64_t seed);

/// Unit-norm spectral class means drawn by synth_planted_band for `seed`
/// (n x n_classes).
Eigen::MatrixXd planted_class_means(const SpectralBasis& basis, Index n_classes, const KeptSet& band,
                                    std::uint64_t seed);

}  // namespace gspnet
